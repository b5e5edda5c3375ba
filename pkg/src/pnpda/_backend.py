"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise
the numpy twins in ``_pykernels`` are used.  Set ``PNPDA_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels

kernels = _pykernels
if os.environ.get("PNPDA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels  # noqa: F811
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = kernels.BACKEND
