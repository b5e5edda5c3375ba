"""Plug-and-play data assimilation with a conditional flow-matching prior.

Subpackages: ``dynamics`` (testbed models), ``observations``, ``transport``
(exact and entropic OT), ``baselines`` (3D-Var, EnKF, EnRDA), ``flowmatch``
(velocity network and training), ``pnp`` (the analysis loop) and
``harness`` (pipelines, metrics and the CLI).
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402

__all__ = ["__version__", "BACKEND"]
