"""JSON experiment configs.

A config file may be partial: it is merged over the shipped defaults for
its ``testbed``.  ``full`` holds overrides applied by the ``--full`` preset.
"""

import copy
import hashlib
import json
from importlib import resources

from .testbeds import SYSTEMS

REQUIRED = ("testbed", "seed", "dt", "obs_every", "model", "nature", "obs_train",
            "obs_eval", "pairs", "threedvar", "train", "pnp", "eval")


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def default_config(system):
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    text = resources.files("pnpda.configs").joinpath(f"{system}.json").read_text()
    return json.loads(text)


def load_config(system=None, path=None, overrides=None, full=False):
    """Defaults for ``system`` (or the file's ``testbed``), then the file,
    then the ``full`` preset if requested, then ``overrides``."""
    user = {}
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if "config" in user and "config_hash" in user:
            # a run manifest: reuse the exact resolved config it recorded
            user = user["config"]
    system = system or user.get("testbed")
    if system is None:
        raise ValueError("no testbed given")
    if user.get("testbed", system) != system:
        raise ValueError(f"config is for {user['testbed']!r}, not {system!r}")
    cfg = deep_merge(default_config(system), user)
    if full:
        cfg = deep_merge(cfg, cfg.get("full", {}))
    if overrides:
        cfg = deep_merge(cfg, overrides)
    validate(cfg)
    return cfg


def validate(cfg):
    missing = [k for k in REQUIRED if k not in cfg]
    if missing:
        raise ValueError(f"config lacks {missing}")
    if cfg["testbed"] not in SYSTEMS:
        raise ValueError(f"unknown testbed {cfg['testbed']!r}")
    if int(cfg["eval"]["n_runs"]) < 1:
        raise ValueError("eval.n_runs must be >= 1")
    if int(cfg["obs_every"]) < 1 or float(cfg["dt"]) <= 0:
        raise ValueError("need obs_every >= 1 and dt > 0")
    # dimension checks need the model; importing here avoids a cycle
    from .testbeds import Testbed

    tb = Testbed(cfg)
    for key in ("obs_train", "obs_eval"):
        o = cfg[key]
        if o.get("indices") is not None:
            idx = o["indices"]
            if not idx or min(idx) < 0 or max(idx) >= tb.dim:
                raise ValueError(f"{key}.indices out of range for dim {tb.dim}")
        corr = o.get("correlation")
        if corr is not None and (len(corr) != tb.dim or any(len(r) != tb.dim for r in corr)):
            raise ValueError(f"{key}.correlation must be {tb.dim}x{tb.dim}")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
