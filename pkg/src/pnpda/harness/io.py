"""Containers for trajectories, observation batches and pair datasets, plus
run manifests.

All three use the shared binary container; the header carries ``kind``,
``testbed``, dimensions, ``dt``, ``seed`` and the producing config hash.
"""

import json
import platform

import numpy as np

from .. import __version__
from .._backend import BACKEND
from ..container import read_container, write_container
from ..dynamics import Trajectory
from ..flowmatch import PairDataset
from ..observations import ObservationBatch, ObservationSpec
from .config import config_hash


def _check_kind(header, kind, path):
    if header.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} container, got {header.get('kind')!r}")


def save_trajectory(path, traj, testbed="", dt=None, seed=None, cfg_hash=None):
    header = {
        "kind": "trajectory",
        "testbed": testbed,
        "dim": int(traj.states.shape[1]),
        "n_times": len(traj),
        "dt": dt,
        "seed": seed,
        "config_hash": cfg_hash,
    }
    write_container(path, header, [("times", traj.times), ("states", traj.states)])


def load_trajectory(path):
    header, arrays = read_container(path)
    _check_kind(header, "trajectory", path)
    return Trajectory(arrays["times"], arrays["states"]), header


def save_observations(path, obs, testbed="", dt=None, seed=None, cfg_hash=None):
    header = {
        "kind": "observations",
        "testbed": testbed,
        "state_dim": obs.spec.state_dim,
        "indices": obs.spec.indices.tolist(),
        "steps": None if obs.steps is None else [int(k) for k in obs.steps],
        "dt": dt,
        "seed": seed,
        "config_hash": cfg_hash,
    }
    arrays = [("times", obs.times), ("values", obs.values), ("noise_cov", obs.spec.noise_cov)]
    write_container(path, header, arrays)


def load_observations(path):
    header, arrays = read_container(path)
    _check_kind(header, "observations", path)
    spec = ObservationSpec(header["indices"], arrays["noise_cov"], header["state_dim"])
    steps = None if header["steps"] is None else np.asarray(header["steps"], dtype=np.int64)
    return ObservationBatch(arrays["times"], arrays["values"], spec, steps), header


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def save_dataset(path, ds, cfg_hash=None):
    meta = {k: _jsonable(v) for k, v in ds.metadata.items()}
    header = {
        "kind": "pair-dataset",
        "testbed": meta.get("testbed", ""),
        "dim": ds.dim,
        "n_pairs": len(ds),
        "dt": meta.get("dt"),
        "seed": meta.get("seed"),
        "config_hash": cfg_hash,
        "metadata": meta,
    }
    write_container(path, header, [("xb", ds.xb), ("xa", ds.xa)])


def load_dataset(path):
    header, arrays = read_container(path)
    _check_kind(header, "pair-dataset", path)
    meta = dict(header.get("metadata", {}))
    if "steps" in meta:
        meta["steps"] = np.asarray(meta["steps"], dtype=np.int64)
    return PairDataset(arrays["xb"], arrays["xa"], meta), header


def manifest(cfg, command, args=None, outputs=None):
    """Everything needed to rerun a command: the resolved config, its hash,
    the seed, the command arguments and the software versions."""
    return {
        "command": command,
        "args": args or {},
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": int(cfg["seed"]),
        "outputs": outputs or [],
        "version": __version__,
        "backend": BACKEND,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def write_manifest(path, man):
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
