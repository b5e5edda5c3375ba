"""Nature runs, training-pair generation and cyclic DA benchmarks.

Random streams are keyed on the config seed: fixed stream ids for the
training pipeline and ``(run, purpose)`` ids for benchmark runs, so every
method sees the same truth, observations, initial state and forecast noise
within a run.
"""

from concurrent.futures import ProcessPoolExecutor
import logging

import numpy as np

from ..baselines import (
    GaspariCohnSpec,
    build_B,
    enkf_analysis,
    enrda_analysis,
    threedvar_analysis,
)
from ..dynamics import Trajectory
from ..errors import NonFiniteState, PnpdaError
from ..flowmatch import PairDataset, TrainConfig, train
from ..numerics import seeded_rng
from ..observations import make_observations
from ..pnp import PnpConfig, analyze_3d
from .config import config_hash
from .metrics import ResultTable, RunResult
from .testbeds import Testbed

log = logging.getLogger(__name__)

METHODS = ("freerun", "3dvar", "pnpda")
AXES = ("obs_fraction", "obs_noise")
ABLATION_AXES = ("iters", "alpha")

STREAM_NATURE, STREAM_NATURE_OBS, STREAM_PAIRS, STREAM_TRAIN = 1, 2, 3, 4
P_TRUTH, P_OBS, P_INIT, P_FORECAST, P_ANALYSIS = range(5)


def run_stream(run, purpose):
    return 1000 + 8 * int(run) + purpose


# --------------------------------------------------------------------------
# nature runs and training pairs


def generate_nature_run(cfg, rng=None, obs_rng=None, n_steps=None, spinup=None, obs_key="obs_train"):
    """Spin up, then record ``n_steps`` steps of the truth and observe them.

    Returns ``(Trajectory of the operational-state projection, ObservationBatch)``.
    """
    tb = Testbed(cfg)
    seed = int(cfg["seed"])
    rng = rng if rng is not None else seeded_rng(seed, STREAM_NATURE)
    obs_rng = obs_rng if obs_rng is not None else seeded_rng(seed, STREAM_NATURE_OBS)
    n_steps = int(cfg["nature"]["n_steps"] if n_steps is None else n_steps)
    spinup = int(cfg["nature"]["spinup"] if spinup is None else spinup)
    s = tb.initial_truth(rng)
    if spinup > 0:
        _, s = tb.run_truth(s, spinup)
    states, _ = tb.run_truth(s, n_steps)
    all_states = np.concatenate([tb.project(s)[None], states])
    traj = Trajectory(tb.dt * np.arange(n_steps + 1), all_states)
    obs = make_observations(traj, tb.obs_spec(cfg[obs_key]), tb.obs_every, obs_rng)
    return traj, obs


def _rms(err):
    return float(np.sqrt(np.mean(np.square(err))))


def generate_training_pairs(cfg, rng=None, nature=None):
    """Cyclic ensemble DA against the nature run; returns a :class:`PairDataset`
    of (ensemble-mean background, ensemble-mean analysis) per observation
    time after the ``discard`` steps."""
    tb = Testbed(cfg)
    pc = cfg["pairs"]
    rng = rng if rng is not None else seeded_rng(int(cfg["seed"]), STREAM_PAIRS)
    truth, obs = nature if nature is not None else generate_nature_run(cfg)
    spec = obs.spec
    N = int(pc["n_members"])
    ens = truth.states[0] + float(pc["sigma_init"]) * rng.standard_normal((N, tb.dim))
    discard = int(cfg["nature"].get("discard", 0))
    inflation = float(pc.get("inflation", 1.0))
    additive = float(pc.get("additive_inflation", 0.0))
    loc = None
    if pc.get("localization"):
        lc = pc["localization"]
        loc = build_B(tb.dim, GaspariCohnSpec(float(lc["length_scale"]), 1.0, lc["topology"]))
    xbs, xas, steps = [], [], []
    prev = 0
    for k, y in zip(obs.steps, obs.values):
        ens = tb.forecast(ens, int(k - prev), rng)[-1]
        prev = k
        xb_mean = ens.mean(axis=0)
        if additive > 0:
            ens = ens + additive * rng.standard_normal(ens.shape)
        if pc["method"] == "enrda":
            ens_a = enrda_analysis(ens, y, spec.noise_cov, float(pc["gamma"]), int(pc["n_iter"]), rng)
        elif pc["method"] == "enkf":
            ens_a = enkf_analysis(ens, y, spec, rng, inflation, loc)
        else:
            raise ValueError(f"unknown pair method {pc['method']!r}")
        if k > discard:
            xbs.append(xb_mean)
            xas.append(ens_a.mean(axis=0))
            steps.append(k)
        ens = ens_a
    xb, xa, steps = np.array(xbs), np.array(xas), np.array(steps)
    ref = truth.states[steps]
    meta = {
        "testbed": tb.name,
        "seed": int(cfg["seed"]),
        "dt": tb.dt,
        "obs_every": tb.obs_every,
        "steps": steps,
        "background_rmse": _rms(xb - ref),
        "analysis_rmse": _rms(xa - ref),
    }
    log.info("pairs: %d, background rmse %.3f, analysis rmse %.3f",
             len(xb), meta["background_rmse"], meta["analysis_rmse"])
    return PairDataset(xb, xa, meta)


def train_prior(cfg, dataset, rng=None, log_every=0):
    tcfg = TrainConfig.from_dict(cfg["train"])
    rng = rng if rng is not None else seeded_rng(int(cfg["seed"]), STREAM_TRAIN)
    return train(dataset, tcfg, rng, log_every=log_every)


# --------------------------------------------------------------------------
# cyclic DA


_TRUTH_CACHE = {}


def eval_truth(cfg, run):
    """Truth trajectory for benchmark run ``run`` (cached per config)."""
    key_cfg = {k: cfg[k] for k in ("testbed", "seed", "dt", "obs_every", "model")}
    key_cfg["eval"] = {k: cfg["eval"][k] for k in ("n_cycles", "spinup")}
    key = (config_hash(key_cfg), int(run))
    if key not in _TRUTH_CACHE:
        tb = Testbed(cfg)
        n_steps = int(cfg["eval"]["n_cycles"]) * tb.obs_every
        traj, _ = generate_nature_run(
            cfg, rng=seeded_rng(int(cfg["seed"]), run_stream(run, P_TRUTH)),
            obs_rng=np.random.default_rng(0), n_steps=n_steps,
            spinup=int(cfg["eval"]["spinup"]),
        )
        if len(_TRUTH_CACHE) > 64:
            _TRUTH_CACHE.clear()
        _TRUTH_CACHE[key] = traj
    return _TRUTH_CACHE[key]


def _apply_axis(cfg, axis, value):
    if axis is None:
        return cfg
    out = dict(cfg)
    o = dict(cfg["obs_eval"])
    if axis == "obs_fraction":
        o.pop("indices", None)
        o.pop("count", None)
        o["fraction"] = float(value)
    elif axis == "obs_count":
        o.pop("indices", None)
        o["count"] = int(value)
    elif axis == "obs_noise":
        o["sigma"] = float(value)
    else:
        raise ValueError(f"unknown axis {axis!r}")
    out["obs_eval"] = o
    return out


def run_cyclic_da(method, cfg, run, net=None, pnp=None, axis=None, axis_value=""):
    """One benchmark run; returns a :class:`RunResult`.

    Each cycle forecasts ``obs_every`` steps from the previous analysis and
    replaces the last state by the method's analysis.  The recorded error
    of a cycle is the per-component RMS over its steps against the truth.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    cfg = _apply_axis(cfg, axis, axis_value)
    tb = Testbed(cfg)
    seed = int(cfg["seed"])
    truth = eval_truth(cfg, run)
    spec = tb.obs_spec(cfg["obs_eval"])
    obs = make_observations(truth, spec, tb.obs_every, seeded_rng(seed, run_stream(run, P_OBS)))
    init_rng = seeded_rng(seed, run_stream(run, P_INIT))
    fc_rng = seeded_rng(seed, run_stream(run, P_FORECAST))
    an_rng = seeded_rng(seed, run_stream(run, P_ANALYSIS))
    x = truth.states[0] + float(cfg["eval"]["sigma_init"]) * init_rng.standard_normal(tb.dim)

    if method == "3dvar":
        B = tb.background_cov()
    if method == "pnpda":
        if net is None:
            raise ValueError("pnpda needs a trained network")
        if net.dim != tb.dim:
            raise ValueError(f"network dim {net.dim} does not match testbed dim {tb.dim}")
        pcfg = pnp if isinstance(pnp, PnpConfig) else PnpConfig.from_dict({**cfg["pnp"], **(pnp or {})})

    E = tb.obs_every
    n_cycles = len(obs)
    errors = np.empty((n_cycles, tb.dim))
    try:
        for c, y in enumerate(obs.values):
            fc = tb.forecast(x, E, fc_rng)[:, 0]
            xb = fc[-1]
            if method == "3dvar":
                xa = threedvar_analysis(xb, y, spec, B)
            elif method == "pnpda":
                try:
                    xa = analyze_3d(xb, y, spec, net, pcfg, an_rng)
                except NonFiniteState as exc:
                    log.warning("pnpda run %d cycle %d: %s; keeping the background", run, c, exc)
                    xa = xb
            else:
                xa = xb
            if not np.all(np.isfinite(xa)):
                raise FloatingPointError(f"non-finite analysis at cycle {c}")
            fc[-1] = xa
            err = fc - truth.states[c * E + 1 : (c + 1) * E + 1]
            errors[c] = np.sqrt(np.mean(err * err, axis=0))
            x = xa
    except (PnpdaError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("%s run %d (%s %s) failed: %s", method, run, axis or "value", axis_value, exc)
        return RunResult(method, axis_value, run, None, failure=str(exc))
    return RunResult(method, axis_value, run, errors)


def _cell(args):
    method, cfg, run, net, pnp, axis, value = args
    return run_cyclic_da(method, cfg, run, net=net, pnp=pnp, axis=axis, axis_value=value)


def _execute(cells, workers):
    if workers and workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_cell, cells))
    return [_cell(c) for c in cells]


def benchmark(cfg, methods=METHODS, net=None, n_runs=None, workers=1):
    """Every method on runs ``0 .. n_runs - 1`` of the configured setting."""
    n_runs = int(cfg["eval"]["n_runs"] if n_runs is None else n_runs)
    cells = [(m, cfg, r, net, None, None, "") for m in methods for r in range(n_runs)]
    return ResultTable(_execute(cells, workers))


def sweep(cfg, axis, values, methods=("3dvar", "pnpda"), net=None, n_runs=None, workers=1):
    """Cross product of axis values, methods and runs."""
    if axis not in AXES + ("obs_count",):
        raise ValueError(f"unknown sweep axis {axis!r}")
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    n_runs = int(cfg["eval"]["n_runs"] if n_runs is None else n_runs)
    cells = [(m, cfg, r, net, None, axis, v) for v in values for m in methods for r in range(n_runs)]
    return ResultTable(_execute(cells, workers))


def ablate(cfg, axis, values, net, n_runs=None, workers=1, baseline=True):
    """PnP-DA over a grid of ``n_iter`` or ``alpha``; adds 3D-Var rows
    (empty axis value) on the same runs when ``baseline``."""
    if axis not in ABLATION_AXES:
        raise ValueError(f"unknown ablation axis {axis!r}")
    if len(values) == 0:
        raise ValueError("ablation needs at least one value")
    n_runs = int(cfg["eval"]["n_runs"] if n_runs is None else n_runs)
    key = "n_iter" if axis == "iters" else "alpha"
    cells = []
    for v in values:
        v = int(v) if axis == "iters" else float(v)
        for r in range(n_runs):
            cells.append(("pnpda", cfg, r, net, {key: v}, None, v))
    if baseline:
        cells += [("3dvar", cfg, r, None, None, None, "") for r in range(n_runs)]
    return ResultTable(_execute(cells, workers))


def observation_batch(cfg, run, axis=None, axis_value=""):
    """Observations seen by benchmark run ``run`` (for export)."""
    cfg = _apply_axis(cfg, axis, axis_value)
    tb = Testbed(cfg)
    truth = eval_truth(cfg, run)
    return make_observations(truth, tb.obs_spec(cfg["obs_eval"]), tb.obs_every,
                             seeded_rng(int(cfg["seed"]), run_stream(run, P_OBS)))


__all__ = [
    "METHODS", "AXES", "ABLATION_AXES",
    "generate_nature_run", "generate_training_pairs", "train_prior",
    "eval_truth", "run_cyclic_da", "benchmark", "sweep", "ablate",
    "observation_batch",
]
