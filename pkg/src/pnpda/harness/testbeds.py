"""Testbed wiring: true/operational models, initial conditions, observation
specs and Gaspari-Cohn backgrounds built from a config dict."""

import numpy as np

from ..baselines import GaspariCohnSpec, build_B
from ..dynamics import (
    KsParams,
    KuramotoSivashinsky,
    L63Params,
    L96Params,
    Lorenz63,
    Lorenz96,
    Lorenz96TwoScale,
)
from ..errors import NonFiniteState
from ..observations import ObservationSpec, evenly_spaced_indices

SYSTEMS = ("l63", "l96", "ks")


class Testbed:
    """Operational state of dimension ``dim``; the truth may carry extra
    (unresolved) variables, mapped back with :meth:`project`."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.name = cfg["testbed"]
        m = cfg["model"]
        if self.name == "l63":
            self.truth_model = Lorenz63(L63Params(**m["true"]))
            self.op_model = Lorenz63(L63Params(**m["operational"]))
            self.dim = 3
            self.truth_dim = 3
        elif self.name == "l96":
            p = L96Params(**m["true"])
            self.truth_model = Lorenz96TwoScale(p)
            self.op_model = Lorenz96(p.K, p.F_prime)
            self.dim = p.K
            self.truth_dim = p.K * (p.J + 1)
        elif self.name == "ks":
            p = KsParams(**m["true"])
            self.truth_model = KuramotoSivashinsky(p)
            self.op_model = self.truth_model
            self.dim = p.n_grid
            self.truth_dim = p.n_grid
        else:
            raise ValueError(f"unknown testbed {self.name!r}; expected one of {SYSTEMS}")
        self.dt = float(cfg["dt"])
        self.obs_every = int(cfg["obs_every"])
        self.process_noise_std = float(m.get("process_noise_std", 0.0))

    # states -------------------------------------------------------------

    def project(self, truth_states):
        return np.asarray(truth_states)[..., : self.dim]

    def initial_truth(self, rng):
        if self.name == "l63":
            return rng.standard_normal(3)
        if self.name == "l96":
            p = self.truth_model.params
            X = p.F * 0.1 * rng.standard_normal(p.K) + 1.0
            Y = 0.1 * rng.standard_normal(p.K * p.J)
            return np.concatenate([X, Y])
        grid = self.truth_model.grid
        L = self.truth_model.params.L
        modes = np.arange(1, 9)
        amps = 0.1 * rng.standard_normal(modes.size)
        return (amps[:, None] * np.sin(np.pi * modes[:, None] * grid[None, :] / L)).sum(axis=0)

    def run_truth(self, s0, n_steps, chunk=4000):
        """Advance the truth ``n_steps``; returns ``(projected states, last full state)``.

        Runs in chunks so the unresolved variables are never stored in full.
        """
        s = np.asarray(s0, dtype=float)
        out = np.empty((n_steps, self.dim))
        done = 0
        while done < n_steps:
            n = min(chunk, n_steps - done)
            block = self.truth_model.run(s, n, self.dt)
            if not np.all(np.isfinite(block)):
                raise NonFiniteState(f"nature run went non-finite near step {done + n}")
            out[done : done + n] = self.project(block)
            s = block[-1]
            done += n
        return out, s

    def forecast(self, X, n_steps, rng):
        """Operational forecast of a batch ``X`` (M, dim); returns (n_steps, M, dim)."""
        X = np.atleast_2d(X)
        noise = None
        if self.process_noise_std > 0:
            noise = self.process_noise_std * rng.standard_normal((n_steps,) + X.shape)
        out = self.op_model.run(X, n_steps, self.dt, noise)
        if not np.all(np.isfinite(out)):
            raise NonFiniteState("operational forecast went non-finite")
        return out

    # observations and backgrounds ---------------------------------------

    def obs_spec(self, ocfg):
        """Observation spec from ``{"indices" | "fraction" | "count", "sigma", "correlation"}``."""
        if ocfg.get("indices") is not None:
            idx = np.asarray(ocfg["indices"], dtype=np.intp)
        elif ocfg.get("count") is not None:
            idx = evenly_spaced_indices(int(ocfg["count"]), self.dim)
        else:
            n = max(1, int(round(float(ocfg.get("fraction", 1.0)) * self.dim)))
            idx = evenly_spaced_indices(n, self.dim)
        corr = ocfg.get("correlation")
        C = np.eye(self.dim) if corr is None else np.asarray(corr, dtype=float)
        sigma = float(ocfg["sigma"])
        return ObservationSpec(idx, sigma**2 * C[np.ix_(idx, idx)], self.dim)

    def background_cov(self):
        b = self.cfg["threedvar"]
        spec = GaspariCohnSpec(float(b["length_scale"]), float(b["variance"]), b["topology"])
        return build_B(self.dim, spec)
