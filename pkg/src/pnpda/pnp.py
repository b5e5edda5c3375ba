"""Plug-and-play analysis with a flow-matching denoiser.

Each iteration takes a gradient step on the observation misfit, blends the
result with a fresh reference draw at flow time ``tau_n`` and applies the
conditional denoiser ``D_tau(xb, x) = x + (1 - tau) v(xb, x, tau)``.  The
network is only ever evaluated forward.

Gradient steps are taken in the network's normalised coordinates, which in
physical units means preconditioning the misfit gradient by the squared
normalisation scales.  The step scale is capped at ``max_gain / L``, where
``L`` is the largest curvature of the misfit in those coordinates, so the
explicit step cannot overshoot when the observation error is small.
"""

from dataclasses import asdict, dataclass
import logging

import numpy as np

from .errors import NonFiniteState
from .observations import misfit, misfit_gradient

__all__ = [
    "PnpConfig",
    "WindowSpec",
    "tau_schedule",
    "step_sizes",
    "denoise",
    "analyze_3d",
    "analyze_4d",
    "analyze_ensemble",
    "misfit_gradient_4d",
    "misfit_curvature",
    "rk4_vjp",
]

log = logging.getLogger(__name__)


@dataclass
class PnpConfig:
    n_iter: int = 100
    alpha: float = 0.5
    step_scale: float = 1.0
    n_samples: int = 1
    noise_scale: float = 1.0  # 0 replaces every reference draw by zero
    max_gain: float = 4.0  # cap on gamma_n * L; 0 disables the cap

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_gain < 0:
            raise ValueError("max_gain must be >= 0")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def to_dict(self):
        return asdict(self)


def tau_schedule(n_iter):
    """Uniform flow times ``n / n_iter`` for ``n = 0 .. n_iter - 1``."""
    return np.arange(n_iter) / n_iter


def step_sizes(cfg, curvature=None):
    """``scale (1 - tau_n)^alpha`` with ``scale = min(step_scale, max_gain / curvature)``."""
    scale = cfg.step_scale
    if curvature is not None and curvature > 0 and cfg.max_gain > 0:
        scale = min(scale, cfg.max_gain / curvature)
    return scale * (1.0 - tau_schedule(cfg.n_iter)) ** cfg.alpha


def misfit_curvature(spec, scale):
    """Largest eigenvalue of ``S H^T P^-1 H S`` with ``S = diag(scale)``."""
    s = np.asarray(scale, dtype=float)[spec.indices]
    prec = spec.solve(np.eye(spec.m))
    return float(np.linalg.eigvalsh(s[:, None] * prec * s[None, :])[-1])


def denoise(net, xb, x, tau):
    """``x + (1 - tau) v(xb, x, tau)`` in physical coordinates.

    The network sees normalised inputs; its velocity is rescaled by the
    normalisation std, so ``tau == 1`` and zero networks return ``x`` exactly.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    v = net.forward(net.normalize(x), tau, net.normalize(xb))
    return x + (1.0 - tau) * (net.norm_std * v)


def _pnp_loop(net, xb, grad_fn, cfg, gens, curvature=None):
    d = xb.shape[-1]
    M = len(gens)
    XB = np.broadcast_to(xb, (M, d))
    X = np.array(XB)
    s2 = net.norm_std**2
    taus = tau_schedule(cfg.n_iter)
    gammas = step_sizes(cfg, curvature)
    for tau, gamma in zip(taus, gammas):
        W = X - gamma * s2 * grad_fn(X)
        Z = np.stack([g.standard_normal(d) for g in gens]) * cfg.noise_scale
        Wt = (1.0 - tau) * (net.norm_mean + net.norm_std * Z) + tau * W
        X = denoise(net, XB, Wt, tau)
    return X


def analyze_ensemble(xb, y, spec, net, cfg, rng):
    """``n_samples`` independent analyses; returns ``(mean, members)``.

    Members that go non-finite are dropped from the mean; if all fail,
    :class:`NonFiniteState` is raised.
    """
    xb = np.asarray(xb, dtype=float)
    M = cfg.n_samples
    gens = [rng] if M == 1 else rng.spawn(M)
    grad = lambda X: misfit_gradient(X, y, spec)  # noqa: E731
    with np.errstate(all="ignore"):
        members = _pnp_loop(net, xb, grad, cfg, gens, misfit_curvature(spec, net.norm_std))
    return _survivors(members)


def _survivors(members):
    ok = np.all(np.isfinite(members), axis=1)
    if not ok.any():
        raise NonFiniteState("every PnP analysis member went non-finite")
    if not ok.all():
        log.warning("dropping %d non-finite PnP members", int((~ok).sum()))
    members = members[ok]
    return members.mean(axis=0), members


def analyze_3d(xb, y, spec, net, cfg, rng):
    """PnP-DA analysis state (ensemble mean when ``cfg.n_samples > 1``)."""
    mean, _ = analyze_ensemble(xb, y, spec, net, cfg, rng)
    return mean


# --------------------------------------------------------------------------
# 4D window


@dataclass
class WindowSpec:
    """Observations ``(step, y, spec)`` at model-step offsets from the
    window start, and the deterministic model advancing them."""

    model: object
    dt: float
    observations: list

    def __post_init__(self):
        if not self.observations:
            raise ValueError("a window needs at least one observation")
        self.observations = sorted(self.observations, key=lambda o: o[0])
        if self.observations[0][0] < 0:
            raise ValueError("observation steps must be >= 0")

    @property
    def n_steps(self):
        return int(self.observations[-1][0])

    def states(self, x0):
        """Model states at steps ``0 .. n_steps`` from ``x0``."""
        x0 = np.asarray(x0, dtype=float)
        if self.n_steps == 0:
            return x0[None]
        fwd = self.model.run(x0, self.n_steps, self.dt)
        return np.concatenate([x0[None], fwd])

    def cost(self, x0):
        """``0.5 sum_i |y_i - H_i M_{0->i}(x0)|^2_{P_i^{-1}}``."""
        xs = self.states(x0)
        return sum(misfit(xs[k], y, spec) for k, y, spec in self.observations)


def rk4_vjp(model, x, dt, lam):
    """Pull ``lam`` back through one RK4 step of ``model`` started at ``x``."""
    h = 0.5 * dt
    f = model.drift
    k1 = f(x)
    x2 = x + h * k1
    k2 = f(x2)
    x3 = x + h * k2
    k3 = f(x3)
    x4 = x + dt * k3
    u4 = model.vjp(x4, (dt / 6.0) * lam)
    u3 = model.vjp(x3, (dt / 3.0) * lam + dt * u4)
    u2 = model.vjp(x2, (dt / 3.0) * lam + h * u3)
    u1 = model.vjp(x, (dt / 6.0) * lam + h * u2)
    return lam + u1 + u2 + u3 + u4


def misfit_gradient_4d(x0, win):
    """Gradient of :meth:`WindowSpec.cost` by the discrete RK4 adjoint."""
    xs = win.states(x0)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteState("window forecast went non-finite")
    by_step = {}
    for k, y, spec in win.observations:
        by_step.setdefault(int(k), []).append((y, spec))
    lam = np.zeros_like(xs[0])
    for k in range(win.n_steps, -1, -1):
        for y, spec in by_step.get(k, ()):
            lam = lam + misfit_gradient(xs[k], y, spec)
        if k > 0:
            lam = rk4_vjp(win.model, xs[k - 1], win.dt, lam)
    return lam


def analyze_4d(xb, win, net, cfg, rng):
    """PnP-DA with the window misfit gradient in place of the 3D one."""
    xb = np.asarray(xb, dtype=float)

    def grad(X):
        return np.stack([misfit_gradient_4d(x, win) for x in X])

    # curvature of the window misfit ignoring the model Jacobian
    curv = sum(misfit_curvature(spec, net.norm_std) for _, _, spec in win.observations)
    gens = [rng] if cfg.n_samples == 1 else rng.spawn(cfg.n_samples)
    with np.errstate(all="ignore"):
        members = _pnp_loop(net, xb, grad, cfg, gens, curv)
    mean, _ = _survivors(members)
    return mean
