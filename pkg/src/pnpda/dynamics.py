"""Testbed right-hand sides and RK4 time integration.

Three testbeds are provided, each in a "true" and an "operational" flavour:

* Lorenz-63 with true parameters (10, 28, 8/3) and perturbed operational
  parameters (10.5, 27, 10/3);
* two-scale Lorenz-96 as truth, single-scale Lorenz-96 as the operational
  model;
* Kuramoto-Sivashinsky on a Dirichlet domain, solved by central finite
  differences with explicit RK4 sub-stepping.

Model objects expose ``drift`` (vectorised over leading axes), ``run``
(compiled fast path) and, where 4D gradients are needed, ``vjp``.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._backend import kernels
from .errors import NonFiniteState

__all__ = [
    "L63Params",
    "L96Params",
    "KsParams",
    "TRUE_L63",
    "OPERATIONAL_L63",
    "Trajectory",
    "l63_drift",
    "l96_two_scale_drift",
    "l96_single_drift",
    "ks_rhs",
    "rk4_step",
    "integrate",
    "Lorenz63",
    "Lorenz96",
    "Lorenz96TwoScale",
    "KuramotoSivashinsky",
]


@dataclass(frozen=True)
class L63Params:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0


TRUE_L63 = L63Params()
OPERATIONAL_L63 = L63Params(10.5, 27.0, 10.0 / 3.0)


@dataclass(frozen=True)
class L96Params:
    K: int = 8
    J: int = 32
    F: float = 18.0
    h: float = 1.0
    b: float = 10.0
    c: float = 10.0
    F_prime: float = 18.0
    coupling_sign: float = 1.0  # sign of the fast-to-slow term in dX/dt

    def __post_init__(self):
        if self.coupling_sign not in (1.0, -1.0):
            raise ValueError("coupling_sign must be +1 or -1")
        if self.K < 4:
            raise ValueError("Lorenz-96 needs K >= 4 for the cyclic stencil")


@dataclass(frozen=True)
class KsParams:
    nu: float = 0.5
    L: float = 50.0
    n_grid: int = 128
    dt_record: float = 0.25
    dt_internal: float = None

    @property
    def dx(self):
        return self.L / (self.n_grid + 1)

    @property
    def n_sub(self):
        """Sub-steps per record.

        The step bound is min(1e-3, 0.5 dx^4 / (8 nu)); the fourth-derivative
        stencil has spectral radius 16 nu / dx^4 and RK4 is stable up to
        roughly 2.78 / radius on the negative real axis.
        """
        bound = self.dt_internal
        if bound is None:
            bound = min(1e-3, 0.5 * self.dx**4 / (8.0 * self.nu))
        return max(1, math.ceil(self.dt_record / bound - 1e-9))

    @property
    def dt_sub(self):
        return self.dt_record / self.n_sub


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.shape[0]:
            raise ValueError("states must be (n_times, dim) aligned with times")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


# --------------------------------------------------------------------------
# drifts


def l63_drift(x, p=TRUE_L63):
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack(
        [-p.sigma * (X - Y), p.rho * X - Y - X * Z, X * Y - p.beta * Z], axis=-1
    )


def l63_vjp(x, v, p):
    """Transpose-Jacobian product ``J(x)^T v`` of the Lorenz-63 drift."""
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    v0, v1, v2 = v[..., 0], v[..., 1], v[..., 2]
    return np.stack(
        [
            -p.sigma * v0 + (p.rho - Z) * v1 + Y * v2,
            p.sigma * v0 - v1 + X * v2,
            -X * v1 - p.beta * v2,
        ],
        axis=-1,
    )


def l96_single_drift(X, F_prime):
    X = np.asarray(X, dtype=float)
    return (
        -np.roll(X, 1, axis=-1) * (np.roll(X, 2, axis=-1) - np.roll(X, -1, axis=-1))
        - X
        + F_prime
    )


def l96_single_vjp(X, v):
    # f_k depends on X_{k+1} (coef X_{k-1}), X_{k-2} (coef -X_{k-1}),
    # X_{k-1} (coef X_{k+1} - X_{k-2}) and X_k (coef -1).
    r = lambda a, s: np.roll(a, s, axis=-1)  # noqa: E731  r(a, s)[m] = a[m - s]
    return r(v, 1) * r(X, 2) - r(v, -2) * r(X, -1) + r(v, -1) * (r(X, -2) - r(X, 1)) - v


def l96_two_scale_drift(X, Y, p):
    """Slow and fast tendencies of two-scale Lorenz-96.

    ``Y`` is flattened with fast index ``j + J*k``; the fast stencil wraps
    cyclically over the whole flattened vector.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    hcb = p.h * p.c / p.b
    sumY = Y.reshape(Y.shape[:-1] + (p.K, p.J)).sum(axis=-1)
    dX = l96_single_drift(X, p.F) + p.coupling_sign * hcb * sumY
    dY = (
        -p.c * p.b * np.roll(Y, -1, axis=-1) * (np.roll(Y, -2, axis=-1) - np.roll(Y, 1, axis=-1))
        - p.c * Y
        + hcb * np.repeat(X, p.J, axis=-1)
    )
    return dX, dY


def ks_rhs(u, p):
    """KS tendency with second-order central differences.

    The physical boundary values and one ghost point beyond each end are
    held at zero.
    """
    u = np.asarray(u, dtype=float)
    dx = p.dx
    pad = np.zeros(u.shape[:-1] + (u.shape[-1] + 4,))
    pad[..., 2:-2] = u
    um2, um1 = pad[..., :-4], pad[..., 1:-3]
    up1, up2 = pad[..., 3:-1], pad[..., 4:]
    ux = (up1 - um1) * (1.0 / (2.0 * dx))
    uxx = (up1 - 2.0 * u + um1) * (1.0 / (dx * dx))
    c4 = p.nu / dx**4
    return -u * ux - uxx - c4 * (up2 - 4.0 * up1 + 6.0 * u - 4.0 * um1 + um2)


# --------------------------------------------------------------------------
# integration


def rk4_step(drift, x, dt):
    """One classical fourth-order Runge-Kutta step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = drift(x)
    k2 = drift(x + 0.5 * dt * k1)
    k3 = drift(x + 0.5 * dt * k2)
    k4 = drift(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(drift, x0, n_steps, dt, process_noise_std=0.0, rng=None):
    """Integrate ``n_steps`` RK4 steps, adding N(0, std^2) noise after each.

    ``drift`` is either a callable ``x -> dx/dt`` or a model object with a
    ``run`` method (the compiled path; for Kuramoto-Sivashinsky ``dt`` is the
    recording step and sub-steps are taken internally).  The returned
    trajectory includes ``x0`` at time 0.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    std = np.broadcast_to(np.asarray(process_noise_std, dtype=float), x0.shape)
    if np.any(std > 0):
        if rng is None:
            raise ValueError("process noise requires an rng")
        noise = rng.standard_normal((n_steps,) + x0.shape) * std
    else:
        noise = np.zeros((n_steps,) + x0.shape)

    if hasattr(drift, "run"):
        states = drift.run(x0, n_steps, dt, noise)
    else:
        states = np.empty((n_steps,) + x0.shape)
        x = x0
        for k in range(n_steps):
            x = rk4_step(drift, x, dt) + noise[k]
            states[k] = x
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states.reshape(n_steps, -1)), axis=1)))
        raise NonFiniteState(f"state became non-finite at step {bad + 1}")
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times, np.concatenate([x0[None], states]))


def _noise_or_zeros(noise, n_steps, shape):
    if noise is None:
        return np.zeros((n_steps,) + shape)
    return np.asarray(noise, dtype=float).reshape((n_steps,) + shape)


class Lorenz63:
    dim = 3

    def __init__(self, params=TRUE_L63):
        self.params = params

    def drift(self, x):
        return l63_drift(x, self.params)

    def vjp(self, x, v):
        return l63_vjp(x, v, self.params)

    def run(self, x0, n_steps, dt, noise=None):
        """RK4 states after each of ``n_steps`` steps; ``x0`` may be (M, 3)."""
        x0 = np.asarray(x0, dtype=float)
        p = self.params
        nz = _noise_or_zeros(noise, n_steps, x0.shape)
        return kernels.l63_run(x0, p.sigma, p.rho, p.beta, dt, nz)


class Lorenz96:
    """Single-scale (operational) Lorenz-96."""

    def __init__(self, K=8, F=18.0):
        self.K = K
        self.F = F
        self.dim = K

    def drift(self, x):
        return l96_single_drift(x, self.F)

    def vjp(self, x, v):
        return l96_single_vjp(x, v)

    def run(self, x0, n_steps, dt, noise=None):
        x0 = np.asarray(x0, dtype=float)
        nz = _noise_or_zeros(noise, n_steps, x0.shape)
        return kernels.l96_run(x0, self.F, dt, nz)


class Lorenz96TwoScale:
    """Two-scale (true) Lorenz-96 on the stacked state ``[X, Y]``."""

    def __init__(self, params=L96Params()):
        self.params = params
        self.dim = params.K * (params.J + 1)

    def drift(self, s):
        p = self.params
        dX, dY = l96_two_scale_drift(s[..., : p.K], s[..., p.K :], p)
        return np.concatenate([dX, dY], axis=-1)

    def run(self, s0, n_steps, dt, noise=None):
        p = self.params
        s0 = np.asarray(s0, dtype=float)
        if noise is not None and np.any(noise):
            raise ValueError("the two-scale truth model takes no process noise")
        return kernels.l96_two_scale_run(
            s0, p.K, p.J, p.F, p.h, p.b, p.c, dt, n_steps, float(p.coupling_sign)
        )


class KuramotoSivashinsky:
    """Dirichlet KS on ``n_grid`` interior points; ``run`` steps per record."""

    def __init__(self, params=KsParams()):
        self.params = params
        self.dim = params.n_grid

    def drift(self, u):
        return ks_rhs(u, self.params)

    def run(self, u0, n_records, dt=None, noise=None):
        p = self.params
        if dt is not None and abs(dt - p.dt_record) > 1e-12:
            raise ValueError(f"KS records every {p.dt_record}, got dt={dt}")
        u0 = np.asarray(u0, dtype=float)
        nz = _noise_or_zeros(noise, n_records, u0.shape)
        return kernels.ks_run(u0, p.nu, p.dx, p.dt_sub, p.n_sub, nz)

    @property
    def grid(self):
        p = self.params
        return p.dx * np.arange(1, p.n_grid + 1)
