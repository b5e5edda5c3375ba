"""Component-selection observation operators, synthetic observations and
the Mahalanobis misfit with its gradient."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CholeskyFailure
from .numerics import sample_mvn

__all__ = [
    "ObservationSpec",
    "ObservationBatch",
    "observe",
    "scatter",
    "make_observations",
    "misfit",
    "misfit_gradient",
    "evenly_spaced_indices",
]


class ObservationSpec:
    """Linear selection operator ``H`` (by indices) with noise covariance ``P``."""

    def __init__(self, indices, noise_cov, state_dim=None):
        idx = np.asarray(indices, dtype=np.intp).ravel()
        if idx.size == 0:
            raise ValueError("at least one observed component is required")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be sorted and unique")
        if idx[0] < 0 or (state_dim is not None and idx[-1] >= state_dim):
            raise ValueError("observation index outside the state")
        cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
        if cov.shape != (idx.size, idx.size):
            raise ValueError(f"noise_cov must be {idx.size}x{idx.size}, got {cov.shape}")
        self.indices = idx
        self.noise_cov = cov
        self.state_dim = state_dim
        try:
            self._factor = scipy.linalg.cho_factor(cov, lower=True)
        except np.linalg.LinAlgError as exc:
            raise CholeskyFailure(f"observation noise covariance: {exc}") from None

    @classmethod
    def isotropic(cls, indices, sigma, state_dim=None):
        n = len(np.atleast_1d(indices))
        return cls(indices, sigma**2 * np.eye(n), state_dim)

    @property
    def m(self):
        return self.indices.size

    def solve(self, r):
        """``P^{-1} r`` for ``r`` of shape (m,) or (..., m)."""
        r = np.asarray(r, dtype=float)
        if r.ndim == 1:
            return scipy.linalg.cho_solve(self._factor, r, check_finite=False)
        flat = r.reshape(-1, self.m)
        return scipy.linalg.cho_solve(self._factor, flat.T, check_finite=False).T.reshape(r.shape)

    def subset(self, positions):
        """Spec restricted to the given positions within ``indices``."""
        pos = np.asarray(positions, dtype=np.intp)
        return ObservationSpec(
            self.indices[pos], self.noise_cov[np.ix_(pos, pos)], self.state_dim
        )

    def __repr__(self):
        return f"ObservationSpec(indices={self.indices.tolist()}, m={self.m})"


@dataclass
class ObservationBatch:
    times: np.ndarray
    values: np.ndarray
    spec: ObservationSpec
    steps: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape != (self.times.size, self.spec.m):
            raise ValueError("observation values do not match times/spec")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("observation times must be strictly increasing")

    def __len__(self):
        return self.times.size


def evenly_spaced_indices(n_obs, dim):
    """``n_obs`` equally spaced grid indices out of ``dim`` (cell centred)."""
    if not 1 <= n_obs <= dim:
        raise ValueError("need 1 <= n_obs <= dim")
    return np.floor((np.arange(n_obs) + 0.5) * dim / n_obs).astype(np.intp)


def observe(x, spec):
    return np.asarray(x)[..., spec.indices]


def scatter(v, spec, dim):
    """Inverse of :func:`observe` onto a zero state vector (``H^T v``)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (dim,))
    out[..., spec.indices] = v
    return out


def make_observations(truth, spec, every_n, rng):
    """Noisy observations of ``truth`` at every ``every_n``-th step (k >= 1)."""
    if every_n < 1:
        raise ValueError("every_n must be >= 1")
    steps = np.arange(every_n, len(truth), every_n)
    clean = observe(truth.states[steps], spec)
    noise = sample_mvn(rng, np.zeros(spec.m), spec.noise_cov, size=steps.size)
    return ObservationBatch(truth.times[steps], clean + noise, spec, steps)


def misfit(x, y, spec):
    """``0.5 (y - Hx)^T P^{-1} (y - Hx)``."""
    r = np.asarray(y, dtype=float) - observe(x, spec)
    return 0.5 * float(r @ spec.solve(r))


def misfit_gradient(x, y, spec):
    """``H^T P^{-1} (Hx - y)`` in state dimension; works on (..., d) batches."""
    x = np.asarray(x, dtype=float)
    r = observe(x, spec) - np.asarray(y, dtype=float)
    return scatter(spec.solve(r), spec, x.shape[-1])
