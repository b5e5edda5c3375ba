"""Seeded random streams and small dense SPD linear algebra."""

import numpy as np
import scipy.linalg

from .errors import CholeskyFailure, TooFewMembers

__all__ = [
    "seeded_rng",
    "cholesky",
    "sample_mvn",
    "spd_solve",
    "ensemble_covariance",
]


def seeded_rng(seed, stream_id=0):
    """Return a Philox generator keyed on ``(seed, stream_id)``.

    Streams with different ``stream_id`` are statistically independent
    children of the same root seed sequence.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


def cholesky(a):
    """Lower Cholesky factor of ``a``; raises :class:`CholeskyFailure`."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise CholeskyFailure(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise CholeskyFailure("matrix has non-finite entries")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(str(exc)) from None


def sample_mvn(rng, mean, cov, size=None):
    """Draw ``mean + L @ zeta`` with ``L`` the Cholesky factor of ``cov``.

    With ``size`` given, returns an array of shape ``(size, dim)``.
    """
    mean = np.asarray(mean, dtype=float)
    L = cholesky(cov)
    if L.shape[0] != mean.shape[-1]:
        raise ValueError("mean and covariance dimensions differ")
    if size is None:
        return mean + L @ rng.standard_normal(mean.shape[-1])
    zeta = rng.standard_normal((size, mean.shape[-1]))
    return mean + zeta @ L.T


def spd_solve(a, b):
    """Solve ``a x = b`` for symmetric positive definite ``a``."""
    a = np.asarray(a, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise CholeskyFailure(str(exc)) from None
    return scipy.linalg.cho_solve(factor, np.asarray(b, dtype=float))


def ensemble_covariance(members):
    """Unbiased sample covariance of ``members`` (shape ``(N, dim)``)."""
    X = np.atleast_2d(np.asarray(members, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise TooFewMembers(f"need at least 2 members, got {n}")
    A = X - X.mean(axis=0)
    cov = A.T @ A / (n - 1)
    return 0.5 * (cov + cov.T)
