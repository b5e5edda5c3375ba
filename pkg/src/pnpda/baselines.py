"""Classical assimilation baselines: Gaspari-Cohn background covariances,
analytic 3D-Var, perturbed-observation EnKF and EnRDA.

Ensembles are ``(N, d)`` arrays, one member per row.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CholeskyFailure, DegeneratePlan, NotPsd, TooFewMembers
from .numerics import cholesky, ensemble_covariance, sample_mvn, spd_solve
from .observations import observe
from .transport import sinkhorn_plan

__all__ = [
    "GaspariCohnSpec",
    "gaspari_cohn",
    "build_B",
    "threedvar_analysis",
    "enkf_analysis",
    "enrda_analysis",
    "enrda_weight",
]


@dataclass(frozen=True)
class GaspariCohnSpec:
    length_scale: float
    variance: float
    topology: str = "bounded"  # or "cyclic"

    def __post_init__(self):
        if self.length_scale < 0 or self.variance <= 0:
            raise ValueError("need length_scale >= 0 and variance > 0")
        if self.topology not in ("bounded", "cyclic"):
            raise ValueError(f"unknown topology {self.topology!r}")


def gaspari_cohn(r, c):
    """Fifth-order piecewise rational correlation with support ``[0, 2c]``."""
    r = np.abs(np.asarray(r, dtype=float))
    if c <= 0:
        return np.where(r == 0.0, 1.0, 0.0)
    with np.errstate(over="ignore"):  # tiny c: z -> inf lies outside the support
        z = r / c
    out = np.zeros_like(z)
    near = z <= 1.0
    far = (z > 1.0) & (z < 2.0)
    zn = z[near]
    out[near] = -0.25 * zn**5 + 0.5 * zn**4 + 0.625 * zn**3 - (5.0 / 3.0) * zn**2 + 1.0
    zf = z[far]
    out[far] = (
        zf**5 / 12.0 - 0.5 * zf**4 + 0.625 * zf**3 + (5.0 / 3.0) * zf**2
        - 5.0 * zf + 4.0 - 2.0 / (3.0 * zf)
    )
    return out if out.ndim else float(out)


def build_B(dim, spec):
    """``B_ij = variance * gc(dist(i, j), c)`` on a line or a ring of ``dim`` points."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    i = np.arange(dim)
    d = np.abs(i[:, None] - i[None, :])
    if spec.topology == "cyclic":
        d = np.minimum(d, dim - d)
    B = spec.variance * gaspari_cohn(d, spec.length_scale)
    try:
        cholesky(B)
    except CholeskyFailure:
        B = B + 1e-10 * spec.variance * np.eye(dim)
        try:
            cholesky(B)
        except CholeskyFailure:
            raise NotPsd("Gaspari-Cohn covariance is not positive definite") from None
    return B


def threedvar_analysis(xb, y, spec, B):
    """``xa = xb + B H^T (H B H^T + P)^{-1} (y - H xb)`` for selection ``H``."""
    xb = np.asarray(xb, dtype=float)
    idx = spec.indices
    S = B[np.ix_(idx, idx)] + spec.noise_cov
    innov = np.asarray(y, dtype=float) - observe(xb, spec)
    return xb + B[:, idx] @ spd_solve(S, innov)


def _check_ensemble(ens):
    ens = np.atleast_2d(np.asarray(ens, dtype=float))
    if ens.shape[0] < 2:
        raise TooFewMembers(f"need at least 2 members, got {ens.shape[0]}")
    return ens


def enkf_analysis(ens, y, spec, rng, inflation=1.0, localization=None):
    """Stochastic (perturbed-observation) EnKF update.

    ``inflation`` multiplies background anomalies before the update
    (1.0 = none); ``localization`` is an optional (d, d) correlation matrix
    applied to the ensemble covariance by elementwise product.
    """
    ens = _check_ensemble(ens)
    if inflation != 1.0:
        mean = ens.mean(axis=0)
        ens = mean + inflation * (ens - mean)
    N = ens.shape[0]
    idx = spec.indices
    B = ensemble_covariance(ens)
    if localization is not None:
        B = B * localization
    S = B[np.ix_(idx, idx)] + spec.noise_cov
    y_pert = np.asarray(y, dtype=float) + sample_mvn(
        rng, np.zeros(spec.m), spec.noise_cov, size=N
    )
    innov = y_pert - ens[:, idx]
    return ens + spd_solve(S, innov.T).T @ B[idx, :]


def enrda_weight(obs_cov, B):
    """Mixture weight ``tr(P) / (tr(P) + tr(B))`` on the background."""
    tp = float(np.trace(obs_cov))
    tb = float(np.trace(B))
    return tp / (tp + tb)


def enrda_analysis(ens, y, sigma_obs_cov, gamma, n_iter, rng):
    """Ensemble Riemannian DA update with full-state observations.

    Members are matched to perturbed observations by an entropic plan on
    the max-normalised squared-Euclidean cost; each analysis member mixes
    one (background, observation) pair drawn i.i.d. from the joint plan.
    """
    ens = _check_ensemble(ens)
    N, d = ens.shape
    y = np.asarray(y, dtype=float)
    if y.shape != (d,):
        raise ValueError("EnRDA needs observations of the full state")
    y_pert = y + sample_mvn(rng, np.zeros(d), sigma_obs_cov, size=N)
    B = ensemble_covariance(ens)
    diff = ens[:, None, :] - y_pert[None, :, :]
    C = np.einsum("ijk,ijk->ij", diff, diff)
    cmax = C.max()
    if cmax > 0:
        C = C / cmax
    U = sinkhorn_plan(C, gamma, n_iter)
    if np.any(U.sum(axis=1) <= 0):
        raise DegeneratePlan("transport plan has an empty row")
    w = U.ravel() / U.sum()
    picks = rng.choice(N * N, size=N, p=w)
    I, J = np.divmod(picks, N)
    eta = enrda_weight(sigma_obs_cov, B)
    return eta * ens[I] + (1.0 - eta) * y_pert[J]
