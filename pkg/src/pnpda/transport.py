"""Discrete optimal transport between uniform empirical measures.

``sinkhorn_plan`` gives entropic plans (used by EnRDA), ``emd_assignment``
the exact plan for equal-size uniform marginals, which is a permutation
matrix, so a linear assignment solver recovers it.
"""

import numpy as np

from ._backend import kernels
from .errors import NumericalUnderflow

__all__ = ["sinkhorn_plan", "emd_assignment", "augmented_cost", "assignment_cost"]


def sinkhorn_plan(cost, gamma, n_iter=300):
    """Entropic OT plan with Gibbs kernel ``exp(-gamma * cost)``.

    Larger ``gamma`` gives sharper plans.  Runs exactly ``n_iter`` row/column
    sweeps in the log domain; the column marginals are exact after the
    final sweep.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost must be a matrix")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost must be finite")
    if np.any(C < 0):
        raise ValueError("cost must be nonnegative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    plan = kernels.sinkhorn_log(C, float(gamma), int(n_iter))
    if not np.all(np.isfinite(plan)):
        raise NumericalUnderflow("Sinkhorn potentials overflowed")
    return plan


def emd_assignment(cost):
    """Minimum-cost permutation ``perm`` (row ``i`` -> column ``perm[i]``)."""
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("emd_assignment needs a square cost matrix")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost must be finite")
    if C.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    return kernels.linear_assignment(C)


def assignment_cost(cost, perm):
    cost = np.asarray(cost)
    return float(cost[np.arange(cost.shape[0]), perm].sum())


def _sqdist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def augmented_cost(z0, xb, xa, beta):
    """``C_ij = |z0_i - xa_j|^2 + beta |xb_i - xb_j|^2``.

    Squared distance between the augmented points (z0_i, sqrt(beta) xb_i)
    and (xa_j, sqrt(beta) xb_j).
    """
    z0, xb, xa = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (z0, xb, xa))
    if not (z0.shape[0] == xb.shape[0] == xa.shape[0]):
        raise ValueError("batches must have equal size")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    C = _sqdist(z0, xa)
    if beta > 0:
        C = C + beta * _sqdist(xb, xb)
    return C
