"""The compiled and numpy kernels must agree to rounding."""

import importlib

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from pnpda import _pykernels as py

try:
    cy = importlib.import_module("pnpda._ckernels")
except ImportError:  # pragma: no cover - depends on the build
    cy = None

needs_c = pytest.mark.skipif(cy is None, reason="compiled kernels not built")
TOL = 1e-12


def close(a, b, scale=1.0):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) <= TOL * max(scale, np.max(np.abs(b)))


def test_backend_names():
    assert py.BACKEND == "python"
    if cy is not None:
        assert cy.BACKEND == "cython"


@needs_c
def test_l63(rng):
    x0 = rng.standard_normal((4, 3)) * 5
    noise = 0.01 * rng.standard_normal((50, 4, 3))
    assert close(cy.l63_run(x0, 10.0, 28.0, 8 / 3, 0.01, noise), py.l63_run(x0, 10.0, 28.0, 8 / 3, 0.01, noise))


@needs_c
def test_l96(rng):
    x0 = rng.standard_normal((3, 8)) * 3
    noise = 0.01 * rng.standard_normal((40, 3, 8))
    assert close(cy.l96_run(x0, 18.0, 0.005, noise), py.l96_run(x0, 18.0, 0.005, noise))


@needs_c
@pytest.mark.parametrize("sx", [1.0, -1.0])
def test_l96_two_scale(rng, sx):
    s0 = rng.standard_normal((2, 8 + 64))
    a = cy.l96_two_scale_run(s0, 8, 8, 20.0, 1.0, 10.0, 10.0, 0.001, 30, sx)
    b = py.l96_two_scale_run(s0, 8, 8, 20.0, 1.0, 10.0, 10.0, 0.001, 30, sx)
    assert close(a, b)


@needs_c
def test_ks(rng):
    n = 32
    u0 = np.sin(np.linspace(0, 4 * np.pi, n)) + 0.1 * rng.standard_normal((2, n))
    noise = 0.01 * rng.standard_normal((5, 2, n))
    dx = 1.0
    assert close(cy.ks_run(u0, 1.0, dx, 1e-3, 20, noise), py.ks_run(u0, 1.0, dx, 1e-3, 20, noise))


@pytest.mark.parametrize("mod", [py, pytest.param(cy, marks=needs_c)], ids=["python", "cython"])
def test_linear_assignment_optimal(rng, mod):
    for n in (1, 2, 5, 17, 40):
        C = rng.random((n, n))
        perm = np.asarray(mod.linear_assignment(C))
        rows, cols = linear_sum_assignment(C)
        assert sorted(perm.tolist()) == list(range(n))
        assert C[np.arange(n), perm].sum() == pytest.approx(C[rows, cols].sum(), abs=1e-12)


@needs_c
def test_linear_assignment_same_perm(rng):
    C = rng.random((30, 30))
    assert np.array_equal(cy.linear_assignment(C), py.linear_assignment(C))


@needs_c
def test_sinkhorn(rng):
    C = rng.random((12, 9))
    assert close(cy.sinkhorn_log(C, 20.0, 200), py.sinkhorn_log(C, 20.0, 200))
