import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pnpda.dynamics import Trajectory
from pnpda.errors import CholeskyFailure
from pnpda.numerics import seeded_rng
from pnpda.observations import (
    ObservationBatch,
    ObservationSpec,
    evenly_spaced_indices,
    make_observations,
    misfit,
    misfit_gradient,
    observe,
    scatter,
)

from conftest import random_spd


def random_instance(r, d=None):
    d = d or int(r.integers(2, 9))
    m = int(r.integers(1, d + 1))
    idx = np.sort(r.choice(d, m, replace=False))
    spec = ObservationSpec(idx, random_spd(r, m, shift=0.5), d)
    return spec, r.standard_normal(d), r.standard_normal(m)


def fd_gradient(f, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestSpec:
    def test_rejects_unsorted_or_out_of_range(self):
        with pytest.raises(ValueError):
            ObservationSpec([2, 0], np.eye(2))
        with pytest.raises(ValueError):
            ObservationSpec([0, 3], np.eye(2), state_dim=3)
        with pytest.raises(ValueError):
            ObservationSpec([], np.eye(0))

    def test_rejects_indefinite_noise(self):
        with pytest.raises(CholeskyFailure):
            ObservationSpec([0, 1], np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_sub_block(self):
        C = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]]) * 2
        full = ObservationSpec([0, 1, 2], C, 3)
        sub = full.subset([0, 2])
        assert np.array_equal(sub.indices, [0, 2])
        assert np.array_equal(sub.noise_cov, C[np.ix_([0, 2], [0, 2])])

    def test_evenly_spaced(self):
        assert evenly_spaced_indices(16, 128).tolist() == list(range(4, 128, 8))
        assert evenly_spaced_indices(8, 8).tolist() == list(range(8))
        with pytest.raises(ValueError):
            evenly_spaced_indices(0, 8)


class TestObserve:
    def test_identity(self, rng):
        x = rng.standard_normal(5)
        assert np.array_equal(observe(x, ObservationSpec.isotropic(range(5), 1.0)), x)

    def test_selection(self):
        assert observe(np.array([1.0, 2.0, 3.0]), ObservationSpec.isotropic([0, 2], 1.0)).tolist() == [1.0, 3.0]

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_projection_idempotent(self, seed):
        spec, x, _ = random_instance(np.random.default_rng(seed))
        once = observe(x, spec)
        assert np.array_equal(observe(scatter(once, spec, x.size), spec), once)


class TestMakeObservations:
    def make_truth(self, n=401, d=3, dt=0.01):
        r = np.random.default_rng(0)
        return Trajectory(dt * np.arange(n), r.standard_normal((n, d)))

    def test_noiseless_limit(self):
        tr = self.make_truth()
        spec = ObservationSpec([0, 2], 1e-12 * np.eye(2), 3)
        obs = make_observations(tr, spec, 40, seeded_rng(0, 0))
        assert np.allclose(obs.values, tr.states[obs.steps][:, [0, 2]], atol=1e-5)

    def test_l63_times(self):
        obs = make_observations(self.make_truth(), ObservationSpec.isotropic([0, 2], 1.0, 3), 40, seeded_rng(0, 0))
        assert np.allclose(obs.times, 0.4 * np.arange(1, 11))
        assert obs.steps.tolist() == list(range(40, 401, 40))

    def test_noise_covariance(self):
        C = np.array([[2.0, 0.5], [0.5, 1.0]])
        tr = Trajectory(np.arange(10_001.0), np.zeros((10_001, 2)))
        obs = make_observations(tr, ObservationSpec([0, 1], C, 2), 1, seeded_rng(1, 0))
        assert np.linalg.norm(np.cov(obs.values.T) - C) <= 0.1

    def test_every_n(self):
        with pytest.raises(ValueError):
            make_observations(self.make_truth(), ObservationSpec.isotropic([0], 1.0), 0, seeded_rng(0, 0))

    def test_batch_validation(self):
        spec = ObservationSpec.isotropic([0], 1.0)
        with pytest.raises(ValueError):
            ObservationBatch(np.array([1.0, 1.0]), np.zeros((2, 1)), spec)
        with pytest.raises(ValueError):
            ObservationBatch(np.array([1.0, 2.0]), np.zeros((2, 2)), spec)


class TestMisfit:
    def test_zero_at_exact_fit(self, rng):
        spec, x, _ = random_instance(rng)
        y = observe(x, spec)
        assert misfit(x, y, spec) == 0.0
        assert np.array_equal(misfit_gradient(x, y, spec), np.zeros_like(x))

    def test_hand_value(self):
        spec = ObservationSpec.isotropic([0, 1], 1.0, 2)
        assert misfit(np.zeros(2), np.array([3.0, 4.0]), spec) == pytest.approx(12.5)

    def test_hand_gradient(self):
        spec = ObservationSpec([0], np.array([[4.0]]), 3)
        assert np.allclose(misfit_gradient(np.array([5.0, 0.0, 0.0]), np.array([1.0]), spec), [1.0, 0.0, 0.0])

    def test_explicit_inverse_oracle(self):
        r = np.random.default_rng(3)
        for _ in range(20):
            spec, x, y = random_instance(r)
            res = y - x[spec.indices]
            ref = 0.5 * res @ np.linalg.inv(spec.noise_cov) @ res
            assert misfit(x, y, spec) == pytest.approx(ref, rel=1e-10)

    def test_gradient_fd_100_instances(self):
        r = np.random.default_rng(4)
        worst = 0.0
        for _ in range(100):
            spec, x, y = random_instance(r)
            g = misfit_gradient(x, y, spec)
            fd = fd_gradient(lambda v: misfit(v, y, spec), x)
            worst = max(worst, np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-12))
        assert worst <= 1e-6

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_nonnegative_and_unobserved_zero(self, seed):
        spec, x, y = random_instance(np.random.default_rng(seed))
        assert misfit(x, y, spec) >= 0.0
        g = misfit_gradient(x, y, spec)
        mask = np.ones(x.size, bool)
        mask[spec.indices] = False
        assert np.all(g[mask] == 0.0)

    def test_batched_gradient(self, rng):
        spec, x, y = random_instance(rng, d=6)
        X = rng.standard_normal((4, 6))
        G = misfit_gradient(X, y, spec)
        for i in range(4):
            assert np.allclose(G[i], misfit_gradient(X[i], y, spec), rtol=1e-14, atol=1e-14)
