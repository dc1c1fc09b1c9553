import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmselect.errors import SingularDesign
from pcmselect.solvers import (
    _sweep,
    coordinate_descent,
    kkt_residual,
    l1_objective,
    ols_solve,
    ridge_solve,
    soft_threshold,
)


def make_problem(seed, n=60, p=6, weight_scale=0.1):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, p))
    a -= a.mean(axis=0)
    a /= a.std(axis=0)
    y = a @ rng.uniform(-1, 1, p) + rng.standard_normal(n)
    y -= y.mean()
    l1 = weight_scale * rng.uniform(0.0, 1.0, p)
    return a, y, l1


class TestSoftThreshold:
    def test_values(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.5, 1.0) == 0.0


class TestCoordinateDescent:
    def test_zero_penalty_equals_least_squares(self):
        a, y, _ = make_problem(0)
        beta = coordinate_descent(a.T @ a, a.T @ y, a.shape[0], np.zeros(6))
        np.testing.assert_allclose(beta, np.linalg.solve(a.T @ a, a.T @ y), atol=1e-10)

    def test_huge_penalty_zeroes_everything(self):
        a, y, _ = make_problem(1)
        beta = coordinate_descent(a.T @ a, a.T @ y, a.shape[0], np.full(6, 1e6))
        np.testing.assert_array_equal(beta, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_kkt_conditions_hold(self, seed):
        a, y, l1 = make_problem(seed)
        beta = coordinate_descent(a.T @ a, a.T @ y, a.shape[0], l1)
        assert kkt_residual(a.T @ a, a.T @ y, a.shape[0], l1, beta) < 1e-6

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_beats_random_perturbations(self, seed):
        rng = np.random.default_rng(seed + 1)
        a, y, l1 = make_problem(seed)
        beta = coordinate_descent(a.T @ a, a.T @ y, a.shape[0], l1)
        base = l1_objective(a, y, l1, beta)
        for scale in (1e-4, 1e-2, 0.3):
            noise = rng.standard_normal((200, 6)) * scale
            values = [l1_objective(a, y, l1, beta + d) for d in noise]
            assert base <= min(values) + 1e-12

    def test_underdetermined_design_converges(self):
        rng = np.random.default_rng(3)
        n, p = 12, 20
        a = rng.standard_normal((n, p))
        a -= a.mean(axis=0)
        a /= a.std(axis=0)
        y = rng.standard_normal(n)
        l1 = np.full(p, 0.01)
        beta = coordinate_descent(a.T @ a, a.T @ y, n, l1)
        assert kkt_residual(a.T @ a, a.T @ y, n, l1, beta) < 1e-6

    def test_objective_monotone_over_sweeps(self):
        a, y, l1 = make_problem(4)
        gram, cross, n = a.T @ a, a.T @ y, a.shape[0]
        beta = np.zeros(6)
        resid = cross - gram @ beta
        values = [l1_objective(a, y, l1, beta)]
        for _ in range(30):
            _sweep(gram, resid, beta, n, l1, np.zeros(6), np.arange(6))
            values.append(l1_objective(a, y, l1, beta))
        diffs = np.diff(values)
        assert np.all(diffs <= 1e-12)

    def test_elastic_net_component(self):
        a, y, _ = make_problem(5)
        n = a.shape[0]
        l1 = np.full(6, 0.05)
        l2 = np.full(6, 0.4)
        beta = coordinate_descent(a.T @ a, a.T @ y, n, l1, l2)
        # stationarity with the quadratic term included
        assert kkt_residual(a.T @ a, a.T @ y, n, l1, beta, l2) < 1e-6

    def test_mixed_unpenalized_coordinates(self):
        a, y, l1 = make_problem(6)
        l1[0] = 0.0
        beta = coordinate_descent(a.T @ a, a.T @ y, a.shape[0], l1)
        grad = (a.T @ a @ beta - a.T @ y) / a.shape[0]
        assert abs(grad[0]) < 1e-8  # unpenalized coordinate is exactly stationary


class TestRidgeSolve:
    def test_matches_closed_form(self):
        a, y, _ = make_problem(7)
        n = a.shape[0]
        d = np.full(6, 0.3)
        beta = ridge_solve(a.T @ a, a.T @ y, n, d)
        np.testing.assert_allclose(
            beta, np.linalg.solve(a.T @ a + n * np.diag(d), a.T @ y), atol=1e-12
        )

    def test_singular_unpenalized_raises(self):
        a = np.ones((5, 2))  # identical columns, no penalty
        with pytest.raises(SingularDesign):
            ols_solve(a.T @ a, a.T @ np.ones(5))


class TestOlsSolve:
    def test_condition_guard(self):
        base = np.random.default_rng(8).standard_normal((10, 1))
        a = np.hstack([base, base * (1 + 1e-14)])
        with pytest.raises(SingularDesign):
            ols_solve(a.T @ a, a.T @ np.ones(10))
