import numpy as np
import pytest

from cvarmax.risk import cvar_variational, empirical_cvar, empirical_var

from oracles import cvar_tau_grid, tail_mean_by_definition

FIVE = [0.2, 0.4, 0.6, 0.8, 1.0]


class TestEmpiricalVar:
    def test_worst_fifth(self):
        assert empirical_var(FIVE, 0.2) == 0.4

    def test_alpha_one_is_max(self):
        assert empirical_var(FIVE, 1.0) == 1.0

    def test_constant_sample(self):
        # Pr(v <= tau) is 0 below c, so the sup of feasible tau is c itself.
        assert empirical_var([0.7] * 9, 0.5) == 0.7

    def test_scan_oracle_random(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            v = rng.uniform(0, 1, rng.integers(1, 40))
            alpha = rng.uniform(0.01, 1.0)
            cum = np.cumsum(np.full(v.size, 1.0 / v.size))
            vs = np.sort(v)
            above = np.nonzero(cum > alpha)[0]
            expect = vs[above[0]] if above.size else vs[-1]
            assert empirical_var(v, alpha) == pytest.approx(expect, abs=0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_var([], 0.5)


class TestEmpiricalCvar:
    def test_worst_one_of_five(self):
        assert empirical_cvar(FIVE, 0.2) == pytest.approx(0.2)

    def test_alpha_one_is_mean(self):
        assert empirical_cvar(FIVE, 1.0) == pytest.approx(0.6)

    def test_worst_two_of_five(self):
        assert empirical_cvar(FIVE, 0.4) == pytest.approx(0.3)

    def test_fractional_boundary_atom(self):
        # alpha*N = 1.5: half of the second-worst value enters the tail.
        assert empirical_cvar(FIVE, 0.3) == pytest.approx((0.2 + 0.5 * 0.4) / 1.5)

    def test_matches_independent_tail_mean(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            v = rng.uniform(0, 1, rng.integers(1, 60))
            alpha = rng.uniform(0.02, 1.0)
            assert empirical_cvar(v, alpha) == pytest.approx(
                tail_mean_by_definition(v, alpha), abs=1e-12)

    def test_alpha_range_checked(self):
        with pytest.raises(ValueError):
            empirical_cvar(FIVE, 0.0)
        with pytest.raises(ValueError):
            empirical_cvar(FIVE, 1.2)
        with pytest.raises(ValueError):
            empirical_cvar([], 0.5)


class TestVariational:
    def test_single_value(self):
        assert cvar_variational([0.3], 0.4) == (0.3, 0.3)

    def test_alpha_one_smallest_maximizer_is_max(self):
        v = [0.1, 0.5, 0.9]
        val, tau = cvar_variational(v, 1.0)
        grid_val, grid_tau_ = cvar_tau_grid(v, 1.0)
        assert val == pytest.approx(np.mean(v), abs=1e-12)
        assert tau == pytest.approx(0.9, abs=1e-12)
        assert val == pytest.approx(grid_val, abs=1e-5)
        assert tau == pytest.approx(grid_tau_, abs=1e-4)

    def test_equals_tail_mean_exactly(self):
        rng = np.random.default_rng(23)
        for _ in range(500):
            v = rng.uniform(0, 1, rng.integers(1, 80))
            alpha = rng.uniform(0.01, 1.0)  # alpha*N rarely integral
            val, tau = cvar_variational(v, alpha)
            assert abs(val - empirical_cvar(v, alpha)) <= 1e-12
            assert tau in v  # optimum attained at a sample point

    def test_matches_tau_grid(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            v = rng.uniform(0, 1, 25)
            alpha = rng.uniform(0.05, 1.0)
            val, _ = cvar_variational(v, alpha)
            grid_val, _ = cvar_tau_grid(v, alpha)
            assert val >= grid_val - 1e-12
            assert val <= grid_val + 1e-4  # grid resolution slack


class TestRiskProperties:
    def test_cvar_below_mean_below_max(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            v = rng.uniform(0, 1, 30)
            alpha = rng.uniform(0.05, 1.0)
            c = empirical_cvar(v, alpha)
            assert c <= np.mean(v) + 1e-12
            assert c <= np.max(v) + 1e-12

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(37)
        v = rng.uniform(0, 1, 50)
        alphas = np.linspace(0.05, 1.0, 25)
        cs = [empirical_cvar(v, a) for a in alphas]
        assert np.all(np.diff(cs) >= -1e-12)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            v = rng.uniform(0, 0.5, 20)
            c = rng.uniform(0, 0.4)
            assert empirical_cvar(v + c, 0.3) == pytest.approx(
                empirical_cvar(v, 0.3) + c, abs=1e-12)

    def test_weighted_sample(self):
        # Duplicating a value must equal doubling its weight.
        v = [0.1, 0.5, 0.9]
        w = [0.5, 0.25, 0.25]
        assert empirical_cvar(v, 0.6, weights=w) == pytest.approx(
            empirical_cvar([0.1, 0.1, 0.5, 0.9], 0.6))
        assert empirical_var(v, 0.6, weights=w) == empirical_var(
            [0.1, 0.1, 0.5, 0.9], 0.6)
