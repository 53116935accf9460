import numpy as np
import pytest

from cvarmax.objective import (
    ScenarioTimes,
    SensorObjective,
    coverage_oracle,
    modular_oracle,
    multilinear_gradient_estimate,
    multilinear_value_estimate,
    sensor_gradient,
    sensor_value,
)

from oracles import central_difference, enumerate_multilinear, enumerate_multilinear_gradient


def random_scenario(rng, n):
    z = rng.uniform(0, 10, n)
    z[rng.integers(n)] = 0.0  # a source
    return ScenarioTimes(z, float(z.max()))


class TestScenarioTimes:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioTimes(np.array([1.0, 5.0]), 3.0)  # z_max not the max
        with pytest.raises(ValueError):
            ScenarioTimes(np.array([-1.0, 3.0]), 3.0)
        with pytest.raises(ValueError):
            ScenarioTimes(np.array([np.inf, 1.0]), np.inf)

    def test_degenerate_flag(self):
        assert ScenarioTimes(np.zeros(3), 0.0).degenerate
        assert not ScenarioTimes(np.array([0.0, 2.0]), 2.0).degenerate

    def test_sort_stable_on_ties(self):
        z = ScenarioTimes(np.array([2.0, 1.0, 2.0, 2.0]), 2.0)
        assert list(z.order) == [1, 0, 2, 3]


class TestSensorValue:
    def test_no_sensors_no_time_saved(self):
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        assert sensor_value(np.zeros(2), z, SensorObjective(0.5)) == 0.0

    def test_two_vertex_enumeration(self):
        # Detect at the early vertex w.p. 1/2, saving z_max - z_1 = 2.
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        obj = SensorObjective(0.5)
        assert sensor_value(np.array([1.0, 0.0]), z, obj) == pytest.approx(1 / 3)

    def test_saturated_sensor(self):
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        obj = SensorObjective(0.5)
        assert sensor_value(np.array([30.0, 0.0]), z, obj) == pytest.approx(2 / 3, abs=1e-6)

    def test_unnormalized_scale(self):
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        raw = SensorObjective(0.5, normalization=False)
        assert sensor_value(np.array([1.0, 0.0]), z, raw) == pytest.approx(1.0)

    def test_undetected_mass_flag(self):
        # With the undetected term restored, the value at x = 0 is z_max.
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        literal = SensorObjective(0.5, normalization=False, count_undetected=True)
        assert sensor_value(np.zeros(2), z, literal) == pytest.approx(3.0)
        # The two forms differ exactly by the undetected mass.
        x = np.array([0.7, 0.4])
        plain = SensorObjective(0.5, normalization=False)
        gap = sensor_value(x, z, literal) - sensor_value(x, z, plain)
        assert gap == pytest.approx(3.0 * 0.5 ** x.sum())

    def test_errors(self):
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        obj = SensorObjective(0.5)
        with pytest.raises(ValueError):
            sensor_value(np.zeros(3), z, obj)
        with pytest.raises(ValueError):
            sensor_value(np.array([-0.1, 0.0]), z, obj)

    def test_degenerate_scenario_is_zero(self):
        z = ScenarioTimes(np.zeros(4), 0.0)
        assert sensor_value(np.ones(4), z, SensorObjective(0.3)) == 0.0
        assert np.all(sensor_gradient(np.ones(4), z, SensorObjective(0.3)) == 0.0)

    def test_range_and_monotone(self):
        rng = np.random.default_rng(3)
        obj = SensorObjective(0.2)
        for _ in range(200):
            z = random_scenario(rng, 6)
            x = rng.uniform(0, 3, 6)
            y = x + rng.uniform(0, 2, 6)
            vx, vy = sensor_value(x, z, obj), sensor_value(y, z, obj)
            assert 0.0 <= vx <= 1.0
            assert vx <= vy + 1e-12

    def test_diminishing_returns(self):
        rng = np.random.default_rng(7)
        obj = SensorObjective(0.3)
        for _ in range(200):
            z = random_scenario(rng, 5)
            x = rng.uniform(0, 2, 5)
            y = x + rng.uniform(0, 2, 5)
            i = rng.integers(5)
            h = rng.uniform(0.1, 1.0)
            e = np.zeros(5)
            e[i] = h
            gain_x = sensor_value(x + e, z, obj) - sensor_value(x, z, obj)
            gain_y = sensor_value(y + e, z, obj) - sensor_value(y, z, obj)
            assert gain_x >= gain_y - 1e-9


class TestSensorGradient:
    def test_single_vertex_saves_nothing(self):
        z = ScenarioTimes(np.array([4.0]), 4.0)
        g = sensor_gradient(np.zeros(1), z, SensorObjective(0.5))
        assert g[0] == 0.0

    def test_closed_form_at_origin(self):
        z = ScenarioTimes(np.array([1.0, 3.0]), 3.0)
        g = sensor_gradient(np.zeros(2), z, SensorObjective(0.5))
        assert g[0] == pytest.approx((2 / 3) * np.log(2))

    def test_matches_central_differences(self):
        rng = np.random.default_rng(13)
        obj = SensorObjective(0.25)
        worst = 0.0
        for _ in range(100):
            z = random_scenario(rng, 8)
            x = rng.uniform(0, 3, 8)
            g = sensor_gradient(x, z, obj)
            fd = central_difference(lambda y: sensor_value(y, z, obj), x, h=1e-5)
            rel = np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12)
            worst = max(worst, rel)
        assert worst <= 1e-5

    def test_nonnegative_entries(self):
        rng = np.random.default_rng(17)
        obj = SensorObjective(0.4)
        for _ in range(100):
            z = random_scenario(rng, 7)
            g = sensor_gradient(rng.uniform(0, 2, 7), z, obj)
            assert np.all(g >= -1e-15)


COVERS = np.array([
    [1, 1, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0],
    [0, 0, 1, 1, 0, 0],
    [0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 1, 1],
    [1, 0, 0, 0, 0, 1],
    [1, 0, 1, 0, 1, 0],
    [0, 1, 0, 1, 0, 1],
    [1, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 1, 1],
], dtype=bool)


class TestMultilinearEstimates:
    def test_integral_point_exact(self):
        f = coverage_oracle(COVERS)
        rng = np.random.default_rng(0)
        x = (rng.random(10) < 0.5).astype(float)
        est = multilinear_value_estimate(f, x, None, 3, rng)
        assert est == pytest.approx(f.evaluate(x.astype(bool), None))

    def test_modular_within_clt_band(self):
        w = np.linspace(0.1, 1.0, 8) / 8
        f = modular_oracle(w)
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, 8)
        exact = float(np.dot(w, x))
        m = 10_000
        sigma = np.sqrt(np.sum(w**2 * x * (1 - x)) / m)
        est = multilinear_value_estimate(f, x, None, m, rng)
        assert abs(est - exact) <= 4 * sigma

    def test_coverage_within_clt_band_of_enumeration(self):
        f = coverage_oracle(COVERS)
        x = np.full(10, 0.5)
        mean, var = enumerate_multilinear(lambda m: f.evaluate(m, None), x)
        rng = np.random.default_rng(2)
        m = 10_000
        est = multilinear_value_estimate(f, x, None, m, rng)
        assert abs(est - mean) <= 4 * np.sqrt(var / m)

    def test_unbiasedness_repeated(self):
        f = coverage_oracle(COVERS[:, :4][:6])
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, 6)
        mean, var = enumerate_multilinear(lambda m: f.evaluate(m, None), x)
        reps, m = 50, 400
        ests = [multilinear_value_estimate(f, x, None, m, rng) for _ in range(reps)]
        assert abs(np.mean(ests) - mean) <= 4 * np.sqrt(var / (m * reps))

    def test_deterministic_given_seed(self):
        f = coverage_oracle(COVERS)
        x = np.full(10, 0.3)
        a = multilinear_value_estimate(f, x, None, 64, np.random.default_rng(9))
        b = multilinear_value_estimate(f, x, None, 64, np.random.default_rng(9))
        assert a == b

    def test_out_of_box_rejected(self):
        f = modular_oracle(np.ones(3))
        with pytest.raises(ValueError):
            multilinear_value_estimate(f, np.array([0.5, 1.2, 0.0]), None, 10,
                                       np.random.default_rng(0))


class TestMultilinearGradient:
    def test_modular_entries_exact(self):
        w = np.array([0.3, 0.1, 0.6]) / 2
        f = modular_oracle(w)
        rng = np.random.default_rng(4)
        g = multilinear_gradient_estimate(f, rng.uniform(0, 1, 3), None, 5, rng)
        np.testing.assert_allclose(g, w, atol=1e-12)

    def test_integral_point_marginal_gain(self):
        f = coverage_oracle(COVERS)
        x = np.zeros(10)
        x[2] = 1.0
        g = multilinear_gradient_estimate(f, x, None, 3, np.random.default_rng(5))
        for i in range(10):
            hi, lo = x.copy(), x.copy()
            hi[i], lo[i] = 1.0, 0.0
            expect = f.evaluate(hi.astype(bool), None) - f.evaluate(lo.astype(bool), None)
            assert g[i] == pytest.approx(expect)

    def test_coverage_matches_enumeration(self):
        f = coverage_oracle(COVERS)
        rng = np.random.default_rng(6)
        x = rng.uniform(0.2, 0.8, 10)
        exact = enumerate_multilinear_gradient(lambda m: f.evaluate(m, None), x)
        reps, m = 40, 500
        ests = np.array([multilinear_gradient_estimate(f, x, None, m, rng)
                         for _ in range(reps)])
        # Coupled differences are in [0, 1]; a 4 sigma band with sigma <= 0.5.
        band = 4 * 0.5 / np.sqrt(m * reps)
        assert np.abs(ests.mean(axis=0) - exact).max() <= band

    def test_nonnegative_for_monotone(self):
        f = coverage_oracle(COVERS)
        rng = np.random.default_rng(7)
        g = multilinear_gradient_estimate(f, rng.uniform(0, 1, 10), None, 100, rng)
        assert np.all(g >= 0)
