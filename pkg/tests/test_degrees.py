import math

import numpy as np
import pytest

from hopf_dynlab import DomainError, NumericError, HopfParams, degree_report, growth_rate, mass_estimate, power_map
from hopf_dynlab.degrees import GrowthSeries, MassEstimate, _mass_table


def synthetic(values, q=0, rel=0.0):
    return GrowthSeries(q, tuple(MassEstimate(n, q, math.log(v), rel) for n, v in enumerate(values)), 0, 0)


class TestMass:
    def test_q0_constant_in_n(self, power2):
        table = _mass_table(power2, range(5), [0], 20_000, seed=1)
        m = [table[(n, 0)].mass for n in range(5)]
        assert max(m) / min(m) - 1 < 1e-12
        est = table[(0, 0)]
        assert abs(est.mass - power2.params.omega_volume()) < 3 * est.stderr

    def test_omega_volume_k3(self):
        F = power_map(HopfParams(3, 1.5 * np.exp(0.3j)), 2)
        est = mass_estimate(F, 0, 0, 50_000, seed=2)
        assert abs(est.mass - F.params.omega_volume()) < 3 * est.stderr

    def test_n0_independent_of_q(self, gen2):
        table = _mass_table(gen2, [0], [0, 1, 2], 5000, seed=3)
        assert table[(0, 0)].log_mass == pytest.approx(table[(0, 1)].log_mass, abs=1e-12)
        assert table[(0, 0)].log_mass == pytest.approx(table[(0, 2)].log_mass, abs=1e-12)

    def test_top_degree_one_step(self, power2):
        table = _mass_table(power2, [0, 1], [2], 100_000, seed=4)
        m0, m1 = table[(0, 2)], table[(1, 2)]
        ratio = m1.mass / m0.mass
        assert abs(ratio - 8) < 3 * 8 * math.hypot(m0.rel_stderr, m1.rel_stderr)

    def test_metric_scale_invariance(self, gen2):
        a = _mass_table(gen2, range(5), [1], 5000, seed=5)
        b = _mass_table(gen2, range(5), [1], 5000, seed=5, metric_scale=2.0)
        for n in range(5):
            assert b[(n, 1)].mass == pytest.approx(4 * a[(n, 1)].mass, rel=1e-12)

    def test_worker_invariance(self, gen2):
        a = _mass_table(gen2, range(4), [0, 1, 2], 9000, seed=6, workers=1)
        b = _mass_table(gen2, range(4), [0, 1, 2], 9000, seed=6, workers=3)
        assert a == b

    def test_preconditions(self, power2):
        with pytest.raises(DomainError):
            mass_estimate(power2, 3, 1, 5000, seed=0)
        with pytest.raises(DomainError):
            mass_estimate(power2, 1, 1, 10, seed=0)

    def test_moderately_deep_iterate(self, power3):
        # most orbits collapse onto an axis in floating point; the band near the torus carries the mass
        est = mass_estimate(power3, 2, 6, 100_000, seed=7)
        assert np.isfinite(est.log_mass)
        assert est.rel_stderr < 0.2

    def test_fully_collapsed_mass_is_an_error(self, power3):
        with pytest.raises(NumericError, match="vanished"):
            mass_estimate(power3, 2, 40, 2000, seed=7)


class TestGrowthRate:
    def test_exact_geometric(self):
        fit = growth_rate(synthetic([3 * 2.0**n for n in range(8)]), (0, 7))
        assert fit.slope == pytest.approx(math.log(2), abs=1e-14)
        assert fit.r2 == pytest.approx(1.0, abs=1e-14)
        assert fit.slope_error == 0

    def test_constant(self):
        fit = growth_rate(synthetic([5.0] * 6), (0, 5))
        assert fit.slope == pytest.approx(0, abs=1e-15)
        assert fit.r2 == 1.0

    def test_noisy(self, rng):
        for _ in range(50):
            eps = rng.uniform(-0.05, 0.05, 7)
            fit = growth_rate(synthetic(8.0 ** np.arange(7) * (1 + eps)), (2, 6))
            assert abs(fit.slope - math.log(8)) < 0.03

    def test_slope_error_formula(self):
        fit = growth_rate(synthetic([2.0**n for n in range(5)], rel=0.01), (0, 4))
        # OLS: var(slope) = sum(xc^2 sigma^2) / Sxx^2 = sigma^2 / Sxx
        assert fit.slope_error == pytest.approx(0.01 / math.sqrt(10))

    def test_window_too_small(self):
        with pytest.raises(DomainError):
            growth_rate(synthetic([1, 2, 4, 8]), (2, 3))

    def test_series_must_increase(self):
        e = MassEstimate(1, 0, 0.0, 0.0)
        with pytest.raises(DomainError):
            GrowthSeries(0, (e, e), 0, 0)


@pytest.fixture(scope="module")
def report2():
    return degree_report(power_map(HopfParams(2, 2.0), 2), 6, 100_000, seed=10, certify_budget=5000)


class TestDegreeReport:
    def test_topological_degree(self, report2):
        assert 7.6 <= report2.estimate(2) <= 8.4
        assert report2.fits[2].r2 >= 0.99

    def test_middle_degree_bounds(self, report2):
        r_hat = report2.checks["r_hat"]
        assert 4 * 0.9 <= report2.estimate(1) <= r_hat**2 * 4 * 1.1

    def test_checks(self, report2):
        ch = report2.checks
        assert ch["d0"]["estimate"] == pytest.approx(1.0, abs=1e-9)
        assert all(e["passed"] for e in ch["lemma_bound"])
        assert ch["dominant"]
        assert ch["d_exceeds_r2"]

    def test_rows(self, report2):
        rows = list(report2.series_rows())
        assert len(rows) == 3 * 7
        assert rows[0][:2] == (0, 0)

    def test_cubic_dominance(self):
        rep = degree_report(power_map(HopfParams(2, 2.0), 3), 5, 100_000, seed=11, certify_budget=5000)
        assert rep.checks["dominant"]
        assert rep.estimate(2) / rep.estimate(1) >= 3 * 0.9

    def test_three_dimensional(self):
        rep = degree_report(power_map(HopfParams(3, 2.0), 2), 5, 20_000, seed=12, certify_budget=2000)
        assert rep.estimate(3) == pytest.approx(16, rel=0.1)
        assert rep.checks["dominant"]

    def test_n_max_floor(self, power2):
        with pytest.raises(DomainError):
            degree_report(power2, 3, 1000, seed=0)
