import csv
import io
import math

import numpy as np
import pytest
from scipy import stats

from hopf_dynlab import (DomainError, StartMeasure, builtin_observables, invariance_check, nu_independence,
                         sample_equilibrium, test_average as average)
from hopf_dynlab.equilibrium import (constant_observable, extend_cloud, jackknife_mean, log_abs_z1_observable,
                                     observable_by_name, sample_start)
from hopf_dynlab.geometry import hopf_distance

from oracles import angle_doubling_chain

UNIFORM = StartMeasure("uniform_annulus")
GAUSS = StartMeasure("gaussian_projected")


@pytest.fixture(scope="module")
def cloud12():
    from hopf_dynlab import HopfParams, power_map

    F = power_map(HopfParams(2, 2.0), 2)
    return F, sample_equilibrium(F, 12, 10_000, UNIFORM, seed=7)


class TestStartMeasures:
    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            StartMeasure("dirac")

    def test_smoothed_needs_center(self):
        with pytest.raises(DomainError):
            StartMeasure("point_mass_smoothed")

    @pytest.mark.parametrize("kind", ["uniform_annulus", "gaussian_projected"])
    def test_samples_in_annulus(self, params2, rng, kind):
        z = sample_start(StartMeasure(kind), params2, 1000, rng)
        nrm = np.linalg.norm(z, axis=-1)
        assert np.all((nrm >= 1) & (nrm < 2))

    def test_uniform_radius_law(self, params2, rng):
        # Lebesgue on the annulus: |z|^4 is uniform on [1, 16] for k = 2
        z = sample_start(UNIFORM, params2, 20_000, rng)
        r4 = np.linalg.norm(z, axis=-1) ** 4
        assert stats.kstest(r4, stats.uniform(1, 15).cdf).pvalue > 0.01

    def test_smoothed_near_center(self, params2, rng):
        start = StartMeasure("point_mass_smoothed", (1.2, 0.3j), 1e-3)
        z = sample_start(start, params2, 100, rng)
        assert np.max(np.abs(z - np.array([1.2, 0.3j]))) <= 1e-3


class TestSampler:
    def test_smoke(self, cloud12):
        F, cloud = cloud12
        assert cloud.lifts.shape == (10_000, 2)
        assert np.all(np.isfinite(cloud.lifts))

    def test_argument_uniform(self, cloud12):
        _, cloud = cloud12
        arg = np.mod(np.angle(cloud.lifts[:, 0]), 2 * np.pi)
        assert stats.kstest(arg, stats.uniform(0, 2 * np.pi).cdf).pvalue > 0.01
        # the same marginal through the explicit angle-halving chain
        rng = np.random.default_rng(1)
        oracle = angle_doubling_chain(rng.uniform(0, 2 * np.pi, 10_000), 12, rng)
        assert stats.ks_2samp(arg, oracle).pvalue > 0.01

    def test_power_cloud_on_torus(self, cloud12):
        # depth 12 contracts log|z1/z2| by 2^-12
        _, cloud = cloud12
        ratio = np.abs(np.log(np.abs(cloud.lifts[:, 0] / cloud.lifts[:, 1])))
        assert np.median(ratio) < 1e-3

    def test_fixed_seed(self, power2):
        a = sample_equilibrium(power2, 6, 500, GAUSS, seed=3)
        b = sample_equilibrium(power2, 6, 500, GAUSS, seed=3)
        np.testing.assert_array_equal(a.lifts, b.lifts)

    def test_worker_invariance(self, gen2):
        a = sample_equilibrium(gen2, 4, 9000, UNIFORM, seed=11, workers=1)
        b = sample_equilibrium(gen2, 4, 9000, UNIFORM, seed=11, workers=3)
        assert a.to_csv() == b.to_csv()

    def test_prefix_stable(self, power2):
        # block streams make the first rows independent of the total count
        a = sample_equilibrium(power2, 5, 5000, UNIFORM, seed=2)
        b = sample_equilibrium(power2, 5, 9000, UNIFORM, seed=2)
        np.testing.assert_array_equal(a.lifts[:4096], b.lifts[:4096])

    def test_preconditions(self, power2):
        with pytest.raises(DomainError):
            sample_equilibrium(power2, 0, 10, UNIFORM, seed=0)

    def test_csv(self, power2):
        cloud = sample_equilibrium(power2, 3, 5, UNIFORM, seed=0)
        rows = list(csv.reader(io.StringIO(cloud.to_csv())))
        assert rows[0] == ["orbit_index", "re_z1", "im_z1", "re_z2", "im_z2", "depth", "seed"]
        assert len(rows) == 6
        back = np.array([[float(r[1]) + 1j * float(r[2]), float(r[3]) + 1j * float(r[4])] for r in rows[1:]])
        np.testing.assert_array_equal(back, cloud.lifts)

    def test_extend_is_one_backward_step(self, gen2):
        cloud = sample_equilibrium(gen2, 3, 300, UNIFORM, seed=1)
        ext = extend_cloud(gen2, cloud)
        assert ext.depth == 4
        fwd, _ = gen2.step_lifts(ext.lifts)
        assert np.max(hopf_distance(fwd, cloud.lifts, gen2.params)) < 1e-9


class TestAverages:
    def test_constant(self, cloud12):
        _, cloud = cloud12
        assert average(cloud, constant_observable()) == (1.0, 0.0)

    def test_jackknife_is_classical(self, rng):
        x = rng.standard_normal(500)
        m, se = jackknife_mean(x)
        assert se == pytest.approx(np.std(x, ddof=1) / math.sqrt(500), rel=1e-10)

    def test_antisymmetric_near_zero(self, cloud12):
        F, cloud = cloud12
        m, se = average(cloud, observable_by_name(F.params, "re_z1_conj_z2"))
        assert abs(m) < 3 * se

    def test_half_clouds_agree(self, cloud12):
        F, cloud = cloud12
        h = len(cloud) // 2
        for obs in builtin_observables(F.params):
            ma, sa = average(cloud.subset(h), obs)
            vals = obs(cloud.lifts[h:])
            mb, sb = jackknife_mean(vals)
            se = math.hypot(sa, sb)
            assert se == 0 or abs(ma - mb) < 3 * se

    def test_singular_observable_guard(self):
        with pytest.raises(DomainError):
            log_abs_z1_observable()(np.array([[0.0, 1.0]]))


class TestDiagnostics:
    def test_nu_independence_depth12(self, power2):
        zs = nu_independence(power2, 12, 10_000, UNIFORM, GAUSS, builtin_observables(power2.params), seed=5)
        assert all(s.passed for s in zs), [(s.observable, s.z) for s in zs]

    def test_identical_starts_and_seeds(self, power2):
        zs = nu_independence(power2, 4, 1000, UNIFORM, UNIFORM, builtin_observables(power2.params), seed=5, seed_b=5)
        assert all(s.z == 0 for s in zs)

    def test_transient_regime_reported(self, power2, capsys):
        skewed = StartMeasure("point_mass_smoothed", (1.5, 0.2), 0.05)
        zs = nu_independence(power2, 1, 10_000, UNIFORM, skewed, builtin_observables(power2.params), seed=5)
        with capsys.disabled():
            print("\n  depth-1 skewed start |z|:", {s.observable: round(abs(s.z), 1) for s in zs})
        assert len(zs) == 4

    def test_invariance_depth12(self, cloud12):
        F, cloud = cloud12
        res = invariance_check(F, cloud, builtin_observables(F.params))
        assert res.passed, [(s.observable, s.z) for s in res.pushforward + res.pullback]

    def test_invariance_constant_exact(self, cloud12):
        F, cloud = cloud12
        res = invariance_check(F, cloud, [constant_observable()])
        assert res.pushforward[0].z == 0 and res.pullback[0].z == 0

    def test_invariance_needs_depth(self, power2):
        shallow = sample_equilibrium(power2, 2, 100, UNIFORM, seed=0)
        with pytest.raises(DomainError):
            invariance_check(power2, shallow, [constant_observable()])

    def test_truncated_depth_trend_reported(self, power2, capsys):
        obs = builtin_observables(power2.params)
        worst = {}
        for depth in (2, 12):
            cloud = sample_equilibrium(power2, depth, 10_000, GAUSS, seed=8)
            res = invariance_check(power2, cloud, obs, min_depth=1)
            worst[depth] = max(abs(s.z) for s in res.pushforward + res.pullback)
        with capsys.disabled():
            print("\n  invariance max |z| by depth:", {d: round(v, 2) for d, v in worst.items()})
        assert all(np.isfinite(v) for v in worst.values())
