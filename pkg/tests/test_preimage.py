import math

import numpy as np
import pytest

from hopf_dynlab import (DomainError, HopfParams, backward_orbit, forward_step, general2d_map, normalize,
                         periodic_points, power_map, preimages, random_preimage)
from hopf_dynlab.geometry import HopfPoint, hopf_distance
from hopf_dynlab.preimage import pairwise_inequivalent, random_preimage_lifts

from conftest import random_lifts
from oracles import power_preimage_radicals


def maps(params2):
    return {
        "power2": power_map(params2, 2),
        "power3": power_map(params2, 3, (1.0, 0.5 - 0.5j)),
        "gen2": general2d_map(params2, (1.0, 0.3 - 0.2j, 0.1), (0.2j, -0.4, 1.0 + 0.1j)),
        "gen3": general2d_map(params2, (1.0, 0.2, -0.3j, 0.1), (0.1, 0.5j, -0.2, 1.0)),
    }


@pytest.mark.parametrize("name", ["power2", "power3", "gen2", "gen3"])
def test_complete_branch_set(params2, rng, name):
    F = maps(params2)[name]
    for z in random_lifts(rng, 10, 2):
        x = normalize(z, F.params)
        bs = preimages(F, x)
        assert len(bs.branches) == F.degree**3
        assert not bs.flagged
        assert max(b.residual for b in bs.branches) < 1e-10
        assert pairwise_inequivalent([b.point for b in bs.branches], F.params)
        for b in bs.branches:
            assert hopf_distance(forward_step(F, b.point).lift, x.lift, F.params) < 1e-10


def test_power_branches_match_radicals(power2, rng):
    for z in random_lifts(rng, 5, 2):
        x = normalize(z, power2.params)
        ours = preimages(power2, x).lifts()
        oracle = power_preimage_radicals((1, 1), 2.0, 2, x.lift)
        assert len(oracle) == 8
        for w, _ in oracle:
            assert np.min(hopf_distance(w, ours, power2.params)) < 1e-12


def test_critical_target_flags(power2):
    bs = preimages(power2, normalize([1, 0], power2.params))
    assert len(bs.branches) == 8
    assert bs.flagged
    assert bs.distinct_count == 4
    assert bs.deficit == 4


def test_critical_value_of_plane_map(params2):
    # F = (z1^2, z1 z2 + z2^2) has det DF = 2 z1 (z1 + 2 z2); the image of the critical
    # line z1 = -2 z2 has the double preimage direction (-2, 1)
    F = general2d_map(params2, (1, 0, 0), (0, 1, 1))
    crit = np.array([-2.0, 1.0])
    assert abs(np.linalg.det(F.jac(crit))) < 1e-12
    bs = preimages(F, normalize(F.apply(crit), params2))
    assert bs.flagged
    assert bs.distinct_count < 8


def test_random_branch_uniform(params2, rng):
    n = 100_000
    for F in (maps(params2)["power2"], maps(params2)["gen2"]):
        x = normalize(np.array([0.7 + 0.2j, -0.4 + 0.9j]), F.params)
        branches = preimages(F, x).lifts()
        w, crit = random_preimage_lifts(F, np.repeat(x.lift[None], n, axis=0), rng)
        assert not crit.any()
        dist = np.stack([hopf_distance(b, w, F.params) for b in branches], axis=-1)
        assert np.all(np.min(dist, axis=-1) < 1e-9)
        counts = np.bincount(np.argmin(dist, axis=-1), minlength=8)
        p = 1 / 8
        sigma = math.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) < 3 * sigma), counts


def test_random_preimage_deterministic_and_consistent(gen2):
    x = normalize([0.3, 1.1j], gen2.params)
    a = [random_preimage(gen2, x, np.random.default_rng(4)).lift for _ in range(3)]
    b = [random_preimage(gen2, x, np.random.default_rng(4)).lift for _ in range(3)]
    np.testing.assert_array_equal(a, b)
    w = random_preimage(gen2, x, np.random.default_rng(5))
    assert hopf_distance(forward_step(gen2, w).lift, x.lift, gen2.params) < 1e-10


class TestBackwardOrbit:
    def test_depth_zero(self, power2, rng):
        x = normalize([1, 2j], power2.params)
        assert backward_orbit(power2, x, 0, rng) == [x]

    def test_forward_check(self, gen2, rng):
        orbit = backward_orbit(gen2, normalize([0.5, -1 + 0.3j], gen2.params), 10, rng)
        assert len(orbit) == 11
        for a, b in zip(orbit, orbit[1:]):
            assert hopf_distance(forward_step(gen2, b).lift, a.lift, gen2.params) < 1e-9

    def test_power_orbit_approaches_torus(self, power2, rng):
        # radical oracle: log|w1/w2| = log|z1/z2| / d at every backward step
        x = normalize([3.0, 0.1j], power2.params)
        orbit = backward_orbit(power2, x, 12, rng)
        r0 = math.log(abs(x.lift[0] / x.lift[1]))
        for j, p in enumerate(orbit):
            assert math.log(abs(p.lift[0] / p.lift[1])) == pytest.approx(r0 / 2**j, abs=1e-12)

    def test_negative_depth(self, power2, rng):
        with pytest.raises(DomainError):
            backward_orbit(power2, normalize([1, 1], power2.params), -1, rng)


class TestPeriodicPoints:
    @pytest.mark.parametrize("n,count", [(1, 3), (2, 45)])
    def test_power_counts(self, power2, n, count):
        pts, notes = periodic_points(power2, n)
        assert len(pts) == count
        assert notes == []
        assert max(p.residual for p in pts) <= 1e-9
        assert pairwise_inequivalent([p.point for p in pts], power2.params)

    def test_forward_verification(self, gen2):
        pts, _ = periodic_points(gen2, 2)
        assert len(pts) == 45
        for p in pts:
            z = p.point
            for _ in range(2):
                z = forward_step(gen2, z)
            assert hopf_distance(z.lift, p.point.lift, gen2.params) <= 1e-9

    def test_period_three(self, power2):
        pts, _ = periodic_points(power2, 3)
        assert len(pts) == (8 + 1) * 7**2
        assert max(p.residual for p in pts) <= 1e-9

    def test_limits(self, power2, power3):
        with pytest.raises(DomainError):
            periodic_points(power3, 2)
        with pytest.raises(DomainError):
            periodic_points(power_map(HopfParams(3, 2.0), 2), 1)
