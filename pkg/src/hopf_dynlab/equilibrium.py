"""Empirical equilibrium measures from random backward orbits, and the
diagnostics that probe start-measure independence and invariance."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError, HopfParams, HopfPoint, normalize_lifts
from .maps import HomogeneousMap, NumericError
from .preimage import random_preimage_lifts
from .streams import TAG_BACKWARD, TAG_EXTEND, TAG_START, map_blocks, substream

START_KINDS = ("uniform_annulus", "gaussian_projected", "point_mass_smoothed")
Z_THRESHOLD = 3.0
MAX_RESAMPLE_ROUNDS = 20


@dataclass(frozen=True)
class StartMeasure:
    """Absolutely continuous start measure nu on H.

    ``center`` and ``radius`` are used by ``point_mass_smoothed`` only (uniform
    on the Euclidean ball of that radius around the lift ``center``).
    """

    kind: str = "uniform_annulus"
    center: tuple = ()
    radius: float = 1e-3

    def __post_init__(self):
        if self.kind not in START_KINDS:
            raise DomainError(f"unknown start measure {self.kind!r}; expected one of {START_KINDS}")
        if self.kind == "point_mass_smoothed":
            if not self.center:
                raise DomainError("point_mass_smoothed needs a center")
            if not self.radius > 0:
                raise DomainError("the smoothing radius must be positive")
            object.__setattr__(self, "center", tuple(complex(c) for c in self.center))

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "point_mass_smoothed":
            out["center"] = [[c.real, c.imag] for c in self.center]
            out["radius"] = self.radius
        return out


def _unit_sphere(rng, n, k):
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_start(start: StartMeasure, params: HopfParams, n: int, rng) -> np.ndarray:
    """n normalized lifts drawn from the start measure."""
    k = params.k
    if start.kind == "uniform_annulus":
        u = _unit_sphere(rng, n, k)
        R = abs(params.lam)
        r = (1.0 + rng.random(n) * (R ** (2 * k) - 1.0)) ** (1.0 / (2 * k))
        z = u * r[:, None]
    elif start.kind == "gaussian_projected":
        z = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    else:
        c = np.asarray(start.center, dtype=complex)
        if c.shape != (k,):
            raise DomainError(f"center must have {k} coordinates")
        u = _unit_sphere(rng, n, k)
        r = start.radius * rng.random(n) ** (1.0 / (2 * k))
        z = c + u * r[:, None]
    lifts, _ = normalize_lifts(z, params)
    return lifts


@dataclass(frozen=True, eq=False)
class SampleCloud:
    """Endpoints of independent depth-n backward orbits; row i is orbit i."""

    lifts: np.ndarray
    depth: int
    map_info: dict
    start: StartMeasure
    seed: int
    params: HopfParams = field(repr=False)
    resampled: int = 0

    def __len__(self):
        return len(self.lifts)

    def point(self, i: int) -> HopfPoint:
        return HopfPoint(self.lifts[i], self.params)

    def subset(self, stop: int) -> "SampleCloud":
        return SampleCloud(self.lifts[:stop], self.depth, self.map_info, self.start, self.seed, self.params)

    def to_csv(self) -> str:
        k = self.lifts.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["orbit_index"]
        for j in range(1, k + 1):
            head += [f"re_z{j}", f"im_z{j}"]
        w.writerow(head + ["depth", "seed"])
        for i, z in enumerate(self.lifts):
            row = [i]
            for c in z:
                row += [repr(float(c.real)), repr(float(c.imag))]
            w.writerow(row + [self.depth, self.seed])
        return buf.getvalue()


def _backward_block(F, depth, start, seed, tag_start, block, n):
    """Run n backward orbits for one block, restarting orbits that hit the critical-value locus."""
    rng_start = substream(seed, tag_start, block)
    rng_back = substream(seed, TAG_BACKWARD, block)
    out = np.empty((n, F.k), dtype=complex)
    todo = np.arange(n)
    restarts = 0
    for _ in range(MAX_RESAMPLE_ROUNDS):
        z = sample_start(start, F.params, len(todo), rng_start)
        bad = np.zeros(len(todo), dtype=bool)
        for _ in range(depth):
            z, crit = random_preimage_lifts(F, z, rng_back)
            bad |= crit
        out[todo[~bad]] = z[~bad]
        todo = todo[bad]
        if len(todo) == 0:
            return out, restarts
        restarts += len(todo)
    raise NumericError(f"backward orbits {todo.tolist()} kept hitting the critical-value locus")


def sample_equilibrium(F: HomogeneousMap, depth: int, count: int, start: StartMeasure, seed: int,
                       workers: int = 1) -> SampleCloud:
    """Approximate d_k^-n (f^n)^* nu by endpoints of independent backward orbits."""
    if depth < 1 or count < 1:
        raise DomainError("need depth >= 1 and count >= 1")
    parts = map_blocks(lambda b, lo, hi: _backward_block(F, depth, start, seed, TAG_START, b, hi - lo),
                       count, workers)
    lifts = np.concatenate([p[0] for p in parts])
    return SampleCloud(lifts, depth, F.describe(), start, int(seed), F.params, sum(p[1] for p in parts))


def extend_cloud(F: HomogeneousMap, cloud: SampleCloud, seed: int | None = None, workers: int = 1):
    """One more backward step on every orbit; returns (new cloud, paired original indices).

    Orbits whose endpoint is critical keep their place by retrying the branch draw.
    """
    seed = cloud.seed if seed is None else seed

    def run(b, lo, hi):
        rng = substream(seed, TAG_EXTEND, b)
        z = cloud.lifts[lo:hi]
        w, crit = random_preimage_lifts(F, z, rng)
        for _ in range(MAX_RESAMPLE_ROUNDS):
            if not crit.any():
                return w
            w2, crit2 = random_preimage_lifts(F, z[crit], rng)
            w[crit] = w2
            crit[crit] = crit2
        raise NumericError("cloud extension hit the critical-value locus repeatedly")

    lifts = np.concatenate(map_blocks(run, len(cloud), workers))
    return SampleCloud(lifts, cloud.depth + 1, cloud.map_info, cloud.start, cloud.seed, cloud.params)


# observables -------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """A function on H evaluated on stacks of lifts (must be lambda-invariant)."""

    name: str
    fn: object
    holder_exponent: float = 1.0
    holder_constant: float = float("nan")

    def __call__(self, lifts):
        return np.asarray(self.fn(np.asarray(lifts, dtype=complex)), dtype=float)


def _sq(z):
    return np.sum(np.abs(z) ** 2, axis=-1)


def builtin_observables(params: HopfParams) -> list[Observable]:
    L = params.log_abs_lam
    # Lipschitz constants w.r.t. the Euclidean metric on the annulus
    return [
        Observable("re_z1_conj_z2", lambda z: np.real(z[:, 0] * np.conj(z[:, 1])) / _sq(z), 1.0, 1.0),
        Observable("abs_z1_sq", lambda z: np.abs(z[:, 0]) ** 2 / _sq(z), 1.0, 1.0),
        Observable("cos_log_radius", lambda z: np.cos(np.pi * np.log(_sq(z)) / L), 1.0, 2 * np.pi / L),
        Observable("sin_log_radius", lambda z: np.sin(np.pi * np.log(_sq(z)) / L), 1.0, 2 * np.pi / L),
    ]


def observable_by_name(params: HopfParams, name: str) -> Observable:
    for obs in builtin_observables(params) + [log_abs_z1_observable(), constant_observable()]:
        if obs.name == name:
            return obs
    raise DomainError(f"unknown observable {name!r}")


def constant_observable(value: float = 1.0) -> Observable:
    return Observable("constant", lambda z: np.full(len(z), value), 1.0, 0.0)


def log_abs_z1_observable() -> Observable:
    """log(|z1| / |z|) <= 0, singular on {z1 = 0}; quasi-p.s.h. type."""

    def fn(z):
        a = np.abs(z[:, 0])
        if np.any(a == 0):
            raise DomainError("sample on the analytic set {z1 = 0}")
        return np.log(a) - 0.5 * np.log(_sq(z))

    return Observable("log_abs_z1", fn, 1.0, float("inf"))


# diagnostics ---------------------------------------------------------------------


def jackknife_mean(values):
    """Mean and jackknife standard error (equal to the classical s/sqrt(n))."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise DomainError("empty sample")
    mean = float(np.mean(x))
    if n == 1:
        return mean, 0.0
    loo = (np.sum(x) - x) / (n - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - np.mean(loo)) ** 2)))
    return mean, se


def test_average(cloud: SampleCloud, obs: Observable):
    return jackknife_mean(obs(cloud.lifts))


test_average.__test__ = False  # not a pytest test


def _z(diff, se):
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


@dataclass(frozen=True)
class ZScore:
    observable: str
    z: float
    mean_a: float
    mean_b: float

    @property
    def passed(self) -> bool:
        return abs(self.z) < Z_THRESHOLD


def nu_independence(F: HomogeneousMap, depth: int, count: int, start_a: StartMeasure, start_b: StartMeasure,
                    observables, seed: int, seed_b: int | None = None, workers: int = 1):
    """z-scores of the mean difference between clouds grown from two start measures.

    The second cloud uses an independent stream (``seed_b``, default ``seed + 1``).
    """
    seed_b = seed + 1 if seed_b is None else seed_b
    ca = sample_equilibrium(F, depth, count, start_a, seed, workers)
    cb = sample_equilibrium(F, depth, count, start_b, seed_b, workers)
    out = []
    for obs in observables:
        ma, sa = test_average(ca, obs)
        mb, sb = test_average(cb, obs)
        out.append(ZScore(obs.name, _z(ma - mb, math.hypot(sa, sb)), ma, mb))
    return out


@dataclass(frozen=True)
class InvarianceResult:
    pushforward: list
    pullback: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.pushforward + self.pullback)


def invariance_check(F: HomogeneousMap, cloud: SampleCloud, observables, extend_seed: int | None = None,
                     workers: int = 1, min_depth: int = 10) -> InvarianceResult:
    """Paired z-scores for <phi o f> vs <phi> and for one extra backward step vs <phi>."""
    if cloud.depth < min_depth:
        raise DomainError(f"cloud depth {cloud.depth} < {min_depth}")
    fwd, _ = F.step_lifts(cloud.lifts)
    ext = extend_cloud(F, cloud, extend_seed, workers)
    push, pull = [], []
    for obs in observables:
        base = obs(cloud.lifts)
        for lifts, dest in ((fwd, push), (ext.lifts, pull)):
            other = obs(lifts)
            m, se = jackknife_mean(other - base)
            dest.append(ZScore(obs.name, _z(m, se), float(np.mean(base)), float(np.mean(other))))
    return InvarianceResult(push, pull)
