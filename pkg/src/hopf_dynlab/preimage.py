"""Inverse branches of f on H: complete preimage sets, random branch steps,
backward orbits and periodic points.

A point w is a preimage of x = [y] when F(w) = lambda^m y for some integer m.
Modulo w ~ lambda w only m = 0, ..., d-1 give distinct classes, so the
d^{k+1} branches split as (preimage directions of f') x (d-th roots of unity)
x (m in 0..d-1).  Branch index order: direction, then root of unity, then m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DomainError, HopfPoint, chordal_distance, hopf_distance, lam_power, normalize_lifts
from .maps import HomogeneousMap, NumericError, binary_form_eval
from .roots import MERGE_TOL, NEWTON_ITERS, batch_roots, binary_form_directions

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Branch:
    point: HopfPoint
    residual: float
    multiplicity_flag: bool
    m: int


@dataclass(frozen=True, eq=False)
class InverseBranchSet:
    target: HopfPoint
    branches: list
    expected_count: int

    @property
    def flagged(self) -> bool:
        return any(b.multiplicity_flag for b in self.branches)

    @property
    def distinct_count(self) -> int:
        lifts = np.array([b.point.lift for b in self.branches])
        keep = []
        for i, z in enumerate(lifts):
            if all(hopf_distance(z, lifts[j], self.target.params) > MERGE_TOL for j in keep):
                keep.append(i)
        return len(keep)

    @property
    def deficit(self) -> int:
        return self.expected_count - self.distinct_count

    def lifts(self) -> np.ndarray:
        return np.array([b.point.lift for b in self.branches])


def _newton_polish(F: HomogeneousMap, w, rhs):
    """Solve F(w) = rhs by damped Newton (vectorized over leading axes)."""
    r = F.apply(w) - rhs
    res = np.linalg.norm(r, axis=-1)
    for _ in range(NEWTON_ITERS):
        if np.all(res <= 1e-15 * np.linalg.norm(rhs, axis=-1)):
            break
        try:
            step = np.linalg.solve(F.jac(w), r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        t = np.ones(res.shape)
        improved = np.zeros(res.shape, dtype=bool)
        for _ in range(6):
            trial = w - t[..., None] * step
            tr = F.apply(trial) - rhs
            tres = np.linalg.norm(tr, axis=-1)
            ok = (tres < res) & ~improved
            w = np.where(ok[..., None], trial, w)
            r = np.where(ok[..., None], tr, r)
            res = np.where(ok, tres, res)
            improved |= ok
            t = t / 2
            if np.all(improved):
                break
        if not np.any(improved):
            break
    return w, res


def _scale_roots(kappa, lam, d, m):
    """All c with c^d * kappa = lambda^m, ordered by root of unity index."""
    base = np.exp((m * np.log(lam) - np.log(kappa)) / d)
    zeta = np.exp(2j * np.pi * np.arange(d) / d)
    return base * zeta


def _power_branches(F: HomogeneousMap, y):
    d, k = F.degree, F.k
    lam = F.params.lam
    coeffs = np.asarray(F.coefficients)
    zeta = np.exp(2j * np.pi * np.arange(d) / d)
    lifts, flags, ms = [], [], []
    zero = np.abs(y) <= MERGE_TOL * np.linalg.norm(y)
    # direction index = mixed-radix digits of the per-coordinate root choices (first k-1 coords);
    # the last coordinate's root plays the role of the root-of-unity index
    for digits in np.ndindex(*(d,) * k):
        for m in range(d):
            rhs = lam**m * y / coeffs
            w = np.exp(np.log(np.where(rhs == 0, 1.0, rhs)) / d) * zeta[list(digits)]
            w = np.where(rhs == 0, 0.0, w)
            lifts.append(w)
            flags.append(bool(np.any(zero)))
            ms.append(m)
    return np.array(lifts), np.array(flags), np.array(ms)


def _forms_of(F: HomogeneousMap):
    if F.family == "power":
        p = np.zeros(F.degree + 1, dtype=complex)
        q = np.zeros(F.degree + 1, dtype=complex)
        p[0], q[-1] = F.coefficients
        return p, q
    return F.forms


def _plane_branches(F: HomogeneousMap, y):
    d = F.degree
    lam = F.params.lam
    p, q = _forms_of(F)
    dirs, dflags = binary_form_directions(y[1] * p - y[0] * q)
    lifts, flags, ms = [], [], []
    for v, fl in zip(dirs, dflags):
        fv = F.apply(v)
        kappa = np.vdot(y, fv) / np.vdot(y, y)
        for a in range(d):
            for m in range(d):
                c = _scale_roots(kappa, lam, d, m)[a]
                lifts.append(c * v)
                flags.append(bool(fl))
                ms.append(m)
    return np.array(lifts), np.array(flags), np.array(ms)


def preimages(F: HomogeneousMap, x: HopfPoint) -> InverseBranchSet:
    """Every class w with f(w) = x, listed with multiplicity (d^{k+1} entries)."""
    y = x.lift
    if F.family == "power":
        lifts, flags, ms = _power_branches(F, y)
    elif F.k == 2:
        lifts, flags, ms = _plane_branches(F, y)
    else:
        raise DomainError(f"preimages are not available for family {F.family} with k = {F.k}")
    rhs = lam_power(F.params, ms)[:, None] * y
    polished, res = _newton_polish(F, lifts, rhs)
    # exact zeros from the power closed form must not be perturbed
    lifts = np.where(flags[:, None] & (lifts == 0), lifts, polished)
    res = np.linalg.norm(F.apply(lifts) - rhs, axis=-1)
    rel = res / np.linalg.norm(rhs, axis=-1)
    if np.any(~np.isfinite(rel)):
        raise NumericError("preimage solve diverged")
    bad = (rel > RESIDUAL_TOL) & ~flags
    if np.any(bad):
        raise NumericError(f"Newton polishing did not converge (max residual {rel.max():.3g})")
    norm_lifts, shift = normalize_lifts(lifts, F.params)
    branches = [
        Branch(HopfPoint(w, F.params), float(r), bool(fl), int(m + F.degree * s))
        for w, r, fl, m, s in zip(norm_lifts, rel, flags, ms, shift)
    ]
    return InverseBranchSet(x, branches, F.topological_degree)


def random_preimage(F: HomogeneousMap, x: HopfPoint, rng) -> HopfPoint:
    """One uniform draw among the d^{k+1} branches (with multiplicity)."""
    bs = preimages(F, x)
    i = int(rng.integers(len(bs.branches)))
    return bs.branches[i].point


def backward_orbit(F: HomogeneousMap, x: HopfPoint, depth: int, rng) -> list[HopfPoint]:
    if depth < 0:
        raise DomainError("depth must be >= 0")
    orbit = [x]
    for _ in range(depth):
        orbit.append(random_preimage(F, orbit[-1], rng))
    return orbit


# vectorized random branch step used by the equilibrium sampler --------------


def random_preimage_lifts(F: HomogeneousMap, y, rng):
    """One random inverse branch for each row of ``y``.

    Returns ``(lifts, critical)`` where ``critical`` marks rows whose target sits
    (numerically) on the critical-value locus; their lifts are not meaningful.
    """
    y = np.asarray(y, dtype=complex)
    n, k = y.shape
    d = F.degree
    lam = F.params.lam
    m = rng.integers(0, d, size=n)
    lam_m = lam_power(F.params, m)
    if F.family == "power":
        digits = rng.integers(0, d, size=(n, k))
        rhs = lam_m[:, None] * y / np.asarray(F.coefficients)
        critical = np.any(np.abs(y) <= MERGE_TOL * np.linalg.norm(y, axis=-1, keepdims=True), axis=-1)
        w = np.exp(np.log(np.where(rhs == 0, 1.0, rhs)) / d) * np.exp(2j * np.pi * digits / d)
        w, _ = normalize_lifts(np.where(critical[:, None], y, w), F.params)
        return w, critical
    if k != 2:
        raise DomainError(f"preimages are not available for family {F.family} with k = {k}")
    p, q = F.forms
    g = y[:, 1:2] * p - y[:, 0:1] * q
    g = g / np.max(np.abs(g), axis=-1, keepdims=True)
    # targets whose direction polynomial loses degree are treated as critical
    # (a probability-zero event for absolutely continuous clouds)
    critical = np.abs(g[:, 0]) <= 1e-10
    g = np.where(critical[:, None], np.eye(1, d + 1, 0), g)
    t, repeated = batch_roots(g)
    critical |= np.any(repeated, axis=-1)
    pick = rng.integers(0, d, size=n)
    a = rng.integers(0, d, size=n)
    tt = t[np.arange(n), pick]
    v = np.stack([tt, np.ones(n)], axis=-1)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    fv = np.stack([binary_form_eval(p, v[:, 0], v[:, 1]), binary_form_eval(q, v[:, 0], v[:, 1])], axis=-1)
    kappa = np.sum(np.conj(y) * fv, axis=-1) / np.sum(np.abs(y) ** 2, axis=-1)
    c = np.exp((m * np.log(lam) - np.log(kappa)) / d) * np.exp(2j * np.pi * a / d)
    w = c[:, None] * v
    w, res = _newton_polish(F, w, lam_m[:, None] * y)
    rel = res / np.linalg.norm(lam_m[:, None] * y, axis=-1)
    critical |= ~(rel <= 1e-8)
    w = np.where(critical[:, None], y, w)
    w, _ = normalize_lifts(w, F.params)
    return w, critical


# periodic points (k = 2) -------------------------------------------------------


@dataclass(frozen=True)
class PeriodicPoint:
    point: HopfPoint
    residual: float
    m: int


def _compose_forms(p, q, a, b):
    """Binary forms (P(a, b), Q(a, b)) with a, b forms given as t-polynomials."""
    d = len(p) - 1

    def comp(coef):
        out = np.zeros(1, dtype=complex)
        for i, c in enumerate(coef):
            if c == 0:
                continue
            term = np.array([c], dtype=complex)
            for _ in range(d - i):
                term = np.polymul(term, a)
            for _ in range(i):
                term = np.polymul(term, b)
            out = np.polyadd(out, term)
        return out

    deg = d * (len(a) - 1)
    pad = lambda v: np.concatenate([np.zeros(deg + 1 - len(v), dtype=complex), v])
    return pad(comp(p)), pad(comp(q))


def iterate_forms(F: HomogeneousMap, n: int):
    """Coefficients of the binary forms of F^n (k = 2)."""
    p, q = _forms_of(F)
    a, b = p.copy(), q.copy()
    for _ in range(n - 1):
        a, b = _compose_forms(p, q, a, b)
    return a, b


def periodic_points(F: HomogeneousMap, n: int) -> tuple[list[PeriodicPoint], list[str]]:
    """Classes w in H with f^n(w) = w, for k = 2.

    Returns the points and a list of diagnostics for skipped directions.
    """
    if F.k != 2:
        raise DomainError("periodic points are implemented for k = 2")
    if n < 1 or n > 3 or F.degree**n > 8:
        raise DomainError("need 1 <= n <= 3 and d^n <= 8")
    D = F.degree**n
    lam = F.params.lam
    a, b = iterate_forms(F, n)
    fixed = np.concatenate([b, [0]]) - np.concatenate([[0], a])  # z1 Q_n - z2 P_n
    dirs, _ = binary_form_directions(fixed)
    out, notes = [], []
    for v in dirs:
        fv = v
        for _ in range(n):
            fv = F.apply(fv)
        kappa = np.vdot(v, fv)
        if abs(kappa) < 1e-12:
            notes.append(f"direction {v} has vanishing eigenvalue; skipped")
            continue
        for e in range(D - 1):
            for m in range(D - 1):
                c = _scale_roots(kappa, lam, D - 1, m)[e]
                w, _ = normalize_lifts(c * v, F.params)
                z = w
                for _ in range(n):
                    z, _ = F.step_lifts(z)
                res = float(hopf_distance(z, w, F.params))
                out.append(PeriodicPoint(HopfPoint(w, F.params), res, m))
    return out, notes


def pairwise_inequivalent(points, params, tol: float = 1e-8) -> bool:
    lifts = np.array([p.lift for p in points])
    for i in range(len(lifts)):
        dist = hopf_distance(lifts[i], lifts[i + 1 :], params)
        if np.any(dist <= tol):
            return False
    return True


def min_chordal_separation(points) -> float:
    """Smallest pairwise distance between the directions (0 when directions repeat)."""
    lifts = np.array([p.lift for p in points])
    best = math.inf
    for i in range(len(lifts) - 1):
        best = min(best, float(np.min(chordal_distance(lifts[i], lifts[i + 1 :]))))
    return best
