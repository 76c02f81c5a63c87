"""Homogeneous polynomial self-maps of C^k and the maps they induce on H and P^{k-1}.

Coefficient order for binary forms of degree d is by decreasing exponent of
z1: ``[z1^d, z1^(d-1) z2, ..., z2^d]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .geometry import DomainError, HopfParams, HopfPoint, lam_power, normalize_lifts
from .streams import TAG_CERTIFY, blocks, substream

FAMILIES = ("power", "triangular", "general2d")
RESULTANT_TOL = 1e-10


class NumericError(ArithmeticError):
    """A computation left the range where double precision is trustworthy."""


def binary_form_eval(coeffs, z1, z2):
    """Evaluate sum_i coeffs[i] z1^(d-i) z2^i (Horner in the ratio, broadcasting)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    d = len(coeffs) - 1
    out = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
    for i, c in enumerate(coeffs):
        if c != 0:
            out = out + c * z1 ** (d - i) * z2**i
    return out


def binary_form_grad(coeffs, z1, z2):
    coeffs = np.asarray(coeffs, dtype=complex)
    d = len(coeffs) - 1
    shape = np.broadcast(z1, z2).shape
    g1 = np.zeros(shape, dtype=complex)
    g2 = np.zeros(shape, dtype=complex)
    for i, c in enumerate(coeffs):
        if c == 0:
            continue
        if d - i > 0:
            g1 = g1 + c * (d - i) * z1 ** (d - i - 1) * z2**i
        if i > 0:
            g2 = g2 + c * i * z1 ** (d - i) * z2 ** (i - 1)
    return g1, g2


def binary_resultant(p, q) -> complex:
    """Resultant of two binary forms of the same degree (Sylvester determinant)."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    d = len(p) - 1
    n = 2 * d
    syl = np.zeros((n, n), dtype=complex)
    for r in range(d):
        syl[r, r : r + d + 1] = p
        syl[d + r, r : r + d + 1] = q
    return complex(np.linalg.det(syl))


@dataclass(frozen=True, eq=False)
class HomogeneousMap:
    """F: C^k -> C^k with components homogeneous of one degree ``degree``.

    ``coefficients`` layout per family:

    * ``power``: ``[c_1, ..., c_k]`` for F_j = c_j z_j^d;
    * ``triangular`` (k=2): the d+1 coefficients of F_1 then the scalar c of F_2 = c z2^d;
    * ``general2d`` (k=2): d+1 coefficients of F_1 followed by d+1 of F_2.
    """

    params: HopfParams
    degree: int
    family: str
    coefficients: tuple
    forms: tuple = field(init=False, repr=False)

    def __post_init__(self):
        d = int(self.degree)
        if d != self.degree or d < 2:
            raise DomainError(f"degree must be an integer >= 2, got {self.degree}")
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        k = self.params.k
        c = tuple(complex(x) for x in self.coefficients)
        object.__setattr__(self, "degree", d)
        object.__setattr__(self, "coefficients", c)
        if self.family == "power":
            if len(c) != k:
                raise DomainError(f"power family needs {k} coefficients, got {len(c)}")
            if any(x == 0 for x in c):
                raise DomainError("power family coefficients must be nonzero (F^-1(0) = {0})")
            forms = None
        else:
            if k != 2:
                raise DomainError(f"{self.family} family is only defined for k = 2")
            if self.family == "triangular":
                if len(c) != d + 2:
                    raise DomainError(f"triangular family needs {d + 2} coefficients, got {len(c)}")
                p = np.array(c[: d + 1])
                q = np.zeros(d + 1, dtype=complex)
                q[d] = c[d + 1]
            else:
                if len(c) != 2 * (d + 1):
                    raise DomainError(f"general2d family needs {2 * (d + 1)} coefficients, got {len(c)}")
                p = np.array(c[: d + 1])
                q = np.array(c[d + 1 :])
            pn, qn = np.max(np.abs(p)), np.max(np.abs(q))
            if pn == 0 or qn == 0:
                raise DomainError("a component vanishes identically")
            res = binary_resultant(p / pn, q / qn)
            if abs(res) <= RESULTANT_TOL:
                raise DomainError(f"components share a common zero (|resultant| = {abs(res):.3g}); F^-1(0) != {{0}}")
            p.setflags(write=False)
            q.setflags(write=False)
            forms = (p, q)
        object.__setattr__(self, "forms", forms)

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def topological_degree(self) -> int:
        return self.degree ** (self.k + 1)

    def describe(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "degree": self.degree,
            "lambda": [self.params.lam.real, self.params.lam.imag],
            "coefficients": [[x.real, x.imag] for x in self.coefficients],
        }

    # vectorized kernels on raw lifts --------------------------------------

    def apply(self, z):
        z = np.asarray(z, dtype=complex)
        if self.family == "power":
            return np.asarray(self.coefficients) * z**self.degree
        p, q = self.forms
        z1, z2 = z[..., 0], z[..., 1]
        return np.stack([binary_form_eval(p, z1, z2), binary_form_eval(q, z1, z2)], axis=-1)

    def jac(self, z):
        z = np.asarray(z, dtype=complex)
        d = self.degree
        if self.family == "power":
            diag = d * np.asarray(self.coefficients) * z ** (d - 1)
            return diag[..., :, None] * np.eye(self.k)
        p, q = self.forms
        z1, z2 = z[..., 0], z[..., 1]
        p1, p2 = binary_form_grad(p, z1, z2)
        q1, q2 = binary_form_grad(q, z1, z2)
        return np.stack([np.stack([p1, p2], axis=-1), np.stack([q1, q2], axis=-1)], axis=-2)

    def step_lifts(self, z):
        """One step of f on stacked lifts; returns (new lifts, lambda exponents)."""
        return normalize_lifts(self.apply(z), self.params)


def power_map(params: HopfParams, degree: int, coefficients=None) -> HomogeneousMap:
    if coefficients is None:
        coefficients = (1.0,) * params.k
    return HomogeneousMap(params, degree, "power", tuple(coefficients))


def triangular_map(params: HopfParams, f1_coefficients, c2: complex) -> HomogeneousMap:
    d = len(f1_coefficients) - 1
    return HomogeneousMap(params, d, "triangular", tuple(f1_coefficients) + (c2,))


def general2d_map(params: HopfParams, f1_coefficients, f2_coefficients) -> HomogeneousMap:
    if len(f1_coefficients) != len(f2_coefficients):
        raise DomainError("both binary forms must have the same degree")
    d = len(f1_coefficients) - 1
    return HomogeneousMap(params, d, "general2d", tuple(f1_coefficients) + tuple(f2_coefficients))


def random_triangular_map(params: HopfParams, degree: int, rng, spread: float = 0.3) -> HomogeneousMap:
    """F_1 = z1^d + small random lower terms, F_2 = c z2^d with |c| = 1."""
    lower = spread * (rng.standard_normal(degree) + 1j * rng.standard_normal(degree)) / math.sqrt(2 * degree)
    c2 = np.exp(2j * np.pi * rng.random())
    return triangular_map(params, (1.0,) + tuple(lower), c2)


def _check_nonzero(z):
    z = np.asarray(z, dtype=complex)
    if not np.all(np.any(z != 0, axis=-1)):
        raise DomainError("F is evaluated away from the origin only")
    return z


def evaluate(F: HomogeneousMap, z):
    return F.apply(_check_nonzero(z))


def jacobian(F: HomogeneousMap, z):
    return F.jac(_check_nonzero(z))


def projectivize(z):
    """Unit representative of the line through z (phase fixed by the largest coordinate)."""
    z = np.asarray(z, dtype=complex)
    i = np.argmax(np.abs(z), axis=-1)
    pivot = np.take_along_axis(z, i[..., None], axis=-1)
    u = z / (pivot / np.abs(pivot))
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def induced_projective(F: HomogeneousMap, u):
    """f' on P^{k-1}: the direction of F(u)."""
    return projectivize(F.apply(u))


def forward_step(F: HomogeneousMap, x: HopfPoint) -> HopfPoint:
    lifts, _ = F.step_lifts(x.lift)
    return HopfPoint(lifts, F.params)


def forward_orbit(F: HomogeneousMap, x: HopfPoint, n: int) -> list[HopfPoint]:
    pts = [x]
    for _ in range(n):
        pts.append(forward_step(F, pts[-1]))
    return pts


@dataclass(frozen=True, eq=False)
class OrbitJacobian:
    """Forward orbit with the chain-rule Jacobian of z -> lambda^e F^n(z).

    ``exp(log_scale) * matrix == lambda**lambda_exponent * DF^n(z0)`` where
    ``lambda_exponent`` collects the per-step normalizations.
    """

    points: list
    matrix: np.ndarray
    log_scale: float
    lambda_exponent: int

    def full_matrix(self):
        return np.exp(self.log_scale) * self.matrix

    def log_norm_unscaled(self, ord=2) -> float:
        """log ||DF^n(z0)|| with the lambda normalizations removed."""
        lam = self.points[0].params.lam
        return (
            self.log_scale
            + math.log(np.linalg.norm(self.matrix, ord=ord))
            - self.lambda_exponent * math.log(abs(lam))
        )


def orbit_jacobian_lifts(F: HomogeneousMap, z, n: int):
    """Vectorized core: returns (final lifts, matrices, log scales).

    ``exp(log_scale) * matrix`` is the Jacobian of the normalized n-step map at z,
    which is all a pullback of a lambda-invariant form needs.
    """
    z = np.asarray(z, dtype=complex)
    k = F.k
    mat = np.broadcast_to(np.eye(k, dtype=complex), z.shape[:-1] + (k, k)).copy()
    log_scale = np.zeros(z.shape[:-1])
    lam = F.params.lam
    for step in range(n):
        fz = F.apply(z)
        w, m = normalize_lifts(fz, F.params)
        J = F.jac(z) * lam_power(F.params, m)[..., None, None]
        mat = J @ mat
        peak = np.max(np.abs(mat), axis=(-2, -1))
        if not np.all(np.isfinite(peak)) or np.any(peak == 0):
            raise NumericError(f"Jacobian accumulator left floating range at step {step + 1}")
        mat = mat / peak[..., None, None]
        log_scale = log_scale + np.log(peak)
        z = w
    return z, mat, log_scale


def forward_orbit_with_jacobian(F: HomogeneousMap, x: HopfPoint, n: int) -> OrbitJacobian:
    if n < 0:
        raise DomainError("n must be >= 0")
    k = F.k
    pts = [x]
    mat = np.eye(k, dtype=complex)
    log_scale = 0.0
    exponent = 0
    z = x.lift
    lam = F.params.lam
    for step in range(n):
        w, m = normalize_lifts(F.apply(z), F.params)
        m = int(m)
        mat = (F.jac(z) * lam**m) @ mat
        peak = float(np.max(np.abs(mat)))
        if not np.isfinite(peak) or peak == 0:
            raise NumericError(f"Jacobian accumulator left floating range at step {step + 1}")
        mat = mat / peak
        log_scale += math.log(peak)
        exponent = exponent * F.degree + m
        z = w
        pts.append(HopfPoint(w, F.params))
    return OrbitJacobian(pts, mat, log_scale, exponent)


# class D(r, d) certificates ----------------------------------------------------


def ratio_values(F: HomogeneousMap, z):
    """R(z) = ||DF(z)|| |z| / (d |F(z)|) for spectral and Frobenius norms."""
    z = np.asarray(z, dtype=complex)
    J = F.jac(z)
    fz = np.linalg.norm(F.apply(z), axis=-1)
    scale = np.linalg.norm(z, axis=-1) / (F.degree * fz)
    spec = np.linalg.norm(J, ord=2, axis=(-2, -1)) * scale
    frob = np.linalg.norm(J, axis=(-2, -1)) * scale
    return spec, frob


def _real_to_complex(v, k):
    return v[:k] + 1j * v[k:]


def _complex_to_real(z):
    return np.concatenate([z.real, z.imag])


@dataclass(frozen=True)
class ClassCertificate:
    sup_ratio_spectral: float
    sup_ratio_frobenius: float
    argmax_point: np.ndarray
    budget: int
    evaluations: int
    certified_r: float
    verdict: bool

    def as_dict(self) -> dict:
        return {
            "sup_ratio_spectral": self.sup_ratio_spectral,
            "sup_ratio_frobenius": self.sup_ratio_frobenius,
            "argmax_point": [[c.real, c.imag] for c in self.argmax_point],
            "budget": self.budget,
            "evaluations": self.evaluations,
            "certified_r": self.certified_r,
            "verdict": self.verdict,
        }


def _sphere_samples(rng, count, k):
    g = rng.standard_normal((count, k)) + 1j * rng.standard_normal((count, k))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _refine(F, z0, which):
    k = F.k

    def neg_ratio(v):
        z = _real_to_complex(v, k)
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        spec, frob = ratio_values(F, z / nz)
        val = spec if which == 0 else frob
        return -float(val) if np.isfinite(val) else 0.0

    res = minimize(neg_ratio, _complex_to_real(z0), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400 * k})
    z = _real_to_complex(res.x, k)
    return z / np.linalg.norm(z), -res.fun, res.nfev


def certify_class(F: HomogeneousMap, r: float, budget: int, seed: int, restarts: int = 10) -> ClassCertificate:
    """Sampled lower bound of sup R over the unit sphere, refined by local ascent.

    R is invariant under z -> c z, so the unit sphere covers C^k minus 0.
    """
    if budget < 1000:
        raise DomainError("budget must be >= 1000")
    k = F.k
    best = {0: (-np.inf, None), 1: (-np.inf, None)}
    tops = {0: [], 1: []}
    for b, start, stop in blocks(budget):
        z = _sphere_samples(substream(seed, TAG_CERTIFY, b), stop - start, k)
        spec, frob = ratio_values(F, z)
        for which, vals in ((0, spec), (1, frob)):
            vals = np.where(np.isfinite(vals), vals, -np.inf)
            idx = np.argsort(vals)[::-1][:restarts]
            tops[which].extend((float(vals[i]), z[i]) for i in idx)
            tops[which] = sorted(tops[which], key=lambda t: -t[0])[:restarts]
    evaluations = budget
    for which in (0, 1):
        best[which] = tops[which][0]
        for _, z0 in tops[which]:
            z, val, nfev = _refine(F, z0, which)
            evaluations += nfev
            if val > best[which][0]:
                best[which] = (val, z)
    sup_spec, arg = best[0]
    # the Frobenius norm dominates the spectral norm pointwise
    frob_at_arg = float(ratio_values(F, arg)[1])
    sup_frob = max(best[1][0], frob_at_arg)
    return ClassCertificate(
        sup_ratio_spectral=float(sup_spec),
        sup_ratio_frobenius=float(sup_frob),
        argmax_point=np.asarray(arg),
        budget=int(budget),
        evaluations=int(evaluations),
        certified_r=float(r),
        verdict=bool(sup_spec <= r),
    )
