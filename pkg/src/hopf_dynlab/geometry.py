"""Standard Hopf manifold H = (C^k minus 0) / (z ~ lambda z) and its Hermitian forms.

A (1,1)-form ``alpha`` at a point is stored as the Hermitian matrix ``M`` with
``alpha(xi) = xi^H M xi``; the constant ``i/(2 pi)`` is folded into the
convention so that positive forms have positive semidefinite matrices.  With
this convention a pullback by a holomorphic map with Jacobian ``J`` is
``J^H M J`` and the top-degree product of k forms is
``pi^{-k} * mixed_discriminant(M_1, ..., M_k)`` times Lebesgue measure on R^{2k}.

Every function accepting a single lift also accepts a stack of lifts with
shape ``(..., k)``; matrices come back with shape ``(..., k, k)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

HERMITIAN_RTOL = 1e-12


class DomainError(ValueError):
    """Input outside the domain of an operation."""


@dataclass(frozen=True)
class HopfParams:
    k: int
    lam: complex

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise DomainError(f"k must be an integer >= 2, got {self.k}")
        lam = complex(self.lam)
        if not np.isfinite(lam) or lam == 0:
            raise DomainError(f"lambda must be finite and nonzero, got {lam}")
        if abs(abs(lam) - 1.0) < 1e-12:
            raise DomainError(f"|lambda| must differ from 1 (need |lambda| > 1), got |lambda| = {abs(lam)}")
        if abs(lam) < 1:
            lam = 1 / lam
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lam", lam)

    @property
    def log_abs_lam(self) -> float:
        return math.log(abs(self.lam))

    def annulus_volume(self) -> float:
        """Lebesgue volume of {1 <= |z| < |lambda|} in C^k = R^{2k}."""
        k = self.k
        return math.pi**k / math.factorial(k) * (abs(self.lam) ** (2 * k) - 1.0)

    def omega_volume(self) -> float:
        """Total mass of omega^k on H; equals 2 k log|lambda|."""
        return 2 * self.k * self.log_abs_lam


@dataclass(frozen=True, eq=False)
class HopfPoint:
    """A point of H, stored through its lift in the fundamental annulus."""

    lift: np.ndarray
    params: HopfParams

    def __post_init__(self):
        lift = np.asarray(self.lift, dtype=complex).copy()
        lift.setflags(write=False)
        object.__setattr__(self, "lift", lift)

    @property
    def k(self) -> int:
        return self.params.k

    def __repr__(self):
        return f"HopfPoint({np.array2string(self.lift, precision=6)})"


@dataclass(frozen=True, eq=False)
class HermitianForm:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape[-1] != m.shape[-2]:
            raise DomainError(f"form matrix must be square, got shape {m.shape}")
        m = symmetrize(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def symmetrize(m):
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def lam_power(params: HopfParams, m):
    """lambda**m for integer arrays m."""
    return np.power(np.complex128(params.lam), np.asarray(m, dtype=np.int64))


def normalize_lifts(z, params: HopfParams):
    """Move lifts into 1 <= |z| < |lambda| by integer powers of lambda.

    Returns ``(lifts, m)`` with ``lifts = lambda**m * z``.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != params.k:
        raise DomainError(f"expected vectors of length {params.k}, got shape {z.shape}")
    nrm = np.linalg.norm(z, axis=-1)
    if np.any(nrm == 0) or not np.all(np.isfinite(nrm)):
        raise DomainError("the zero vector (or a non-finite vector) has no class in H")
    L = params.log_abs_lam
    m = -np.floor(np.log(nrm) / L).astype(np.int64)
    out = z * lam_power(params, m)[..., None]
    # log/floor rounding can leave the norm a hair outside [1, |lambda|)
    for _ in range(2):
        nrm = np.linalg.norm(out, axis=-1)
        lo = nrm < 1.0
        hi = nrm >= abs(params.lam)
        if not (lo.any() or hi.any()):
            break
        fix = lo.astype(np.int64) - hi.astype(np.int64)
        out = out * lam_power(params, fix)[..., None]
        m = m + fix
    return out, m


def normalize(z, params: HopfParams) -> HopfPoint:
    """Canonical representative of the class of ``z`` in H."""
    z = np.asarray(z, dtype=complex)
    if z.ndim != 1:
        raise DomainError("normalize takes a single vector; use normalize_lifts for stacks")
    lift, _ = normalize_lifts(z, params)
    return HopfPoint(lift, params)


def _lift_array(x):
    return x.lift if isinstance(x, HopfPoint) else np.asarray(x, dtype=complex)


def _sqnorm(z):
    return np.sum(np.abs(z) ** 2, axis=-1)


def omega_matrix(z, scale: float = 1.0):
    """Matrix of omega = |z|^-2 sum dz_j ^ dzbar_j at the lift(s) z."""
    z = _lift_array(z)
    k = z.shape[-1]
    return (scale / _sqnorm(z))[..., None, None] * np.eye(k)


def omega_prime_matrix(z):
    """Matrix of the fiber form |z|^-4 eta ^ eta-bar, eta = sum zbar_j dz_j."""
    z = _lift_array(z)
    outer = z[..., :, None] * np.conj(z[..., None, :])
    return outer / (_sqnorm(z) ** 2)[..., None, None]


def fs_pullback_matrix(z):
    """Matrix of the Fubini-Study pullback: |z|^-2 I - |z|^-4 z z^H."""
    z = _lift_array(z)
    return symmetrize(omega_matrix(z) - omega_prime_matrix(z))


def metric_omega(x: HopfPoint) -> HermitianForm:
    return HermitianForm(omega_matrix(x))


def omega_prime(x: HopfPoint) -> HermitianForm:
    return HermitianForm(omega_prime_matrix(x))


def fs_pullback(x: HopfPoint) -> HermitianForm:
    return HermitianForm(fs_pullback_matrix(x))


def _subset_sums(mats):
    """Yield (sign exponent, sum over subset) for every nonempty subset."""
    k = len(mats)
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(k), size):
            yield k - size, sum(mats[i] for i in subset)


def mixed_discriminant(forms) -> float | np.ndarray:
    """Coefficient of t_1...t_k in det(t_1 M_1 + ... + t_k M_k).

    Normalized so that ``mixed_discriminant(A, ..., A) == k! det(A)``.
    Accepts HermitianForm objects or arrays; stacked ``(..., k, k)`` inputs
    broadcast.  Evaluated by inclusion-exclusion over the 2^k - 1 subset sums.
    """
    mats = [f.matrix if isinstance(f, HermitianForm) else np.asarray(f, dtype=complex) for f in forms]
    if not mats:
        raise DomainError("need at least one form")
    k = mats[0].shape[-1]
    if len(mats) != k:
        raise DomainError(f"need exactly k={k} forms, got {len(mats)}")
    for m in mats:
        if m.shape[-2:] != (k, k):
            raise DomainError(f"every form must be {k}x{k}, got {m.shape}")
    total = 0.0
    for parity, s in _subset_sums(mats):
        d = np.linalg.det(s)
        total = total + (-d if parity % 2 else d)
    # Hermitian inputs give a real value; the imaginary part is rounding
    total = np.real(total)
    return float(total) if np.ndim(total) == 0 else total


def chordal_distance(u, v):
    """Chordal (sine-of-angle) distance between the lines spanned by u and v in P^{k-1}."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    c = np.sum(np.conj(u) * v, axis=-1) / _sqnorm(u)
    # the orthogonal residual is accurate where 1 - |<u,v>|^2 would cancel
    resid = v - c[..., None] * u
    return np.linalg.norm(resid, axis=-1) / np.linalg.norm(v, axis=-1)


def hopf_distance(u, v, params: HopfParams):
    """Discrepancy between the classes of u and v in H.

    Sum of the chordal distance of the directions and the distance of the
    projection coefficient ``c`` (v ~ c u) to the lattice lambda^Z, measured in
    (log|c|, arg c).  Zero exactly when u and v are lambda-equivalent; small
    values bound the distance in H.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    L = params.log_abs_lam
    theta = np.angle(params.lam)
    c = np.sum(np.conj(u) * v, axis=-1) / _sqnorm(u)
    dirs = chordal_distance(u, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = np.log(np.abs(c))
        m = np.round(logc / L)
        radial = np.abs(logc - m * L)
        phase = np.angle(c) - m * theta
    phase = np.abs((phase + np.pi) % (2 * np.pi) - np.pi)
    out = dirs + radial + phase
    return np.where(np.isfinite(out), out, np.inf)
