"""Univariate polynomial roots: companion-matrix eigenvalues, Newton polishing,
clustering of numerically repeated roots.  Batched over stacks of polynomials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainError

MAX_DEGREE = 64
LEADING_TOL = 1e-14
MERGE_TOL = 1e-8
# computed m-fold roots split by about eps^(1/m); such clusters are merged when
# the derivative also (nearly) vanishes at every member
CLUSTER_RADIUS = 1e-4
DERIV_TOL = 1e-6
NEWTON_ITERS = 50


@dataclass(frozen=True, eq=False)
class Roots:
    """All roots counted with multiplicity; ``repeated[i]`` marks members of a merged cluster."""

    values: np.ndarray
    repeated: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def distinct(self) -> np.ndarray:
        return np.unique(np.round(self.values, 12))


def polyval_with_derivative(coeffs, x):
    """Horner evaluation of p and p' along the last axis of ``coeffs`` (highest degree first)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    p = np.zeros(np.broadcast_shapes(coeffs.shape[:-1], np.shape(x)), dtype=complex)
    dp = np.zeros_like(p)
    for i in range(coeffs.shape[-1]):
        dp = dp * x + p
        p = p * x + coeffs[..., i]
    return p, dp


def _companion_roots(coeffs):
    """Eigenvalues of the companion matrices of a stack of monic-izable polynomials."""
    n = coeffs.shape[-1] - 1
    monic = coeffs[..., 1:] / coeffs[..., :1]
    comp = np.zeros(coeffs.shape[:-1] + (n, n), dtype=complex)
    comp[..., 0, :] = -monic
    if n > 1:
        idx = np.arange(n - 1)
        comp[..., idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


def _polish(coeffs, roots):
    """Damped Newton on each root; steps that raise |p| are halved."""
    c = coeffs[..., None, :]
    x = roots.copy()
    p, dp = polyval_with_derivative(c, x)
    for _ in range(NEWTON_ITERS):
        ok = np.abs(dp) > 0
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        if not np.any(step):
            break
        for _ in range(4):
            trial = x - step
            tp, tdp = polyval_with_derivative(c, trial)
            better = np.abs(tp) <= np.abs(p)
            x = np.where(better, trial, x)
            p = np.where(better, tp, p)
            dp = np.where(better, tdp, dp)
            step = np.where(better, 0.0, step / 2)
            if not np.any(step):
                break
    return x


def _cluster_flags(coeffs, roots):
    """Flag and merge numerically repeated roots (clusters are replaced by their mean).

    Two roots belong to one cluster when they are within MERGE_TOL (relative),
    or within CLUSTER_RADIUS while |p'| is below DERIV_TOL relative to its
    scale at both of them.
    """
    n = roots.shape[-1]
    scale = np.maximum(1.0, np.abs(roots))
    pair_scale = np.maximum(scale[..., :, None], scale[..., None, :])
    diff = np.abs(roots[..., :, None] - roots[..., None, :])
    _, dp = polyval_with_derivative(coeffs[..., None, :], roots)
    # sum_i |a_i| (n-i) |r|^(n-i-1): the size of the terms making up p'(r)
    _, dscale = polyval_with_derivative(np.abs(coeffs)[..., None, :], np.abs(roots))
    weak = np.abs(dp) <= DERIV_TOL * np.maximum(dscale.real, 1e-300)
    close = (diff <= MERGE_TOL * pair_scale) | (
        (diff <= CLUSTER_RADIUS * pair_scale) & weak[..., :, None] & weak[..., None, :])
    close = close & ~np.eye(n, dtype=bool)
    flags = np.any(close, axis=-1)
    if np.any(flags):
        w = (close | np.eye(n, dtype=bool)).astype(float)
        means = (w @ roots[..., None])[..., 0] / np.sum(w, axis=-1)
        roots = np.where(flags, means, roots)
    return roots, flags


def batch_roots(coeffs):
    """Roots of a stack of polynomials of equal degree (shape (..., n+1)).

    Returns ``(roots, repeated)`` of shape (..., n).  Leading coefficients must be nonzero.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[-1] - 1
    if n > MAX_DEGREE:
        raise DomainError(f"degree {n} exceeds the cap {MAX_DEGREE}")
    scale = np.max(np.abs(coeffs), axis=-1, keepdims=True)
    if np.any(scale == 0):
        raise DomainError("zero polynomial")
    coeffs = coeffs / scale
    if np.any(np.abs(coeffs[..., 0]) <= LEADING_TOL):
        raise DomainError("vanishing leading coefficient: deflate (root at infinity)")
    if n == 0:
        shape = coeffs.shape[:-1] + (0,)
        return np.zeros(shape, dtype=complex), np.zeros(shape, dtype=bool)
    roots = _companion_roots(coeffs)
    roots = _polish(coeffs, roots)
    return _cluster_flags(coeffs, roots)


def univariate_roots(coefficients, degree: int | None = None) -> Roots:
    """All roots of sum_i coefficients[i] x^(n-i) (highest degree first)."""
    c = np.atleast_1d(np.asarray(coefficients, dtype=complex))
    if degree is not None and len(c) != degree + 1:
        raise DomainError(f"expected {degree + 1} coefficients for degree {degree}, got {len(c)}")
    roots, flags = batch_roots(c)
    order = np.lexsort((roots.imag, roots.real))
    return Roots(roots[order], flags[order])


def binary_form_directions(coeffs, tol: float = LEADING_TOL):
    """Zeros of a binary form sum_i c_i z1^(n-i) z2^i as unit vectors in C^2.

    Roots at infinity (vanishing leading coefficients) appear as (1, 0)
    with their multiplicity.  Returns ``(directions, repeated)``.
    """
    c = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        raise DomainError("zero binary form")
    c = c / scale
    lead = 0
    while lead < len(c) - 1 and abs(c[lead]) <= tol:
        lead += 1
    finite = univariate_roots(c[lead:]) if len(c) - lead > 1 else Roots(np.zeros(0, complex), np.zeros(0, bool))
    dirs = [np.array([t, 1.0]) for t in finite.values]
    dirs += [np.array([1.0, 0.0])] * lead
    flags = list(finite.repeated) + [lead > 1] * lead
    dirs = np.array(dirs, dtype=complex).reshape(-1, 2)
    dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs, np.array(flags, dtype=bool)
