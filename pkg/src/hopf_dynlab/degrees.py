"""Dynamical degrees by Monte Carlo integration of (f^n)^* omega^q ^ omega^(k-q) over H.

H is realized as the annulus 1 <= |z| < |lambda|.  At a Lebesgue-uniform sample
z the pulled-back form has matrix ``A = J^H Omega(F^n z) J`` and the top-degree
density is ``pi^-k * D(A, .., A, Omega, .., Omega)`` with q copies of A.  The
Jacobian J is carried as (matrix, log scale) so the integrand is formed in log
space and m_n never overflows.  For q = k the density is k! |det J|^2 det Omega,
with log|det J| summed step by step, because the rescaled matrix loses its
smallest singular values once orbits approach an attracting set.  Samples
whose density underflows (orbits collapsed onto an attracting axis in floating
point) contribute zero; their true density is below exp(-700) times the
typical value, so the estimate is unaffected unless every sample underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .geometry import DomainError, lam_power, mixed_discriminant, normalize_lifts, omega_matrix
from .equilibrium import StartMeasure, sample_start
from .maps import ClassCertificate, HomogeneousMap, NumericError, certify_class
from .streams import TAG_MASS, map_blocks, substream

MIN_R2 = 0.99
DEFAULT_TOLERANCE = 0.1


@dataclass(frozen=True)
class MassEstimate:
    n: int
    q: int
    log_mass: float
    rel_stderr: float

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)

    @property
    def stderr(self) -> float:
        return self.mass * self.rel_stderr


@dataclass(frozen=True)
class GrowthSeries:
    q: int
    entries: tuple  # MassEstimate, strictly increasing n
    samples: int
    seed: int

    def __post_init__(self):
        ns = [e.n for e in self.entries]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise DomainError("growth series entries must be strictly increasing in n")

    def window(self, n0: int, n1: int):
        return [e for e in self.entries if n0 <= e.n <= n1]


def _block_log_integrands(F: HomogeneousMap, n_values, q_values, lifts, metric_scale):
    """log of the top-form density at each sample, for every (n, q) pair."""
    k = F.k
    omega0 = omega_matrix(lifts, metric_scale)
    mat = np.broadcast_to(np.eye(k, dtype=complex), lifts.shape[:-1] + (k, k)).copy()
    log_scale = np.zeros(len(lifts))
    log_det = np.zeros(len(lifts))
    log_top = math.log(math.factorial(k))
    z = lifts
    out = {}
    n_max = max(n_values)
    for step in range(n_max + 1):
        if step in n_values:
            mh = np.conj(np.swapaxes(mat, -1, -2))
            A = mh @ omega_matrix(z, metric_scale) @ mat
            for q in q_values:
                if q == k:
                    _, ld = np.linalg.slogdet(omega_matrix(z, metric_scale))
                    li = log_top + ld + 2 * log_det - k * math.log(math.pi)
                else:
                    d = mixed_discriminant([A] * q + [omega0] * (k - q))
                    with np.errstate(divide="ignore", invalid="ignore"):
                        li = np.log(np.where(d > 0, d, 0.0)) + 2 * q * log_scale - k * math.log(math.pi)
                out[(step, q)] = li
        if step == n_max:
            break
        w, m = normalize_lifts(F.apply(z), F.params)
        J = F.jac(z) * lam_power(F.params, m)[..., None, None]
        with np.errstate(divide="ignore"):
            log_det = log_det + np.linalg.slogdet(J)[1]
        mat = J @ mat
        peak = np.max(np.abs(mat), axis=(-2, -1))
        if not np.all(np.isfinite(peak)) or np.any(peak == 0):
            raise NumericError(f"Jacobian accumulator overflow at n = {step + 1}")
        mat = mat / peak[..., None, None]
        log_scale = log_scale + np.log(peak)
        z = w
    return out


def _mass_table(F: HomogeneousMap, n_values, q_values, samples: int, seed: int, metric_scale: float = 1.0,
                workers: int = 1):
    """MassEstimate for every (n, q), all from one common set of annulus samples."""
    if samples < 1000:
        raise DomainError("need at least 1000 samples")
    for q in q_values:
        if not 0 <= q <= F.k:
            raise DomainError(f"q must lie in [0, {F.k}], got {q}")
    n_values = sorted(set(int(n) for n in n_values))
    if n_values[0] < 0:
        raise DomainError("n must be >= 0")
    if n_values[-1] * math.log(F.degree) > 200:
        raise DomainError(f"n = {n_values[-1]} is too deep for double-precision Jacobians")
    start = StartMeasure("uniform_annulus")

    def run(b, lo, hi):
        lifts = sample_start(start, F.params, hi - lo, substream(seed, TAG_MASS, b))
        li = _block_log_integrands(F, set(n_values), q_values, lifts, metric_scale)
        # per block: log sum and log sum of squares
        return {key: (logsumexp(v), logsumexp(2 * v)) for key, v in li.items()}

    parts = map_blocks(run, samples, workers)
    log_vol = math.log(F.params.annulus_volume())
    table = {}
    for key in parts[0]:
        ls1 = logsumexp([p[key][0] for p in parts])
        ls2 = logsumexp([p[key][1] for p in parts])
        if not np.isfinite(ls1):
            raise NumericError(f"mass vanished at n = {key[0]}, q = {key[1]}")
        N = samples
        ratio = math.exp(ls2 - 2 * ls1 + math.log(N))  # N * S2 / S1^2 >= 1
        rel = math.sqrt(max(ratio - 1.0, 0.0) / (N - 1))
        table[key] = MassEstimate(key[0], key[1], log_vol + ls1 - math.log(N), rel)
    return table


def mass_estimate(F: HomogeneousMap, q: int, n: int, samples: int, seed: int, metric_scale: float = 1.0,
                  workers: int = 1) -> MassEstimate:
    """Monte Carlo estimate of the integral over H of (f^n)^* omega^q ^ omega^(k-q)."""
    return _mass_table(F, [n], [q], samples, seed, metric_scale, workers)[(n, q)]


def growth_series(F: HomogeneousMap, q: int, n_values, samples: int, seed: int, metric_scale: float = 1.0,
                  workers: int = 1) -> GrowthSeries:
    table = _mass_table(F, n_values, [q], samples, seed, metric_scale, workers)
    entries = tuple(table[(n, q)] for n in sorted(set(n_values)))
    return GrowthSeries(q, entries, samples, seed)


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    r2: float
    slope_error: float
    window: tuple

    @property
    def degree(self) -> float:
        return math.exp(self.slope)


def growth_rate(series: GrowthSeries, window) -> GrowthFit:
    """Least-squares slope of log m_n against n over the window [n0, n1]."""
    n0, n1 = window
    pts = series.window(n0, n1)
    if len(pts) < 3:
        raise DomainError(f"window {window} holds {len(pts)} entries; need at least 3")
    x = np.array([e.n for e in pts], dtype=float)
    y = np.array([e.log_mass for e in pts])
    sig = np.array([e.rel_stderr for e in pts])
    if not np.all(np.isfinite(y)):
        raise DomainError("all masses must be positive")
    xc = x - x.mean()
    sxx = float(np.sum(xc**2))
    slope = float(np.sum(xc * (y - y.mean())) / sxx)
    resid = y - y.mean() - slope * xc
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else 1.0
    slope_error = math.sqrt(float(np.sum(xc**2 * sig**2))) / sxx
    return GrowthFit(slope, r2, slope_error, (int(n0), int(n1)))


@dataclass
class DegreeReport:
    map_info: dict
    series: dict  # q -> GrowthSeries
    fits: dict  # q -> GrowthFit
    certificate: ClassCertificate
    tolerance: float
    window: tuple
    checks: dict = field(default_factory=dict)

    def estimate(self, q: int) -> float:
        return self.fits[q].degree

    @property
    def k(self) -> int:
        return self.map_info["k"]

    def as_dict(self) -> dict:
        return {
            "map": self.map_info,
            "window": list(self.window),
            "degrees": [
                {
                    "q": q,
                    "log_degree": f.slope,
                    "degree": f.degree,
                    "r2": f.r2,
                    "slope_error": f.slope_error,
                    "headline": f.r2 >= MIN_R2,
                }
                for q, f in sorted(self.fits.items())
            ],
            "certificate": self.certificate.as_dict(),
            "checks": self.checks,
        }

    def series_rows(self):
        for q, s in sorted(self.series.items()):
            for e in s.entries:
                yield q, e.n, e.log_mass, e.rel_stderr


def degree_report(F: HomogeneousMap, n_max: int, samples: int, seed: int, certificate: ClassCertificate | None = None,
                  tolerance: float = DEFAULT_TOLERANCE, n_min: int = 2, certify_budget: int = 20000,
                  workers: int = 1) -> DegreeReport:
    """Estimate every d_q and test d_k = d^(k+1), d_q <= r^2 d^(q+1) and d_k > d_(k-1)."""
    if n_max < 4:
        raise DomainError("n_max must be >= 4")
    k, d = F.k, F.degree
    if certificate is None:
        certificate = certify_class(F, r=2 * k, budget=certify_budget, seed=seed)
    r_hat = certificate.sup_ratio_spectral
    qs = list(range(k + 1))
    table = _mass_table(F, range(0, n_max + 1), qs, samples, seed, workers=workers)
    series = {q: GrowthSeries(q, tuple(table[(n, q)] for n in range(n_max + 1)), samples, seed) for q in qs}
    window = (n_min, n_max)
    fits = {q: growth_rate(series[q], window) for q in qs}
    est = {q: fits[q].degree for q in qs}
    top = d ** (k + 1)
    checks = {
        "topological_degree": {
            "expected": top,
            "estimate": est[k],
            "rel_error": abs(est[k] / top - 1.0),
        },
        "d0": {"estimate": est[0]},
        "lemma_bound": [
            {"q": q, "estimate": est[q], "bound": r_hat**2 * d ** (q + 1),
             "passed": bool(est[q] <= r_hat**2 * d ** (q + 1) * (1 + tolerance))}
            for q in qs
        ],
        "dominant": bool(est[k] > est[k - 1]),
        "d_exceeds_r2": bool(d > r_hat**2),
        "r_hat": r_hat,
        "min_r2": min(f.r2 for f in fits.values()),
    }
    return DegreeReport(F.describe(), series, fits, certificate, tolerance, window, checks)
