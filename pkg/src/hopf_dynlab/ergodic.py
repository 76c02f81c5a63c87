"""Statistical probes of mixing, the central limit theorem and moderateness on sampled clouds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .equilibrium import Observable, SampleCloud, jackknife_mean
from .geometry import DomainError
from .maps import HomogeneousMap

SIGNAL_SIGMAS = 3.0
FIT_SLACK = 0.15
MIN_FIT_POINTS = 4


class CoboundaryError(DomainError):
    """Birkhoff sums with zero variance: the observable looks like a coboundary."""


def forward_iterates(F: HomogeneousMap, lifts, n: int):
    """Yield lifts of f^j(x) for j = 0..n."""
    z = np.asarray(lifts, dtype=complex)
    yield z
    for _ in range(n):
        z, _ = F.step_lifts(z)
        yield z


def jackknife_covariance(x, y):
    """Plug-in covariance mean(xy) - mean(x) mean(y) and its jackknife standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    sx, sy, sxy = x.sum(), y.sum(), (x * y).sum()
    est = sxy / n - (sx / n) * (sy / n)
    loo = (sxy - x * y) / (n - 1) - ((sx - x) / (n - 1)) * ((sy - y) / (n - 1))
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(est), se


@dataclass(frozen=True)
class CorrelationSeries:
    n: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    psi_name: str
    phi_name: str
    alpha: float
    provenance: dict

    def rows(self):
        return zip(self.n.tolist(), self.values.tolist(), self.stderr.tolist())


def correlation_series(F: HomogeneousMap, cloud: SampleCloud, psi: Observable, phi: Observable, n_max: int,
                       alpha: float = 1.0) -> CorrelationSeries:
    """I_n = <psi o f^n * phi_c> over the cloud, phi_c = phi minus its cloud mean."""
    if cloud.depth < n_max:
        raise DomainError(f"cloud depth {cloud.depth} < n_max {n_max}")
    ph = phi(cloud.lifts)
    ph = ph - ph.mean()
    vals, errs = [], []
    for z in forward_iterates(F, cloud.lifts, n_max):
        v, e = jackknife_covariance(psi(z), ph)
        vals.append(v)
        errs.append(e)
    prov = {"depth": cloud.depth, "seed": cloud.seed, "count": len(cloud), "start": cloud.start.describe()}
    return CorrelationSeries(np.arange(n_max + 1), np.array(vals), np.array(errs), psi.name, phi.name, alpha, prov)


def mixing_bound_slope(d_k: float, d_km1: float, epsilon: float, alpha: float) -> float:
    """Per-step log decay allowed by the rate ((d_{k-1} + eps) / d_k)^(n alpha / 2)."""
    if not d_km1 + epsilon < d_k:
        raise DomainError("need d_{k-1} + epsilon < d_k")
    return 0.5 * alpha * math.log((d_km1 + epsilon) / d_k)


@dataclass(frozen=True)
class MixingVerdict:
    fitted_slope: float
    bound_slope: float
    verdict: str  # "pass", "fail" or "inconclusive"
    method: str  # "fit", "envelope" or "none"
    n_used: tuple

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "fitted_slope": self.fitted_slope,
            "bound_slope": self.bound_slope,
            "verdict": self.verdict,
            "method": self.method,
            "n_used": list(self.n_used),
        }


def _ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc**2))


def mixing_rate_check(series: CorrelationSeries, d_k: float, d_km1: float, epsilon: float, alpha: float,
                      slack: float = FIT_SLACK) -> MixingVerdict:
    """Compare the decay slope of log|I_n| with the theoretical bound.

    Only the signal-dominated prefix (|I_n| > 3 se) is fitted.  With at least
    four such entries the least-squares slope decides pass/fail.  When the
    correlations fall into the noise sooner, the prefix plus the 3-sigma
    envelope of the first noise entry gives an upper bound on the slope; a
    bound below the threshold is a pass, anything else is inconclusive.
    """
    bound = mixing_bound_slope(d_k, d_km1, epsilon, alpha)
    mag = np.abs(series.values)
    signal = mag > SIGNAL_SIGMAS * series.stderr
    prefix = 0
    while prefix < len(signal) and signal[prefix]:
        prefix += 1
    n = series.n
    if prefix >= MIN_FIT_POINTS:
        slope = _ols_slope(n[:prefix], np.log(mag[:prefix]))
        verdict = "pass" if slope <= bound + slack else "fail"
        return MixingVerdict(slope, bound, verdict, "fit", tuple(n[:prefix].tolist()))
    if prefix == 0 or prefix == len(signal):
        return MixingVerdict(float("nan"), bound, "inconclusive", "none", ())
    env = np.append(mag[:prefix], SIGNAL_SIGMAS * series.stderr[prefix])
    used = n[: prefix + 1]
    slope = _ols_slope(used, np.log(env))
    verdict = "pass" if slope <= bound + slack else "inconclusive"
    return MixingVerdict(slope, bound, verdict, "envelope", tuple(used.tolist()))


def k_mixing_probe(F: HomogeneousMap, cloud: SampleCloud, phi: Observable, psis, n_max: int):
    """max over psi of |I_n| / se_n for each n (values below 3 mean noise-level correlation)."""
    worst = np.zeros(n_max + 1)
    for psi in psis:
        s = correlation_series(F, cloud, psi, phi, n_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(s.stderr > 0, np.abs(s.values) / s.stderr, 0.0)
        worst = np.maximum(worst, ratio)
    return worst


# central limit theorem ---------------------------------------------------------


def birkhoff_sums(F: HomogeneousMap, cloud: SampleCloud, phi: Observable, lengths, count: int | None = None):
    """Normalized sums S_n / sqrt(n) of the centered observable, one per orbit, for each n in lengths.

    Forward orbits start at the first ``count`` cloud points; phi is centered
    by its mean over the whole cloud.
    """
    lengths = sorted(set(int(n) for n in lengths))
    if lengths[0] < 1:
        raise DomainError("Birkhoff sums need n >= 1")
    center = float(np.mean(phi(cloud.lifts)))
    lifts = cloud.lifts if count is None else cloud.lifts[:count]
    acc = np.zeros(len(lifts))
    out = {}
    for j, z in enumerate(forward_iterates(F, lifts, lengths[-1] - 1)):
        acc += phi(z) - center
        if j + 1 in lengths:
            out[j + 1] = acc / math.sqrt(j + 1)
    return out


def birkhoff_samples(F: HomogeneousMap, cloud: SampleCloud, phi: Observable, n: int, count: int | None = None):
    return birkhoff_sums(F, cloud, phi, [n], count)[n]


def variance_ratio(F: HomogeneousMap, cloud: SampleCloud, phi: Observable, n_short: int, n_long: int,
                   count: int | None = None) -> float:
    sums = birkhoff_sums(F, cloud, phi, [n_short, n_long], count)
    return float(np.mean(sums[n_long] ** 2) / np.mean(sums[n_short] ** 2))


@dataclass(frozen=True)
class CltResult:
    n_birkhoff: int
    orbit_count: int
    empirical_sigma: float
    ks_statistic: float
    p_value: float

    @property
    def passed(self) -> bool:
        return self.p_value > 0.01

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def clt_test(sums, n_birkhoff: int = 0, min_count: int = 500) -> CltResult:
    """KS test of the sums against N(0, sigma^2), sigma fitted with the mean held at 0."""
    s = np.asarray(sums, dtype=float)
    if len(s) < min_count:
        raise DomainError(f"need at least {min_count} sums, got {len(s)}")
    sigma = math.sqrt(float(np.mean(s**2)))
    if sigma == 0:
        raise CoboundaryError("Birkhoff sums have zero variance (observable may be a coboundary)")
    res = stats.kstest(s, stats.norm(loc=0.0, scale=sigma).cdf, method="asymp")
    return CltResult(int(n_birkhoff), len(s), sigma, float(res.statistic), float(res.pvalue))


# moderateness ------------------------------------------------------------------


@dataclass(frozen=True)
class ModerateRow:
    epsilon: float
    sizes: tuple
    means: tuple

    @property
    def stability_ratio(self) -> float:
        return max(self.means) / min(self.means)


def moderate_check(cloud: SampleCloud, phi_singular: Observable, epsilon_list, sizes=(1000, 10000, 100000)):
    """Empirical exp(-eps phi) moments over nested prefixes of the cloud."""
    sizes = tuple(int(s) for s in sizes if s <= len(cloud))
    if not sizes:
        raise DomainError("cloud smaller than every requested size")
    vals = phi_singular(cloud.lifts[: max(sizes)])
    if not np.all(np.isfinite(vals)):
        raise DomainError("singular observable is infinite on the cloud")
    rows = []
    for eps in epsilon_list:
        w = np.exp(-eps * vals)
        rows.append(ModerateRow(float(eps), sizes, tuple(float(np.mean(w[:s])) for s in sizes)))
    return rows


def split_half_z(cloud: SampleCloud, obs: Observable) -> float:
    """z-score between the two halves of a cloud (iid consistency probe)."""
    h = len(cloud) // 2
    a = obs(cloud.lifts[:h])
    b = obs(cloud.lifts[h:])
    ma, sa = jackknife_mean(a)
    mb, sb = jackknife_mean(b)
    se = math.hypot(sa, sb)
    return 0.0 if se == 0 else (ma - mb) / se
