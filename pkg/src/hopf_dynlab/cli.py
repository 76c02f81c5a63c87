"""Command-line experiment runner: ``hopf-dynlab <experiment> [--config PATH] [--seed N] [--out DIR] [--workers N]``.

Exit codes: 0 when every PASS-type check passes (or is listed in ``report_only``),
1 when a check fails, 2 for an invalid configuration, 3 for a numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, with_overrides
from .degrees import degree_report
from .equilibrium import (StartMeasure, invariance_check, log_abs_z1_observable, nu_independence,
                          observable_by_name, sample_equilibrium, sample_start)
from .ergodic import birkhoff_sums, clt_test, correlation_series, mixing_rate_check, moderate_check
from .geometry import DomainError, HopfPoint
from .maps import NumericError, certify_class
from .plots import emit_plot
from .preimage import RESIDUAL_TOL, pairwise_inequivalent, preimages
from .streams import TAG_TARGETS, substream

SPEC_VERSION = "1.0"
MODERATE_RATIO_MAX = 2.0
VARIANCE_RATIO_RANGE = (0.7, 1.4)


class RunError(RuntimeError):
    """Numeric or domain failure inside a module operation."""


@contextmanager
def _step(module: str, operation: str):
    try:
        yield
    except (NumericError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise RunError(f"{module}.{operation}: {exc}") from exc


def _clean(x):
    """JSON-safe plain Python values; non-finite floats become null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Run:
    """Collects results, checks and artifacts for one invocation."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.F = cfg.build_map()
        self.results = {}
        self.checks = []
        self.files = {}
        self._report_cache = None

    def check(self, name: str, passed: bool, **detail):
        report_only = name in self.cfg.report_only or "all" in self.cfg.report_only
        self.checks.append({"name": name, "passed": bool(passed), "report_only": report_only,
                            "detail": _clean(detail)})

    def write(self, name: str, text: str):
        self.files[name] = text

    def status(self) -> str:
        ok = all(c["passed"] or c["report_only"] for c in self.checks)
        return "pass" if ok else "fail"

    def summary(self) -> dict:
        return _clean({
            "spec_version": SPEC_VERSION,
            "tool_version": __version__,
            "experiment": self.cfg.experiment,
            "config": self.cfg.as_dict(),
            "map": self.F.describe(),
            "results": self.results,
            "checks": self.checks,
            "status": self.status(),
            "files": sorted(self.files),
        })

    def _degree_report(self):
        if self._report_cache is None:
            c = self.cfg
            cert = self._certificate()
            with _step("degrees", "degree_report"):
                self._report_cache = degree_report(self.F, c.n_max, c.samples, c.seed, certificate=cert,
                                                   tolerance=c.lemma_tolerance, n_min=c.n_min, workers=c.workers)
        return self._report_cache

    def _certificate(self):
        c = self.cfg
        with _step("maps", "certify_class"):
            return certify_class(self.F, c.r, c.budget, c.seed)

    def _cloud(self, count, depth, start_kind=None):
        c = self.cfg
        with _step("equilibrium", "sample_equilibrium"):
            return sample_equilibrium(self.F, depth, count, StartMeasure(start_kind or c.start_a), c.seed, c.workers)

    # experiments ----------------------------------------------------------

    def certify(self):
        cert = self._certificate()
        self.results["certify"] = cert.as_dict()
        self.check("certify.verdict", cert.verdict, sup_ratio_spectral=cert.sup_ratio_spectral, r=cert.certified_r)

    def preimages(self):
        c, F = self.cfg, self.F
        rng = substream(c.seed, TAG_TARGETS)
        targets = sample_start(StartMeasure("uniform_annulus"), F.params, c.targets, rng)
        rows, counts, max_res, inequivalent, flagged = [], [], 0.0, 0, 0
        for i, y in enumerate(targets):
            with _step("preimage", "preimages"):
                bs = preimages(F, HopfPoint(y, F.params))
            counts.append(len(bs.branches))
            flagged += bs.flagged
            max_res = max(max_res, max(b.residual for b in bs.branches))
            inequivalent += pairwise_inequivalent([b.point for b in bs.branches], F.params)
            for j, b in enumerate(bs.branches):
                row = [i, j]
                for z in b.point.lift:
                    row += [float(z.real), float(z.imag)]
                rows.append(row + [b.residual, b.m, int(b.multiplicity_flag)])
        header = ["target_index", "branch_index"]
        for j in range(1, F.k + 1):
            header += [f"re_z{j}", f"im_z{j}"]
        self.write("preimages.csv", _csv(header + ["residual", "m", "flagged"], rows))
        expected = F.topological_degree
        self.results["preimages"] = {"targets": c.targets, "expected_count": expected, "max_residual": max_res,
                                     "inequivalent_targets": inequivalent, "flagged_targets": flagged}
        self.check("preimages.count", all(n == expected for n in counts), expected=expected)
        self.check("preimages.residual", max_res < RESIDUAL_TOL, max_residual=max_res)
        self.check("preimages.inequivalent", inequivalent == c.targets, inequivalent=inequivalent)

    def sample(self):
        c, F = self.cfg, self.F
        observables = [observable_by_name(F.params, name) for name in c.observables]
        cloud = self._cloud(c.count, c.depth)
        self.write("cloud.csv", cloud.to_csv())
        with _step("equilibrium", "nu_independence"):
            nu = nu_independence(F, c.depth, c.count, StartMeasure(c.start_a), StartMeasure(c.start_b),
                                 observables, c.seed, workers=c.workers)
        with _step("equilibrium", "invariance_check"):
            inv = invariance_check(F, cloud, observables, workers=c.workers, min_depth=min(10, c.depth))
        rows = [("nu_independence", s.observable, s.z, s.mean_a, s.mean_b) for s in nu]
        rows += [("pushforward", s.observable, s.z, s.mean_a, s.mean_b) for s in inv.pushforward]
        rows += [("pullback", s.observable, s.z, s.mean_a, s.mean_b) for s in inv.pullback]
        self.write("zscores.csv", _csv(["probe", "observable", "z", "mean_a", "mean_b"], rows))
        self.results["sample"] = {"count": c.count, "depth": c.depth, "resampled": cloud.resampled,
                                  "zscores": [dict(zip(("probe", "observable", "z", "mean_a", "mean_b"), r))
                                              for r in rows]}
        self.check("sample.nu_independence", all(s.passed for s in nu), max_abs_z=max(abs(s.z) for s in nu))
        self.check("sample.invariance", inv.passed,
                   max_abs_z=max(abs(s.z) for s in inv.pushforward + inv.pullback))

    def degrees(self):
        c, F = self.cfg, self.F
        rep = self._degree_report()
        self.write("degrees.csv", _csv(["q", "n", "log_mass", "rel_stderr"], rep.series_rows()))
        series = {q: [(e.n, e.log_mass) for e in s.entries] for q, s in rep.series.items()}
        fits = {}
        for q, f in rep.fits.items():
            pts = rep.series[q].window(*f.window)
            xbar = sum(e.n for e in pts) / len(pts)
            ybar = sum(e.log_mass for e in pts) / len(pts)
            fits[q] = (f.slope, ybar - f.slope * xbar)
        self.write("growth.svg", emit_plot({"series": series, "fits": fits}, "growth"))
        self.results["degrees"] = rep.as_dict()
        ch = rep.checks
        top = ch["topological_degree"]
        self.check("degrees.topological_degree", top["rel_error"] <= c.degree_rel_tol, **top)
        self.check("degrees.min_r2", ch["min_r2"] >= 0.99, min_r2=ch["min_r2"])
        self.check("degrees.lemma_bound", all(e["passed"] for e in ch["lemma_bound"]), entries=ch["lemma_bound"])
        self.check("degrees.dominant", ch["dominant"] or not ch["d_exceeds_r2"],
                   dominant=ch["dominant"], d_exceeds_r2=ch["d_exceeds_r2"], r_hat=ch["r_hat"])

    def mixing(self):
        c, F = self.cfg, self.F
        d_k = float(F.topological_degree)
        if c.d_km1 > 0:
            d_km1, source = c.d_km1, "config"
        else:
            d_km1, source = self._degree_report().estimate(F.k - 1), "degree_report"
        psi = observable_by_name(F.params, c.psi)
        phi = observable_by_name(F.params, c.phi)
        cloud = self._cloud(c.mixing_count, max(c.depth, c.mixing_n_max))
        with _step("ergodic", "correlation_series"):
            series = correlation_series(F, cloud, psi, phi, c.mixing_n_max, c.alpha)
        with _step("ergodic", "mixing_rate_check"):
            verdict = mixing_rate_check(series, d_k, d_km1, c.epsilon, c.alpha)
        self.write("correlation.csv", _csv(["n", "I_n", "stderr"], series.rows()))
        pts = [(n, math.log(abs(v))) for n, v, _ in series.rows() if v != 0]
        fit = None
        used = [p for p in pts if p[0] in verdict.n_used]
        if verdict.method == "fit" and used:
            xbar = sum(p[0] for p in used) / len(used)
            ybar = sum(p[1] for p in used) / len(used)
            fit = (verdict.fitted_slope, ybar - verdict.fitted_slope * xbar)
        self.write("correlation.svg", emit_plot({"points": pts, "bound_slope": verdict.bound_slope, "fit": fit},
                                                "correlation"))
        self.results["mixing"] = {"d_k": d_k, "d_km1": d_km1, "d_km1_source": source, "epsilon": c.epsilon,
                                  "alpha": c.alpha, "psi": psi.name, "phi": phi.name,
                                  "provenance": series.provenance, **verdict.as_dict()}
        self.check("mixing.rate", verdict.passed, verdict=verdict.verdict, method=verdict.method)

    def clt(self):
        c, F = self.cfg, self.F
        phi = observable_by_name(F.params, c.clt_observable)
        cloud = self._cloud(c.clt_cloud, c.depth)
        with _step("ergodic", "birkhoff_sums"):
            sums = birkhoff_sums(F, cloud, phi, [c.clt_short, c.clt_length], count=c.clt_orbits)
        with _step("ergodic", "clt_test"):
            res = clt_test(sums[c.clt_length], c.clt_length)
        ratio = float(np.mean(sums[c.clt_length] ** 2) / np.mean(sums[c.clt_short] ** 2))
        self.write("birkhoff.csv", _csv(["orbit_index", f"s_{c.clt_short}", f"s_{c.clt_length}"],
                                        zip(range(c.clt_orbits), sums[c.clt_short], sums[c.clt_length])))
        self.write("histogram.svg", emit_plot({"values": sums[c.clt_length].tolist(), "sigma": res.empirical_sigma},
                                              "histogram"))
        self.results["clt"] = {"observable": phi.name, **res.as_dict(), "variance_ratio": ratio,
                               "n_short": c.clt_short}
        self.check("clt.ks", res.passed, p_value=res.p_value)
        lo, hi = VARIANCE_RATIO_RANGE
        self.check("clt.variance_ratio", lo <= ratio <= hi, variance_ratio=ratio)

    def moderate(self):
        c = self.cfg
        cloud = self._cloud(max(c.moderate_sizes), c.depth)
        with _step("ergodic", "moderate_check"):
            rows = moderate_check(cloud, log_abs_z1_observable(), c.moderate_epsilons, c.moderate_sizes)
        self.write("moderate.csv", _csv(["epsilon", "size", "mean_exp"],
                                        [(r.epsilon, s, m) for r in rows for s, m in zip(r.sizes, r.means)]))
        self.results["moderate"] = [{"epsilon": r.epsilon, "sizes": r.sizes, "means": r.means,
                                     "stability_ratio": r.stability_ratio} for r in rows]
        worst = max(r.stability_ratio for r in rows)
        self.check("moderate.stability", worst < MODERATE_RATIO_MAX, worst_ratio=worst)


_ORDER = ("certify", "preimages", "sample", "degrees", "mixing", "clt", "moderate")


def run(cfg: ExperimentConfig) -> tuple[int, Run]:
    """Run the configured experiment(s), write artifacts into ``cfg.out``; returns (exit code, Run)."""
    r = Run(cfg)
    kinds = _ORDER if cfg.experiment == "all" else (cfg.experiment,)
    for kind in kinds:
        getattr(r, kind)()
    os.makedirs(cfg.out, exist_ok=True)
    for name, text in sorted(r.files.items()):
        with open(os.path.join(cfg.out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(os.path.join(cfg.out, "summary.json"), "w", encoding="utf-8", newline="") as fh:
        json.dump(r.summary(), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return (0 if r.status() == "pass" else 1), r


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hopf-dynlab", description="Numerical experiments for holomorphic maps of Hopf manifolds.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--workers", type=int, help="worker threads (never changes results)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, experiment=args.experiment, seed=args.seed, out=args.out, workers=args.workers)
    except ConfigError as exc:
        print(f"hopf-dynlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        code, r = run(cfg)
    except RunError as exc:
        print(f"hopf-dynlab: numeric failure in {exc}", file=sys.stderr)
        return 3
    for chk in r.checks:
        tag = "PASS" if chk["passed"] else ("FAIL (report only)" if chk["report_only"] else "FAIL")
        print(f"{tag:20s} {chk['name']}")
    print(f"summary: {os.path.join(cfg.out, 'summary.json')} status={r.status()}")
    return code


if __name__ == "__main__":
    sys.exit(main())
