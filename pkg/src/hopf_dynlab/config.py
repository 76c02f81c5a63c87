"""Strict plain-text ``key = value`` experiment configuration.

One assignment per line, UTF-8, ``#`` starts a comment.  Unknown or repeated
keys are errors, and every error message carries the offending line number.
Lists are comma separated; complex numbers use Python literals (``0.5-1j``).
Environment variables ``HOPF_DYNLAB_<KEY>`` override file values.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

from .equilibrium import START_KINDS, builtin_observables
from .geometry import DomainError, HopfParams
from .maps import FAMILIES, HomogeneousMap

EXPERIMENTS = ("certify", "preimages", "sample", "degrees", "mixing", "clt", "moderate", "all")
ENV_PREFIX = "HOPF_DYNLAB_"
U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the line or source."""


def _complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _list(conv):
    def parse(s: str):
        s = s.strip()
        return tuple(conv(p.strip()) for p in s.split(",")) if s else ()

    return parse


def _fmt_complex(c: complex) -> str:
    c = complex(c)
    return repr(c.real) if c.imag == 0 else repr(c).strip("()")


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, complex):
        return _fmt_complex(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# name -> parser; the order here is the serialization order
_PARSERS = {
    "experiment": str,
    "family": str,
    "k": int,
    "degree": int,
    "lambda_re": float,
    "lambda_im": float,
    "coefficients": _list(_complex),
    "seed": int,
    "workers": int,
    "out": str,
    "depth": int,
    "count": int,
    "n_min": int,
    "n_max": int,
    "samples": int,
    "degree_rel_tol": float,
    "lemma_tolerance": float,
    "certify_r": float,
    "budget": int,
    "targets": int,
    "start_a": str,
    "start_b": str,
    "observables": _list(str),
    "psi": str,
    "phi": str,
    "epsilon": float,
    "alpha": float,
    "d_km1": float,
    "mixing_count": int,
    "mixing_n_max": int,
    "clt_observable": str,
    "clt_cloud": int,
    "clt_orbits": int,
    "clt_short": int,
    "clt_length": int,
    "moderate_epsilons": _list(float),
    "moderate_sizes": _list(int),
    "report_only": _list(str),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "all"
    family: str = "power"
    k: int = 2
    degree: int = 2
    lambda_re: float = 2.0
    lambda_im: float = 0.0
    coefficients: tuple = ()  # empty: all ones (power family only)
    seed: int = 20261015
    workers: int = 1
    out: str = "results"
    depth: int = 12
    count: int = 10000
    n_min: int = 2
    n_max: int = 6
    samples: int = 100000
    degree_rel_tol: float = 0.05
    lemma_tolerance: float = 0.1
    certify_r: float = 0.0  # 0: use 2k
    budget: int = 100000
    targets: int = 100
    start_a: str = "uniform_annulus"
    start_b: str = "gaussian_projected"
    observables: tuple = ("re_z1_conj_z2", "abs_z1_sq", "cos_log_radius", "sin_log_radius")
    psi: str = "re_z1_conj_z2"
    phi: str = "re_z1_conj_z2"
    epsilon: float = 0.4
    alpha: float = 1.0
    d_km1: float = 0.0  # 0: estimate with a degree report
    mixing_count: int = 100000
    mixing_n_max: int = 10
    clt_observable: str = "cos_log_radius"
    clt_cloud: int = 100000
    clt_orbits: int = 1000
    clt_short: int = 100
    clt_length: int = 200
    moderate_epsilons: tuple = (0.1,)
    moderate_sizes: tuple = (1000, 10000, 100000)
    report_only: tuple = ()
    sources: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def lam(self) -> complex:
        return complex(self.lambda_re, self.lambda_im)

    @property
    def params(self) -> HopfParams:
        return HopfParams(self.k, self.lam)

    @property
    def r(self) -> float:
        return self.certify_r if self.certify_r > 0 else 2.0 * self.k

    def build_map(self) -> HomogeneousMap:
        coeffs = self.coefficients
        if not coeffs:
            if self.family != "power":
                raise DomainError(f"family {self.family} needs explicit coefficients")
            coeffs = (1.0,) * self.k
        return HomogeneousMap(self.params, self.degree, self.family, coeffs)

    def as_dict(self, exclude=("workers", "out", "sources")) -> dict:
        out = {}
        for f in fields(self):
            if f.name in exclude:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [_fmt_complex(x) if isinstance(x, complex) else x for x in v]
            out[f.name] = v
        return out

    def where(self, key: str) -> str:
        return self.sources.get(key, "default")


def _assign(values: dict, sources: dict, key: str, raw: str, where: str):
    if key not in _PARSERS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        values[key] = _PARSERS[key](raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {key} = {raw.strip()!r} ({exc})") from None
    sources[key] = where


def parse_config(text: str, env=None, validate: bool = True) -> ExperimentConfig:
    """Parse config text, then apply ``HOPF_DYNLAB_*`` overrides from ``env``."""
    values, sources = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"line {lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on {sources[key]})")
        _assign(values, sources, key, raw, where)
    for name, raw in sorted((env or {}).items()):
        if name.startswith(ENV_PREFIX):
            _assign(values, sources, name[len(ENV_PREFIX):].lower(), raw, f"environment {name}")
    cfg = ExperimentConfig(**values, sources=sources)
    if validate:
        validate_config(cfg)
    return cfg


def load_config(path: str | None, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    if path is None:
        return parse_config("", env)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(text, env)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name in _PARSERS:
        lines.append(f"{name} = {_fmt(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Apply command-line overrides (None means keep) and revalidate."""
    changes = {k: v for k, v in changes.items() if v is not None}
    sources = dict(cfg.sources)
    sources.update({k: f"command line --{k}" for k in changes})
    new = replace(cfg, **changes, sources=sources)
    validate_config(new)
    return new


def validate_config(cfg: ExperimentConfig) -> None:
    def fail(key, msg):
        raise ConfigError(f"{cfg.where(key)}: {key}: {msg}")

    def need(key, ok, msg):
        if not ok:
            fail(key, msg)

    need("experiment", cfg.experiment in EXPERIMENTS, f"expected one of {EXPERIMENTS}")
    need("family", cfg.family in FAMILIES, f"expected one of {FAMILIES}")
    need("k", cfg.k >= 2, "need k >= 2")
    need("degree", cfg.degree >= 2, "need degree >= 2")
    for key in ("lambda_re", "lambda_im"):
        need(key, math.isfinite(getattr(cfg, key)), "must be finite")
    lam_key = "lambda_re" if "lambda_re" in cfg.sources or "lambda_im" not in cfg.sources else "lambda_im"
    need(lam_key, abs(abs(cfg.lam) - 1.0) > 1e-12,
         f"|lambda| = {abs(cfg.lam):.12g} violates the invariant |lambda| > 1 (or |lambda| < 1, which is inverted)")
    try:
        cfg.build_map()
    except DomainError as exc:
        fail("coefficients", str(exc))
    need("seed", 0 <= cfg.seed <= U64_MAX, "must be an unsigned 64-bit integer")
    need("workers", cfg.workers >= 1, "need workers >= 1")
    need("out", bool(cfg.out), "output directory must be nonempty")
    for key in ("depth", "count", "targets", "mixing_n_max", "clt_short"):
        need(key, getattr(cfg, key) >= 1, "must be >= 1")
    need("n_min", cfg.n_min >= 0, "must be >= 0")
    need("n_max", cfg.n_max >= 4 and cfg.n_max - cfg.n_min >= 2, "need n_max >= 4 and n_max - n_min >= 2")
    need("samples", cfg.samples >= 1000, "need samples >= 1000")
    need("budget", cfg.budget >= 1000, "need budget >= 1000")
    for key in ("degree_rel_tol", "lemma_tolerance", "certify_r", "epsilon", "d_km1"):
        need(key, math.isfinite(getattr(cfg, key)) and getattr(cfg, key) >= 0, "must be finite and >= 0")
    need("alpha", 0 < cfg.alpha <= 1, "need 0 < alpha <= 1")
    for key in ("start_a", "start_b"):
        need(key, getattr(cfg, key) in START_KINDS[:2], f"expected one of {START_KINDS[:2]}")
    names = {o.name for o in builtin_observables(cfg.params)}
    for o in cfg.observables:
        need("observables", o in names, f"unknown observable {o!r}; expected names from {sorted(names)}")
    need("observables", len(cfg.observables) > 0, "need at least one observable")
    for key in ("psi", "phi", "clt_observable"):
        need(key, getattr(cfg, key) in names, f"expected one of {sorted(names)}")
    need("mixing_count", cfg.mixing_count >= 2, "need mixing_count >= 2")
    need("clt_orbits", cfg.clt_orbits >= 500, "need clt_orbits >= 500")
    need("clt_cloud", cfg.clt_cloud >= cfg.clt_orbits, "need clt_cloud >= clt_orbits")
    need("clt_length", cfg.clt_length > cfg.clt_short, "need clt_length > clt_short")
    need("moderate_epsilons", len(cfg.moderate_epsilons) > 0 and all(e >= 0 for e in cfg.moderate_epsilons),
         "need a nonempty list of epsilons >= 0")
    need("moderate_sizes", len(cfg.moderate_sizes) > 0 and all(s >= 1 for s in cfg.moderate_sizes),
         "need a nonempty list of positive sizes")
    if cfg.experiment in ("preimages", "all"):
        need("family", cfg.family == "power" or cfg.k == 2, "preimages need the power family or k = 2")

