"""Monte Carlo verification of the limit laws.

An experiment draws M independent samples X = Y + Z, evaluates one
estimator per sample and standardizes it with the normalizer of the named
theorem, centering at the exact expectation.  Replication m uses the
generator ``Philox(rep_seed(seed, m))`` with
``rep_seed(seed, m) = SeedSequence([seed, m]).generate_state(1, uint64)[0]``,
so any subset of replications can be reproduced on its own.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .asymptotics import ConditionA, LimitLaw, limit_law, make_schedule, tau_n_eval
from .distributions import NoiseModel, TargetModel, make_rng, parse_noise, parse_target
from .estimator import (
    RangeError,
    cauchy_closed_form,
    cdf_lower_limit,
    centered_stats,
    cos_sin_centering,
    estimate_cdf,
    estimate_density,
    estimate_interval,
    exact_interval_variance,
    exact_term_variance,
    expected_density,
    expected_interval,
)
from .kernels import get_kernel
from .numerics import ConvergenceError, InvalidValueError, QuadratureSpec, ScaledValue, scaled_add, scaled_normalize

__all__ = [
    "DegenerateInputError",
    "ExperimentConfig",
    "ExperimentError",
    "MonteCarloReport",
    "config_hash",
    "ks_normal_test",
    "load_config",
    "rate_sweep",
    "read_report",
    "rep_seed",
    "report_io",
    "run_experiment",
]

DENSITY_IDS = ("T1", "T4", "T7")
INTERVAL_IDS = ("T2a", "T2b", "T2c", "T5a", "T5b", "T5c")
CDF_IDS = ("T3", "T6")
STATISTIC_IDS = ("U",)
MAX_FAILED_FRACTION = 0.01


class ExperimentError(RuntimeError):
    """Too many replications failed, or the configuration is inconsistent."""


class DegenerateInputError(ValueError):
    pass


def rep_seed(seed: int, m: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(m)]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    Give either ``h`` or a ``schedule`` (A1, A2, A3) with a lattice
    ``cell``; the schedule's interval width is b - a.  ``theorem`` is one of
    T1..T7 or ``U`` (the normalized cosine sum at x, limit N(0, 1/2)).
    ``alt_theorem`` re-standardizes the same estimates with another
    theorem's normalizer.
    """

    theorem: str = "T1"
    target: str = "normal:0,1"
    noise: str = "normal:1"
    kernel: str = "indicator"
    n: int = 1000
    M: int = 100
    seed: int = 0
    h: Optional[float] = None
    schedule: Optional[str] = None
    cell: Optional[int] = None
    gamma: Optional[float] = None
    side: str = "plus"
    x: float = 0.0
    a: Optional[float] = None
    b: Optional[float] = None
    delta: Optional[float] = None
    alt_theorem: Optional[str] = None
    workers: int = 1
    oracle: bool = True
    node_count: int = 16
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    output: Optional[str] = None

    def __post_init__(self):
        tid = _theorem_id(self.theorem)
        object.__setattr__(self, "theorem", tid)
        if self.alt_theorem is not None:
            object.__setattr__(self, "alt_theorem", _theorem_id(self.alt_theorem))
        if self.M < 2:
            raise ValueError("M must be at least 2")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if (self.h is None) == (self.schedule is None):
            raise ValueError("give exactly one of h or schedule")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if self.schedule is not None:
            ConditionA(self.schedule)
            if self.cell is None or self.cell < 1:
                raise ValueError("a schedule needs a lattice cell >= 1")
            if self.a is None or self.b is None:
                raise ValueError("a schedule needs the interval (a, b) for its width")
        for tid_ in filter(None, (tid, self.alt_theorem)):
            if tid_ in INTERVAL_IDS and (self.a is None or self.b is None or not self.a < self.b):
                raise ValueError(f"{tid_} needs an interval a < b")
        if tid in CDF_IDS:
            if self.b is None:
                raise ValueError(f"{tid} needs b")
            if (self.a is None) == (self.delta is None):
                raise ValueError(f"{tid} needs exactly one of a or delta")
        parse_target(self.target)
        parse_noise(self.noise)
        get_kernel(self.kernel)
        QuadratureSpec(self.node_count, "geometric", self.abs_tol, self.rel_tol)

    @property
    def spec(self) -> QuadratureSpec:
        return QuadratureSpec(self.node_count, "geometric", self.abs_tol, self.rel_tol)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _theorem_id(t: str) -> str:
    t = str(t).strip()
    if t.upper() == "U":
        return "U"
    t = t[:2].upper() + t[2:].lower()
    if t not in DENSITY_IDS + INTERVAL_IDS + CDF_IDS:
        raise ValueError(f"unknown theorem {t!r}")
    return t


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, text: str):
    if key not in _FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    text = text.strip()
    if text.lower() in ("", "none", "null"):
        return None
    typ = str(_FIELDS[key].type)
    if "bool" in typ:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if "int" in typ:
        return int(float(text)) if "e" in text.lower() else int(text)
    if "float" in typ:
        return float(text)
    return text


def load_config(path: Optional[str] = None, overrides=(), text: Optional[str] = None) -> ExperimentConfig:
    """Read a flat ``key = value`` file ('#' comments), then apply ``k=v`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    if text is None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    parser.read_string("[experiment]\n" + text)
    values = {k: _coerce(k, v) for k, v in parser["experiment"].items()}
    for item in overrides:
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        values[k.strip()] = _coerce(k.strip(), v)
    return ExperimentConfig(**values)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class MonteCarloReport:
    config: dict
    theorem_id: str
    h: float
    n: int
    expectation: float
    standardized_samples: list
    seeds: list
    empirical_mean: float
    empirical_variance: float
    predicted_mean: float
    predicted_variance: float
    ks_statistic: float
    p_value: float
    failed: int
    wall_time: float
    oracle_variance: Optional[float] = None
    ks_oracle_statistic: Optional[float] = None
    p_value_oracle: Optional[float] = None
    alt_theorem: Optional[str] = None
    alt_empirical_variance: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.standardized_samples) != len(self.seeds):
            raise ValueError("one seed per replication")

    @property
    def M(self) -> int:
        return len(self.standardized_samples)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MonteCarloReport":
        return cls(**d)

    def summary(self) -> dict:
        d = self.to_dict()
        d.pop("standardized_samples")
        d.pop("seeds")
        return d


# ---------------------------------------------------------------------------
# Normality diagnostics
# ---------------------------------------------------------------------------


def ks_normal_test(samples, mean: float, variance: float):
    """Two-sided KS statistic against N(mean, variance), asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 8:
        raise ValueError("need at least 8 finite samples")
    if not variance > 0:
        raise DegenerateInputError("variance must be positive")
    d = float(stats.kstest(x, stats.norm(mean, math.sqrt(variance)).cdf).statistic)
    return d, float(stats.kstwobign.sf(math.sqrt(x.size) * d))


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Plan:
    cfg: ExperimentConfig
    target: TargetModel
    noise: NoiseModel
    kernel: object
    h: float
    law: Optional[LimitLaw]
    alt: Optional[LimitLaw]
    expectation: float
    a: Optional[float]
    centering: Optional[tuple]
    extras: dict


def _law_for(tid, cfg, kernel, noise, target, h):
    if tid == "U":
        return None
    kw = dict(x=cfg.x, a=cfg.a, b=cfg.b, gamma=cfg.gamma, side=cfg.side, spec=cfg.spec)
    if tid == "T7":
        kw["target"] = target
    return limit_law(tid, kernel, noise, **kw)


def _bandwidth(cfg: ExperimentConfig, noise: NoiseModel):
    if cfg.h is not None:
        return cfg.h, {}
    lam = noise.condition_k.lam if noise.condition_k else 2.0
    sched = make_schedule(cfg.schedule, cfg.b - cfg.a, lam, gamma=cfg.gamma, side=cfg.side)
    idx = sched.index_for_cell(cfg.cell)
    h = sched(idx)
    width = cfg.b - cfg.a
    return h, {
        "schedule": sched.description,
        "schedule_log10_index": math.log10(idx),
        "cell": sched.cell(idx),
        "parity": sched.parity(idx),
        "cos_half_width": math.cos(width / (2 * h)),
        "sin_half_width": math.sin(width / (2 * h)),
    }


def _plan(cfg: ExperimentConfig) -> _Plan:
    target, noise, kernel = parse_target(cfg.target), parse_noise(cfg.noise), get_kernel(cfg.kernel)
    h, extras = _bandwidth(cfg, noise)
    tid = cfg.theorem
    law = _law_for(tid, cfg, kernel, noise, target, h)
    alt = _law_for(cfg.alt_theorem, cfg, kernel, noise, target, h) if cfg.alt_theorem else None
    spec = cfg.spec
    a = cfg.a
    centering = None
    if tid in DENSITY_IDS:
        expectation = expected_density(target, kernel, h, cfg.x, spec)
    elif tid in INTERVAL_IDS:
        expectation = expected_interval(target, kernel, h, cfg.a, cfg.b, spec)
        if noise.condition_k is not None:
            extras["tau_n"] = tau_n_eval(kernel, noise, cfg.a, cfg.b, h)
    elif tid in CDF_IDS:
        if a is None:
            a = cdf_lower_limit(noise, h, cfg.delta)
        expectation = expected_interval(target, kernel, h, a, cfg.b, spec)
        extras["a"] = a
    else:
        centering = cos_sin_centering(target, noise, cfg.x, h)
        expectation = centering[0]
    return _Plan(cfg, target, noise, kernel, h, law, alt, expectation, a, centering, extras)


def _one(plan: _Plan, m: int):
    cfg = plan.cfg
    seed = rep_seed(cfg.seed, m)
    rng = make_rng(seed)
    y = plan.target.sample(cfg.n, rng)
    z = plan.noise.sample(cfg.n, rng)
    X = y + z
    tid = cfg.theorem
    if tid == "U":
        U, _, _ = centered_stats(X, plan.h, cfg.x, plan.centering)
        return seed, U, None
    try:
        if tid == "T7":
            val = cauchy_closed_form(X, plan.h, cfg.x)
        elif tid in DENSITY_IDS:
            val = estimate_density(X, plan.kernel, plan.noise, plan.h, cfg.x, cfg.spec).value
        elif tid in INTERVAL_IDS:
            val = estimate_interval(X, plan.kernel, plan.noise, plan.h, cfg.a, cfg.b, cfg.spec).value
        else:
            val = estimate_cdf(X, plan.kernel, plan.noise, plan.h, cfg.b, a=plan.a, spec=cfg.spec).value
    except (RangeError, ConvergenceError, InvalidValueError):
        return seed, math.nan, math.nan
    diff = scaled_add(val, scaled_normalize(ScaledValue(-plan.expectation, 0.0)))
    z_main = (diff * plan.law.normalizer(cfg.n, plan.h)).to_float()
    z_alt = None
    if plan.alt is not None:
        try:
            z_alt = (diff * plan.alt.normalizer(cfg.n, plan.h)).to_float()
        except ZeroDivisionError:
            z_alt = math.nan
    return seed, z_main, z_alt


def _oracle_variance(plan: _Plan) -> Optional[float]:
    cfg, tid = plan.cfg, plan.cfg.theorem
    spec = cfg.spec
    if tid == "U":
        z2 = np.exp(-2j * cfg.x / plan.h) * plan.target.char_fn(2.0 / plan.h) * plan.noise.phi(2.0 / plan.h)
        return 0.5 * (1.0 + float(np.real(z2))) - plan.centering[0] ** 2
    if tid in DENSITY_IDS:
        v = exact_term_variance(plan.target, plan.noise, plan.kernel, plan.h, cfg.x, spec)
    elif tid in INTERVAL_IDS:
        v = exact_interval_variance(plan.target, plan.noise, plan.kernel, plan.h, cfg.a, cfg.b, spec)
    else:
        v = exact_interval_variance(plan.target, plan.noise, plan.kernel, plan.h, plan.a, cfg.b, spec)
    z = plan.law.normalizer(cfg.n, plan.h)
    return (v * z * z).to_float() / cfg.n


def run_experiment(cfg: ExperimentConfig) -> MonteCarloReport:
    """Run M replications and summarize the standardized statistic.

    Results do not depend on ``cfg.workers``: every replication owns its
    generator and the merge is by replication index.
    """
    t0 = time.perf_counter()
    plan = _plan(cfg)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(lambda m: _one(plan, m), range(cfg.M)))
    else:
        rows = [_one(plan, m) for m in range(cfg.M)]
    seeds = [r[0] for r in rows]
    z = np.array([r[1] for r in rows], dtype=float)
    ok = np.isfinite(z)
    failed = int(np.sum(~ok))
    if failed > MAX_FAILED_FRACTION * cfg.M:
        raise ExperimentError(f"{failed} of {cfg.M} replications failed")
    zs = z[ok]
    if plan.law is None:
        pmean, pvar = 0.0, 0.5
    else:
        pmean, pvar = plan.law.limit_mean, plan.law.limit_variance
    emp_var = float(np.var(zs, ddof=1))
    ks, p = ks_normal_test(zs, pmean, pvar) if zs.size >= 8 else (math.nan, math.nan)
    oracle = ks_o = p_o = None
    if cfg.oracle:
        try:
            oracle = _oracle_variance(plan)
        except (ConvergenceError, RangeError, ValueError):
            oracle = None
        if oracle is not None and oracle > 0 and zs.size >= 8:
            ks_o, p_o = ks_normal_test(zs, 0.0, oracle)
    alt_var = None
    if plan.alt is not None:
        za = np.array([r[2] for r in rows], dtype=float)
        za = za[np.isfinite(za)]
        # the alternative normalizer may be undefined at every point (sin = 0)
        alt_var = float(np.var(za, ddof=1)) if za.size >= 2 else None
    extras = dict(plan.extras)
    if plan.law is not None and plan.law.note:
        extras["law_note"] = plan.law.note
    return MonteCarloReport(
        config=cfg.to_dict(),
        theorem_id=cfg.theorem,
        h=plan.h,
        n=cfg.n,
        expectation=plan.expectation,
        standardized_samples=z.tolist(),
        seeds=seeds,
        empirical_mean=float(np.mean(zs)),
        empirical_variance=emp_var,
        predicted_mean=pmean,
        predicted_variance=pvar,
        ks_statistic=ks,
        p_value=p,
        failed=failed,
        wall_time=time.perf_counter() - t0,
        oracle_variance=oracle,
        ks_oracle_statistic=ks_o,
        p_value_oracle=p_o,
        alt_theorem=cfg.alt_theorem,
        alt_empirical_variance=alt_var,
        extras=extras,
    )


def rate_sweep(cfg: ExperimentConfig, h_values=None, cells=None):
    """Run the experiment at each h (or schedule cell); one summary row per point."""
    if (h_values is None) == (cells is None):
        raise ValueError("give exactly one of h_values or cells")
    pts = list(h_values if h_values is not None else cells)
    if len(pts) < 3:
        raise ValueError("a sweep needs at least 3 points")
    rows = []
    for p in pts:
        c = cfg.replace(h=float(p), schedule=None, cell=None) if h_values is not None else cfg.replace(cell=int(p), h=None)
        rep = run_experiment(c)
        row = {
            "h": rep.h,
            "empirical_variance": rep.empirical_variance,
            "predicted_variance": rep.predicted_variance,
            "ratio": rep.empirical_variance / rep.predicted_variance if rep.predicted_variance else math.nan,
            "oracle_variance": rep.oracle_variance,
            "ratio_oracle": (rep.empirical_variance / rep.oracle_variance) if rep.oracle_variance else None,
            "empirical_mean": rep.empirical_mean,
            "p_value": rep.p_value,
            "alt_empirical_variance": rep.alt_empirical_variance,
            "failed": rep.failed,
            "wall_time": rep.wall_time,
        }
        for key in ("cell", "parity", "cos_half_width", "sin_half_width", "tau_n", "a"):
            if key in rep.extras:
                row[key] = rep.extras[key]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def report_io(report: MonteCarloReport, path: str, format: str = "json") -> None:
    """Write a report as JSON (everything) or CSV (one row per replication).

    The CSV starts with '#' lines carrying the config hash and the summary
    as JSON, so :func:`read_report` restores either format exactly.
    """
    if format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1)
            fh.write("\n")
    elif format == "csv":
        cfg = ExperimentConfig(**report.config)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash: {config_hash(cfg)}\n")
            fh.write(f"# summary: {json.dumps(report.summary(), sort_keys=True)}\n")
            w = csv.writer(fh)
            w.writerow(["index", "seed", "standardized"])
            for i, (s, v) in enumerate(zip(report.seeds, report.standardized_samples)):
                w.writerow([i, s, repr(float(v))])
    else:
        raise ValueError(f"unknown format {format!r}")


def read_report(path: str) -> MonteCarloReport:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.startswith("#"):
        return MonteCarloReport.from_dict(json.loads(text))
    lines = text.splitlines()
    summary = None
    body = []
    for line in lines:
        if line.startswith("# summary: "):
            summary = json.loads(line[len("# summary: "):])
        elif not line.startswith("#"):
            body.append(line)
    rows = list(csv.DictReader(body))
    summary["seeds"] = [int(r["seed"]) for r in rows]
    summary["standardized_samples"] = [float(r["standardized"]) for r in rows]
    return MonteCarloReport.from_dict(summary)
