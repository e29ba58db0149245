"""Monte Carlo runner, statistical verdicts and report emission.

Experiments are registered by name (see :mod:`roughlab.experiments`); ``run``
resolves a config against the experiment defaults, executes it and returns
an :class:`ExperimentReport`.  A failed statistical gate is a verdict in the
report, never an exception.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigInvalid, DegenerateInput, TooFewSamples
from .gaussian_paths import parse_hurst, sample_fbm

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "Verdict",
    "KSResult",
    "RateFit",
    "CSV_COLUMNS",
    "ks_two_sample",
    "ks_one_sample",
    "rate_regression",
    "map_paths",
    "summarize",
    "run",
    "register",
    "EXPERIMENTS",
    "ALIASES",
    "resolve_name",
    "format_real",
    "dumps_json",
]

CSV_COLUMNS = (
    "experiment", "n", "M", "seed", "stat_mean", "stat_var", "se",
    "predicted", "ks_stat", "ks_p", "verdict",
)
MIN_KS_SAMPLES = 50
# paths per work unit; fixed so that results never depend on the thread count
CHUNK_VALUES = 1 << 22


# ---------------------------------------------------------------------------
# Statistical primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KSResult:
    stat: float
    p: float


def ks_two_sample(a, b) -> KSResult:
    """Two-sided two-sample Kolmogorov-Smirnov test, asymptotic p-value."""
    a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
    if a.size < MIN_KS_SAMPLES or b.size < MIN_KS_SAMPLES:
        raise TooFewSamples(f"KS needs >= {MIN_KS_SAMPLES} samples per side, got {a.size}, {b.size}")
    res = stats.ks_2samp(a, b, alternative="two-sided", method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))


def ks_one_sample(a, cdf: Callable) -> KSResult:
    """Two-sided one-sample KS test against a continuous cdf."""
    a = np.asarray(a, dtype=float).ravel()
    if a.size < MIN_KS_SAMPLES:
        raise TooFewSamples(f"KS needs >= {MIN_KS_SAMPLES} samples, got {a.size}")
    res = stats.kstest(a, cdf, alternative="two-sided", method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))


@dataclass(frozen=True)
class RateFit:
    slope: float
    ci: tuple[float, float]
    intercept: float


def rate_regression(ns: Sequence[float], errs: Sequence[float], level: float = 0.95) -> RateFit:
    """OLS of log(err) on log(n) with a t-based confidence interval for the slope."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if ns.size != errs.size or ns.size < 4:
        raise DegenerateInput("rate regression needs at least 4 (n, err) pairs")
    if np.any(errs <= 0) or np.any(ns <= 0) or not np.all(np.isfinite(errs)):
        raise DegenerateInput("rate regression needs positive finite n and errors")
    X, Y = np.log(ns), np.log(errs)
    if np.ptp(X) == 0:
        raise DegenerateInput("all n are equal")
    fit = stats.linregress(X, Y)
    half = stats.t.ppf(0.5 + level / 2, ns.size - 2) * fit.stderr
    return RateFit(float(fit.slope), (float(fit.slope - half), float(fit.slope + half)), float(fit.intercept))


def summarize(values) -> dict:
    """Mean, unbiased variance and standard error of the mean."""
    v = np.asarray(values, dtype=float)
    M = v.size
    var = float(np.var(v, ddof=1)) if M > 1 else 0.0
    return {"M": M, "stat_mean": float(np.mean(v)), "stat_var": var, "se": math.sqrt(var / M) if M else math.nan}


# ---------------------------------------------------------------------------
# Path-parallel evaluation
# ---------------------------------------------------------------------------

def map_paths(
    fn: Callable,
    n: int,
    nu: float,
    M: int,
    d: int = 1,
    seed: int = 0,
    threads: int | None = None,
) -> dict:
    """Apply ``fn(batch) -> {name: per-path array}`` over all M paths.

    Paths are cut into fixed chunks, evaluated on a thread pool and glued
    back in path order, so the result is identical for every thread count.
    """
    chunk = max(1, CHUNK_VALUES // (d * (n + 1)))
    starts = list(range(0, M, chunk))

    def work(lo: int) -> dict:
        return fn(sample_fbm(n, nu, min(chunk, M - lo), d, seed, start=lo))

    threads = threads or os.cpu_count() or 1
    if threads <= 1 or len(starts) == 1:
        parts = [work(lo) for lo in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    return {k: np.concatenate([np.asarray(p[k]) for p in parts]) for k in parts[0]}


# ---------------------------------------------------------------------------
# Configs and reports
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """What to run.  ``None`` fields take the experiment's defaults."""

    name: str
    nu: str | float | None = None
    ns: list[int] | None = None
    M: int | None = None
    seed: int = 42
    threads: int | None = None
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.ns is not None:
            if not self.ns or any(int(k) < 1 for k in self.ns):
                raise ConfigInvalid("grid sizes must be positive integers")
            if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
                raise ConfigInvalid(f"n list must be strictly increasing, got {self.ns}")
        if self.M is not None and self.M < 100:
            raise ConfigInvalid(f"M must be >= 100, got {self.M}")
        if self.nu is not None:
            try:
                parse_hurst(self.nu)
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from exc
        if self.threads is not None and self.threads < 1:
            raise ConfigInvalid("threads must be >= 1")


@dataclass
class Verdict:
    """One judged check: which criterion, against what tolerance, what was seen."""

    criterion: str
    check: str
    passed: bool
    observed: float | None
    tolerance: str
    n: int | None = None
    M: int | None = None
    seed: int | None = None
    informational: bool = False


@dataclass
class ExperimentReport:
    experiment: str
    criterion: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if not v.informational)

    def judge(self, check: str, passed: bool, observed, tolerance: str, *, n=None, informational=False):
        v = Verdict(
            self.criterion, check, bool(passed),
            None if observed is None else float(observed),
            tolerance, n, self.config.get("M"), self.config.get("seed"), informational,
        )
        self.verdicts.append(v)
        return v

    def add_row(self, n: int, summary: dict, predicted=None, ks: KSResult | None = None, verdict: str = "") -> None:
        self.rows.append({
            "experiment": self.experiment,
            "n": int(n),
            "M": int(summary["M"]),
            "seed": self.config.get("seed"),
            "stat_mean": summary["stat_mean"],
            "stat_var": summary["stat_var"],
            "se": summary["se"],
            "predicted": None if predicted is None else float(predicted),
            "ks_stat": None if ks is None else ks.stat,
            "ks_p": None if ks is None else ks.p,
            "verdict": verdict,
        })

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "criterion": self.criterion,
            "passed": self.passed,
            "config": self.config,
            "rows": self.rows,
            "verdicts": [asdict(v) for v in self.verdicts],
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([format_real(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_lines(self) -> list[str]:
        out = []
        for v in self.verdicts:
            tag = "PASS" if v.passed else ("INFO" if v.informational else "FAIL")
            obs = "-" if v.observed is None else f"{v.observed:.6g}"
            at = f" n={v.n}" if v.n is not None else ""
            out.append(f"{v.criterion} [{tag}] {v.check}: observed {obs}, needs {v.tolerance}{at}")
        return out

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.criterion}.json").write_text(self.to_json())
        (out / f"{self.criterion}.csv").write_text(self.to_csv())


def format_real(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def dumps_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every real printed to 17 significant digits (NaN/inf become null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {dumps_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "%.17g" % obj if math.isfinite(obj) else "null"
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    import json

    return json.dumps(s)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

EXPERIMENTS: dict[str, tuple[Callable, dict]] = {}
ALIASES: dict[str, str] = {}


def register(criterion: str, *aliases: str, **defaults):
    """Decorator adding an experiment under its criterion id and aliases."""

    def wrap(fn):
        EXPERIMENTS[criterion] = (fn, defaults)
        for a in aliases:
            ALIASES[a] = criterion
        return fn

    return wrap


def resolve_name(name: str) -> str:
    _load_catalog()
    key = name.strip()
    if key.upper() in EXPERIMENTS:
        return key.upper()
    if key.lower() in ALIASES:
        return ALIASES[key.lower()]
    known = sorted(EXPERIMENTS) + sorted(ALIASES)
    raise ConfigInvalid(f"unknown experiment {name!r}; choose from {', '.join(known)}")


def _load_catalog() -> None:
    from . import experiments  # noqa: F401  registers on import


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute an experiment; deterministic for a fixed config."""
    cfg.validate()
    crit = resolve_name(cfg.name)
    fn, defaults = EXPERIMENTS[crit]
    resolved = {
        "nu": str(cfg.nu) if cfg.nu is not None else defaults.get("nu"),
        "ns": list(cfg.ns) if cfg.ns is not None else defaults.get("ns"),
        "M": cfg.M if cfg.M is not None else defaults.get("M"),
        "seed": int(cfg.seed),
    }
    params = dict(defaults.get("params", {}))
    params.update(cfg.params)
    resolved["params"] = params
    report = ExperimentReport(experiment=crit, criterion=crit, config=resolved)
    fn(report, resolved, cfg.threads)
    return report
