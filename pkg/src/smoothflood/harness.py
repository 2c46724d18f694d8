"""Experiment grids: configuration, parallel execution, statistics, output.

A config is a JSON object::

    {
      "name": "oblivious-k",
      "n": [2000],
      "models": [{"kind": "ksmooth", "k": 1}, {"kind": "ksmooth", "k": 2}],
      "adversaries": [{"kind": "spooling"}],
      "trials": 200,
      "seed": 1,
      "max_rounds": null,
      "trace": "none",
      "fits": [{"axis": "k", "adversary": "spooling", "n": 2000}],
      "compare": [],
      "output_dir": "out/oblivious-k"
    }

Every (n, model, adversary) combination is a cell.  Unknown keys are
rejected everywhere.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .adversary import AdversarySpec, build_adversary
from .engine import TRACE_FIELDS, TrialRecord, run_trial
from .errors import ConfigError
from .seeding import trial_rng
from .smoothing import KSmooth, SmoothingModel, model_from_dict

log = logging.getLogger(__name__)

SUMMARY_VERSION = "# smoothflood summary v1"
FITS_VERSION = "# smoothflood fits v1"
COMPARE_VERSION = "# smoothflood compare v1"
WORKERS_ENV = "SMOOTHFLOOD_WORKERS"

SUMMARY_COLUMNS = (
    "cell", "n", "model", "adversary", "trials", "min", "median", "mean", "p90", "max",
    "censored_fraction", "mean_noise_per_round", "mean_rejections",
)
FIT_COLUMNS = ("fit", "axis", "adversary", "fixed", "exponent", "stderr", "intercept",
               "cells_used", "excluded", "x", "median", "residuals")
COMPARE_COLUMNS = ("n", "model", "a", "b", "median_a", "median_b", "ratio", "ci_low", "ci_high")

_CONFIG_KEYS = {"name", "n", "models", "adversaries", "trials", "seed", "max_rounds",
                "trace", "fits", "compare", "output_dir"}
_FIT_KEYS = {"axis", "adversary", "n", "model", "min", "max", "name"}
_TRACE_LEVELS = ("none", "trials", "rounds")


@dataclass(frozen=True)
class Cell:
    n: int
    model: SmoothingModel
    adversary: AdversarySpec

    @property
    def key(self) -> str:
        return f"n={self.n}|{self.model.label}|{self.adversary.label}"


@dataclass
class ExperimentConfig:
    name: str
    n: list[int]
    models: list[dict]
    adversaries: list[dict]
    trials: int
    seed: int = 0
    max_rounds: int | None = None
    trace: str = "none"
    fits: list[dict] = field(default_factory=list)
    compare: list[dict] = field(default_factory=list)
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        extra = set(d) - _CONFIG_KEYS
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"name", "n", "models", "adversaries", "trials"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in sorted(_CONFIG_KEYS)}

    def validate(self) -> None:
        if not self.n or any(not isinstance(x, int) or x < 1 for x in self.n):
            raise ConfigError("n must be a non-empty list of positive integers")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.max_rounds is not None and (not isinstance(self.max_rounds, int) or self.max_rounds < 1):
            raise ConfigError("max_rounds must be a positive integer or null")
        if self.trace not in _TRACE_LEVELS:
            raise ConfigError(f"trace must be one of {_TRACE_LEVELS}, got {self.trace!r}")
        if not self.models or not self.adversaries:
            raise ConfigError("models and adversaries must be non-empty")
        cells = self.cells()
        for fit in self.fits:
            _check_fit(fit, cells)
        for cmp in self.compare:
            if set(cmp) != {"a", "b"}:
                raise ConfigError(f"compare entries need exactly keys 'a' and 'b', got {sorted(cmp)}")

    def cells(self) -> list[Cell]:
        """All cells, premise-checked; the error names the violated premise."""
        models = [model_from_dict(m) for m in self.models]
        out = []
        for n in self.n:
            specs = [AdversarySpec.from_dict(a, n) for a in self.adversaries]
            for model in models:
                for spec in specs:
                    cell = Cell(n, model, spec)
                    try:
                        model.validate(n)
                        build_adversary(spec, model)
                    except ConfigError as exc:
                        raise ConfigError(f"cell {cell.key}: {exc}") from None
                    out.append(cell)
        keys = [c.key for c in out]
        if len(set(keys)) != len(keys):
            raise ConfigError("duplicate cells in grid")
        return out


def _check_fit(fit: dict, cells: list[Cell]):
    extra = set(fit) - _FIT_KEYS
    if extra:
        raise ConfigError(f"unknown fit keys: {sorted(extra)}")
    if fit.get("axis") not in ("n", "k", "epsilon"):
        raise ConfigError("fit axis must be 'n', 'k' or 'epsilon'")
    if "adversary" not in fit:
        raise ConfigError("fit needs an 'adversary' label")
    if fit["axis"] == "n" and "model" not in fit:
        raise ConfigError("an n-fit needs a fixed 'model'")
    if fit["axis"] != "n" and "n" not in fit:
        raise ConfigError(f"a {fit['axis']}-fit needs a fixed 'n'")
    if len(select_fit_cells(fit, cells)) < 3:
        raise ConfigError(f"fit {fit} selects fewer than 3 cells")


def _fit_x(fit: dict, cell: Cell):
    axis = fit["axis"]
    if axis == "n":
        return cell.n
    if axis == "k":
        return cell.model.k if isinstance(cell.model, KSmooth) else None
    return getattr(cell.model, "epsilon", None)


def select_fit_cells(fit: dict, cells: list[Cell]) -> list[Cell]:
    """Cells on the fit's axis, sorted by the axis value."""
    chosen = []
    model = model_from_dict(fit["model"]) if "model" in fit else None
    for cell in cells:
        if cell.adversary.label != fit["adversary"]:
            continue
        if fit["axis"] == "n":
            if cell.model != model:
                continue
        elif cell.n != fit["n"]:
            continue
        x = _fit_x(fit, cell)
        if x is None or x <= 0:
            continue
        if x < fit.get("min", -math.inf) or x > fit.get("max", math.inf):
            continue
        chosen.append(cell)
    return sorted(chosen, key=lambda c: _fit_x(fit, c))


# -- statistics ------------------------------------------------------------


@dataclass(frozen=True)
class CellSummary:
    """Flooding-time statistics for one cell; censored trials count as ``inf``."""

    cell: str
    n: int
    model: str
    adversary: str
    trials: int
    min: float
    median: float
    mean: float
    p90: float
    max: float
    censored_fraction: float
    mean_noise_per_round: float
    mean_rejections: float

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer():
        return str(int(x))
    return repr(x)


def flooding_times(values) -> np.ndarray:
    """Flooding times as floats with ``None`` (censored) mapped to ``inf``."""
    return np.array([math.inf if v is None else v for v in values], dtype=float)


def summarize(cell: Cell, rows: list[dict]) -> CellSummary:
    """Summary from per-trial rows (the same dicts written to JSONL)."""
    times = flooding_times([r["flooding_time"] for r in rows])
    censored = np.isinf(times)
    rounds = sum(r["rounds_run"] for r in rows)
    noise = sum(r["total_noise"] for r in rows)
    rejections = sum(r["total_rejections"] for r in rows)
    return CellSummary(
        cell=cell.key,
        n=cell.n,
        model=cell.model.label,
        adversary=cell.adversary.label,
        trials=len(rows),
        min=float(times.min()),
        median=float(np.median(times)),
        mean=float(times.mean()) if not censored.any() else math.nan,
        p90=float(np.quantile(times, 0.9, method="inverted_cdf")),
        max=float(times.max()),
        censored_fraction=float(censored.mean()),
        mean_noise_per_round=noise / rounds if rounds else 0.0,
        mean_rejections=rejections / len(rows),
    )


@dataclass(frozen=True)
class ScalingFit:
    """Least squares of ``log(median)`` on ``log(x)``."""

    name: str
    axis: str
    adversary: str
    fixed: str
    exponent: float
    stderr: float
    intercept: float
    cells: tuple[str, ...]
    excluded: tuple[str, ...]
    x: tuple[float, ...]
    median: tuple[float, ...]
    residuals: tuple[float, ...]

    def row(self) -> list[str]:
        def join(xs):
            return ";".join(_fmt(v) for v in xs)

        return [self.name, self.axis, self.adversary, self.fixed, _fmt(self.exponent),
                _fmt(self.stderr), _fmt(self.intercept), str(len(self.cells)),
                ";".join(self.excluded), join(self.x), join(self.median), join(self.residuals)]


def loglog_fit(x, y) -> tuple[float, float, float, np.ndarray]:
    """``(slope, stderr, intercept, residuals)`` on natural logs; needs 3 points."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if len(lx) < 3:
        raise ValueError("a scaling fit needs at least 3 points")
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    return float(res.slope), float(res.stderr), float(res.intercept), resid


def fit_scaling(fit: dict, cells: list[Cell], summaries: dict[str, CellSummary]) -> ScalingFit:
    chosen = select_fit_cells(fit, cells)
    used = [c for c in chosen if summaries[c.key].censored_fraction == 0]
    excluded = tuple(c.key for c in chosen if summaries[c.key].censored_fraction > 0)
    if excluded:
        log.warning("fit %s: excluding censored cells %s", fit.get("name", fit["axis"]), excluded)
    xs = [float(_fit_x(fit, c)) for c in used]
    meds = [summaries[c.key].median for c in used]
    if len(used) >= 3:
        slope, se, icpt, resid = loglog_fit(xs, meds)
    else:
        slope = se = icpt = math.nan
        resid = np.full(len(used), math.nan)
    fixed = f"n={fit['n']}" if fit["axis"] != "n" else model_from_dict(fit["model"]).label
    return ScalingFit(
        name=fit.get("name", f"{fit['axis']}:{fit['adversary']}"),
        axis=fit["axis"],
        adversary=fit["adversary"],
        fixed=fixed,
        exponent=slope,
        stderr=se,
        intercept=icpt,
        cells=tuple(c.key for c in used),
        excluded=excluded,
        x=tuple(xs),
        median=tuple(meds),
        residuals=tuple(float(r) for r in resid),
    )


@dataclass(frozen=True)
class Separation:
    """Median ratio ``a / b`` with a percentile bootstrap interval."""

    n: int
    model: str
    a: str
    b: str
    median_a: float
    median_b: float
    ratio: float
    ci_low: float
    ci_high: float

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in COMPARE_COLUMNS]


def bootstrap_ratio(a, b, rng, resamples: int = 2000, level: float = 0.95):
    """Percentile interval for ``median(a) / median(b)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    ma = np.median(a[rng.integers(0, len(a), size=(resamples, len(a)))], axis=1)
    mb = np.median(b[rng.integers(0, len(b), size=(resamples, len(b)))], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = ma / mb
    lo, hi = np.quantile(ratios, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def compare_adversaries(result: ExperimentResult, a: str, b: str, resamples: int = 2000):
    """Separation reports for every (n, model) where both adversaries ran."""
    by = {}
    for cell in result.cells:
        by[(cell.n, cell.model.label, cell.adversary.label)] = cell
    out = []
    for cell in result.cells:
        if cell.adversary.label != a:
            continue
        other = by.get((cell.n, cell.model.label, b))
        if other is None:
            continue
        ta = flooding_times(r["flooding_time"] for r in result.rows[cell.key])
        tb = flooding_times(r["flooding_time"] for r in result.rows[other.key])
        rng, _ = trial_rng(result.config.seed, f"compare|{cell.key}|{other.key}", 0)
        lo, hi = bootstrap_ratio(ta, tb, rng, resamples)
        ma, mb = float(np.median(ta)), float(np.median(tb))
        out.append(Separation(cell.n, cell.model.label, a, b, ma, mb, ma / mb, lo, hi))
    return out


# -- execution -------------------------------------------------------------


def trial_row(cell: Cell, trial: int, rec: TrialRecord, lineage, rounds: bool) -> dict:
    row = {
        "cell": cell.key,
        "n": cell.n,
        "model": cell.model.to_dict(),
        "adversary": cell.adversary.to_dict(),
        "trial": trial,
        "seed_lineage": list(lineage),
        "flooding_time": rec.flooding_time,
        "max_rounds": rec.max_rounds,
        "rounds_run": rec.rounds_run,
        "total_noise": rec.total_noise,
        "total_rejections": rec.total_rejections,
        "cap_bound_rounds": rec.cap_bound_rounds,
    }
    if rounds:
        row["rounds"] = {f: rec.trace[f].tolist() for f in TRACE_FIELDS}
    return row


def _run_chunk(job):
    """Worker entry point: ``job`` is plain data so it pickles cheaply."""
    n, model_d, adv_d, seed, max_rounds, trials, keep_rounds = job
    model = model_from_dict(model_d)
    cell = Cell(n, model, AdversarySpec.from_dict(adv_d, n))
    rows = []
    for trial in trials:
        rng, lineage = trial_rng(seed, cell.key, trial)
        rec = run_trial(cell.adversary, model, max_rounds, rng, lineage=lineage)
        rows.append(trial_row(cell, trial, rec, lineage, keep_rounds))
    return cell.key, rows


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
    return max(1, workers)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list[Cell]
    rows: dict[str, list[dict]]
    summaries: dict[str, CellSummary]
    fits: list[ScalingFit]
    comparisons: list[Separation]

    def summary_csv(self) -> str:
        return _csv(SUMMARY_VERSION, SUMMARY_COLUMNS, [self.summaries[c.key].row() for c in self.cells])

    def fits_csv(self) -> str:
        return _csv(FITS_VERSION, FIT_COLUMNS, [f.row() for f in self.fits])

    def compare_csv(self) -> str:
        return _csv(COMPARE_VERSION, COMPARE_COLUMNS, [s.row() for s in self.comparisons])

    def trials_jsonl(self) -> str:
        lines = []
        for cell in self.cells:
            for row in self.rows[cell.key]:
                lines.append(json.dumps(row, sort_keys=True))
        return "".join(line + "\n" for line in lines)

    def write(self, output_dir=None) -> Path:
        out = Path(output_dir or self.config.output_dir or f"out/{self.config.name}")
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "summary.csv").write_text(self.summary_csv())
            if self.config.fits:
                (out / "fits.csv").write_text(self.fits_csv())
            if self.config.compare:
                (out / "compare.csv").write_text(self.compare_csv())
            if self.config.trace != "none":
                (out / "trials.jsonl").write_text(self.trials_jsonl())
        except OSError as exc:
            raise OSError(f"cannot write results to {out}: {exc}") from exc
        return out


def _csv(version, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(version + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def run_experiment(config: ExperimentConfig, workers: int | None = None, chunk: int = 25) -> ExperimentResult:
    """Run every trial of every cell and compute summaries, fits and comparisons.

    Trials are split into chunks; with ``workers > 1`` chunks run in a
    process pool.  Results are reassembled by cell key and trial index, so
    the output does not depend on ``workers``.
    """
    config.validate()
    cells = config.cells()
    workers = default_workers() if workers is None else max(1, workers)
    keep_rounds = config.trace == "rounds"
    jobs = []
    for cell in cells:
        for start in range(0, config.trials, chunk):
            trials = range(start, min(start + chunk, config.trials))
            jobs.append((cell.n, cell.model.to_dict(), cell.adversary.to_dict(), config.seed,
                         config.max_rounds, trials, keep_rounds))
    if workers == 1:
        outputs = map(_run_chunk, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outputs = pool.map(_run_chunk, jobs)
    rows = {c.key: [] for c in cells}
    try:
        for key, chunk_rows in outputs:
            rows[key].extend(chunk_rows)
    finally:
        if workers != 1:
            pool.shutdown()
    for key in rows:
        rows[key].sort(key=lambda r: r["trial"])
    summaries = {c.key: summarize(c, rows[c.key]) for c in cells}
    fits = [fit_scaling(f, cells, summaries) for f in config.fits]
    result = ExperimentResult(config, cells, rows, summaries, fits, [])
    for cmp in config.compare:
        result.comparisons.extend(compare_adversaries(result, cmp["a"], cmp["b"]))
    return result


def read_trials(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def summaries_from_jsonl(config: ExperimentConfig, path) -> dict[str, CellSummary]:
    """Recompute the cell summaries from a ``trials.jsonl`` file."""
    by_key = {}
    for row in read_trials(path):
        by_key.setdefault(row["cell"], []).append(row)
    return {c.key: summarize(c, sorted(by_key[c.key], key=lambda r: r["trial"])) for c in config.cells()}
