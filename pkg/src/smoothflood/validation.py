"""Acceptance suites behind ``smoothflood validate``.

Each suite reads its preset from ``presets/<suite>.json``, runs, writes
CSV tables under ``<out>/<suite>/`` and returns named pass/fail checks.
The thresholds live here, next to the code that measures them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .adversary import CassetteAdversary, build_adversary
from .graph import Graph, diameter, is_connected, toggle_keys
from .harness import ExperimentConfig, ExperimentResult, _fmt, run_experiment
from .oracle import (
    connected_graph_classes,
    enumerate_t_smoothing,
    exact_targeted_distribution,
    total_variation,
)
from .seeding import trial_rng
from .smoothing import Targeted, sample_t_smoothing_many, sample_targeted_many

CHECKS_VERSION = "# smoothflood checks v1"


@dataclass
class Check:
    name: str
    value: float
    target: str
    passed: bool

    def row(self):
        return [self.name, _fmt(self.value), self.target, "pass" if self.passed else "fail"]


@dataclass
class SuiteResult:
    suite: str
    criterion: int
    title: str
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, str] = field(default_factory=dict)
    results: dict[str, ExperimentResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name, value, target, passed):
        self.checks.append(Check(name, value, target, bool(passed)))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [c.name for c in self.checks if not c.passed]
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"{status} [{self.criterion}] {self.suite}: {self.title}{detail}"

    def write(self, out_dir) -> Path:
        d = Path(out_dir) / self.suite
        d.mkdir(parents=True, exist_ok=True)
        tables = dict(self.tables)
        tables["checks.csv"] = _table(CHECKS_VERSION, ("check", "value", "target", "status"),
                                      [c.row() for c in self.checks])
        for name, res in self.results.items():
            tables[f"{name}.summary.csv"] = res.summary_csv()
            if res.fits:
                tables[f"{name}.fits.csv"] = res.fits_csv()
            if res.comparisons:
                tables[f"{name}.compare.csv"] = res.compare_csv()
        for fname, text in sorted(tables.items()):
            (d / fname).write_text(text)
        return d


def _table(version, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(version + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def load_preset(suite: str) -> dict:
    text = resources.files("smoothflood.presets").joinpath(f"{suite}.json").read_text()
    return json.loads(text)


def _experiment(preset: dict, key: str, seed: int | None, workers) -> ExperimentResult:
    cfg = dict(preset[key])
    if seed is not None:
        cfg["seed"] = seed
    return run_experiment(ExperimentConfig.from_dict(cfg), workers=workers)


def _summary(res: ExperimentResult, n: int, model_label: str, adversary: str):
    for cell in res.cells:
        if cell.n == n and cell.model.label == model_label and cell.adversary.label == adversary:
            return res.summaries[cell.key]
    raise KeyError((n, model_label, adversary))


def _fit(res: ExperimentResult, name: str):
    for f in res.fits:
        if f.name == name:
            return f
    raise KeyError(name)


# -- suites ------------------------------------------------------------------


def suite_sampler(seed=None, workers=None) -> SuiteResult:
    """Batch t-smoothing against enumeration on every connected graph with n <= 5."""
    p = load_preset("sampler")
    seed = p["seed"] if seed is None else seed
    res = SuiteResult("sampler", 1, "t-smoothing sampler matches exact enumeration")
    rows = []
    worst = 0.0
    for n in range(1, p["max_n"] + 1):
        for idx, g in enumerate(connected_graph_classes(n)):
            for t in p["t"]:
                rng, _ = trial_rng(seed, f"sampler|n={n}|class={idx}|t={t}", 0)
                g_lab = _relabel(g, rng.permutation(n))
                table = enumerate_t_smoothing(g_lab, t)
                exact = {_code(g_lab, h): q for h, q in table.probabilities.items()}
                batch = sample_t_smoothing_many(g_lab, t, p["draws"], rng)
                codes, counts = np.unique(batch.toggle_codes(), return_counts=True)
                emp = {int(c): k / p["draws"] for c, k in zip(codes, counts)}
                tv = total_variation(exact, emp)
                worst = max(worst, tv)
                rows.append([n, idx, t, g_lab.m, len(exact), _fmt(tv)])
    res.tables["instances.csv"] = _table(CHECKS_VERSION, ("n", "class", "t", "edges", "support", "tv"), rows)
    res.check("instances", len(rows), "all connected classes n<=5, t in {1,2}", len(rows) == 31 * len(p["t"]))
    res.check("max_tv", worst, f"< {p['tolerance']}", worst < p["tolerance"])
    return res


def _relabel(g: Graph, perm) -> Graph:
    return Graph(g.n, [(int(perm[a]), int(perm[b])) for a, b in g.edges()])


def _code(base: Graph, h: Graph) -> int:
    diff = np.setxor1d(base.keys, h.keys, assume_unique=True)
    return int(sum(1 << int(k) for k in diff))


def _random_connected(n, rng) -> Graph:
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.3:
                edges.add((a, b))
    return Graph(n, edges)


def suite_targeted(seed=None, workers=None) -> SuiteResult:
    """Targeted sampler against enumeration, plus the cassette survival rate."""
    p = load_preset("targeted")
    seed = p["seed"] if seed is None else seed
    res = SuiteResult("targeted", 2, "targeted smoothing exact; cassette shortcut survives eps^t")
    rows = []
    worst = 0.0
    for i in range(p["instances"]):
        rng, _ = trial_rng(seed, f"targeted|instance={i}", 0)
        n = int(rng.integers(3, 7))
        g_old = _random_connected(n, rng)
        slots = [a * n + b for a in range(n) for b in range(a + 1, n)]
        while True:  # proposals are connected by contract
            d = int(rng.integers(1, min(p["max_diff"], len(slots)) + 1))
            g_adv = toggle_keys(g_old, rng.choice(slots, size=d, replace=False))
            if is_connected(g_adv):
                break
        eps = round(float(rng.uniform(0.1, 0.9)), 2)
        table = exact_targeted_distribution(g_old, g_adv, eps)
        exact = {_code(g_adv, h): q for h, q in table.probabilities.items()}
        batch = sample_targeted_many(g_adv, g_old, eps, p["draws"], rng)
        codes, counts = np.unique(batch.toggle_codes(), return_counts=True)
        emp = {int(c): k / p["draws"] for c, k in zip(codes, counts)}
        tv = total_variation(exact, emp)
        worst = max(worst, tv)
        rows.append([i, n, d, _fmt(eps), len(exact), _fmt(tv)])
    res.tables["instances.csv"] = _table(CHECKS_VERSION, ("instance", "n", "diff", "epsilon", "support", "tv"), rows)
    res.check("max_tv", worst, f"< {p['tolerance']}", worst < p["tolerance"])

    c = p["cassette"]
    rate = cassette_absence_rate(c["n"], c["t"], c["epsilon"], c["j"], c["runs"], seed)
    target = c["epsilon"] ** c["t"]
    res.check("cassette_absent", rate, f"{target:.3f} +- {c['tolerance']}", abs(rate - target) <= c["tolerance"])
    return res


def cassette_absence_rate(n, t, epsilon, j, runs, seed) -> float:
    """Fraction of runs where ``(0, (j-1)t)`` is missing from ``G'_{jt}``."""
    adv = CassetteAdversary(n, t)
    model = Targeted(epsilon)
    missing = 0
    for r in range(runs):
        rng, _ = trial_rng(seed, f"cassette-survival|n={n}|t={t}|eps={epsilon}", r)
        prev = adv.propose(1)
        for i in range(1, j * t + 1):
            prev = model.step(prev, adv.propose(i), rng).smoothed
        missing += not prev.has_edge(0, (j - 1) * t)
    return missing / runs


def suite_zero_noise(seed=None, workers=None) -> SuiteResult:
    p = load_preset("zero_noise")
    res = SuiteResult("zero_noise", 3, "noiseless spooling and static path flood in exactly n-1")
    r = _experiment(p, "experiment", seed, workers)
    res.results["zero_noise"] = r
    for cell in r.cells:
        s = r.summaries[cell.key]
        ok = s.min == s.max == cell.n - 1
        res.check(f"{cell.adversary.label}:n={cell.n}", s.max, f"== {cell.n - 1}", ok)
    return res


def suite_oblivious(seed=None, workers=None) -> SuiteResult:
    p = load_preset("oblivious")
    res = SuiteResult("oblivious", 4, "oblivious spooling: monotone in k, k-slope and n-exponent")
    rk = _experiment(p, "k_sweep", seed, workers)
    rn = _experiment(p, "n_sweep", seed, workers)
    res.results["k_sweep"], res.results["n_sweep"] = rk, rn
    cells = sorted(rk.cells, key=lambda c: c.model.k)
    meds = [rk.summaries[c.key].median for c in cells]
    pairs = [f"{_fmt(a.model.k)}>{_fmt(b.model.k)}" for a, b in zip(cells, cells[1:])]
    drops = [x > y for x, y in zip(meds, meds[1:])]
    res.check("monotone_in_k", sum(drops), f"{len(drops)} strict drops ({', '.join(pairs)})", all(drops))
    kf = _fit(rk, "k_slope")
    res.check("k_slope", kf.exponent, "in [-0.50, -0.18]", -0.50 <= kf.exponent <= -0.18)
    nf = _fit(rn, "n_exponent")
    res.check("n_exponent", nf.exponent, "in [0.55, 0.80]", 0.55 <= nf.exponent <= 0.80)
    return res


def suite_fractional(seed=None, workers=None) -> SuiteResult:
    p = load_preset("fractional")
    res = SuiteResult("fractional", 5, "median at k=1/2 strictly between k=1/8 and k=1")
    r = _experiment(p, "experiment", seed, workers)
    res.results["fractional"] = r
    med = {c.model.k: r.summaries[c.key].median for c in r.cells}
    lo, mid, hi = med[0.125], med[0.5], med[1]
    res.check("median_k=1/8", lo, "> median k=1/2", lo > mid)
    res.check("median_k=1", hi, "< median k=1/2", mid > hi)
    return res


def suite_adaptive(seed=None, workers=None) -> SuiteResult:
    p = load_preset("adaptive")
    res = SuiteResult("adaptive", 6, "adaptive spooling >= 2x oblivious; exponents split at 0.8")
    r = _experiment(p, "experiment", seed, workers)
    res.results["adaptive"] = r
    for s in r.comparisons:
        res.check(f"ratio:n={s.n}", s.ratio, ">= 2", s.ratio >= 2)
    fa, fo = _fit(r, "adaptive_n"), _fit(r, "oblivious_n")
    res.check("adaptive_exponent", fa.exponent, ">= 0.8", fa.exponent >= 0.8)
    res.check("oblivious_exponent", fo.exponent, "<= 0.8", fo.exponent <= 0.8)
    return res


def suite_adaptive_growth(seed=None, workers=None) -> SuiteResult:
    p = load_preset("adaptive_growth")
    res = SuiteResult("adaptive_growth", 7, "mean informed count <= 3i for i <= n/20")
    r = _experiment(p, "experiment", seed, workers)
    res.results["adaptive_growth"] = r
    (cell,) = r.cells
    horizon = cell.n // 20
    counts = np.zeros(horizon)
    for row in r.rows[cell.key]:
        ic = np.asarray(row["rounds"]["informed_count"], dtype=float)
        if len(ic) < horizon:
            ic = np.concatenate([ic, np.full(horizon - len(ic), cell.n)])
        counts += ic[:horizon]
    mean = counts / len(r.rows[cell.key])
    i = np.arange(1, horizon + 1)
    rows = [[int(a), _fmt(b), int(3 * a)] for a, b in zip(i, mean)]
    res.tables["informed.csv"] = _table(CHECKS_VERSION, ("round", "mean_informed", "bound"), rows)
    worst = float(np.max(mean / (3 * i)))
    res.check("max_mean_over_3i", worst, f"<= 1 for rounds 1..{horizon}", worst <= 1)
    return res


def suite_low_churn(seed=None, workers=None) -> SuiteResult:
    p = load_preset("low_churn")
    res = SuiteResult("low_churn", 8, "low-churn spooling: linear flooding, churn in [2,5]")
    r = _experiment(p, "experiment", seed, workers)
    res.results["low_churn"] = r
    for cell in r.cells:
        rows = r.rows[cell.key]
        slow = np.mean([row["flooding_time"] is None or row["flooding_time"] >= cell.n / 10 for row in rows])
        res.check(f"slow_fraction:n={cell.n}", slow, ">= 0.9", slow >= 0.9)
        churn = np.concatenate([row["rounds"]["proposed_churn"] for row in rows])
        ok = float(np.mean((churn >= 2) & (churn <= 5)))
        res.check(f"churn_in_2_5:n={cell.n}", ok, "== 1", ok == 1.0)
    return res


def suite_waiting_game(seed=None, workers=None) -> SuiteResult:
    p = load_preset("waiting_game")
    res = SuiteResult("waiting_game", 9, "static adversary under proportional noise sees no noise")
    r = _experiment(p, "experiment", seed, workers)
    res.results["waiting_game"] = r
    total = 0
    for cell in r.cells:
        total += sum(int(np.sum(row["rounds"]["noise_magnitude"])) for row in r.rows[cell.key])
        total += sum(int(np.sum(row["rounds"]["toggled_count"])) for row in r.rows[cell.key])
    res.check("total_noise", total, "== 0", total == 0)
    return res


def suite_star_recenter(seed=None, workers=None) -> SuiteResult:
    p = load_preset("star_recenter")
    res = SuiteResult("star_recenter", 10, "diameter-2 recentering floods in O(log n)")
    r = _experiment(p, "experiment", seed, workers)
    res.results["star_recenter"] = r
    const = p["constant"]
    for cell in r.cells:
        med = r.summaries[cell.key].median
        bound = const * math.log2(cell.n)
        res.check(f"median:n={cell.n}", med, f"<= {const} log2 n = {_fmt(bound)}", med <= bound)
    f = _fit(r, "n_exponent")
    res.check("n_exponent", f.exponent, "< 0.2", f.exponent < 0.2)
    return res


def suite_cassette(seed=None, workers=None) -> SuiteResult:
    p = load_preset("cassette")
    res = SuiteResult("cassette", 11, "cassette floods in n-1 with diameter <= 5t+4")
    r = _experiment(p, "experiment", seed, workers)
    res.results["cassette"] = r
    (cell,) = r.cells
    n = cell.n
    full = np.mean([row["flooding_time"] == n - 1 for row in r.rows[cell.key]])
    res.check("fraction_n_minus_1", full, ">= 0.9", full >= 0.9)
    adv = build_adversary(cell.adversary, cell.model)
    bound = 5 * adv.t + 4
    diam = max(diameter(adv.propose(i)) for i in range(1, n + 1))
    res.check("max_diameter", diam, f"<= 5t+4 = {bound} (t={adv.t})", diam <= bound)
    return res


SUITES = {
    "sampler": suite_sampler,
    "targeted": suite_targeted,
    "zero_noise": suite_zero_noise,
    "oblivious": suite_oblivious,
    "fractional": suite_fractional,
    "adaptive": suite_adaptive,
    "adaptive_growth": suite_adaptive_growth,
    "low_churn": suite_low_churn,
    "waiting_game": suite_waiting_game,
    "star_recenter": suite_star_recenter,
    "cassette": suite_cassette,
}


def run_validation(suites=None, out_dir=None, seed=None, workers=None, echo=None) -> list[SuiteResult]:
    """Run the named suites (all by default), writing tables if ``out_dir`` is set."""
    names = list(SUITES) if not suites else list(suites)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {list(SUITES)}")
    results = []
    for name in names:
        res = SUITES[name](seed=seed, workers=workers)
        if out_dir is not None:
            res.write(out_dir)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
