import json
import math
import subprocess
import sys

import numpy as np
import pytest

from smoothflood.cli import main
from smoothflood.errors import ConfigError
from smoothflood.graph import Graph
from smoothflood.harness import (
    ExperimentConfig,
    bootstrap_ratio,
    loglog_fit,
    run_experiment,
    summaries_from_jsonl,
)
from smoothflood.seeding import trial_rng


def small_config(**over):
    cfg = {
        "name": "small",
        "n": [32, 64],
        "models": [{"kind": "ksmooth", "k": 1}, {"kind": "ksmooth", "k": 2}],
        "adversaries": [{"kind": "spooling"}, {"kind": "adaptive_spooling"}],
        "trials": 12,
        "seed": 9,
        "trace": "trials",
    }
    cfg.update(over)
    return ExperimentConfig.from_dict(cfg)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        small_config(colour="red")
    with pytest.raises(ConfigError, match="unknown keys"):
        small_config(models=[{"kind": "ksmooth", "k": 1, "t": 3}])
    with pytest.raises(ConfigError, match="unknown keys"):
        small_config(adversaries=[{"kind": "spooling", "period": 2}])


def test_premise_violation_is_named():
    with pytest.raises(ConfigError, match="n/16"):
        small_config(models=[{"kind": "ksmooth", "k": 4}])
    with pytest.raises(ConfigError, match="1/5"):
        small_config(models=[{"kind": "proportional", "epsilon": 0.5}],
                     adversaries=[{"kind": "low_churn_spooling"}])
    with pytest.raises(ConfigError, match="increase n or c"):
        small_config(models=[{"kind": "targeted", "epsilon": 0.5}],
                     adversaries=[{"kind": "cassette", "c": 0.1}])


def test_fit_needs_three_cells():
    with pytest.raises(ConfigError, match="fewer than 3"):
        small_config(fits=[{"axis": "n", "adversary": "spooling", "model": {"kind": "ksmooth", "k": 1}}])


def test_single_star_cell(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "name": "star", "n": [20], "models": [{"kind": "ksmooth", "k": 1}],
        "adversaries": [{"kind": "static", "graph": "star", "source": 4}], "trials": 1, "seed": 0,
    })
    res = run_experiment(cfg)
    out = res.write(tmp_path)
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("# smoothflood summary v")
    assert len(lines) == 3
    s = next(iter(res.summaries.values()))
    assert s.max <= 2


def test_summary_invariants():
    res = run_experiment(small_config())
    for s in res.summaries.values():
        assert s.min <= s.median <= s.p90 <= s.max
        assert 0 <= s.censored_fraction <= 1


def test_rerun_is_byte_identical(tmp_path):
    a = run_experiment(small_config()).write(tmp_path / "a")
    b = run_experiment(small_config()).write(tmp_path / "b")
    for name in ("summary.csv", "trials.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_parallel_equals_serial():
    serial = run_experiment(small_config(), workers=1)
    parallel = run_experiment(small_config(), workers=2, chunk=5)
    assert serial.summary_csv() == parallel.summary_csv()
    assert serial.trials_jsonl() == parallel.trials_jsonl()


def test_workers_env(monkeypatch):
    monkeypatch.setenv("SMOOTHFLOOD_WORKERS", "2")
    assert run_experiment(small_config(trials=4)).summary_csv() == \
        run_experiment(small_config(trials=4), workers=1).summary_csv()


def test_summaries_recomputed_from_jsonl(tmp_path):
    cfg = small_config(max_rounds=40)  # some adaptive trials get censored
    res = run_experiment(cfg)
    out = res.write(tmp_path)
    again = summaries_from_jsonl(cfg, out / "trials.jsonl")
    assert again == res.summaries
    assert any(s.censored_fraction > 0 for s in again.values())
    assert any(math.isnan(s.mean) for s in again.values())


def test_seed_changes_results():
    a = run_experiment(small_config()).summary_csv()
    b = run_experiment(small_config(seed=10)).summary_csv()
    assert a != b


def test_trial_streams_independent_of_grid():
    # adding a cell must not change the draws of an existing one
    one = run_experiment(small_config(n=[32]))
    two = run_experiment(small_config())
    for key, rows in one.rows.items():
        assert rows == two.rows[key]


def test_loglog_fit_recovers_exponent():
    x = np.array([512, 1024, 2048, 4096])
    slope, se, icpt, resid = loglog_fit(x, 3 * x**0.5)
    assert slope == pytest.approx(0.5) and se == pytest.approx(0, abs=1e-12)
    assert np.allclose(resid, 0, atol=1e-12)
    with pytest.raises(ValueError):
        loglog_fit([1, 2], [1, 2])


def test_fits_and_censoring_exclusion():
    cfg = ExperimentConfig.from_dict({
        "name": "fit", "n": [64, 128, 256, 512], "models": [{"kind": "ksmooth", "k": 0}],
        "adversaries": [{"kind": "spooling"}], "trials": 2, "seed": 1, "max_rounds": 300,
        "fits": [{"name": "lin", "axis": "n", "adversary": "spooling", "model": {"kind": "ksmooth", "k": 0}}],
    })
    res = run_experiment(cfg)
    (fit,) = res.fits
    # n = 512 needs 511 > 300 rounds and is excluded; the rest is n - 1
    assert fit.excluded == ("n=512|ksmooth(k=0)|spooling",)
    assert len(fit.cells) == 3
    assert fit.exponent == pytest.approx(loglog_fit([64, 128, 256], [63, 127, 255])[0])
    assert "lin" in res.fits_csv()


def test_identical_adversaries_ratio_one():
    rng, _ = trial_rng(1, "boot", 0)
    a = np.random.default_rng(3).integers(50, 150, size=200)
    lo, hi = bootstrap_ratio(a, a.copy(), rng)
    assert lo <= 1 <= hi


def test_compare_report():
    cfg = small_config(compare=[{"a": "adaptive_spooling", "b": "spooling"}])
    res = run_experiment(cfg)
    assert len(res.comparisons) == 4
    for c in res.comparisons:
        assert c.ci_low <= c.ratio <= c.ci_high or c.ci_low <= c.ci_high
    assert res.compare_csv().startswith("# smoothflood compare v")


# -- CLI -------------------------------------------------------------------


def write_cfg(tmp_path, **over):
    d = {"name": "cli", "n": [40], "models": [{"kind": "ksmooth", "k": 1}],
         "adversaries": [{"kind": "spooling"}], "trials": 3, "seed": 5}
    d.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def test_cli_run(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "summary.csv").exists()
    assert "median" in capsys.readouterr().out


def test_cli_sweep_overrides(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["sweep", str(cfg), "--n", "48,64", "--k", "0.5,1,2", "--trials", "2",
                 "--out", str(tmp_path / "s")]) == 0
    rows = (tmp_path / "s" / "summary.csv").read_text().splitlines()[2:]
    assert len(rows) == 6


def test_cli_bad_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, bogus=1)
    assert main(["run", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_cli_sample_debug(capsys):
    assert main(["sample-debug", "--adversary", "spooling", "--round", "1", "--n", "5"]) == 0
    g = Graph.from_edgelist(capsys.readouterr().out)
    assert g.edge_set() == {(0, 1), (1, 2), (1, 3), (1, 4)}
    assert main(["sample-debug", "--adversary", "cassette", "--round", "5", "--n", "9",
                 "--c", "1.5", "--epsilon", "0.25"]) == 0
    g = Graph.from_edgelist(capsys.readouterr().out)
    assert g.edge_set() == Graph.path(9).edge_set() | {(0, 2), (0, 4)}  # t = 2
    assert main(["sample-debug", "--adversary", "adaptive_spooling", "--round", "3", "--n", "6"]) == 0
    g = Graph.from_edgelist(capsys.readouterr().out)
    assert g.edge_set() == {(0, 1), (0, 2), (0, 3), (3, 4), (3, 5)}


def test_cli_validate_suite(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "smoothflood", "validate", "--suite", "zero_noise", "--out", str(tmp_path)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("PASS [3] zero_noise")
    assert (tmp_path / "zero_noise" / "checks.csv").exists()
