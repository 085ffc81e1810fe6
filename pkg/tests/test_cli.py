import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from compsched.cli import main
from compsched.config import ConfigError, ConfigParseError, ScenarioConfig, load_config

MINIMAL = {
    "seed": 7,
    "arrivals": {"type": "poisson", "rate": 0.5},
    "service": {"type": "deterministic", "value": 1.0},
    "discipline": "fifo",
    "n_jobs": 100,
}


def write_cfg(tmp_path, raw, name="scenario.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return p


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def csv_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(Path(d).rglob("*.csv"))}


# --- run -----------------------------------------------------------------------------------


def test_minimal_run(tmp_path, capsys):
    cfg = write_cfg(tmp_path, MINIMAL)
    code, out, err = run(["run", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert out.strip() == str(tmp_path / "o" / "summary.json")
    rows = read_rows(tmp_path / "o" / "jobs.csv")
    assert rows[0] == ["id", "arrival", "size", "class", "sojourn"]
    assert len(rows) == 101
    assert all(float(r[4]) >= 1.0 for r in rows[1:] if r[4] not in ("", "nan"))
    wl = read_rows(tmp_path / "o" / "workload.csv")
    assert wl[0][0] == "arrival_index" and wl[0][-1] == "total"
    assert len(wl) == 101


def test_run_is_byte_reproducible(tmp_path, capsys):
    raw = dict(MINIMAL, service={"type": "pareto", "alpha": 2.2}, discipline="ps", n_jobs=3000, k_list=[0, 1], arrivals={"type": "poisson", "rate": 0.2})
    cfg = write_cfg(tmp_path, raw)
    assert run(["run", cfg, "--out", tmp_path / "a"], capsys)[0] == 0
    assert run(["run", cfg, "--out", tmp_path / "b"], capsys)[0] == 0
    a, b = csv_bytes(tmp_path / "a"), csv_bytes(tmp_path / "b")
    assert a == b
    assert "report_classic.csv" in a and "report_thm1_k1.csv" in a
    assert read_rows(tmp_path / "a" / "report_classic.csv")[0] == ["x", "empirical", "ci", "theoretical", "ratio"]


def test_replications_independent_of_worker_count(tmp_path, capsys):
    raw = dict(MINIMAL, service={"type": "exponential", "rate": 1.0}, n_jobs=2000, replications=3, discipline="srpt")
    cfg = write_cfg(tmp_path, raw)
    assert run(["run", cfg, "--out", tmp_path / "one", "--jobs", 1], capsys)[0] == 0
    assert run(["run", cfg, "--out", tmp_path / "two", "--jobs", 2], capsys)[0] == 0
    a = csv_bytes(tmp_path / "one")
    assert a == csv_bytes(tmp_path / "two")
    assert {"rep_000/jobs.csv", "rep_001/jobs.csv", "rep_002/jobs.csv"} <= set(a)


def test_summary_embeds_resolved_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(MINIMAL, n_jobs=500))
    run(["run", cfg, "--out", tmp_path / "a"], capsys)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["config"]["seed"] == 7
    assert summary["rho"] == pytest.approx(0.5)
    again = write_cfg(tmp_path, summary["config"], "again.yaml")
    run(["run", again, "--out", tmp_path / "b"], capsys)
    assert csv_bytes(tmp_path / "a") == csv_bytes(tmp_path / "b")


def test_seed_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(MINIMAL, service={"type": "exponential", "rate": 1.0}))
    run(["run", cfg, "--out", tmp_path / "a"], capsys)
    run(["run", cfg, "--out", tmp_path / "b", "--seed", 8], capsys)
    assert csv_bytes(tmp_path / "a") != csv_bytes(tmp_path / "b")
    assert json.loads((tmp_path / "b" / "summary.json").read_text())["config"]["seed"] == 8


def test_unstable_config_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(MINIMAL, arrivals={"type": "poisson", "rate": 1.2}))
    code, out, err = run(["run", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 3
    assert out == ""
    assert "rho" in err and ">= 1" in err


def test_allow_unstable_runs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(MINIMAL, arrivals={"type": "poisson", "rate": 1.2}, allow_unstable=True))
    assert run(["run", cfg, "--out", tmp_path / "o"], capsys)[0] == 0


def test_bad_yaml_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("seed: [1, 2\n", encoding="utf-8")
    code, out, _ = run(["run", p, "--out", tmp_path / "o"], capsys)
    assert code == 2 and out == ""


def test_missing_config_exit_2(tmp_path, capsys):
    assert run(["run", tmp_path / "nope.yaml"], capsys)[0] == 2


def test_invalid_fields_all_reported(tmp_path, capsys):
    raw = dict(MINIMAL, n_jobs=0, warmup_fraction=1.5, service={"type": "pareto", "alpha": -1})
    code, _, err = run(["run", write_cfg(tmp_path, raw), "--out", tmp_path / "o"], capsys)
    assert code == 3
    assert err.count("invalid scenario") >= 3


def test_fifo_isolation_reports(tmp_path, capsys):
    raw = dict(
        MINIMAL,
        service={"type": "pareto", "alpha": 2.0},
        arrivals={"type": "poisson", "rate": 0.25},
        class_capacities=[0.8, 0.5],
        k_list=[0, 1],
        n_jobs=5000,
    )
    code, out, _ = run(["run", write_cfg(tmp_path, raw), "--out", tmp_path / "o"], capsys)
    assert code == 0
    names = set(csv_bytes(tmp_path / "o"))
    assert {"report_workload.csv", "report_thm3_k0.csv", "report_thm3_k1.csv"} <= names


def test_comparison_scheduler_reports(tmp_path, capsys):
    raw = dict(
        MINIMAL,
        service={"type": "pareto", "alpha": 2.0},
        arrivals={"type": "poisson", "rate": 0.25},
        discipline={"type": "comparison_sp", "m": 1},
        k_list=[0],
        n_jobs=5000,
    )
    assert run(["run", write_cfg(tmp_path, raw), "--out", tmp_path / "o"], capsys)[0] == 0
    assert "report_thm4_k0.csv" in csv_bytes(tmp_path / "o")


# --- verify ----------------------------------------------------------------------------------


def test_verify_unknown_suite(tmp_path, capsys):
    code, out, err = run(["verify", "nonsense", "--out", tmp_path / "v"], capsys)
    assert code == 2 and out == "" and "unknown suite" in err


def test_verify_dominance_and_report(tmp_path, capsys):
    code, out, err = run(["verify", "dominance", "--out", tmp_path / "v", "--jobs", 1], capsys)
    assert code == 0
    assert out.strip() == str(tmp_path / "v" / "summary.json")
    assert "A5 PASS" in err
    checks = (tmp_path / "v" / "checks.txt").read_text()
    code, out, _ = run(["report", tmp_path / "v"], capsys)
    assert code == 0
    assert (tmp_path / "v" / "report" / "pass_fail.txt").read_text() == checks


# --- report ----------------------------------------------------------------------------------


def test_report_empty_k_list_only_unconditional(tmp_path, capsys):
    raw = dict(MINIMAL, service={"type": "pareto", "alpha": 2.2}, discipline="ps", arrivals={"type": "poisson", "rate": 0.2}, n_jobs=2000)
    run(["run", write_cfg(tmp_path, raw), "--out", tmp_path / "o"], capsys)
    code, out, _ = run(["report", tmp_path / "o"], capsys)
    assert code == 0
    index = json.loads(Path(out.strip()).read_text())
    curves = [f for f in index["files"] if f.startswith("survival_")]
    assert curves and all(f.endswith("_all.csv") for f in curves)
    assert "plot_curves.py" in index["files"]


def test_report_class_curves_are_ordered(tmp_path, capsys):
    raw = dict(
        MINIMAL,
        service={"type": "pareto", "alpha": 1.44},
        discipline="none",
        splitter={"m": 3},
        k_list=[0, 1, 2, 3],
        n_jobs=200_000,
        arrivals={"type": "poisson", "rate": 0.1},
    )
    run(["run", write_cfg(tmp_path, raw), "--out", tmp_path / "o"], capsys)
    run(["report", tmp_path / "o"], capsys)
    rep = tmp_path / "o" / "report"
    curves = [np.loadtxt(rep / f"survival_size_k{k}.csv", delimiter=",", skiprows=1) for k in range(4)]
    x = curves[0][:, 0]
    ok = (x > 10**0.1) & (curves[3][:, 3] >= 100)
    assert ok.sum() >= 5
    for a, b in zip(curves, curves[1:]):
        assert np.all(a[ok, 1] >= b[ok, 1])


def test_report_missing_dir(tmp_path, capsys):
    assert run(["report", tmp_path / "nothing"], capsys)[0] == 1


# --- config module -----------------------------------------------------------------------------


def test_config_round_trip():
    raw = dict(MINIMAL, discipline={"type": "comparison_sp", "m": 2, "l": 4, "init": "prefill"}, service={"type": "pareto", "alpha": 1.5}, arrivals={"type": "poisson", "rate": 0.1})
    cfg = ScenarioConfig.from_dict(raw)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg


def test_config_defaults():
    cfg = ScenarioConfig.from_dict(MINIMAL)
    assert cfg.replications == 1 and cfg.warmup_fraction == 0.2 and cfg.capacity == 1.0
    assert cfg.tolerances["ratio"] == [0.5, 2.0] and cfg.tolerances["floor"] == 30
    assert cfg.rho == pytest.approx(0.5)


@pytest.mark.parametrize(
    "patch",
    [
        {"n_jobs": -5},
        {"replications": 0},
        {"seed": -1},
        {"discipline": "lottery"},
        {"discipline": {"type": "static_priority", "num_classes": 3}, "splitter": {"m": 1}},
        {"arrivals": {"type": "poisson"}},
        {"service": {"type": "discrete", "values": [1, 2], "probs": [0.5, 0.5]}},
        {"k_list": [5]},
        {"capacity": 0},
        {"unexpected": 1},
    ],
)
def test_config_validation(patch):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(dict(MINIMAL, **patch))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / "absent.yaml")
    p = tmp_path / "list.yaml"
    p.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises((ConfigParseError, ConfigError)):
        load_config(p)
