import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from powersched.cli import main
from powersched.core import Job, ScheduleTrace, load_jobs, save_jobs
from powersched.feasibility import condition_edf
from powersched.harness import (
    SEED_ENV,
    ExperimentConfig,
    PackingError,
    check_witness,
    generate_feasible,
    rows_to_csv,
    run_ratio_experiment,
)
from powersched.oracle import OracleLimits


def test_generate_single_and_unit():
    jobs, w = generate_feasible(1, 10, 0, seed=4)
    assert len(jobs) == 1 and check_witness(jobs, w)
    jobs, _ = generate_feasible(30, 100, Fraction(1, 2), unit=True, seed=4)
    assert all(j.exec == 1 for j in jobs)
    with pytest.raises(PackingError):
        generate_feasible(11, 10, 0, unit=True)


def test_generate_over_many_seeds():
    for seed in range(1000):
        jobs, w = generate_feasible(1 + seed % 20, 100, [0, 0.2, 1][seed % 3], seed=seed)
        assert condition_edf(jobs)[0]
        assert check_witness(jobs, w)
        assert all(0 <= j.arrival and j.deadline <= 100 for j in jobs)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**40), st.integers(1, 50), st.booleans())
def test_generate_property(seed, n, unit):
    jobs, w = generate_feasible(n, 500, Fraction(1, 5), unit, seed)
    assert condition_edf(jobs)[0] and check_witness(jobs, w)
    assert generate_feasible(n, 500, Fraction(1, 5), unit, seed)[0] == jobs


def test_campaign_deterministic_and_threaded(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    cfg = ExperimentConfig(instances=20, seed=7)
    a = rows_to_csv(run_ratio_experiment(cfg))
    b = rows_to_csv(run_ratio_experiment(ExperimentConfig(instances=20, seed=7, workers=4)))
    assert a == b
    monkeypatch.setenv(SEED_ENV, "7")
    assert rows_to_csv(run_ratio_experiment(ExperimentConfig(instances=20, seed=99))) == a
    assert a.splitlines()[0].startswith("instance,policy,n_jobs")


def test_errors_become_rows():
    cfg = ExperimentConfig(instances=5, n_jobs=6, limits=OracleLimits(max_jobs=1))
    rows = run_ratio_experiment(cfg)
    assert any("OracleRefused" in r.row["error"] for r in rows)
    assert len(rows) == 5


def test_at_time_prefix():
    full = run_ratio_experiment(ExperimentConfig(instances=3, oracle="baseline"))
    part = run_ratio_experiment(ExperimentConfig(instances=3, oracle="baseline", at_time=10))
    for f, p in zip(full, part):
        assert Fraction(p.row["policy_energy"]) <= Fraction(f.row["policy_energy"])


# -- CLI --------------------------------------------------------------------


def test_cli_roundtrip(tmp_path, capsys):
    jobs_path = tmp_path / "jobs.json"
    assert main(["generate", "--n", "5", "--horizon", "20", "--seed", "2", "--out", str(jobs_path)]) == 0
    jobs = load_jobs(jobs_path)
    assert len(jobs) == 5

    assert main(["check", "--jobs", str(jobs_path)]) == 0
    assert json.loads(capsys.readouterr().out)["feasible"]

    trace_path, csv_path = tmp_path / "t.json", tmp_path / "e.csv"
    rc = main(["simulate", "--policy", "S", "--jobs", str(jobs_path), "--ew", "5",
               "--trace-out", str(trace_path), "--csv-out", str(csv_path)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["feasibility"]["feasible"] and out["violations"] == []
    ScheduleTrace.from_json(json.loads(trace_path.read_text())).check()
    assert csv_path.read_text().startswith("policy,wake")

    assert main(["opt", "--jobs", str(jobs_path), "--ew", "5"]) == 0
    assert "energy" in json.loads(capsys.readouterr().out)


def test_cli_check_infeasible(tmp_path, capsys):
    p = tmp_path / "bad.json"
    save_jobs([Job(1, 0, 2, 2), Job(2, 1, 2, 1)], p)
    assert main(["check", "--jobs", str(p)]) == 1
    w = json.loads(capsys.readouterr().out)["witness"]
    assert (w["left"], w["right"], w["demand"], w["verdict"]) == (0, 2, 3, "violated")


def test_cli_adversary_and_ratio(tmp_path, capsys):
    assert main(["adversary", "--policy", "S", "--k", "100"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["case"] == 1 and rep["ratio"] > 2
    out = tmp_path / "r.csv"
    assert main(["ratio", "--policy", "Sdagger", "--unit", "--instances", "5", "--csv-out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 6


def test_cli_bad_input(tmp_path, capsys):
    assert main(["simulate", "--policy", "MS", "--streams", "3", "--procs", "3",
                 "--jobs", str(tmp_path / "missing.json")]) == 2
    p = tmp_path / "j.json"
    save_jobs([Job(1, 0, 5, 1)], p)
    assert main(["simulate", "--policy", "MS", "--streams", "3", "--procs", "3", "--jobs", str(p)]) == 2
    with pytest.raises(SystemExit):
        main(["simulate", "--policy", "nope", "--jobs", str(p)])
