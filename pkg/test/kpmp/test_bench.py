import os

import pandas as pd
import pytest

from kpmp.bench import path_power, power_rotational, power_trace, power_translational
from kpmp.bench.benchmark import (
    AGGREGATE_COLUMNS,
    TrialRecord,
    aggregate,
    emit_results,
    run_benchmark,
    run_trial,
)
from kpmp.constants import CSV_COLUMNS
from kpmp.physics import PropagationLog, SimConfig
from kpmp.planners import PlannerConfig
from kpmp.scene import dump_scene
from kpmp.utils import read_json

from .helper import disk_robot, make_scene, two_link_arm


def record(mode="kappa", seed=0, success=True, power=1.5, scenario="holonomic") -> TrialRecord:
    return TrialRecord(
        scenario=scenario,
        planner="rrt",
        mode=mode,
        seed=seed,
        success=success,
        planning_time_s=0.25 * (seed + 1),
        power_w=power if success else None,
        path_duration_s=1.0 if success else 0.0,
        contacts=2 if success else 0,
    )


def easy_scene(goal=(0.6, 0.0)):
    return make_scene([], goal=goal, goal_radius=0.2, bounds=((-1.0, 3.0), (-1.0, 1.0)), name="holonomic")


# ---------------------------------------------------------------------------
# Power
# ---------------------------------------------------------------------------


def test_translational_power():
    log = PropagationLog(dt=0.5, times=[0.5], forces=[(2.0, 0.0)], displacements=[(1.0, 0.0)])
    assert power_translational(log) == 4.0
    assert path_power(log, disk_robot()) == 4.0


def test_rotational_power():
    log = PropagationLog(dt=0.001, times=[0.001], torques=[(2.0, 1.0)], rates=[(2.0, 2.0)])
    assert power_rotational(log) == 6.0
    assert path_power(log, two_link_arm()) == 6.0


def test_opposing_work_cancels():
    log = PropagationLog(
        dt=0.5,
        times=[0.5, 1.0],
        forces=[(2.0, 0.0), (2.0, 0.0)],
        displacements=[(1.0, 0.0), (-1.0, 0.0)],
    )
    assert power_translational(log) == 0.0
    assert power_translational(PropagationLog(dt=0.5)) == 0.0


def test_power_trace():
    log = PropagationLog(
        dt=0.5,
        times=[1.5, 2.0],
        forces=[(2.0, 0.0), (1.0, 1.0)],
        displacements=[(1.0, 0.0), (0.5, 0.5)],
    )
    trace = power_trace(log, disk_robot(), start_time=1.0)
    assert list(trace.columns) == ["time_s", "power_w", "cumulative_power_w"]
    assert trace["time_s"].tolist() == [0.5, 1.0]
    assert trace["power_w"].tolist() == [4.0, 2.0]
    assert trace["cumulative_power_w"].tolist() == [4.0, 6.0]


# ---------------------------------------------------------------------------
# Result files and aggregation
# ---------------------------------------------------------------------------


def test_emit_results_header_only(tmp_path):
    target = tmp_path / "results.csv"
    emit_results([], target)
    assert target.read_text().splitlines() == [",".join(CSV_COLUMNS)]


def test_emit_results_sorted_by_mode_and_seed(tmp_path):
    target = tmp_path / "out" / "results.csv"
    rows = [record("plain_low", 1), record("kappa", 1), record("kappa", 0, success=False)]
    emit_results(rows, target)
    lines = target.read_text().splitlines()
    assert len(lines) == 4
    frame = pd.read_csv(target)
    assert list(frame.columns) == CSV_COLUMNS
    assert list(zip(frame["mode"], frame["seed"])) == [("kappa", 0), ("kappa", 1), ("plain_low", 1)]
    assert frame["power_w"].isna().tolist() == [True, False, False]


def test_emit_results_json(tmp_path):
    target = tmp_path / "results.json"
    emit_results([record("kappa", 1), record("kappa", 0)], target, fmt="json")
    payload = read_json(target)
    assert [row["seed"] for row in payload] == [0, 1]
    assert list(payload[0]) == sorted(CSV_COLUMNS)
    with pytest.raises(ValueError, match="format"):
        emit_results([], tmp_path / "results.xml", fmt="xml")


def test_aggregate():
    assert list(aggregate([]).columns) == AGGREGATE_COLUMNS
    assert aggregate([]).empty
    summary = aggregate(
        [record("kappa", 0, power=1.0), record("kappa", 1, power=3.0), record("kappa", 2, success=False), record("plain_low", 0)]
    )
    assert list(summary.columns) == AGGREGATE_COLUMNS
    kappa = summary[summary["mode"] == "kappa"].iloc[0]
    assert kappa["trials"] == 3
    assert kappa["success_rate"] == pytest.approx(2 / 3)
    assert kappa["power_mean"] == pytest.approx(2.0)
    assert kappa["power_std"] == pytest.approx(2 ** 0.5)
    assert kappa["time_mean"] == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def test_run_trial_records_success_and_failure():
    solved = run_trial("holonomic", easy_scene(), PlannerConfig(goal_bias=0.5, max_iterations=2000, seed=7), SimConfig())
    assert solved["success"]
    assert solved["power_w"] is not None and solved["power_w"] > 0.0
    assert solved["path_duration_s"] > 0.0
    assert solved["mode"] == "kappa"

    failed = run_trial("holonomic", easy_scene(goal=(2.5, 0.0)), PlannerConfig(max_iterations=1), SimConfig())
    assert not failed["success"]
    assert failed["power_w"] is None
    assert (failed["path_duration_s"], failed["contacts"]) == (0.0, 0)


def test_run_benchmark_argument_checks(tmp_path):
    assert run_benchmark("holonomic", trials=0) == []
    with pytest.raises(ValueError, match="scenario"):
        run_benchmark("warehouse", trials=1)
    with pytest.raises(ValueError, match="planner"):
        run_benchmark("holonomic", planner="prm", trials=1)
    with pytest.raises(ValueError, match="trials"):
        run_benchmark("holonomic", trials=-1)
    with pytest.raises(ValueError, match="mode"):
        run_benchmark("holonomic", mode="greedy", trials=1)


def test_empty_benchmark_aggregates_to_empty_summary():
    records = run_benchmark("holonomic", mode="plain-high", trials=0)
    summary = aggregate(records)
    assert records == []
    assert summary.empty
    assert list(summary.columns) == AGGREGATE_COLUMNS


def test_run_benchmark_uses_consecutive_seeds(tmp_path):
    dump_scene(easy_scene(), tmp_path / "holonomic.json")
    records = run_benchmark(
        "holonomic",
        mode="plain-low",
        trials=3,
        base_seed=10,
        planner_cfg=PlannerConfig(max_iterations=5),
        scene_dir=tmp_path,
    )
    assert [r["seed"] for r in records] == [10, 11, 12]
    assert {r["mode"] for r in records} == {"plain_low"}
    assert all(set(r) == set(CSV_COLUMNS) for r in records)


# ---------------------------------------------------------------------------
# Trial history
# ---------------------------------------------------------------------------


def test_store_and_load_records(tmp_path):
    from kpmp.bench.orm import database_proxy, init_db, load_records, store_records

    init_db(tmp_path / "db" / "trials.db")
    try:
        assert load_records().empty
        assert store_records([record("kappa", 0), record("kappa", 1, success=False)], session="first") == 2
        store_records([record("plain_high", 0, scenario="car")], session="second")
        frame = load_records()
        assert len(frame) == 3
        assert list(frame.columns) == ["session", "created"] + CSV_COLUMNS
        assert frame["session"].tolist() == ["first", "first", "second"]
        assert frame["power_w"].isna().tolist() == [False, True, False]
        assert len(load_records("car")) == 1
        summary = aggregate(load_records("holonomic").to_dict(orient="records"))
        assert summary.iloc[0]["success_rate"] == pytest.approx(0.5)
    finally:
        database_proxy.close()


@pytest.mark.slow
def test_benchmark_protocol(tmp_path):
    full = os.environ.get("KPMP_FULL_BENCH") == "1"
    trials, t_max = (10, 150.0) if full else (3, 60.0)
    records = []
    for mode in ("kappa", "plain_low", "plain_high"):
        records.extend(run_benchmark("holonomic", mode=mode, trials=trials, t_max=t_max))
    assert len(records) == 3 * trials
    emit_results(records, tmp_path / "results.csv")
    assert len(pd.read_csv(tmp_path / "results.csv")) == 3 * trials
    summary = aggregate(records).set_index("mode")
    assert len(summary) == 3
    if full:
        assert summary.loc["kappa", "success_rate"] >= 0.7
        assert summary.loc["kappa", "success_rate"] >= summary.loc["plain_low", "success_rate"]
        assert summary.loc["kappa", "power_mean"] < 0.8 * summary.loc["plain_high", "power_mean"]
