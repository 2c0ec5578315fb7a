import orjson
import pandas as pd
import pytest
from click.testing import CliRunner

from kpmp.cli import main
from kpmp.scene import dump_scene
from kpmp.utils import read_json

from .helper import HOLONOMIC_SCENE, make_scene


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def open_scene(tmp_path):
    target = tmp_path / "open.json"
    dump_scene(make_scene([], goal=(0.6, 0.0), goal_radius=0.2, name="open"), target)
    return str(target)


def test_dump_km(runner):
    result = runner.invoke(main, ["dump-km", "--scene", HOLONOMIC_SCENE])
    assert result.exit_code == 0, result.output
    payload = orjson.loads(result.output)
    assert "purple_cube" in {entry["id"] for entry in payload["objects"]}


def test_dump_km_to_file(runner, tmp_path):
    target = tmp_path / "km.json"
    result = runner.invoke(main, ["dump-km", "--scene", HOLONOMIC_SCENE, "--out", str(target)])
    assert result.exit_code == 0
    assert read_json(target)["robot"]["type"] == "HolonomicDisk"


def test_plan_and_replay(runner, tmp_path, open_scene):
    path_file = tmp_path / "path.json"
    kappa_log = tmp_path / "kappa.jsonl"
    tree = tmp_path / "tree.json"
    result = runner.invoke(
        main,
        [
            "plan",
            "--scene", open_scene,
            "--seed", "7",
            "--goal-bias", "0.5",
            "--max-iterations", "2000",
            "--out", str(path_file),
            "--log-kappa", str(kappa_log),
            "--tree-out", str(tree),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "Solved" in result.output

    recorded = read_json(path_file)
    assert recorded["solved"] and recorded["segments"]
    entries = [orjson.loads(line) for line in kappa_log.read_bytes().splitlines()]
    assert entries[0]["iteration"] == 0
    assert "location" in entries[0]["kappa"]
    assert read_json(tree)[0]["parent"] is None

    trace = tmp_path / "trace.csv"
    result = runner.invoke(main, ["replay", str(path_file), "--scene", open_scene, "--trace-out", str(trace)])
    assert result.exit_code == 0, result.output
    assert "Replayed" in result.output
    assert list(pd.read_csv(trace).columns) == ["time_s", "power_w", "cumulative_power_w"]


def test_plan_without_solution_exits_2(runner, tmp_path):
    target = tmp_path / "far.json"
    dump_scene(make_scene([], goal=(2.5, 0.0), name="far"), target)
    result = runner.invoke(main, ["plan", "--scene", str(target), "--max-iterations", "1"])
    assert result.exit_code == 2
    assert "No solution" in result.output


def test_usage_and_config_errors_exit_1(runner, tmp_path, open_scene):
    assert runner.invoke(main, ["plan", "--scene", str(tmp_path / "absent.json")]).exit_code == 1
    assert runner.invoke(main, ["plan", "--scene", open_scene, "--bogus"]).exit_code == 1
    assert runner.invoke(main, ["plan", "--scene", open_scene, "--alpha", "1.5"]).exit_code == 1
    assert runner.invoke(main, ["plan", "--scene", open_scene, "--dt", "-0.001"]).exit_code == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{}")
    assert runner.invoke(main, ["replay", str(broken), "--scene", open_scene]).exit_code == 1


def test_bench_and_history(runner, tmp_path, monkeypatch):
    scenes = tmp_path / "scenes"
    dump_scene(make_scene([], goal=(2.5, 0.0), name="holonomic"), scenes / "holonomic.json")
    monkeypatch.setattr("kpmp.bench.benchmark.KPMP_SCENE_DIR", scenes)
    out = tmp_path / "results.csv"
    db = tmp_path / "trials.db"
    result = runner.invoke(
        main,
        ["bench", "--scene", "holonomic", "--mode", "plain-low", "--trials", "2", "--tmax", "0.05",
         "--out", str(out), "--db", str(db)],
    )
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(out)) == 2
    summary = pd.read_csv(tmp_path / "results.summary.csv")
    assert summary["trials"].tolist() == [2]

    result = runner.invoke(main, ["history", "--db", str(db)])
    assert result.exit_code == 0
    assert "2 trials in 1 sessions" in result.output

    result = runner.invoke(main, ["history", "--db", str(db), "--scene", "car"])
    assert "no stored trials" in result.output
