"""
Benchmark protocol: repeated planning queries per scenario, planner and mode, with results
written as CSV or JSON.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import pandas as pd
from typing_extensions import TypedDict

from ..constants import CSV_COLUMNS, KPMP_SCENE_DIR, KPMP_TMAX, SCENARIOS
from ..knowledge import build_manipulation_knowledge
from ..physics import SimConfig
from ..planners import PLANNER_KINDS, PlannerConfig, PlanningMode, plan
from ..scene import Scene, load_scene
from ..utils import write_json

_logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = [
    "scenario",
    "planner",
    "mode",
    "trials",
    "success_rate",
    "power_mean",
    "power_std",
    "time_mean",
    "time_std",
]


class TrialRecord(TypedDict):
    scenario: str
    planner: str
    mode: str
    seed: int
    success: bool
    planning_time_s: float
    power_w: Optional[float]
    path_duration_s: float
    contacts: int


def scenario_path(scenario: str, scene_dir: Union[str, Path, None] = None) -> Path:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}, expected one of {', '.join(SCENARIOS)}")
    return Path(scene_dir or KPMP_SCENE_DIR) / f"{scenario}.json"


def run_trial(
    scenario: str,
    scene: Scene,
    planner_cfg: PlannerConfig,
    sim_cfg: SimConfig,
) -> TrialRecord:
    """One planning query. Scene loading and knowledge inference are not timed."""
    km = build_manipulation_knowledge(scene, sim_cfg.gravity)
    result = plan(scene, km, planner_cfg, sim_cfg)
    return TrialRecord(
        scenario=scenario,
        planner=planner_cfg.kind,
        mode=planner_cfg.mode.value,
        seed=planner_cfg.seed,
        success=result.solved,
        planning_time_s=result.planning_time,
        power_w=result.power if result.solved else None,
        path_duration_s=result.duration if result.solved else 0.0,
        contacts=result.contacts if result.solved else 0,
    )


def _run_trial_from_path(args) -> TrialRecord:
    scenario, path, planner_cfg, sim_cfg = args
    return run_trial(scenario, load_scene(path), planner_cfg, sim_cfg)


def run_benchmark(
    scenario: str,
    planner: str = "rrt",
    mode: Union[str, PlanningMode] = PlanningMode.KAPPA,
    trials: int = 10,
    t_max: float = KPMP_TMAX,
    base_seed: int = 0,
    sim_cfg: Optional[SimConfig] = None,
    planner_cfg: Optional[PlannerConfig] = None,
    jobs: int = 1,
    scene_dir: Union[str, Path, None] = None,
) -> List[TrialRecord]:
    """
    Run ``trials`` independent queries with seeds ``base_seed .. base_seed + trials - 1``.

    Parameters
    ----------
    scenario: str
        One of ``holonomic``, ``car``, ``arm``; the scene is read from ``scene_dir``.
    planner: str
        ``rrt`` or ``kpiece``.
    mode: str | PlanningMode
        ``kappa``, ``plain_low`` or ``plain_high``.
    planner_cfg: PlannerConfig
        Template for the remaining planner settings; kind, mode, seed and t_max are
        overridden per trial.
    jobs: int
        Process pool size; 1 runs trials sequentially in this process.

    Returns
    -------
    list of TrialRecord
        Sorted by seed. The aggregate row is not included; pass the records, possibly
        concatenated across modes or planners, to :func:`aggregate`. ``trials=0`` gives an
        empty list, which aggregates to an empty frame.
    """
    if planner not in PLANNER_KINDS:
        raise ValueError(f"unknown planner {planner!r}, expected one of {', '.join(PLANNER_KINDS)}")
    mode = PlanningMode.parse(mode) if isinstance(mode, str) else mode
    if trials < 0:
        raise ValueError(f"trials must be >= 0, got {trials}")
    path = scenario_path(scenario, scene_dir)
    sim_cfg = sim_cfg or SimConfig()
    template = replace(planner_cfg or PlannerConfig(), kind=planner, mode=mode, t_max=t_max)
    configs = [replace(template, seed=base_seed + k) for k in range(trials)]
    if not configs:
        return []

    _logger.info("benchmark %s/%s/%s: %d trials, T_max %.1fs", scenario, planner, mode.value, trials, t_max)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_trial_from_path, [(scenario, path, c, sim_cfg) for c in configs]))
    else:
        scene = load_scene(path)
        records = [run_trial(scenario, scene, c, sim_cfg) for c in configs]
    for record in records:
        _logger.info(
            "seed %d: %s in %.2fs", record["seed"], "solved" if record["success"] else "failed", record["planning_time_s"]
        )
    return sorted(records, key=lambda r: r["seed"])


def records_frame(records: Iterable[TrialRecord]) -> pd.DataFrame:
    frame = pd.DataFrame(list(records), columns=CSV_COLUMNS)
    return frame.sort_values(["mode", "seed"], kind="stable").reset_index(drop=True)


def aggregate(records: Sequence[TrialRecord]) -> pd.DataFrame:
    """Mean and standard deviation of power and planning time, and success rate, per group."""
    frame = pd.DataFrame(list(records), columns=CSV_COLUMNS)
    if frame.empty:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    frame["success"] = frame["success"].astype(bool)
    frame["power_w"] = pd.to_numeric(frame["power_w"])
    summary = (
        frame.groupby(["scenario", "planner", "mode"], sort=True)
        .agg(
            trials=("seed", "count"),
            success_rate=("success", "mean"),
            power_mean=("power_w", "mean"),
            power_std=("power_w", "std"),
            time_mean=("planning_time_s", "mean"),
            time_std=("planning_time_s", "std"),
        )
        .reset_index()
    )
    return summary[AGGREGATE_COLUMNS]


def emit_results(records: Sequence[TrialRecord], path: Union[str, Path], fmt: str = "csv") -> None:
    """
    Write trial records to ``path`` ordered by (mode, seed).

    ``fmt`` is ``csv`` (columns ``CSV_COLUMNS``) or ``json`` (a list of records).
    """
    path = Path(path)
    if fmt == "csv":
        path.parent.mkdir(parents=True, exist_ok=True)
        records_frame(records).to_csv(path, index=False)
    elif fmt == "json":
        rows = sorted(records, key=lambda r: (r["mode"], r["seed"]))
        write_json(path, [{key: row[key] for key in CSV_COLUMNS} for row in rows])
    else:
        raise ValueError(f"unknown result format {fmt!r}, expected csv or json")
