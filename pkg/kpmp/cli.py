import sys
from pathlib import Path
from typing import Optional, Tuple

import click
import orjson
from colorama import Fore, Style

from .constants import (
    KPMP_ALPHA,
    KPMP_CONTROL_DURATION,
    KPMP_DB_PATH,
    KPMP_DT,
    KPMP_GOAL_BIAS,
    KPMP_GRAVITY,
    KPMP_TMAX,
    SCENARIOS,
)
from .knowledge import KnowledgeInconsistencyError
from .scene import Scene, SceneError, load_scene
from .utils import setup_logging, write_json

MODE_CHOICES = ["kappa", "plain-low", "plain-high"]


class KpmpGroup(click.Group):
    """Maps usage and configuration errors to exit code 1; commands return their exit code."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            exit_code = 1
        except click.Abort:
            click.echo("Aborted!", err=True)
            exit_code = 1
        else:
            exit_code = rv if isinstance(rv, int) else 0
        if standalone_mode:
            sys.exit(exit_code)
        return exit_code

    def invoke(self, ctx: click.Context):
        from .planners import ReplayDivergenceError

        try:
            return super().invoke(ctx)
        except (SceneError, KnowledgeInconsistencyError, ReplayDivergenceError, ValueError) as e:
            raise click.ClickException(str(e)) from e


def resolve_scene(value: str) -> Scene:
    """A scene file path, or the name of a shipped benchmark scenario."""
    path = Path(value)
    if not path.exists() and value in SCENARIOS:
        from .bench.benchmark import scenario_path

        path = scenario_path(value)
    return load_scene(path)


def _sim_config(dt: float, control_duration: float, gravity: float):
    from .physics import SimConfig

    return SimConfig(dt=dt, control_duration=control_duration, gravity=gravity)


def sim_options(func):
    func = click.option("--gravity", type=float, default=KPMP_GRAVITY, show_default=True, help="Gravity (m/s^2).")(func)
    func = click.option(
        "--control-duration", type=float, default=KPMP_CONTROL_DURATION, show_default=True, help="Control duration (s)."
    )(func)
    func = click.option("--dt", type=float, default=KPMP_DT, show_default=True, help="Physics substep (s).")(func)
    return func


def _ok(text: str) -> str:
    return Fore.GREEN + text + Style.RESET_ALL


def _fail(text: str) -> str:
    return Fore.RED + text + Style.RESET_ALL


@click.group(cls=KpmpGroup)
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG.")
def main(verbose: int = 0) -> None:
    setup_logging({0: None, 1: "INFO"}.get(verbose, "DEBUG"))


@main.command()
@click.option("--scene", "scene_ref", required=True, help="Scene file, or one of holonomic, car, arm.")
@click.option("--planner", type=click.Choice(["rrt", "kpiece"]), default="rrt", show_default=True)
@click.option("--mode", type=click.Choice(MODE_CHOICES), default="kappa", show_default=True)
@click.option("--tmax", type=float, default=KPMP_TMAX, show_default=True, help="Planning time limit (s).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--alpha", type=float, default=KPMP_ALPHA, show_default=True, help="Slowdown inside regions.")
@click.option("--max-iterations", type=int, default=None, help="Iteration cap in addition to --tmax.")
@click.option("--goal-bias", type=float, default=KPMP_GOAL_BIAS, show_default=True, help="Probability of sampling the goal.")
@click.option("--no-push-bias", is_flag=True, help="Sample push directions uniformly at Contact.")
@sim_options
@click.option("--out", type=click.Path(dir_okay=False), help="Write the path file here.")
@click.option("--log-kappa", type=click.Path(dir_okay=False), help="Write per-iteration kappa as JSON lines.")
@click.option("--tree-out", type=click.Path(dir_okay=False), help="Write the tree projection as JSON.")
def plan(
    scene_ref: str,
    planner: str,
    mode: str,
    tmax: float,
    seed: int,
    alpha: float,
    max_iterations: Optional[int],
    goal_bias: float,
    no_push_bias: bool,
    dt: float,
    control_duration: float,
    gravity: float,
    out: Optional[str] = None,
    log_kappa: Optional[str] = None,
    tree_out: Optional[str] = None,
) -> int:
    """
    Plan a single query.

    Exits with 0 when a path is found and 2 when the time limit is reached first.
    """
    from .knowledge import build_manipulation_knowledge
    from .planners import PlannerConfig, path_file_from_result
    from .planners import plan as run_plan
    from .planners import write_path

    scene = resolve_scene(scene_ref)
    sim_cfg = _sim_config(dt, control_duration, gravity)
    planner_cfg = PlannerConfig(
        kind=planner,
        mode=mode,
        t_max=tmax,
        seed=seed,
        alpha=alpha,
        push_bias=not no_push_bias,
        max_iterations=max_iterations,
        goal_bias=goal_bias,
    )
    km = build_manipulation_knowledge(scene, gravity)

    kappa_file = open(log_kappa, "wb") if log_kappa else None
    on_kappa = None
    if kappa_file is not None:

        def on_kappa(iteration, node, kappa):
            entry = {"iteration": iteration, "node": node.index, "kappa": kappa.to_dict()}
            kappa_file.write(orjson.dumps(entry) + b"\n")

    try:
        result = run_plan(scene, km, planner_cfg, sim_cfg, on_kappa)
    finally:
        if kappa_file is not None:
            kappa_file.close()

    if out:
        write_path(out, path_file_from_result(result, scene, planner_cfg, sim_cfg))
    if tree_out:
        write_json(tree_out, result.tree_projection(scene.robot))

    header = f"{scene.name} {planner}/{planner_cfg.mode.value} seed={seed}"
    if result.solved:
        click.echo(_ok(f"* Solved {header}"))
        click.echo(f"  segments: {len(result.path)}  duration: {result.duration:.3f}s  contacts: {result.contacts}")
        click.echo(f"  power: {result.power:.4f} W  planning time: {result.planning_time:.2f}s")
        return 0
    click.echo(_fail(f"* No solution for {header} after {result.planning_time:.2f}s ({result.iterations} iterations)"))
    return 2


@main.command()
@click.option("--scene", "scenarios", multiple=True, type=click.Choice(list(SCENARIOS)), help="Repeatable; default all.")
@click.option("--planner", "planners", multiple=True, type=click.Choice(["rrt", "kpiece"]), help="Repeatable; default rrt.")
@click.option("--mode", "modes", multiple=True, type=click.Choice(MODE_CHOICES), help="Repeatable; default all.")
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--tmax", type=float, default=KPMP_TMAX, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--alpha", type=float, default=KPMP_ALPHA, show_default=True)
@click.option("--no-push-bias", is_flag=True)
@sim_options
@click.option("--out", type=click.Path(dir_okay=False), help="Results file; a .summary.csv is written beside it.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--db", type=click.Path(dir_okay=False), default=None, help="Also store trials in this SQLite file.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel trial processes.")
def bench(
    scenarios: Tuple[str, ...],
    planners: Tuple[str, ...],
    modes: Tuple[str, ...],
    trials: int,
    tmax: float,
    seed: int,
    alpha: float,
    no_push_bias: bool,
    dt: float,
    control_duration: float,
    gravity: float,
    out: Optional[str] = None,
    fmt: str = "csv",
    db: Optional[str] = None,
    jobs: int = 1,
) -> int:
    """Run the comparison protocol and print per-group means."""
    from .bench.benchmark import aggregate, emit_results, run_benchmark
    from .planners import PlannerConfig

    sim_cfg = _sim_config(dt, control_duration, gravity)
    template = PlannerConfig(alpha=alpha, push_bias=not no_push_bias)
    records = []
    for scenario in scenarios or SCENARIOS:
        for planner in planners or ("rrt",):
            for mode in modes or MODE_CHOICES:
                records.extend(
                    run_benchmark(scenario, planner, mode, trials, tmax, seed, sim_cfg, template, jobs)
                )
    summary = aggregate(records)
    if out:
        emit_results(records, out, fmt)
        summary.to_csv(Path(out).with_suffix(".summary.csv"), index=False)
    if db:
        from .bench.orm import database_proxy, init_db, store_records

        init_db(db)
        store_records(records)
        database_proxy.close()
    click.echo("\n* Results:")
    click.echo(summary.to_string(index=False) if not summary.empty else "no trials")
    return 0


@main.command()
@click.argument("path_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--scene", "scene_ref", required=True, help="Scene file, or one of holonomic, car, arm.")
@click.option("--trace-out", type=click.Path(dir_okay=False), help="Write the power trace as CSV.")
def replay(path_file: str, scene_ref: str, trace_out: Optional[str] = None) -> int:
    """Re-propagate a path file and check it against the recorded states."""
    from .bench.metrics import power_trace
    from .planners import read_path
    from .planners import replay as run_replay

    scene = resolve_scene(scene_ref)
    recorded = read_path(path_file)
    result = run_replay(scene, recorded)
    if trace_out:
        power_trace(result.log, scene.robot, scene.initial_state.time).to_csv(trace_out, index=False)
    click.echo(_ok(f"* Replayed {len(recorded.segments)} segments of {recorded.scene}"))
    click.echo(f"  final time: {result.final_state.time:.3f}s  power: {result.power:.4f} W")
    if recorded.power is not None and recorded.power != result.power:
        click.echo(_fail(f"  recorded power {recorded.power:.6f} W differs"))
        return 1
    return 0


@main.command(name="dump-km")
@click.option("--scene", "scene_ref", required=True, help="Scene file, or one of holonomic, car, arm.")
@click.option("--gravity", type=float, default=KPMP_GRAVITY, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
def dump_km(scene_ref: str, gravity: float, out: Optional[str] = None) -> int:
    """Print the manipulation knowledge inferred for a scene."""
    from .knowledge import build_manipulation_knowledge, manipulation_knowledge_to_dict

    payload = manipulation_knowledge_to_dict(build_manipulation_knowledge(resolve_scene(scene_ref), gravity))
    if out:
        write_json(out, payload)
    else:
        click.echo(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS).decode())
    return 0


@main.command()
@click.option("--db", type=click.Path(dir_okay=False), default=str(KPMP_DB_PATH), show_default=True)
@click.option("--scene", "scenario", default=None, help="Only this scenario.")
def history(db: str, scenario: Optional[str] = None) -> int:
    """Summarise the trials stored by earlier bench runs."""
    from .bench.benchmark import aggregate
    from .bench.orm import database_proxy, init_db, load_records

    init_db(db)
    frame = load_records(scenario)
    database_proxy.close()
    if frame.empty:
        click.echo("no stored trials")
        return 0
    click.echo(f"* {len(frame)} trials in {frame['session'].nunique()} sessions")
    click.echo(aggregate(frame.to_dict(orient="records")).to_string(index=False))
    return 0
