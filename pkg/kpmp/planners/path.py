"""Path files and deterministic replay of planned control sequences."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from ..bench.metrics import path_power
from ..knowledge import ManipulationKnowledge, build_manipulation_knowledge
from ..physics import (
    ControlInput,
    PropagationLog,
    SimConfig,
    StatePropagator,
    control_from_dict,
    control_to_dict,
)
from ..scene import scene_hash
from ..utils import canonical_hash, read_json, write_json
from ..world import WorkspaceState
from .base import PlannerConfig, PlanningMode, PlanResult, make_policy

_logger = logging.getLogger(__name__)

PATH_FORMAT_VERSION = 1


class ReplayDivergenceError(RuntimeError):
    """Replaying a path did not reproduce a recorded state."""

    def __init__(self, segment: int, expected: str, actual: str):
        self.segment = segment
        super().__init__(f"segment {segment}: recorded state {expected[:12]}, replayed {actual[:12]}")


def state_to_dict(q: WorkspaceState) -> Dict[str, Any]:
    return asdict(q)


def state_hash(q: WorkspaceState) -> str:
    return canonical_hash(state_to_dict(q))


@dataclass(frozen=True)
class Segment:
    control: ControlInput
    steps: int
    state_hash: Optional[str] = None


@dataclass(frozen=True)
class PathFile:
    scene: str
    scene_hash: str
    planner: str
    mode: PlanningMode
    seed: int
    alpha: float
    sim: SimConfig
    segments: Tuple[Segment, ...]
    solved: bool = True
    power: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": PATH_FORMAT_VERSION,
            "scene": self.scene,
            "scene_hash": self.scene_hash,
            "planner": self.planner,
            "mode": self.mode.value,
            "seed": self.seed,
            "alpha": self.alpha,
            "sim": asdict(self.sim),
            "solved": self.solved,
            "power": self.power,
            "segments": [
                {"control": control_to_dict(s.control), "steps": s.steps, "state_hash": s.state_hash}
                for s in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "PathFile":
        try:
            return cls(
                scene=payload["scene"],
                scene_hash=payload["scene_hash"],
                planner=payload["planner"],
                mode=PlanningMode.parse(payload["mode"]),
                seed=int(payload["seed"]),
                alpha=float(payload["alpha"]),
                sim=SimConfig(**payload["sim"]),
                segments=tuple(
                    Segment(control_from_dict(s["control"]), int(s["steps"]), s.get("state_hash"))
                    for s in payload["segments"]
                ),
                solved=bool(payload.get("solved", True)),
                power=payload.get("power"),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed path file: {e!r}") from e


def path_file_from_result(result: PlanResult, scene, planner_cfg: PlannerConfig, sim_cfg: SimConfig) -> PathFile:
    return PathFile(
        scene=scene.name,
        scene_hash=scene_hash(scene),
        planner=result.planner,
        mode=result.mode,
        seed=result.seed,
        alpha=planner_cfg.alpha,
        sim=sim_cfg,
        segments=tuple(Segment(m.control, m.steps, state_hash(m.state)) for m in result.path),
        solved=result.solved,
        power=result.power if result.solved else None,
    )


def write_path(path: Union[str, Path], path_file: PathFile) -> None:
    write_json(path, path_file.to_dict())


def read_path(path: Union[str, Path]) -> PathFile:
    return PathFile.from_dict(read_json(path))


@dataclass
class ReplayResult:
    final_state: WorkspaceState
    power: float
    log: PropagationLog
    states: List[WorkspaceState]


def replay(
    scene,
    path: Union[PathFile, Sequence[Tuple[ControlInput, int]]],
    cfg: Optional[SimConfig] = None,
    km: Optional[ManipulationKnowledge] = None,
    mode: PlanningMode = PlanningMode.KAPPA,
    alpha: Optional[float] = None,
    strict: bool = True,
) -> ReplayResult:
    """
    Re-propagate a control sequence from the scene's initial state.

    Propagation is chunked into single control durations and every segment end state is
    re-annotated by the mode's knowledge policy, exactly as during planning, so the final
    state is bit-identical to the planner's. A path file also supplies its own mode, alpha
    and simulation settings.

    Raises
    ------
    ReplayDivergenceError
        A recorded segment state hash is not reproduced (only with ``strict``).
    """
    if isinstance(path, PathFile):
        if path.scene_hash != scene_hash(scene):
            _logger.warning("path was planned on a different version of scene %s", scene.name)
        cfg = cfg or path.sim
        mode = path.mode
        alpha = path.alpha if alpha is None else alpha
        segments = list(path.segments)
    else:
        segments = [Segment(control, steps) for control, steps in path]
    cfg = cfg or SimConfig()
    km = km or build_manipulation_knowledge(scene, cfg.gravity)
    policy = make_policy(mode, km, alpha if alpha is not None else PlannerConfig().alpha)
    propagator = StatePropagator(scene.objects, scene.robot, cfg)

    q = scene.initial_state.with_tags(policy.instantiate(scene.initial_state).tags())
    log = PropagationLog(cfg.dt)
    states = [q]
    power = 0.0
    for index, segment in enumerate(segments):
        segment_log = PropagationLog(cfg.dt)
        for _ in range(segment.steps):
            q, step_log = propagator.propagate(q, segment.control, 1)
            segment_log.extend(step_log)
        q = q.with_tags(policy.instantiate(q).tags())
        power += path_power(segment_log, scene.robot)
        log.extend(segment_log)
        states.append(q)
        if segment.state_hash is not None:
            actual = state_hash(q)
            if actual != segment.state_hash:
                _logger.warning("replay diverged at segment %d", index)
                if strict:
                    raise ReplayDivergenceError(index, segment.state_hash, actual)
    return ReplayResult(q, power, log, states)
