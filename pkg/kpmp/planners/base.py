"""
Shared machinery of the kinodynamic tree planners: configuration, knowledge policies for the
three planning modes, control sampling, goal tests and the extension loop.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..bench.metrics import path_power
from ..constants import KPIECE_GRID_DIVISIONS, KPMP_ALPHA, KPMP_GOAL_BIAS, KPMP_TMAX, PUSH_BIAS_CONE
from ..knowledge import (
    ControlRange,
    InstantiatedKnowledge,
    LocationKind,
    ManipulationKnowledge,
    ObjectSnapshot,
    RobotLocation,
)
from ..physics import (
    ROBOT_ID,
    CarControl,
    ControlInput,
    JointTorques,
    PlanarForce,
    PropagationLog,
    SimConfig,
    StatePropagator,
)
from ..reasoning import compute_control_range, reasoning_process
from ..world import (
    CarLike,
    ContractError,
    HolonomicDisk,
    PlanarArm,
    RobotModel,
    WorkspaceState,
    arm_jacobian,
    tool_point,
)
from .validity import StateValidityChecker

_logger = logging.getLogger(__name__)


class PlanningMode(str, Enum):
    KAPPA = "kappa"
    PLAIN_LOW = "plain_low"
    PLAIN_HIGH = "plain_high"

    @classmethod
    def parse(cls, value: str) -> "PlanningMode":
        try:
            return cls(value.replace("-", "_").lower())
        except ValueError:
            raise ValueError(f"unknown mode {value!r}, expected one of kappa, plain-low, plain-high") from None


PLANNER_KINDS = ("rrt", "kpiece")


@dataclass(frozen=True)
class PlannerConfig:
    kind: str = "rrt"
    mode: PlanningMode = PlanningMode.KAPPA
    goal_bias: float = KPMP_GOAL_BIAS
    min_steps: int = 1
    max_steps: int = 10
    distance_weights: Optional[Tuple[float, ...]] = None
    grid_divisions: int = KPIECE_GRID_DIVISIONS
    t_max: float = KPMP_TMAX
    seed: int = 0
    alpha: float = KPMP_ALPHA
    push_bias: bool = True
    control_candidates: int = 3
    max_iterations: Optional[int] = None

    def __post_init__(self):
        if self.kind not in PLANNER_KINDS:
            raise ValueError(f"PlannerConfig.kind must be one of {PLANNER_KINDS}, got {self.kind!r}")
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", PlanningMode.parse(self.mode))
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError(f"PlannerConfig.goal_bias must lie in [0, 1], got {self.goal_bias}")
        if not 1 <= self.min_steps <= self.max_steps:
            raise ValueError(
                f"PlannerConfig needs 1 <= min_steps <= max_steps, got {self.min_steps}, {self.max_steps}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"PlannerConfig.alpha must lie in (0, 1), got {self.alpha}")
        if self.control_candidates < 1:
            raise ValueError("PlannerConfig.control_candidates must be >= 1")
        if self.grid_divisions < 1:
            raise ValueError("PlannerConfig.grid_divisions must be >= 1")
        if not self.t_max > 0:
            raise ValueError(f"PlannerConfig.t_max must be > 0, got {self.t_max}")


# ---------------------------------------------------------------------------
# Knowledge policies
# ---------------------------------------------------------------------------


class KnowledgePolicy:
    """Produces the instantiated knowledge of a tree node."""

    mode = PlanningMode.KAPPA

    def __init__(self, km: ManipulationKnowledge, alpha: float = KPMP_ALPHA):
        self.km = km
        self.alpha = alpha

    def instantiate(self, q: WorkspaceState) -> InstantiatedKnowledge:
        return reasoning_process(self.km, q, self.alpha)


class FixedRangePolicy(KnowledgePolicy):
    """
    Knowledge-free baseline: one control range chosen up front, every region considered
    usable, contacts allowed anywhere on manipulatable objects.
    """

    def __init__(self, km: ManipulationKnowledge, mode: PlanningMode, alpha: float = KPMP_ALPHA):
        super().__init__(km, alpha)
        self.mode = mode
        if mode is PlanningMode.PLAIN_LOW:
            control_range = compute_control_range(RobotLocation.move(), km, None, alpha)
        else:
            control_range = plain_high_range(km)
        self._kappa = InstantiatedKnowledge(
            active_region_ids=frozenset(km.regions),
            control_range=control_range,
            location=RobotLocation.move(),
            objects={
                o.spec.id: ObjectSnapshot(o.object_class, o.properties.mass, o.properties.mu_ground, o.spec.motion_constraint)
                for o in km.objects
            },
            enforce_regions=False,
        )

    def instantiate(self, q: WorkspaceState) -> InstantiatedKnowledge:
        return self._kappa


def plain_high_range(km: ManipulationKnowledge) -> ControlRange:
    """``[f_min, f_max + max mu m g]`` expressed in the robot's actuation units."""
    robot = km.robot
    bounds = robot.bounds
    load = km.max_friction_load()
    if isinstance(robot, CarLike):
        r = robot.wheel_radius
        return ControlRange.scalar(bounds.f_min * r, (bounds.f_max + load) * r, "N*m")
    if isinstance(robot, PlanarArm):
        reach = [sum(robot.link_lengths[k:]) for k in range(robot.dof)]
        return ControlRange(
            (bounds.tau_min,) * robot.dof,
            tuple(bounds.tau_max + load * r for r in reach),
            "N*m",
        )
    return ControlRange.scalar(bounds.f_min, bounds.f_max + load, "N")


def make_policy(mode: PlanningMode, km: ManipulationKnowledge, alpha: float = KPMP_ALPHA) -> KnowledgePolicy:
    mode = PlanningMode.parse(mode) if isinstance(mode, str) else mode
    if mode is PlanningMode.KAPPA:
        return KnowledgePolicy(km, alpha)
    return FixedRangePolicy(km, mode, alpha)


# ---------------------------------------------------------------------------
# Robot configuration projection
# ---------------------------------------------------------------------------


def configuration(robot: RobotModel, q: WorkspaceState) -> np.ndarray:
    """Robot configuration used by the distance metric: (x, y), (x, y, heading) or joint angles."""
    state = q.robot_state
    if isinstance(robot, HolonomicDisk):
        return np.array([state.x, state.y])
    if isinstance(robot, CarLike):
        return np.array([state.x, state.y, state.heading])
    return np.array(state.angles)


def angular_mask(robot: RobotModel) -> np.ndarray:
    if isinstance(robot, CarLike):
        return np.array([False, False, True])
    if isinstance(robot, PlanarArm):
        return np.zeros(robot.dof, dtype=bool)
    return np.array([False, False])


def default_weights(robot: RobotModel) -> np.ndarray:
    if isinstance(robot, CarLike):
        return np.array([1.0, 1.0, 0.3])
    if isinstance(robot, PlanarArm):
        return np.ones(robot.dof)
    return np.ones(2)


def weighted_distance(configs: np.ndarray, target: np.ndarray, weights: np.ndarray, angular: np.ndarray) -> np.ndarray:
    """Weighted Euclidean distance of every row of ``configs`` to ``target``."""
    diff = configs - target
    if angular.any():
        diff[..., angular] = (diff[..., angular] + np.pi) % (2 * np.pi) - np.pi
    return np.sqrt(np.sum(weights * diff * diff, axis=-1))


def goal_projection(robot: RobotModel, q: WorkspaceState) -> np.ndarray:
    state = q.robot_state
    if isinstance(robot, PlanarArm):
        return np.array(state.angles)
    return np.array([state.x, state.y])


def workspace_projection(robot: RobotModel, q: WorkspaceState) -> Tuple[float, float]:
    """Point in the plane: robot position, or the arm's tool point."""
    if isinstance(robot, PlanarArm):
        return tool_point(robot, q.robot_state.angles)
    return (q.robot_state.x, q.robot_state.y)


def in_goal(scene, q: WorkspaceState) -> bool:
    point = goal_projection(scene.robot, q)
    return float(np.linalg.norm(point - np.asarray(scene.goal.center))) <= scene.goal.radius


# ---------------------------------------------------------------------------
# Control sampling
# ---------------------------------------------------------------------------


def sample_controls_and_steps(
    kappa: InstantiatedKnowledge,
    robot: RobotModel,
    cfg: PlannerConfig,
    rng: np.random.Generator,
    q: Optional[WorkspaceState] = None,
) -> Tuple[ControlInput, int]:
    """
    Draw a control whose magnitude lies in ``kappa.control_range`` and a step count.

    Directions are uniform. At Contact with ``cfg.push_bias`` the direction is drawn from a
    cone of half-angle ``PUSH_BIAS_CONE`` around the region's push direction (car: drive
    toward it, arm: joint signs of ``J^T d``).
    """
    lower, upper = kappa.control_range.lower, kappa.control_range.upper
    magnitudes = [lo if hi <= lo else rng.uniform(lo, hi) for lo, hi in zip(lower, upper)]
    biased = cfg.push_bias and kappa.location.kind is LocationKind.CONTACT and kappa.push_direction is not None
    direction = None
    if biased:
        base = math.atan2(kappa.push_direction[1], kappa.push_direction[0])
        angle = base + rng.uniform(-PUSH_BIAS_CONE, PUSH_BIAS_CONE)
        direction = (math.cos(angle), math.sin(angle))

    if isinstance(robot, HolonomicDisk):
        if direction is None:
            angle = rng.uniform(-math.pi, math.pi)
            direction = (math.cos(angle), math.sin(angle))
        control = PlanarForce(magnitudes[0] * direction[0], magnitudes[0] * direction[1])
    elif isinstance(robot, CarLike):
        steer = rng.uniform(-robot.bounds.steer_tau_max, robot.bounds.steer_tau_max)
        if direction is not None and q is not None:
            heading = q.robot_state.heading
            sign = 1.0 if math.cos(heading) * direction[0] + math.sin(heading) * direction[1] >= 0 else -1.0
        else:
            sign = 1.0 if rng.random() < 0.5 else -1.0
        control = CarControl(sign * magnitudes[0], steer)
    else:
        if direction is not None and q is not None:
            loads = arm_jacobian(robot, q.robot_state.angles).T @ np.asarray(direction)
            signs = [1.0 if load >= 0 else -1.0 for load in loads]
        else:
            signs = [1.0 if rng.random() < 0.5 else -1.0 for _ in magnitudes]
        control = JointTorques(tuple(s * m for s, m in zip(signs, magnitudes)))
    steps = int(rng.integers(cfg.min_steps, cfg.max_steps + 1))
    return control, steps


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Motion:
    """Tree node: the state reached by applying ``control`` for ``steps`` from ``parent``."""

    state: WorkspaceState
    control: Optional[ControlInput] = None
    steps: int = 0
    parent: Optional["Motion"] = None
    power_increment: float = 0.0
    kappa: Optional[InstantiatedKnowledge] = None
    index: int = 0
    contact_steps: int = 0


@dataclass
class PlanResult:
    solved: bool
    path: List[Motion]
    tree: List[Motion]
    planner: str
    mode: PlanningMode
    seed: int
    planning_time: float
    iterations: int
    initial: Motion

    @property
    def power(self) -> float:
        return float(sum(m.power_increment for m in self.path))

    @property
    def duration(self) -> float:
        if not self.path:
            return 0.0
        return self.path[-1].state.time - self.initial.state.time

    @property
    def contacts(self) -> int:
        return int(sum(m.contact_steps for m in self.path))

    @property
    def final_state(self) -> WorkspaceState:
        return self.path[-1].state if self.path else self.initial.state

    def segments(self) -> List[Tuple[ControlInput, int]]:
        return [(m.control, m.steps) for m in self.path]

    def tree_projection(self, robot: RobotModel) -> List[Dict[str, Any]]:
        """Workspace projection of every tree motion with its parent index."""
        return [
            {
                "index": m.index,
                "parent": m.parent.index if m.parent is not None else None,
                "point": list(workspace_projection(robot, m.state)),
                "location": str(m.kappa.location) if m.kappa is not None else None,
            }
            for m in self.tree
        ]


KappaCallback = Callable[[int, Motion, InstantiatedKnowledge], None]


class KinodynamicPlanner:
    """
    Tree planner skeleton. Subclasses choose the node to extend (``select``) and index new
    motions (``add``); each iteration then reasons on the node, samples a control and
    propagates it one control duration at a time, keeping the valid prefix.
    """

    name = "base"

    def __init__(
        self,
        scene,
        km: ManipulationKnowledge,
        cfg: Optional[PlannerConfig] = None,
        sim_cfg: Optional[SimConfig] = None,
        on_kappa: Optional[KappaCallback] = None,
    ):
        self.scene = scene
        self.km = km
        self.cfg = cfg or PlannerConfig(kind=self.name)
        self.sim_cfg = sim_cfg or SimConfig()
        self.robot = scene.robot
        self.propagator = StatePropagator(scene.objects, scene.robot, self.sim_cfg)
        self.policy = make_policy(self.cfg.mode, km, self.cfg.alpha)
        self.validity = StateValidityChecker(km, scene.bounds)
        self.rng = np.random.default_rng(self.cfg.seed)
        self.on_kappa = on_kappa
        self.tree: List[Motion] = []

    # subclass hooks -------------------------------------------------------

    def select(self) -> Tuple[Motion, Optional[np.ndarray]]:
        raise NotImplementedError

    def add(self, motion: Motion) -> None:
        motion.index = len(self.tree)
        self.tree.append(motion)

    # shared ---------------------------------------------------------------

    def annotate(self, state: WorkspaceState) -> Tuple[WorkspaceState, InstantiatedKnowledge]:
        kappa = self.policy.instantiate(state)
        return state.with_tags(kappa.tags()), kappa

    def root(self) -> Motion:
        state, kappa = self.annotate(self.scene.initial_state)
        if not self.validity(state, kappa, PropagationLog(self.sim_cfg.dt)):
            raise ContractError("initial state is invalid: robot collides with a Fixed object or leaves the bounds")
        return Motion(state, kappa=kappa)

    def extend(self, node: Motion, control: ControlInput, steps: int) -> Tuple[Optional[Motion], bool, PropagationLog]:
        """Propagate ``control`` from ``node`` step by step; stop at the first invalid state or at the goal."""
        kappa = node.kappa
        q = node.state
        log = PropagationLog(self.sim_cfg.dt)
        valid_steps = contact_steps = 0
        reached = False
        for _ in range(steps):
            q_next, step_log = self.propagator.propagate(q, control, 1)
            if not self.validity(q_next, kappa, step_log):
                break
            q = q_next
            log.extend(step_log)
            valid_steps += 1
            if any(e.other_id == ROBOT_ID for e in step_log.contacts):
                contact_steps += 1
            if in_goal(self.scene, q):
                reached = True
                break
        if valid_steps == 0:
            return None, False, log
        power = path_power(log, self.robot)
        motion = Motion(q, control, valid_steps, node, power, None, 0, contact_steps)
        return motion, reached, log

    def sample(self, node: Motion) -> Tuple[ControlInput, int]:
        return sample_controls_and_steps(node.kappa, self.robot, self.cfg, self.rng, node.state)

    def grow(self, node: Motion, target: Optional[np.ndarray]) -> Tuple[Optional[Motion], bool]:
        motion, reached, _ = self.extend(node, *self.sample(node))
        return motion, reached

    def solve(self) -> PlanResult:
        start = time.perf_counter()
        root = self.root()
        self.add(root)
        if self.on_kappa is not None:
            self.on_kappa(0, root, root.kappa)
        goal: Optional[Motion] = root if in_goal(self.scene, root.state) else None
        iterations = 0
        while goal is None and time.perf_counter() - start < self.cfg.t_max:
            if self.cfg.max_iterations is not None and iterations >= self.cfg.max_iterations:
                break
            iterations += 1
            node, target = self.select()
            if self.on_kappa is not None:
                self.on_kappa(iterations, node, node.kappa)
            motion, reached = self.grow(node, target)
            if motion is None:
                continue
            motion.state, motion.kappa = self.annotate(motion.state)
            self.add(motion)
            if reached:
                goal = motion
            if iterations % 500 == 0:
                _logger.info("%s iteration %d, tree size %d", self.name, iterations, len(self.tree))
        elapsed = time.perf_counter() - start
        path: List[Motion] = []
        if goal is not None:
            cursor = goal
            while cursor.parent is not None:
                path.append(cursor)
                cursor = cursor.parent
            path.reverse()
            _logger.info(
                "%s solved after %d iterations in %.2fs, %d segments", self.name, iterations, elapsed, len(path)
            )
        else:
            _logger.info("%s found no solution in %.2fs (%d iterations)", self.name, elapsed, iterations)
        return PlanResult(
            solved=goal is not None,
            path=path,
            tree=self.tree,
            planner=self.name,
            mode=self.cfg.mode,
            seed=self.cfg.seed,
            planning_time=elapsed,
            iterations=iterations,
            initial=root,
        )
