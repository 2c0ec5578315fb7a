from typing import Dict, Optional, Sequence, Tuple

from kpmp.scene import Goal, Scene
from kpmp.world import (
    ArmState,
    Box,
    DiskState,
    DynamicBounds,
    HolonomicDisk,
    ObjectClass,
    ObjectSpec,
    ObjectState,
    PlanarArm,
    Pose2,
    WorkspaceState,
)

HOLONOMIC_SCENE = "assets/scenes/holonomic.json"
CAR_SCENE = "assets/scenes/car.json"
ARM_SCENE = "assets/scenes/arm.json"


def disk_robot(f_min=1.0, f_max=10.0, mass=1.0, mu=0.1, radius=0.1, v_max=1.0) -> HolonomicDisk:
    return HolonomicDisk(radius, mass, mu, DynamicBounds(f_min, f_max, v_max))


def two_link_arm(lengths=(1.0, 1.0), tau=(0.1, 5.0), f=(0.5, 10.0)) -> PlanarArm:
    return PlanarArm(
        link_lengths=tuple(lengths),
        link_masses=(1.0,) * len(lengths),
        joint_limits=((-3.0, 3.0),) * len(lengths),
        bounds=DynamicBounds(f[0], f[1], 2.0, tau_min=tau[0], tau_max=tau[1]),
    )


def cube(
    object_id: str,
    half: float = 0.1,
    mass: float = 1.0,
    mu: float = 0.5,
    object_class: ObjectClass = ObjectClass.FREE,
    axis: Optional[Tuple[float, float]] = None,
) -> ObjectSpec:
    return ObjectSpec(object_id, object_class, Box(half, half), mass, mu, motion_constraint=axis)


def wall(object_id: str, half_width: float, half_depth: float) -> ObjectSpec:
    return ObjectSpec(object_id, ObjectClass.FIXED, Box(half_width, half_depth), 1000.0, 1.0)


def make_scene(
    placed: Sequence[Tuple[ObjectSpec, Tuple[float, float]]],
    robot=None,
    robot_state=None,
    goal: Sequence[float] = (2.5, 0.0),
    goal_radius: float = 0.1,
    bounds=((-1.0, 3.0), (-1.0, 1.0)),
    name: str = "test",
) -> Scene:
    robot = robot or disk_robot()
    if robot_state is None:
        robot_state = ArmState((0.0,) * robot.dof) if isinstance(robot, PlanarArm) else DiskState(0.0, 0.0)
    states: Dict[str, ObjectState] = {
        spec.id: ObjectState(Pose2(x, y), constraint_tag=spec.motion_constraint) for spec, (x, y) in placed
    }
    return Scene(
        name=name,
        objects=tuple(spec for spec, _ in placed),
        robot=robot,
        initial_state=WorkspaceState(states, robot_state, 0.0),
        goal=Goal(tuple(goal), goal_radius),
        bounds=bounds,
    )


def move_robot(q: WorkspaceState, robot_state) -> WorkspaceState:
    return WorkspaceState(dict(q.object_states), robot_state, q.time)


def move_object(q: WorkspaceState, object_id: str, x: float, y: float) -> WorkspaceState:
    states = dict(q.object_states)
    states[object_id] = ObjectState(Pose2(x, y), constraint_tag=states[object_id].constraint_tag)
    return WorkspaceState(states, q.robot_state, q.time)
