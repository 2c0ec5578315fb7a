"""
Per-step reasoning: region activation, robot location and the adaptive control range that
together form the instantiated knowledge of a tree node.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .constants import CONTACT_TOLERANCE, KPMP_ALPHA, REGION_TOLERANCE
from .knowledge import (
    ControlRange,
    InstantiatedKnowledge,
    LocationKind,
    ManipulationKnowledge,
    ObjectSnapshot,
    RegionState,
    RobotLocation,
)
from .world import (
    ArmState,
    CarLike,
    ManipulationRegion,
    ObjectClass,
    PlanarArm,
    Pose2,
    Vec2,
    WorkspaceState,
    arm_jacobian,
    contact_between,
    overlap,
    point_in_shape,
    robot_footprint,
    tool_point,
)

_logger = logging.getLogger(__name__)

SINGULAR_COLUMN = 1e-9


@dataclass(frozen=True)
class RegionStatus:
    """Status of every region for one state, with the object classes and tags it implies."""

    status: Mapping[str, RegionState]
    classes: Mapping[str, ObjectClass]
    constraint_tags: Mapping[str, Optional[Vec2]]

    def active_ids(self) -> frozenset:
        return frozenset(rid for rid, state in self.status.items() if state is RegionState.ACTIVE)

    def is_active(self, region_id: str) -> bool:
        return self.status.get(region_id) is RegionState.ACTIVE


def region_pose(region: ManipulationRegion, owner_pose: Pose2) -> Pose2:
    return owner_pose.compose(region.local_pose)


def _free_axis(occupied: List[ManipulationRegion]) -> Optional[Vec2]:
    """Axis perpendicular to every blocked push direction, if there is one."""
    px, py = occupied[0].push_direction
    axis = (-py, px)
    for region in occupied[1:]:
        dx, dy = region.push_direction
        if abs(dx * axis[0] + dy * axis[1]) > 1e-9:
            return None
    return axis


def update_manipulation_constraints(km: ManipulationKnowledge, q: WorkspaceState) -> RegionStatus:
    """
    Region activation for state ``q``.

    A region is inactive when its world polygon overlaps an object other than its owner, or
    when its linked opposite region is. A free object with an occupied region becomes a
    co-mObject along the remaining free axis for this step; regions off that axis are
    inactive with reason RetypedConstraint.
    """
    placed = [
        (o.spec.id, o.spec.shape, q.object_states[o.spec.id].pose) for o in km.objects
    ]
    status: Dict[str, RegionState] = {}
    for o in km.objects:
        owner_pose = q.object_states[o.spec.id].pose
        for region in o.regions:
            pose = region_pose(region, owner_pose)
            occupied = any(
                other_id != o.spec.id and overlap(region.extent, pose, shape, other_pose)
                for other_id, shape, other_pose in placed
            )
            status[region.id] = RegionState.OCCUPIED_BY_OBSTACLE if occupied else RegionState.ACTIVE

    classes: Dict[str, ObjectClass] = {}
    tags: Dict[str, Optional[Vec2]] = {}
    for o in km.objects:
        object_id = o.spec.id
        classes[object_id] = o.object_class
        tags[object_id] = o.spec.motion_constraint
        occupied = [r for r in o.regions if status[r.id] is RegionState.OCCUPIED_BY_OBSTACLE]
        for region in o.regions:
            if status[region.id] is RegionState.ACTIVE and region.opposite_region_id is not None:
                if status.get(region.opposite_region_id) is RegionState.OCCUPIED_BY_OBSTACLE:
                    status[region.id] = RegionState.OPPOSITE_BLOCKED
        if o.object_class is not ObjectClass.FREE or not occupied:
            continue
        axis = _free_axis(occupied)
        if axis is None:
            continue
        classes[object_id] = ObjectClass.CONSTRAINED
        tags[object_id] = axis
        for region in o.regions:
            dx, dy = region.push_direction
            aligned = abs(abs(dx * axis[0] + dy * axis[1]) - 1.0) < 1e-9
            if status[region.id] is RegionState.ACTIVE and not aligned:
                status[region.id] = RegionState.RETYPED_CONSTRAINT
    return RegionStatus(MappingProxyType(status), MappingProxyType(classes), MappingProxyType(tags))


def _active_regions(km: ManipulationKnowledge, gamma: RegionStatus, object_id: str) -> List[ManipulationRegion]:
    return [r for r in km.object(object_id).regions if gamma.is_active(r.id)]


def compute_robot_location(q: WorkspaceState, km: ManipulationKnowledge, gamma: RegionStatus) -> RobotLocation:
    """
    Classify the robot as Contact, Interaction or Move.

    Contact needs the robot (arm: its last link) to touch a manipulatable object within
    ``CONTACT_TOLERANCE`` at a point inside one of that object's active regions. Interaction
    needs the robot (arm: its tool point) inside an active region without touching anything.
    """
    robot = km.robot
    footprint = robot_footprint(robot, q.robot_state)
    contact_parts = footprint[-1:] if isinstance(robot, PlanarArm) else footprint
    manipulatable = [o for o in km.objects if o.object_class.manipulatable]

    touched: List[str] = []
    hit: Optional[Tuple[str, str]] = None
    for o in manipulatable:
        pose = q.object_states[o.spec.id].pose
        for shape, part_pose in contact_parts:
            contact = contact_between(shape, part_pose, o.spec.shape, pose, CONTACT_TOLERANCE)
            if contact is None:
                continue
            if o.spec.id not in touched:
                touched.append(o.spec.id)
            if hit is not None:
                continue
            for region in _active_regions(km, gamma, o.spec.id):
                if point_in_shape(region.extent, region_pose(region, pose), *contact.point, REGION_TOLERANCE):
                    hit = (o.spec.id, region.id)
                    break
    if hit is not None:
        return RobotLocation(LocationKind.CONTACT, hit[0], hit[1], tuple(touched))
    if touched:
        return RobotLocation(LocationKind.MOVE, touched=tuple(touched))

    tool = tool_point(robot, q.robot_state.angles) if isinstance(robot, PlanarArm) else None
    for o in manipulatable:
        pose = q.object_states[o.spec.id].pose
        for region in _active_regions(km, gamma, o.spec.id):
            rpose = region_pose(region, pose)
            if tool is not None:
                inside = point_in_shape(region.extent, rpose, *tool)
            else:
                inside = any(overlap(shape, part_pose, region.extent, rpose) for shape, part_pose in footprint)
            if inside:
                return RobotLocation(LocationKind.INTERACTION, o.spec.id, region.id)
    return RobotLocation.move()


def _force_range(location: RobotLocation, km: ManipulationKnowledge, alpha: float) -> Tuple[float, float]:
    bounds = km.bounds
    if location.kind is LocationKind.INTERACTION:
        return alpha * bounds.f_min, alpha * bounds.f_max
    if location.kind is LocationKind.CONTACT:
        load = max(km.friction_load(object_id) for object_id in location.touched or (location.object_id,))
        return bounds.f_min + load, bounds.f_max + load
    return bounds.f_min, bounds.f_max


def push_direction_world(km: ManipulationKnowledge, q: WorkspaceState, region_id: str) -> Vec2:
    region = km.regions[region_id]
    return q.object_states[region.owner_object_id].pose.rotate(*region.push_direction)


def compute_control_range(
    location: RobotLocation,
    km: ManipulationKnowledge,
    q: WorkspaceState,
    alpha: float = KPMP_ALPHA,
) -> ControlRange:
    """
    Control sampling range for one step.

    Parameters
    ----------
    location: RobotLocation
        Result of :func:`compute_robot_location` for ``q``.
    km: ManipulationKnowledge
        Provides the robot bounds and the friction load of touched objects.
    q: WorkspaceState
        Current state; the arm Jacobian is evaluated at its configuration.
    alpha: float
        Slowdown factor inside manipulation regions, ``0 < alpha < 1``.

    Returns
    -------
    ControlRange
        Move: ``[f_min, f_max]``. Interaction: ``alpha * [f_min, f_max]``. Contact:
        ``[f_min + f_obj, f_max + f_obj]`` with ``f_obj = mu * m * g`` of the heaviest touched
        object. A car receives drive torques (force times wheel radius); an arm receives
        per-joint torque magnitudes, ``|J^T (f n)|`` at Contact with ``n`` the region's push
        direction. When any single component of ``|J^T n|`` falls below
        ``SINGULAR_COLUMN`` the push cannot be mapped onto every joint, and all joints fall back
        to the Move torque bounds, including joints whose own component is large.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    robot = km.robot
    lower, upper = _force_range(location, km, alpha)
    if isinstance(robot, CarLike):
        r = robot.wheel_radius
        return ControlRange.scalar(lower * r, upper * r, "N*m")
    if not isinstance(robot, PlanarArm):
        return ControlRange.scalar(lower, upper, "N")

    bounds = robot.bounds
    move = ControlRange((bounds.tau_min,) * robot.dof, (bounds.tau_max,) * robot.dof, "N*m")
    if location.kind is LocationKind.MOVE:
        return move
    if location.kind is LocationKind.INTERACTION:
        return move.scaled(alpha)
    state: ArmState = q.robot_state
    direction = np.asarray(push_direction_world(km, q, location.region_id))
    columns = np.abs(arm_jacobian(robot, state.angles).T @ direction)
    if np.any(columns < SINGULAR_COLUMN):
        _logger.warning(
            "singular push at q=%s along %s: using Move torque bounds",
            tuple(round(a, 4) for a in state.angles), tuple(direction),
        )
        return move
    return ControlRange(tuple(columns * lower), tuple(columns * upper), "N*m")


def reasoning_process(
    km: ManipulationKnowledge,
    q: WorkspaceState,
    alpha: float = KPMP_ALPHA,
) -> InstantiatedKnowledge:
    """Instantiated knowledge for state ``q``: region status, robot location and control range."""
    gamma = update_manipulation_constraints(km, q)
    location = compute_robot_location(q, km, gamma)
    control_range = compute_control_range(location, km, q, alpha)
    snapshots = {
        o.spec.id: ObjectSnapshot(
            gamma.classes[o.spec.id],
            o.properties.mass,
            o.properties.mu_ground,
            gamma.constraint_tags[o.spec.id],
        )
        for o in km.objects
    }
    push = None
    if location.kind is LocationKind.CONTACT:
        push = push_direction_world(km, q, location.region_id)
    return InstantiatedKnowledge(
        active_region_ids=gamma.active_ids(),
        control_range=control_range,
        location=location,
        objects=MappingProxyType(snapshots),
        region_status=gamma.status,
        push_direction=push,
    )
