"""
Planar world model: shapes, poses, object and robot descriptions, and the exact
collision/containment queries shared by the physics engine and the validity checker.

Boxes are the only polygons. Box-box tests use separating axes, disks are handled by
radius-inflated closest-point tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .utils import wrap_angle

Vec2 = Tuple[float, float]


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class ObjectClass(str, Enum):
    FIXED = "Fixed"
    FREE = "FreeManipulatable"
    CONSTRAINED = "ConstraintOrientedManipulatable"

    @property
    def manipulatable(self) -> bool:
        return self is not ObjectClass.FIXED


# ---------------------------------------------------------------------------
# Shapes and poses
# ---------------------------------------------------------------------------


def _require_positive(owner: str, **values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise ValueError(f"{owner}.{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class Disk:
    radius: float

    def __post_init__(self):
        _require_positive("Disk", radius=self.radius)


@dataclass(frozen=True)
class Box:
    """Rectangle centred on its frame; ``half_width`` along local x, ``half_depth`` along y."""

    half_width: float
    half_depth: float

    def __post_init__(self):
        _require_positive("Box", half_width=self.half_width, half_depth=self.half_depth)


@dataclass(frozen=True)
class ChainLink:
    """Thin rectangle spanning [0, length] along local x from its joint frame."""

    length: float
    thickness: float

    def __post_init__(self):
        _require_positive("ChainLink", length=self.length, thickness=self.thickness)


Shape = Union[Disk, Box, ChainLink]


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> Vec2:
        return (self.x, self.y)

    def transform_point(self, px: float, py: float) -> Vec2:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (self.x + c * px - s * py, self.y + s * px + c * py)

    def inverse_transform_point(self, px: float, py: float) -> Vec2:
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx, dy = px - self.x, py - self.y
        return (c * dx + s * dy, -s * dx + c * dy)

    def rotate(self, vx: float, vy: float) -> Vec2:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (c * vx - s * vy, s * vx + c * vy)

    def inverse_rotate(self, vx: float, vy: float) -> Vec2:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (c * vx + s * vy, -s * vx + c * vy)

    def compose(self, other: "Pose2") -> "Pose2":
        """``self ∘ other``: ``other`` expressed in this frame, returned in the parent frame."""
        x, y = self.transform_point(other.x, other.y)
        return Pose2(x, y, self.heading + other.heading)

    def inverse(self) -> "Pose2":
        x, y = self.inverse_transform_point(0.0, 0.0)
        return Pose2(x, y, -self.heading)


def _unit(vector: Sequence[float], owner: str) -> Vec2:
    x, y = float(vector[0]), float(vector[1])
    norm = math.hypot(x, y)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"{owner} must have unit norm, got norm {norm}")
    return (x, y)


# ---------------------------------------------------------------------------
# Objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManipulationRegion:
    id: str
    owner_object_id: str
    local_pose: Pose2
    extent: Box
    push_direction: Vec2
    opposite_region_id: Optional[str] = None
    active: bool = True

    def __post_init__(self):
        object.__setattr__(
            self,
            "push_direction",
            _unit(self.push_direction, f"region {self.id!r} push_direction"),
        )


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    object_class: ObjectClass
    shape: Shape
    mass: float
    mu_ground: float
    gravity_affected: bool = True
    regions: Tuple[ManipulationRegion, ...] = ()
    motion_constraint: Optional[Vec2] = None

    def __post_init__(self):
        if not (self.mass > 0):
            raise ValueError(f"object {self.id!r}: mass must be > 0, got {self.mass}")
        if not (self.mu_ground >= 0):
            raise ValueError(
                f"object {self.id!r}: mu_ground must be >= 0, got {self.mu_ground}"
            )
        if self.object_class is ObjectClass.FIXED and self.regions:
            raise ValueError(
                f"object {self.id!r}: Fixed objects cannot own manipulation regions"
            )
        if self.motion_constraint is not None:
            if self.object_class is not ObjectClass.CONSTRAINED:
                raise ValueError(
                    f"object {self.id!r}: only co-mObjects carry a motion constraint"
                )
            object.__setattr__(
                self,
                "motion_constraint",
                _unit(self.motion_constraint, f"object {self.id!r} motion_constraint"),
            )
        for region in self.regions:
            if region.owner_object_id != self.id:
                raise ValueError(
                    f"region {region.id!r} is declared on {self.id!r} "
                    f"but owned by {region.owner_object_id!r}"
                )


@dataclass(frozen=True)
class ObjectState:
    pose: Pose2
    linear_velocity: Vec2 = (0.0, 0.0)
    angular_velocity: float = 0.0
    constraint_tag: Optional[Vec2] = None  # unit axis in the object frame


# ---------------------------------------------------------------------------
# Robots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicBounds:
    """
    Actuation limits of a robot.

    ``f_min``/``f_max`` bound the pushing force in N (disk: body force, car: longitudinal
    wheel force, arm: end-effector force). ``tau_min``/``tau_max`` bound joint torques of an
    arm, ``steer_tau_max`` the steering torque of a car. ``v_max`` is m/s or rad/s.
    """

    f_min: float
    f_max: float
    v_max: float
    tau_min: Optional[float] = None
    tau_max: Optional[float] = None
    steer_tau_max: Optional[float] = None

    def __post_init__(self):
        if not (self.f_min >= 0 and self.f_min < self.f_max):
            raise ValueError(
                f"bounds need 0 <= f_min < f_max, got [{self.f_min}, {self.f_max}]"
            )
        if not self.v_max > 0:
            raise ValueError(f"bounds need v_max > 0, got {self.v_max}")
        if (self.tau_min is None) != (self.tau_max is None):
            raise ValueError("tau_min and tau_max must be given together")
        if self.tau_min is not None and not (0 <= self.tau_min < self.tau_max):
            raise ValueError(
                f"bounds need 0 <= tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]"
            )


@dataclass(frozen=True)
class HolonomicDisk:
    radius: float
    mass: float
    mu_ground: float
    bounds: DynamicBounds

    def __post_init__(self):
        _require_positive("HolonomicDisk", radius=self.radius, mass=self.mass)


@dataclass(frozen=True)
class CarLike:
    chassis: Box
    wheel_radius: float
    mass: float
    mu_wheel: float
    max_steer: float
    bounds: DynamicBounds

    def __post_init__(self):
        _require_positive(
            "CarLike",
            wheel_radius=self.wheel_radius,
            mass=self.mass,
            max_steer=self.max_steer,
        )
        if self.bounds.steer_tau_max is None:
            raise ValueError("CarLike bounds need steer_tau_max")

    @property
    def wheelbase(self) -> float:
        return 2.0 * self.chassis.half_width


@dataclass(frozen=True)
class PlanarArm:
    link_lengths: Tuple[float, ...]
    link_masses: Tuple[float, ...]
    joint_limits: Tuple[Tuple[float, float], ...]
    bounds: DynamicBounds
    base: Pose2 = field(default_factory=Pose2)
    link_thickness: float = 0.04

    def __post_init__(self):
        n = len(self.link_lengths)
        if n == 0 or len(self.link_masses) != n or len(self.joint_limits) != n:
            raise ValueError(
                "PlanarArm needs matching, non-empty link_lengths, link_masses and joint_limits"
            )
        for i, (length, mass) in enumerate(zip(self.link_lengths, self.link_masses)):
            _require_positive(f"PlanarArm.link[{i}]", length=length, mass=mass)
        for i, (lower, upper) in enumerate(self.joint_limits):
            if not lower < upper:
                raise ValueError(
                    f"joint {i}: lower limit {lower} must be below upper limit {upper}"
                )
        if self.bounds.tau_max is None:
            raise ValueError("PlanarArm bounds need tau_min/tau_max")

    @property
    def dof(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))


RobotModel = Union[HolonomicDisk, CarLike, PlanarArm]


@dataclass(frozen=True)
class DiskState:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0


@dataclass(frozen=True)
class CarState:
    x: float
    y: float
    heading: float
    speed: float = 0.0
    steer: float = 0.0
    steer_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class ArmState:
    angles: Tuple[float, ...]
    rates: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        rates = tuple(float(r) for r in self.rates) or (0.0,) * len(self.angles)
        if len(rates) != len(self.angles):
            raise ValueError("ArmState rates must match the number of joints")
        object.__setattr__(self, "rates", rates)


RobotState = Union[DiskState, CarState, ArmState]


@dataclass
class WorkspaceState:
    """World snapshot q_t: one state per object, the robot state and the time."""

    object_states: Dict[str, ObjectState]
    robot_state: RobotState
    time: float = 0.0

    def copy(self) -> "WorkspaceState":
        return WorkspaceState(dict(self.object_states), self.robot_state, self.time)

    def with_tags(self, tags: Dict[str, Optional[Vec2]]) -> "WorkspaceState":
        states = dict(self.object_states)
        for object_id, tag in tags.items():
            states[object_id] = replace(states[object_id], constraint_tag=tag)
        return WorkspaceState(states, self.robot_state, self.time)


# ---------------------------------------------------------------------------
# Geometry kernel
# ---------------------------------------------------------------------------


class Contact(NamedTuple):
    """Contact between A and B; ``normal`` points from A to B, ``depth`` < 0 is a gap."""

    normal: Vec2
    depth: float
    point: Vec2


def as_box(shape: Shape, pose: Pose2) -> Tuple[Box, Pose2]:
    """Express a chain link as the equivalent centred box."""
    if isinstance(shape, ChainLink):
        cx, cy = pose.transform_point(shape.length / 2.0, 0.0)
        return Box(shape.length / 2.0, shape.thickness / 2.0), Pose2(cx, cy, pose.heading)
    return shape, pose


def shape_polygon(shape: Shape, pose: Pose2) -> List[Vec2]:
    """Counter-clockwise world vertices of a box or chain link."""
    box, center = as_box(shape, pose)
    if not isinstance(box, Box):
        raise TypeError("disks have no polygon")
    w, d = box.half_width, box.half_depth
    return [center.transform_point(x, y) for x, y in ((-w, -d), (w, -d), (w, d), (-w, d))]


def shape_inertia(shape: Shape, mass: float) -> float:
    if isinstance(shape, Disk):
        return 0.5 * mass * shape.radius**2
    box, _ = as_box(shape, Pose2())
    return mass * (box.half_width**2 + box.half_depth**2) / 3.0


def shape_aabb(shape: Shape, pose: Pose2) -> Tuple[float, float, float, float]:
    if isinstance(shape, Disk):
        r = shape.radius
        return (pose.x - r, pose.y - r, pose.x + r, pose.y + r)
    xs, ys = zip(*shape_polygon(shape, pose))
    return (min(xs), min(ys), max(xs), max(ys))


def point_in_shape(
    shape: Shape, pose: Pose2, px: float, py: float, tolerance: float = 0.0
) -> bool:
    if isinstance(shape, Disk):
        return math.hypot(px - pose.x, py - pose.y) <= shape.radius + tolerance
    box, center = as_box(shape, pose)
    lx, ly = center.inverse_transform_point(px, py)
    return (
        abs(lx) <= box.half_width + tolerance and abs(ly) <= box.half_depth + tolerance
    )


def _disk_disk(a: Disk, pa: Pose2, b: Disk, pb: Pose2, margin: float):
    dx, dy = pb.x - pa.x, pb.y - pa.y
    dist = math.hypot(dx, dy)
    depth = a.radius + b.radius - dist
    if depth < -margin:
        return None
    n = (dx / dist, dy / dist) if dist > 1e-12 else (1.0, 0.0)
    point = (pa.x + n[0] * (a.radius - depth / 2.0), pa.y + n[1] * (a.radius - depth / 2.0))
    return Contact(n, depth, point)


def _box_disk(a: Box, pa: Pose2, b: Disk, pb: Pose2, margin: float):
    """Contact from box A to disk B."""
    lx, ly = pa.inverse_transform_point(pb.x, pb.y)
    w, d = a.half_width, a.half_depth
    cx, cy = min(max(lx, -w), w), min(max(ly, -d), d)
    if cx != lx or cy != ly:
        gx, gy = lx - cx, ly - cy
        dist = math.hypot(gx, gy)
        depth = b.radius - dist
        if depth < -margin:
            return None
        n_local = (gx / dist, gy / dist)
    else:
        # centre inside the box: push out through the nearest face
        faces = ((w - lx, (1.0, 0.0)), (w + lx, (-1.0, 0.0)), (d - ly, (0.0, 1.0)), (d + ly, (0.0, -1.0)))
        face_dist, n_local = min(faces, key=lambda f: f[0])
        depth = b.radius + face_dist
        cx, cy = (
            (lx + face_dist * n_local[0]) if n_local[0] else lx,
            (ly + face_dist * n_local[1]) if n_local[1] else ly,
        )
    return Contact(pa.rotate(*n_local), depth, pa.transform_point(cx, cy))


def _project(vertices: Sequence[Vec2], axis: Vec2) -> Tuple[float, float]:
    dots = [vx * axis[0] + vy * axis[1] for vx, vy in vertices]
    return min(dots), max(dots)


def _box_box(a: Box, pa: Pose2, b: Box, pb: Pose2, margin: float):
    verts_a = shape_polygon(a, pa)
    verts_b = shape_polygon(b, pb)
    axes = [pa.rotate(1.0, 0.0), pa.rotate(0.0, 1.0), pb.rotate(1.0, 0.0), pb.rotate(0.0, 1.0)]
    best_depth, best_axis = math.inf, axes[0]
    for axis in axes:
        min_a, max_a = _project(verts_a, axis)
        min_b, max_b = _project(verts_b, axis)
        depth = min(max_a - min_b, max_b - min_a)
        if depth < -margin:
            return None
        if depth < best_depth:
            best_depth, best_axis = depth, axis
    nx, ny = best_axis
    if (pb.x - pa.x) * nx + (pb.y - pa.y) * ny < 0:
        nx, ny = -nx, -ny
    tol = max(margin, 1e-9)
    inside = [v for v in verts_b if point_in_shape(a, pa, v[0], v[1], tol)]
    inside += [v for v in verts_a if point_in_shape(b, pb, v[0], v[1], tol)]
    if inside:
        point = (
            sum(v[0] for v in inside) / len(inside),
            sum(v[1] for v in inside) / len(inside),
        )
    else:
        # edges cross without a contained vertex: midpoint of the two support points
        sa = max(verts_a, key=lambda v: v[0] * nx + v[1] * ny)
        sb = min(verts_b, key=lambda v: v[0] * nx + v[1] * ny)
        point = ((sa[0] + sb[0]) / 2.0, (sa[1] + sb[1]) / 2.0)
    return Contact((nx, ny), best_depth, point)


def contact_between(
    shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2, margin: float = 0.0
) -> Optional[Contact]:
    """
    Contact manifold between two placed shapes.

    Returns ``None`` when the shapes are separated by more than ``margin``; otherwise the
    normal from A to B, the penetration depth (negative for a gap within ``margin``) and a
    representative contact point.
    """
    a, pa = as_box(shape_a, pose_a)
    b, pb = as_box(shape_b, pose_b)
    if isinstance(a, Disk) and isinstance(b, Disk):
        return _disk_disk(a, pa, b, pb, margin)
    if isinstance(b, Disk):
        return _box_disk(a, pa, b, pb, margin)
    if isinstance(a, Disk):
        flipped = _box_disk(b, pb, a, pa, margin)
        if flipped is None:
            return None
        return Contact((-flipped.normal[0], -flipped.normal[1]), flipped.depth, flipped.point)
    return _box_box(a, pa, b, pb, margin)


def overlap(shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2) -> bool:
    """True iff the closed regions of the two placed shapes intersect."""
    contact = contact_between(shape_a, pose_a, shape_b, pose_b)
    return contact is not None and contact.depth >= 0.0


# ---------------------------------------------------------------------------
# Manipulation regions
# ---------------------------------------------------------------------------


def region_world_polygon(region: ManipulationRegion, owner_state: ObjectState) -> np.ndarray:
    """Region extent transformed by ``owner pose ∘ local_pose``, shape (4, 2)."""
    pose = owner_state.pose.compose(region.local_pose)
    return np.array(shape_polygon(region.extent, pose), dtype=float)


# ---------------------------------------------------------------------------
# Robot kinematics
# ---------------------------------------------------------------------------


def arm_joint_positions(arm: PlanarArm, angles: Sequence[float]) -> List[Tuple[float, float, float]]:
    """Frames ``(x, y, cumulative angle)`` of every joint, followed by the end effector."""
    frames = []
    x, y, theta = arm.base.x, arm.base.y, arm.base.heading
    for length, angle in zip(arm.link_lengths, angles):
        theta += angle
        frames.append((x, y, theta))
        x += length * math.cos(theta)
        y += length * math.sin(theta)
    frames.append((x, y, theta))
    return frames


def check_joint_limits(arm: PlanarArm, angles: Sequence[float], tolerance: float = 1e-12) -> None:
    if len(angles) != arm.dof:
        raise ContractError(f"arm has {arm.dof} joints, got {len(angles)} angles")
    for i, (angle, (lower, upper)) in enumerate(zip(angles, arm.joint_limits)):
        if not (lower - tolerance <= angle <= upper + tolerance):
            raise ContractError(
                f"joint {i} angle {angle:.6f} outside limits [{lower}, {upper}]"
            )


def tool_point(arm: PlanarArm, angles: Sequence[float]) -> Vec2:
    x, y, _ = arm_joint_positions(arm, angles)[-1]
    return (x, y)


def arm_jacobian(
    arm: PlanarArm, angles: Sequence[float], point: Optional[Vec2] = None, link: Optional[int] = None
) -> np.ndarray:
    """
    Translational Jacobian (2 x dof) of a point rigidly attached to ``link``.

    Defaults to the end effector. Joints beyond ``link`` do not move the point.
    """
    frames = arm_joint_positions(arm, angles)
    if point is None:
        point = frames[-1][:2]
    if link is None:
        link = arm.dof - 1
    jacobian = np.zeros((2, arm.dof))
    for k in range(link + 1):
        jx, jy, _ = frames[k]
        jacobian[0, k] = -(point[1] - jy)
        jacobian[1, k] = point[0] - jx
    return jacobian


def robot_footprint(robot: RobotModel, robot_state: RobotState) -> List[Tuple[Shape, Pose2]]:
    """World placements of every robot body (arm links by forward kinematics)."""
    if isinstance(robot, HolonomicDisk):
        return [(Disk(robot.radius), Pose2(robot_state.x, robot_state.y, 0.0))]
    if isinstance(robot, CarLike):
        return [(robot.chassis, Pose2(robot_state.x, robot_state.y, robot_state.heading))]
    check_joint_limits(robot, robot_state.angles)
    frames = arm_joint_positions(robot, robot_state.angles)
    return [
        (ChainLink(length, robot.link_thickness), Pose2(x, y, theta))
        for length, (x, y, theta) in zip(robot.link_lengths, frames[:-1])
    ]
