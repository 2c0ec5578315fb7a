"""
Planar rigid-body propagator: semi-implicit Euler with Coulomb ground friction, sequential
impulse contacts and robot actuation (body force, wheel and steering torque, joint torques).

Each substep runs: robot actuation, contact detection, ``contact_solver_iterations`` passes
over contacts and object ground friction, robot speed limits, position integration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from .constants import (
    BAUMGARTE,
    CONTACT_FRICTION,
    CONTACT_TOLERANCE,
    INSTABILITY_SPEED,
    JOINT_DAMPING,
    KPMP_CONTROL_DURATION,
    KPMP_DT,
    KPMP_GRAVITY,
    SOLVER_ITERATIONS,
    STATIC_FRICTION_EPSILON,
    STEER_DAMPING,
    STEER_INERTIA,
)
from .world import (
    ArmState,
    CarLike,
    CarState,
    ChainLink,
    Contact,
    ContractError,
    Disk,
    DiskState,
    HolonomicDisk,
    ObjectClass,
    ObjectSpec,
    ObjectState,
    PlanarArm,
    Pose2,
    RobotModel,
    RobotState,
    Vec2,
    WorkspaceState,
    arm_joint_positions,
    contact_between,
    shape_aabb,
    shape_inertia,
)

_logger = logging.getLogger(__name__)

ROBOT_ID = "robot"


class SolverInstabilityError(RuntimeError):
    """A body exceeded the instability speed; the integration is no longer meaningful."""


# ---------------------------------------------------------------------------
# Controls and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanarForce:
    fx: float
    fy: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.fx, self.fy)


@dataclass(frozen=True)
class CarControl:
    drive_torque: float
    steer_torque: float


@dataclass(frozen=True)
class JointTorques:
    torques: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "torques", tuple(float(t) for t in self.torques))


ControlInput = Union[PlanarForce, CarControl, JointTorques]


def control_to_dict(control: ControlInput) -> Dict[str, Any]:
    if isinstance(control, PlanarForce):
        return {"type": "force", "f": [control.fx, control.fy]}
    if isinstance(control, CarControl):
        return {"type": "car", "drive_torque": control.drive_torque, "steer_torque": control.steer_torque}
    return {"type": "joint_torques", "tau": list(control.torques)}


def control_from_dict(payload: Dict[str, Any]) -> ControlInput:
    kind = payload.get("type")
    if kind == "force":
        return PlanarForce(*payload["f"])
    if kind == "car":
        return CarControl(payload["drive_torque"], payload["steer_torque"])
    if kind == "joint_torques":
        return JointTorques(tuple(payload["tau"]))
    raise ValueError(f"unknown control type {kind!r}")


@dataclass(frozen=True)
class SimConfig:
    dt: float = KPMP_DT
    control_duration: float = KPMP_CONTROL_DURATION
    gravity: float = KPMP_GRAVITY
    contact_solver_iterations: int = SOLVER_ITERATIONS
    static_friction_epsilon: float = STATIC_FRICTION_EPSILON
    contact_friction: float = CONTACT_FRICTION
    baumgarte: float = BAUMGARTE
    joint_damping: float = JOINT_DAMPING

    def __post_init__(self):
        if not 0 < self.dt <= self.control_duration:
            raise ValueError(
                f"SimConfig needs 0 < dt <= control_duration, got dt={self.dt}, "
                f"control_duration={self.control_duration}"
            )
        if not self.gravity > 0:
            raise ValueError(f"SimConfig.gravity must be > 0, got {self.gravity}")
        if self.contact_solver_iterations < 1:
            raise ValueError("SimConfig.contact_solver_iterations must be >= 1")

    @property
    def substeps(self) -> int:
        """Substeps per control duration."""
        return max(1, int(round(self.control_duration / self.dt)))


def check_control(robot: RobotModel, control: ControlInput) -> None:
    if isinstance(robot, HolonomicDisk):
        ok = isinstance(control, PlanarForce)
        values = (control.fx, control.fy) if ok else ()
    elif isinstance(robot, CarLike):
        ok = isinstance(control, CarControl)
        values = (control.drive_torque, control.steer_torque) if ok else ()
    else:
        ok = isinstance(control, JointTorques) and len(control.torques) == robot.dof
        values = control.torques if ok else ()
    if not ok:
        raise ContractError(f"control {control!r} does not match robot {type(robot).__name__}")
    if not all(math.isfinite(v) for v in values):
        raise ContractError(f"control {control!r} has non-finite components")


# ---------------------------------------------------------------------------
# Propagation log
# ---------------------------------------------------------------------------


class ContactEvent(NamedTuple):
    time: float
    object_id: str
    other_id: str
    point: Vec2
    local_point: Vec2  # in the frame of object_id at the start of the substep
    normal: Vec2  # pointing into object_id
    impulse: float
    link: int = 0


@dataclass
class PropagationLog:
    """
    Per-substep record of a propagation.

    ``forces``/``displacements`` hold the robot actuation force and the robot displacement
    (mobile robots). ``torques``/``rates`` hold the actuated axes: car ``(drive, steer)``
    torques with ``(wheel, steer)`` angular rates, arm joint torques with joint rates.
    """

    dt: float
    times: List[float] = field(default_factory=list)
    forces: List[Vec2] = field(default_factory=list)
    displacements: List[Vec2] = field(default_factory=list)
    torques: List[Tuple[float, ...]] = field(default_factory=list)
    rates: List[Tuple[float, ...]] = field(default_factory=list)
    contacts: List[ContactEvent] = field(default_factory=list)
    max_object_speed: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    def extend(self, other: "PropagationLog") -> None:
        self.times.extend(other.times)
        self.forces.extend(other.forces)
        self.displacements.extend(other.displacements)
        self.torques.extend(other.torques)
        self.rates.extend(other.rates)
        self.contacts.extend(other.contacts)
        self.max_object_speed = max(self.max_object_speed, other.max_object_speed)

    def robot_contacts(self) -> List[ContactEvent]:
        return [event for event in self.contacts if event.other_id == ROBOT_ID]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dt": self.dt,
            "times": self.times,
            "forces": [list(f) for f in self.forces],
            "displacements": [list(d) for d in self.displacements],
            "torques": [list(t) for t in self.torques],
            "rates": [list(r) for r in self.rates],
            "contacts": [event._asdict() for event in self.contacts],
            "max_object_speed": self.max_object_speed,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "PropagationLog":
        return cls(
            dt=payload["dt"],
            times=list(payload["times"]),
            forces=[tuple(f) for f in payload["forces"]],
            displacements=[tuple(d) for d in payload["displacements"]],
            torques=[tuple(t) for t in payload["torques"]],
            rates=[tuple(r) for r in payload["rates"]],
            contacts=[
                ContactEvent(
                    **{
                        **event,
                        "point": tuple(event["point"]),
                        "local_point": tuple(event["local_point"]),
                        "normal": tuple(event["normal"]),
                    }
                )
                for event in payload["contacts"]
            ],
            max_object_speed=payload["max_object_speed"],
        )


# ---------------------------------------------------------------------------
# Ground friction and robot actuation
# ---------------------------------------------------------------------------


def ground_friction_force(
    body_mass: float,
    mu: float,
    velocity: Sequence[float],
    applied: Sequence[float],
    cfg: SimConfig,
) -> Vec2:
    """
    Coulomb friction between a body and the floor.

    Parameters
    ----------
    body_mass: float
        Mass in kg.
    mu: float
        Friction coefficient against the floor.
    velocity: 2-vector
        Current velocity in m/s.
    applied: 2-vector
        Sum of the other forces acting on the body, in N.
    cfg: SimConfig
        Provides gravity and the static friction threshold.

    Returns
    -------
    tuple
        Friction force in N. Balances ``applied`` exactly while the body is static and the
        load stays below ``mu * m * g``; otherwise has magnitude ``mu * m * g``, opposing the
        velocity (or the applied force when breaking away from rest).

    Examples
    --------
    >>> ground_friction_force(1.0, 0.2, (1.0, 0.0), (0.0, 0.0), SimConfig(gravity=9.8))
    (-1.9600000000000002, -0.0)
    """
    if mu < 0:
        raise ContractError(f"friction coefficient must be >= 0, got {mu}")
    limit = mu * body_mass * cfg.gravity
    vx, vy = velocity
    ax, ay = applied
    speed = math.hypot(vx, vy)
    if speed < cfg.static_friction_epsilon:
        load = math.hypot(ax, ay)
        if load <= limit:
            return (-ax, -ay)
        return (-limit * ax / load, -limit * ay / load)
    return (-limit * vx / speed, -limit * vy / speed)


def _is_static(body_mass: float, mu: float, velocity: Vec2, applied: Vec2, cfg: SimConfig) -> bool:
    return (
        math.hypot(*velocity) < cfg.static_friction_epsilon
        and math.hypot(*applied) <= mu * body_mass * cfg.gravity
    )


def _car_actuate(robot: CarLike, state: CarState, control: CarControl, cfg: SimConfig) -> Tuple[float, float, float, float]:
    """Velocity update of a car; returns (speed, steer, steer_rate, traction-limited drive force)."""
    dt = cfg.dt
    traction = robot.mu_wheel * robot.mass * cfg.gravity
    drive = control.drive_torque / robot.wheel_radius
    drive = max(-traction, min(traction, drive))
    speed = state.speed + drive / robot.mass * dt
    steer_rate = state.steer_rate + (control.steer_torque - STEER_DAMPING * state.steer_rate) / STEER_INERTIA * dt
    steer = state.steer + steer_rate * dt
    if steer > robot.max_steer:
        steer, steer_rate = robot.max_steer, 0.0
    elif steer < -robot.max_steer:
        steer, steer_rate = -robot.max_steer, 0.0
    return speed, steer, steer_rate, drive


def _car_advance(robot: CarLike, x: float, y: float, heading: float, speed: float, steer: float, dt: float) -> Tuple[float, float, float]:
    x += speed * math.cos(heading) * dt
    y += speed * math.sin(heading) * dt
    heading += speed * math.tan(steer) / robot.wheelbase * dt
    return x, y, heading


def car_substep(robot: CarLike, state: CarState, control: CarControl, cfg: SimConfig) -> CarState:
    """
    One contact-free substep of the bicycle model.

    The drive torque acts as a longitudinal wheel force ``torque / wheel_radius`` limited by
    traction ``mu_wheel * m * g``. The chassis never slips sideways. The steering angle
    integrates the steering torque against a damped steering inertia and saturates at
    ``max_steer``.
    """
    if abs(state.steer) > robot.max_steer + 1e-12:
        raise ContractError(f"steer angle {state.steer} exceeds max_steer {robot.max_steer}")
    speed, steer, steer_rate, _ = _car_actuate(robot, state, control, cfg)
    x, y, heading = _car_advance(robot, state.x, state.y, state.heading, speed, steer, cfg.dt)
    return CarState(x, y, heading, speed, steer, steer_rate)


def arm_joint_inertia(robot: PlanarArm) -> Tuple[float, ...]:
    """
    Diagonal joint inertia: each outboard link as a point mass at its midpoint, measured
    along the stretched chain.
    """
    lengths, masses = robot.link_lengths, robot.link_masses
    inertia = []
    for k in range(robot.dof):
        total = 0.0
        for j in range(k, robot.dof):
            distance = sum(lengths[k:j]) + lengths[j] / 2.0
            total += masses[j] * distance**2
        inertia.append(total)
    return tuple(inertia)


def _arm_actuate(inertia: Sequence[float], rates: Sequence[float], torques: Sequence[float], cfg: SimConfig) -> List[float]:
    b = cfg.joint_damping
    return [w + (tau - b * w) / i * cfg.dt for i, w, tau in zip(inertia, rates, torques)]


def _arm_advance(robot: PlanarArm, angles: Sequence[float], rates: List[float], dt: float) -> List[float]:
    out = []
    for k, ((lower, upper), q, w) in enumerate(zip(robot.joint_limits, angles, rates)):
        q = q + w * dt
        if q > upper:
            q, rates[k] = upper, 0.0
        elif q < lower:
            q, rates[k] = lower, 0.0
        out.append(q)
    return out


def arm_substep(robot: PlanarArm, state: ArmState, control: JointTorques, cfg: SimConfig) -> ArmState:
    """One contact-free substep of ``I_k q''_k = tau_k - b q'_k`` with joint stops."""
    if len(control.torques) != robot.dof:
        raise ContractError(f"arm has {robot.dof} joints, got {len(control.torques)} torques")
    rates = _arm_actuate(arm_joint_inertia(robot), state.rates, control.torques, cfg)
    angles = _arm_advance(robot, state.angles, rates, cfg.dt)
    return ArmState(tuple(angles), tuple(rates))


# ---------------------------------------------------------------------------
# Bodies
# ---------------------------------------------------------------------------


class ObjectBody:
    """Scene object during a propagation. Co-mObjects translate along their axis only."""

    __slots__ = (
        "id", "shape", "x", "y", "angle", "vx", "vy", "w", "mass", "inv_mass",
        "inertia", "inv_inertia", "axis", "friction_limit", "spin_limit",
        "_friction_acc", "_spin_acc",
    )

    def __init__(self, spec: ObjectSpec, state: ObjectState):
        self.id = spec.id
        self.shape = spec.shape
        self.x, self.y, self.angle = state.pose.x, state.pose.y, state.pose.heading
        self.mass = spec.mass
        self.inertia = shape_inertia(spec.shape, spec.mass)
        self.axis: Optional[Vec2] = None
        self.friction_limit = self.spin_limit = 0.0
        self._friction_acc = (0.0, 0.0)
        self._spin_acc = 0.0
        if spec.object_class is ObjectClass.FIXED:
            self.inv_mass = self.inv_inertia = 0.0
            self.vx = self.vy = self.w = 0.0
            return
        self.inv_mass = 1.0 / spec.mass
        self.inv_inertia = 1.0 / self.inertia
        self.vx, self.vy = state.linear_velocity
        self.w = state.angular_velocity
        local_axis = spec.motion_constraint
        if spec.object_class is ObjectClass.CONSTRAINED and local_axis is None:
            local_axis = state.constraint_tag
        if spec.object_class is ObjectClass.CONSTRAINED and local_axis is not None:
            self.axis = state.pose.rotate(*local_axis)
            self.inv_inertia = 0.0
            self.w = 0.0
            along = self.vx * self.axis[0] + self.vy * self.axis[1]
            self.vx, self.vy = along * self.axis[0], along * self.axis[1]

    @property
    def movable(self) -> bool:
        return self.inv_mass > 0.0

    def pose(self) -> Pose2:
        return Pose2(self.x, self.y, self.angle)

    def begin_substep(self, mu: float, cfg: SimConfig, gravity_affected: bool) -> None:
        load = mu * self.mass * cfg.gravity * cfg.dt if gravity_affected else 0.0
        self.friction_limit = load
        self.spin_limit = load * math.sqrt(self.inertia / self.mass)
        self._friction_acc = (0.0, 0.0)
        self._spin_acc = 0.0

    def velocity_at(self, px: float, py: float, part: int = 0) -> Vec2:
        return (self.vx - self.w * (py - self.y), self.vy + self.w * (px - self.x))

    def response(self, px: float, py: float, nx: float, ny: float, part: int = 0) -> float:
        if self.axis is not None:
            along = self.axis[0] * nx + self.axis[1] * ny
            return self.inv_mass * along * along
        rn = (px - self.x) * ny - (py - self.y) * nx
        return self.inv_mass + self.inv_inertia * rn * rn

    def apply(self, px: float, py: float, jx: float, jy: float, part: int = 0) -> None:
        if self.axis is not None:
            along = (self.axis[0] * jx + self.axis[1] * jy) * self.inv_mass
            self.vx += along * self.axis[0]
            self.vy += along * self.axis[1]
            return
        self.vx += jx * self.inv_mass
        self.vy += jy * self.inv_mass
        self.w += ((px - self.x) * jy - (py - self.y) * jx) * self.inv_inertia

    def solve_ground_friction(self) -> None:
        if self.inv_mass == 0.0 or self.friction_limit == 0.0:
            return
        ax, ay = self._friction_acc
        nx, ny = ax - self.mass * self.vx, ay - self.mass * self.vy
        norm = math.hypot(nx, ny)
        if norm > self.friction_limit:
            nx, ny = nx * self.friction_limit / norm, ny * self.friction_limit / norm
        self._friction_acc = (nx, ny)
        self.vx += (nx - ax) * self.inv_mass
        self.vy += (ny - ay) * self.inv_mass
        if self.axis is not None:
            along = self.vx * self.axis[0] + self.vy * self.axis[1]
            self.vx, self.vy = along * self.axis[0], along * self.axis[1]
        if self.inv_inertia > 0.0:
            acc = self._spin_acc
            target = max(-self.spin_limit, min(self.spin_limit, acc - self.inertia * self.w))
            self._spin_acc = target
            self.w += (target - acc) * self.inv_inertia

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def integrate(self, dt: float) -> None:
        if self.inv_mass == 0.0:
            return
        self.x += self.vx * dt
        self.y += self.vy * dt
        self.angle += self.w * dt

    def to_state(self, tag: Optional[Vec2]) -> ObjectState:
        return ObjectState(Pose2(self.x, self.y, self.angle), (self.vx, self.vy), self.w, tag)


class DiskRobotBody:
    __slots__ = ("robot", "x", "y", "vx", "vy", "inv_mass")

    def __init__(self, robot: HolonomicDisk, state: DiskState):
        self.robot = robot
        self.x, self.y, self.vx, self.vy = state.x, state.y, state.vx, state.vy
        self.inv_mass = 1.0 / robot.mass

    def parts(self) -> List[Tuple[Any, Pose2, int]]:
        return [(Disk(self.robot.radius), Pose2(self.x, self.y, 0.0), 0)]

    def actuate(self, control: PlanarForce, cfg: SimConfig) -> Tuple[Vec2, Tuple[float, ...]]:
        robot = self.robot
        applied = (control.fx, control.fy)
        velocity = (self.vx, self.vy)
        if _is_static(robot.mass, robot.mu_ground, velocity, applied, cfg):
            self.vx = self.vy = 0.0
            return applied, ()
        fx, fy = ground_friction_force(robot.mass, robot.mu_ground, velocity, applied, cfg)
        vx = self.vx + (applied[0] + fx) * self.inv_mass * cfg.dt
        vy = self.vy + (applied[1] + fy) * self.inv_mass * cfg.dt
        below = math.hypot(*applied) <= robot.mu_ground * robot.mass * cfg.gravity
        if below and vx * self.vx + vy * self.vy < 0.0:
            vx = vy = 0.0
        self.vx, self.vy = vx, vy
        return applied, ()

    def velocity_at(self, px: float, py: float, part: int = 0) -> Vec2:
        return (self.vx, self.vy)

    def response(self, px: float, py: float, nx: float, ny: float, part: int = 0) -> float:
        return self.inv_mass

    def apply(self, px: float, py: float, jx: float, jy: float, part: int = 0) -> None:
        self.vx += jx * self.inv_mass
        self.vy += jy * self.inv_mass

    def clamp_speed(self) -> float:
        speed = math.hypot(self.vx, self.vy)
        v_max = self.robot.bounds.v_max
        if speed > v_max:
            self.vx, self.vy = self.vx * v_max / speed, self.vy * v_max / speed
            return v_max
        return speed

    def position(self) -> Vec2:
        return (self.x, self.y)

    def integrate(self, dt: float) -> None:
        self.x += self.vx * dt
        self.y += self.vy * dt

    def to_state(self) -> DiskState:
        return DiskState(self.x, self.y, self.vx, self.vy)


class CarRobotBody:
    """Car chassis; contacts only change the longitudinal speed."""

    __slots__ = ("robot", "x", "y", "heading", "speed", "steer", "steer_rate", "inv_mass", "_axis")

    def __init__(self, robot: CarLike, state: CarState):
        self.robot = robot
        self.x, self.y, self.heading = state.x, state.y, state.heading
        self.speed, self.steer, self.steer_rate = state.speed, state.steer, state.steer_rate
        self.inv_mass = 1.0 / robot.mass
        self._axis = (math.cos(self.heading), math.sin(self.heading))

    def parts(self):
        return [(self.robot.chassis, Pose2(self.x, self.y, self.heading), 0)]

    def actuate(self, control: CarControl, cfg: SimConfig):
        state = CarState(self.x, self.y, self.heading, self.speed, self.steer, self.steer_rate)
        self.speed, self.steer, self.steer_rate, drive = _car_actuate(self.robot, state, control, cfg)
        self._axis = (math.cos(self.heading), math.sin(self.heading))
        force = (drive * self._axis[0], drive * self._axis[1])
        return force, (control.drive_torque, control.steer_torque)

    def rates(self) -> Tuple[float, float]:
        return (self.speed / self.robot.wheel_radius, self.steer_rate)

    def velocity_at(self, px: float, py: float, part: int = 0) -> Vec2:
        return (self.speed * self._axis[0], self.speed * self._axis[1])

    def response(self, px: float, py: float, nx: float, ny: float, part: int = 0) -> float:
        along = self._axis[0] * nx + self._axis[1] * ny
        return self.inv_mass * along * along

    def apply(self, px: float, py: float, jx: float, jy: float, part: int = 0) -> None:
        self.speed += (self._axis[0] * jx + self._axis[1] * jy) * self.inv_mass

    def clamp_speed(self) -> float:
        v_max = self.robot.bounds.v_max
        self.speed = max(-v_max, min(v_max, self.speed))
        return abs(self.speed)

    def position(self) -> Vec2:
        return (self.x, self.y)

    def integrate(self, dt: float) -> None:
        self.x, self.y, self.heading = _car_advance(self.robot, self.x, self.y, self.heading, self.speed, self.steer, dt)

    def to_state(self) -> CarState:
        return CarState(self.x, self.y, self.heading, self.speed, self.steer, self.steer_rate)


class ArmRobotBody:
    """Planar arm; an impulse ``j`` at a point on link ``i`` changes rates by ``M^-1 J_i^T j``."""

    __slots__ = ("robot", "angles", "rates", "inertia", "_frames")

    def __init__(self, robot: PlanarArm, state: ArmState, inertia: Sequence[float]):
        self.robot = robot
        self.angles = list(state.angles)
        self.rates = list(state.rates)
        self.inertia = tuple(inertia)
        self._frames = arm_joint_positions(robot, self.angles)

    def parts(self):
        thickness = self.robot.link_thickness
        return [
            (ChainLink(length, thickness), Pose2(x, y, theta), i)
            for i, (length, (x, y, theta)) in enumerate(zip(self.robot.link_lengths, self._frames))
        ]

    def actuate(self, control: JointTorques, cfg: SimConfig):
        self.rates = _arm_actuate(self.inertia, self.rates, control.torques, cfg)
        return None, control.torques

    def velocity_at(self, px: float, py: float, part: int = 0) -> Vec2:
        vx = vy = 0.0
        for k in range(part + 1):
            jx, jy, _ = self._frames[k]
            vx -= self.rates[k] * (py - jy)
            vy += self.rates[k] * (px - jx)
        return (vx, vy)

    def response(self, px: float, py: float, nx: float, ny: float, part: int = 0) -> float:
        total = 0.0
        for k in range(part + 1):
            jx, jy, _ = self._frames[k]
            column = -(py - jy) * nx + (px - jx) * ny
            total += column * column / self.inertia[k]
        return total

    def apply(self, px: float, py: float, jx: float, jy: float, part: int = 0) -> None:
        for k in range(part + 1):
            ox, oy, _ = self._frames[k]
            self.rates[k] += (-(py - oy) * jx + (px - ox) * jy) / self.inertia[k]

    def clamp_speed(self) -> float:
        v_max = self.robot.bounds.v_max
        self.rates = [max(-v_max, min(v_max, w)) for w in self.rates]
        return max((abs(w) for w in self.rates), default=0.0)

    def position(self) -> Vec2:
        x, y, _ = self._frames[-1]
        return (x, y)

    def integrate(self, dt: float) -> None:
        self.angles = _arm_advance(self.robot, self.angles, self.rates, dt)
        self._frames = arm_joint_positions(self.robot, self.angles)

    def to_state(self) -> ArmState:
        return ArmState(tuple(self.angles), tuple(self.rates))


# ---------------------------------------------------------------------------
# Contacts
# ---------------------------------------------------------------------------


class ContactConstraint:
    """Non-penetration plus Coulomb friction at one point; ``normal`` points from A to B."""

    __slots__ = (
        "a", "part_a", "b", "part_b", "px", "py", "nx", "ny", "tx", "ty",
        "depth", "k_n", "k_t", "bias", "jn", "jt",
    )

    def __init__(self, a, part_a: int, b, part_b: int, contact: Contact, cfg: SimConfig):
        self.a, self.part_a, self.b, self.part_b = a, part_a, b, part_b
        self.px, self.py = contact.point
        self.nx, self.ny = contact.normal
        self.tx, self.ty = -self.ny, self.nx
        self.depth = contact.depth
        px, py = self.px, self.py
        self.k_n = a.response(px, py, self.nx, self.ny, part_a) + b.response(px, py, self.nx, self.ny, part_b)
        self.k_t = a.response(px, py, self.tx, self.ty, part_a) + b.response(px, py, self.tx, self.ty, part_b)
        if self.depth < 0.0:
            self.bias = self.depth / cfg.dt
        else:
            self.bias = cfg.baumgarte / cfg.dt * max(self.depth - CONTACT_TOLERANCE, 0.0)
        self.jn = self.jt = 0.0

    @property
    def active(self) -> bool:
        return self.k_n > 1e-12

    def _apply(self, jx: float, jy: float) -> None:
        self.a.apply(self.px, self.py, -jx, -jy, self.part_a)
        self.b.apply(self.px, self.py, jx, jy, self.part_b)

    def _relative_velocity(self) -> Vec2:
        vax, vay = self.a.velocity_at(self.px, self.py, self.part_a)
        vbx, vby = self.b.velocity_at(self.px, self.py, self.part_b)
        return (vbx - vax, vby - vay)

    def solve(self, mu: float) -> None:
        dvx, dvy = self._relative_velocity()
        vn = dvx * self.nx + dvy * self.ny
        accumulated = max(self.jn + (self.bias - vn) / self.k_n, 0.0)
        delta, self.jn = accumulated - self.jn, accumulated
        self._apply(delta * self.nx, delta * self.ny)
        if self.k_t <= 1e-12:
            return
        dvx, dvy = self._relative_velocity()
        vt = dvx * self.tx + dvy * self.ty
        bound = mu * self.jn
        accumulated = max(-bound, min(bound, self.jt - vt / self.k_t))
        delta, self.jt = accumulated - self.jt, accumulated
        self._apply(delta * self.tx, delta * self.ty)


def resolve_contacts(
    contacts: Sequence[ContactConstraint],
    cfg: SimConfig,
    friction_bodies: Iterable[ObjectBody] = (),
) -> List[float]:
    """
    Sequential-impulse pass over ``contacts`` (restitution 0) interleaved with the ground
    friction of ``friction_bodies``. Returns the accumulated normal impulse of each contact.
    """
    friction_bodies = [body for body in friction_bodies if body.movable]
    solvable = [c for c in contacts if c.active]
    for _ in range(cfg.contact_solver_iterations):
        for contact in solvable:
            contact.solve(cfg.contact_friction)
        for body in friction_bodies:
            body.solve_ground_friction()
    return [c.jn for c in contacts]


def _aabbs_touch(a, b, margin: float) -> bool:
    return not (
        a[2] + margin < b[0] or b[2] + margin < a[0] or a[3] + margin < b[1] or b[3] + margin < a[1]
    )


# ---------------------------------------------------------------------------
# Propagator
# ---------------------------------------------------------------------------


class StatePropagator:
    """
    The transition function for one scene: ``propagate(q, u, steps)`` applies ``u`` for
    ``steps`` control durations and returns the new state and its log.
    """

    def __init__(self, objects: Sequence[ObjectSpec], robot: RobotModel, cfg: Optional[SimConfig] = None):
        self.objects = tuple(objects)
        self.robot = robot
        self.cfg = cfg or SimConfig()
        self._arm_inertia = arm_joint_inertia(robot) if isinstance(robot, PlanarArm) else ()

    def _robot_body(self, state: RobotState):
        if isinstance(self.robot, HolonomicDisk):
            return DiskRobotBody(self.robot, state)
        if isinstance(self.robot, CarLike):
            return CarRobotBody(self.robot, state)
        return ArmRobotBody(self.robot, state, self._arm_inertia)

    def propagate(self, q: WorkspaceState, u: ControlInput, steps: int = 1) -> Tuple[WorkspaceState, PropagationLog]:
        if steps < 1:
            raise ContractError(f"steps must be >= 1, got {steps}")
        check_control(self.robot, u)
        cfg = self.cfg
        bodies = [ObjectBody(spec, q.object_states[spec.id]) for spec in self.objects]
        robot = self._robot_body(q.robot_state)
        log = PropagationLog(cfg.dt)
        substeps = steps * cfg.substeps
        for i in range(substeps):
            self._substep(bodies, robot, u, log, q.time + i * cfg.dt)
        time = q.time + substeps * cfg.dt
        states = {
            body.id: body.to_state(q.object_states[body.id].constraint_tag) for body in bodies
        }
        return WorkspaceState(states, robot.to_state(), time), log

    def _detect(self, bodies: List[ObjectBody], robot) -> List[ContactConstraint]:
        cfg = self.cfg
        margin = CONTACT_TOLERANCE
        poses = [body.pose() for body in bodies]
        boxes = [shape_aabb(body.shape, pose) for body, pose in zip(bodies, poses)]
        constraints = []
        for shape, pose, part in robot.parts():
            robot_box = shape_aabb(shape, pose)
            for body, body_pose, box in zip(bodies, poses, boxes):
                if not _aabbs_touch(robot_box, box, margin):
                    continue
                contact = contact_between(shape, pose, body.shape, body_pose, margin)
                if contact is not None:
                    constraints.append(ContactConstraint(robot, part, body, 0, contact, cfg))
        for i in range(len(bodies)):
            for j in range(i + 1, len(bodies)):
                a, b = bodies[i], bodies[j]
                if not (a.movable or b.movable) or not _aabbs_touch(boxes[i], boxes[j], margin):
                    continue
                contact = contact_between(a.shape, poses[i], b.shape, poses[j], margin)
                if contact is not None:
                    constraints.append(ContactConstraint(a, 0, b, 0, contact, cfg))
        return constraints

    def _substep(self, bodies: List[ObjectBody], robot, u: ControlInput, log: PropagationLog, time: float) -> None:
        cfg = self.cfg
        start = robot.position()
        force, torques = robot.actuate(u, cfg)
        constraints = self._detect(bodies, robot)
        for spec, body in zip(self.objects, bodies):
            body.begin_substep(spec.mu_ground, cfg, spec.gravity_affected)
        resolve_contacts(constraints, cfg, bodies)
        robot_speed = robot.clamp_speed()
        object_speed = max((body.speed() for body in bodies), default=0.0)
        if max(robot_speed, object_speed) > INSTABILITY_SPEED:
            raise SolverInstabilityError(
                f"speed {max(robot_speed, object_speed):.3g} m/s exceeds {INSTABILITY_SPEED} m/s at t={time:.4f}s"
            )
        self._record_contacts(constraints, robot, log, time)
        for body in bodies:
            body.integrate(cfg.dt)
        robot.integrate(cfg.dt)
        end = robot.position()
        log.times.append(time + cfg.dt)
        log.max_object_speed = max(log.max_object_speed, object_speed)
        if isinstance(robot, DiskRobotBody):
            log.forces.append(force)
            log.displacements.append((end[0] - start[0], end[1] - start[1]))
        elif isinstance(robot, CarRobotBody):
            log.forces.append(force)
            log.displacements.append((end[0] - start[0], end[1] - start[1]))
            log.torques.append(torques)
            log.rates.append(robot.rates())
        else:
            log.torques.append(tuple(torques))
            log.rates.append(tuple(robot.rates))

    @staticmethod
    def _record_contacts(constraints: List[ContactConstraint], robot, log: PropagationLog, time: float) -> None:
        for c in constraints:
            if c.depth < 0.0 and c.jn <= 0.0:
                continue
            if c.a is robot:
                target, other, normal, link = c.b, ROBOT_ID, (c.nx, c.ny), c.part_a
            else:
                target, other, normal, link = c.b, c.a.id, (c.nx, c.ny), 0
            local = target.pose().inverse_transform_point(c.px, c.py)
            log.contacts.append(
                ContactEvent(time, target.id, other, (c.px, c.py), local, normal, c.jn, link)
            )


def propagate(scene, q: WorkspaceState, u: ControlInput, steps: int = 1, cfg: Optional[SimConfig] = None) -> Tuple[WorkspaceState, PropagationLog]:
    """Propagate ``q`` in ``scene`` under ``u`` for ``steps`` control durations."""
    return StatePropagator(scene.objects, scene.robot, cfg).propagate(q, u, steps)
