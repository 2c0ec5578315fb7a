"""
Three layers of knowledge:

- semantic knowledge: facts about objects and the robot, each data property with a unit;
- manipulation knowledge: classes, manipulation regions and physical attributes inferred
  once from the facts before planning;
- instantiated knowledge: the per-step snapshot built by :mod:`kpmp.reasoning`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, FrozenSet, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import CLASS_NAMES, REGION_DEPTH_FACTOR, REGION_FACE_FRACTION
from .world import (
    Box,
    CarLike,
    ContractError,
    Disk,
    DynamicBounds,
    HolonomicDisk,
    ManipulationRegion,
    ObjectClass,
    ObjectSpec,
    PlanarArm,
    Pose2,
    RobotModel,
    Shape,
    Vec2,
    arm_jacobian,
)

_logger = logging.getLogger(__name__)

ROBOT_SUBJECT = "robot"

# Data properties and the units they may be stated in, with the factor to the canonical unit.
DATA_UNITS: Dict[str, Dict[str, float]] = {
    "hasMass": {"kg": 1.0, "g": 1e-3},
    "hasFriction": {"1": 1.0},
    "hasGravity": {"bool": 1.0},
    "hasRadius": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "hasHalfWidth": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "hasHalfDepth": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "hasForceBounds": {"N": 1.0},
    "hasTorqueBounds": {"N*m": 1.0},
    "hasVelocityBound": {"m/s": 1.0, "rad/s": 1.0},
    "hasJointLimits": {"rad": 1.0, "deg": math.pi / 180.0},
    "hasSteerLimit": {"rad": 1.0, "deg": math.pi / 180.0},
}

AXIS_NAMES = {"alongxaxis": (1.0, 0.0), "alongyaxis": (0.0, 1.0)}


class KnowledgeInconsistencyError(ValueError):
    """The semantic knowledge contradicts itself for one subject."""

    def __init__(self, subject: str, message: str):
        super().__init__(f"{subject!r}: {message}")
        self.subject = subject


# ---------------------------------------------------------------------------
# Semantic knowledge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fact:
    subject: str
    predicate: str
    value: Union[str, float, Tuple[float, ...]]
    unit: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.value, (list, tuple)):
            object.__setattr__(self, "value", tuple(float(v) for v in self.value))
        units = DATA_UNITS.get(self.predicate)
        if units is not None and self.unit not in units:
            raise KnowledgeInconsistencyError(
                self.subject,
                f"{self.predicate} needs a unit in {sorted(units)}, got {self.unit!r}",
            )

    @property
    def quantity(self) -> Union[float, Tuple[float, ...]]:
        """Value converted to the canonical unit of the predicate."""
        factor = DATA_UNITS.get(self.predicate, {}).get(self.unit, 1.0)
        if isinstance(self.value, tuple):
            return tuple(v * factor for v in self.value)
        if isinstance(self.value, str):
            return self.value
        return self.value * factor

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "subject": self.subject,
            "predicate": self.predicate,
            "value": list(self.value) if isinstance(self.value, tuple) else self.value,
        }
        if self.unit is not None:
            payload["unit"] = self.unit
        return payload


@dataclass(frozen=True)
class SemanticKnowledge:
    """
    Fact base K_S plus the geometry it refers to.

    ``declared_regions`` holds manipulation regions given explicitly in a scene file; objects
    without declared regions get generated ones during inference.
    """

    facts: Tuple[Fact, ...]
    object_ids: Tuple[str, ...] = ()
    declared_regions: Mapping[str, Tuple[ManipulationRegion, ...]] = field(default_factory=dict)

    def about(self, subject: str) -> List[Fact]:
        return [fact for fact in self.facts if fact.subject == subject]

    def value(self, subject: str, predicate: str, default: Any = None) -> Any:
        for fact in reversed(self.facts):
            if fact.subject == subject and fact.predicate == predicate:
                return fact.quantity
        return default

    def classes(self, subject: str) -> List[str]:
        names = []
        for fact in self.facts:
            if fact.subject == subject and fact.predicate == "isA":
                name = CLASS_NAMES.get(str(fact.value).lower(), str(fact.value))
                if name not in names:
                    names.append(name)
        return names


def _shape_facts(object_id: str, shape: Shape) -> List[Fact]:
    if isinstance(shape, Disk):
        return [
            Fact(object_id, "hasShape", "disk"),
            Fact(object_id, "hasRadius", shape.radius, "m"),
        ]
    return [
        Fact(object_id, "hasShape", "box"),
        Fact(object_id, "hasHalfWidth", shape.half_width, "m"),
        Fact(object_id, "hasHalfDepth", shape.half_depth, "m"),
    ]


def _robot_facts(robot: RobotModel) -> List[Fact]:
    bounds = robot.bounds
    facts = [Fact(ROBOT_SUBJECT, "hasForceBounds", (bounds.f_min, bounds.f_max), "N")]
    if isinstance(robot, HolonomicDisk):
        facts += [
            Fact(ROBOT_SUBJECT, "isA", "HolonomicMobileRobot"),
            Fact(ROBOT_SUBJECT, "hasMass", robot.mass, "kg"),
            Fact(ROBOT_SUBJECT, "hasVelocityBound", bounds.v_max, "m/s"),
        ]
    elif isinstance(robot, CarLike):
        facts += [
            Fact(ROBOT_SUBJECT, "isA", "CarLikeMobileRobot"),
            Fact(ROBOT_SUBJECT, "hasMass", robot.mass, "kg"),
            Fact(ROBOT_SUBJECT, "hasVelocityBound", bounds.v_max, "m/s"),
            Fact(ROBOT_SUBJECT, "hasSteerLimit", robot.max_steer, "rad"),
            Fact(ROBOT_SUBJECT, "hasPart", "wheel"),
        ]
    else:
        facts += [
            Fact(ROBOT_SUBJECT, "isA", "PlanarManipulator"),
            Fact(ROBOT_SUBJECT, "hasTorqueBounds", (bounds.tau_min, bounds.tau_max), "N*m"),
            Fact(ROBOT_SUBJECT, "hasVelocityBound", bounds.v_max, "rad/s"),
            Fact(
                ROBOT_SUBJECT,
                "hasJointLimits",
                tuple(v for limit in robot.joint_limits for v in limit),
                "rad",
            ),
        ]
    return facts


def semantic_knowledge_generator(scene, extra_facts: Sequence[Dict[str, Any]] = ()) -> SemanticKnowledge:
    """
    Build the fact base of a scene.

    Parameters
    ----------
    scene: Scene
        Loaded scene; its bodies provide class assertions, data properties with units and
        motion-axis relations.
    extra_facts: list of dict
        Additional facts (``subject``, ``predicate``, ``value``, optional ``unit``). Class
        assertions are added to the generated ones; any other predicate replaces the
        generated value for the same subject. Defaults to the scene's own knowledge section.

    Returns
    -------
    SemanticKnowledge
    """
    facts: List[Fact] = []
    for spec in scene.objects:
        facts.append(Fact(spec.id, "isA", spec.object_class.value))
        facts.append(Fact(spec.id, "hasMass", spec.mass, "kg"))
        facts.append(Fact(spec.id, "hasFriction", spec.mu_ground, "1"))
        facts.append(Fact(spec.id, "hasGravity", 1.0 if spec.gravity_affected else 0.0, "bool"))
        facts.extend(_shape_facts(spec.id, spec.shape))
        if spec.motion_constraint is not None:
            facts.append(Fact(spec.id, "canMove", spec.motion_constraint))
    facts.extend(_robot_facts(scene.robot))

    extra = [Fact(**payload) for payload in (extra_facts or scene.knowledge)]
    overridden = {(f.subject, f.predicate) for f in extra if f.predicate != "isA"}
    facts = [f for f in facts if (f.subject, f.predicate) not in overridden] + extra
    return SemanticKnowledge(
        facts=tuple(facts),
        object_ids=tuple(spec.id for spec in scene.objects),
        declared_regions=MappingProxyType({spec.id: spec.regions for spec in scene.objects if spec.regions}),
    )


# ---------------------------------------------------------------------------
# The four inference predicates
# ---------------------------------------------------------------------------


class ObjectProperties(NamedTuple):
    mass: float
    mu_ground: float
    gravity_affected: bool
    dimensions: Tuple[float, ...]


class RobotProperties(NamedTuple):
    bounds: DynamicBounds
    joint_limits: Tuple[Tuple[float, float], ...]
    steer_limit: Optional[float] = None


def arm_force_capacity(robot: PlanarArm, directions: int = 360) -> float:
    """
    Isotropic end-effector force capacity at the mid-limit configuration.

    For each push direction ``d`` the largest force is ``min_k tau_max / |J_k^T d|``; the
    capacity is the smallest of these over all directions, capped by ``f_max``.
    """
    angles = [(lower + upper) / 2.0 for lower, upper in robot.joint_limits]
    jacobian = arm_jacobian(robot, angles)
    theta = np.linspace(0.0, np.pi, directions, endpoint=False)
    pushes = np.vstack([np.cos(theta), np.sin(theta)])
    loads = np.abs(jacobian.T @ pushes)
    with np.errstate(divide="ignore"):
        per_direction = np.min(np.where(loads > 1e-12, robot.bounds.tau_max / loads, np.inf), axis=0)
    return float(min(robot.bounds.f_max, per_direction.min()))


def push_capacity(robot: RobotModel) -> float:
    if isinstance(robot, PlanarArm):
        return arm_force_capacity(robot)
    return robot.bounds.f_max


def object_classification(
    spec: ObjectSpec, bounds: DynamicBounds, gravity: float = 9.8, capacity: Optional[float] = None
) -> ObjectClass:
    """
    Resolved class of an object.

    Parameters
    ----------
    spec: ObjectSpec
        Object with its declared class.
    bounds: DynamicBounds
        Robot bounds; ``f_max`` is the push capacity unless ``capacity`` is given.
    gravity: float
        Gravitational acceleration in m/s^2.
    capacity: float
        Largest sustained push force of the robot in N.

    Returns
    -------
    ObjectClass
        The declared class, or Fixed for a manipulatable object whose sliding friction
        ``mu * m * g`` exceeds the capacity.

    Examples
    --------
    >>> bounds = DynamicBounds(f_min=1.0, f_max=10.0, v_max=1.0)
    >>> cube = ObjectSpec("cube", ObjectClass.FREE, Box(0.5, 0.5), mass=50.0, mu_ground=0.5)
    >>> object_classification(cube, bounds)
    <ObjectClass.FIXED: 'Fixed'>
    """
    if not spec.object_class.manipulatable:
        return spec.object_class
    limit = bounds.f_max if capacity is None else capacity
    required = spec.mu_ground * spec.mass * gravity if spec.gravity_affected else 0.0
    if required > limit:
        return ObjectClass.FIXED
    return spec.object_class


def _face_regions(spec: ObjectSpec, depth_factor: float, face_fraction: float) -> List[ManipulationRegion]:
    if isinstance(spec.shape, Disk):
        hw = hd = spec.shape.radius
    else:
        hw, hd = spec.shape.half_width, spec.shape.half_depth
    depth = depth_factor * max(hw, hd)
    faces = [
        ("+x", (hw + depth / 2.0, 0.0), Box(depth / 2.0, face_fraction * hd), (-1.0, 0.0), "-x"),
        ("-x", (-hw - depth / 2.0, 0.0), Box(depth / 2.0, face_fraction * hd), (1.0, 0.0), "+x"),
        ("+y", (0.0, hd + depth / 2.0), Box(face_fraction * hw, depth / 2.0), (0.0, -1.0), "-y"),
        ("-y", (0.0, -hd - depth / 2.0), Box(face_fraction * hw, depth / 2.0), (0.0, 1.0), "+y"),
    ]
    return [
        ManipulationRegion(
            id=f"{spec.id}:{face}",
            owner_object_id=spec.id,
            local_pose=Pose2(x, y, 0.0),
            extent=extent,
            push_direction=push,
            opposite_region_id=f"{spec.id}:{opposite}",
        )
        for face, (x, y), extent, push, opposite in faces
    ]


def manipulatable_region(
    spec: ObjectSpec,
    depth_factor: float = REGION_DEPTH_FACTOR,
    face_fraction: float = REGION_FACE_FRACTION,
) -> List[ManipulationRegion]:
    """
    Manipulation regions of a manipulatable object.

    Declared regions are kept as they are. Otherwise every face gets a region of depth
    ``depth_factor`` times the largest half extent, pushing along the inward face normal.
    A co-mObject keeps the regions whose push direction is parallel to its constraint axis.
    """
    if not spec.object_class.manipulatable:
        raise ContractError(f"object {spec.id!r} is Fixed and owns no manipulation regions")
    regions = list(spec.regions) or _face_regions(spec, depth_factor, face_fraction)
    if spec.object_class is ObjectClass.CONSTRAINED:
        if spec.motion_constraint is None:
            raise ContractError(f"co-mObject {spec.id!r} has no motion constraint")
        ax, ay = spec.motion_constraint
        regions = [
            r for r in regions
            if abs(abs(r.push_direction[0] * ax + r.push_direction[1] * ay) - 1.0) < 1e-9
        ]
    return regions


def object_properties(spec: ObjectSpec) -> ObjectProperties:
    if isinstance(spec.shape, Disk):
        dimensions = (spec.shape.radius,)
    else:
        dimensions = (spec.shape.half_width, spec.shape.half_depth)
    return ObjectProperties(spec.mass, spec.mu_ground, spec.gravity_affected, dimensions)


def robot_properties(model: RobotModel) -> RobotProperties:
    if isinstance(model, PlanarArm):
        return RobotProperties(model.bounds, model.joint_limits)
    if isinstance(model, CarLike):
        return RobotProperties(model.bounds, (), model.max_steer)
    return RobotProperties(model.bounds, ())


# ---------------------------------------------------------------------------
# Manipulation knowledge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectKnowledge:
    spec: ObjectSpec  # resolved class and complete region set
    declared_class: ObjectClass
    properties: ObjectProperties

    @property
    def object_class(self) -> ObjectClass:
        return self.spec.object_class

    @property
    def regions(self) -> Tuple[ManipulationRegion, ...]:
        return self.spec.regions


@dataclass(frozen=True)
class ManipulationKnowledge:
    objects: Tuple[ObjectKnowledge, ...]
    robot: RobotModel
    robot_properties: RobotProperties
    gravity: float = 9.8
    _by_id: Mapping[str, ObjectKnowledge] = field(init=False, repr=False, compare=False)
    _regions: Mapping[str, ManipulationRegion] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", MappingProxyType({o.spec.id: o for o in self.objects}))
        object.__setattr__(
            self,
            "_regions",
            MappingProxyType({r.id: r for o in self.objects for r in o.regions}),
        )

    @property
    def bounds(self) -> DynamicBounds:
        return self.robot_properties.bounds

    @property
    def regions(self) -> Mapping[str, ManipulationRegion]:
        return self._regions

    def object(self, object_id: str) -> ObjectKnowledge:
        return self._by_id[object_id]

    def friction_load(self, object_id: str) -> float:
        """Minimum sustained push force ``mu * m * g`` of an object, in N."""
        props = self._by_id[object_id].properties
        return props.mu_ground * props.mass * self.gravity if props.gravity_affected else 0.0

    def max_friction_load(self) -> float:
        loads = [self.friction_load(o.spec.id) for o in self.objects if o.object_class.manipulatable]
        return max(loads, default=0.0)


def _axis(value: Any, subject: str) -> Vec2:
    if isinstance(value, str):
        try:
            return AXIS_NAMES[value.lower()]
        except KeyError:
            raise KnowledgeInconsistencyError(subject, f"unknown motion axis {value!r}") from None
    return (float(value[0]), float(value[1]))


def _flag(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "yes", "1")
    return bool(value)


def _spec_from_facts(ks: SemanticKnowledge, object_id: str) -> ObjectSpec:
    classes = ks.classes(object_id)
    if len(classes) != 1:
        raise KnowledgeInconsistencyError(
            object_id,
            f"needs exactly one class assertion, found {classes or 'none'}",
        )
    try:
        object_class = ObjectClass(classes[0])
    except ValueError:
        raise KnowledgeInconsistencyError(object_id, f"unknown class {classes[0]!r}") from None
    if ks.value(object_id, "hasShape") == "disk":
        shape = Disk(ks.value(object_id, "hasRadius"))
    else:
        shape = Box(ks.value(object_id, "hasHalfWidth"), ks.value(object_id, "hasHalfDepth"))
    constraint = ks.value(object_id, "canMove")
    try:
        return ObjectSpec(
            id=object_id,
            object_class=object_class,
            shape=shape,
            mass=ks.value(object_id, "hasMass"),
            mu_ground=ks.value(object_id, "hasFriction"),
            gravity_affected=_flag(ks.value(object_id, "hasGravity", 1.0)),
            regions=tuple(ks.declared_regions.get(object_id, ())) if object_class.manipulatable else (),
            motion_constraint=None if constraint is None or object_class is not ObjectClass.CONSTRAINED else _axis(constraint, object_id),
        )
    except (TypeError, ValueError) as e:
        raise KnowledgeInconsistencyError(object_id, str(e)) from e


def infer_manipulation_knowledge(ks: SemanticKnowledge, robot: RobotModel, gravity: float = 9.8) -> ManipulationKnowledge:
    """
    Apply the inference predicates to every object of ``ks``.

    Objects too heavy for the robot are reclassified Fixed and lose their regions; the
    result is fixed for the whole planning query.

    Raises
    ------
    KnowledgeInconsistencyError
        An object has zero or several class assertions or an invalid property.
    """
    props = robot_properties(robot)
    capacity = push_capacity(robot)
    objects = []
    for object_id in ks.object_ids:
        declared = _spec_from_facts(ks, object_id)
        resolved_class = object_classification(declared, props.bounds, gravity, capacity)
        if resolved_class is ObjectClass.FIXED:
            if declared.object_class.manipulatable:
                _logger.info(
                    "%s needs %.2f N to slide, robot capacity %.2f N: treated as Fixed",
                    object_id, declared.mu_ground * declared.mass * gravity, capacity,
                )
            spec = replace(declared, object_class=ObjectClass.FIXED, regions=(), motion_constraint=None)
        else:
            try:
                regions = tuple(manipulatable_region(declared))
            except ContractError as e:
                raise KnowledgeInconsistencyError(object_id, str(e)) from e
            spec = replace(declared, regions=regions)
        objects.append(ObjectKnowledge(spec, declared.object_class, object_properties(spec)))
    return ManipulationKnowledge(tuple(objects), robot, props, gravity)


def build_manipulation_knowledge(scene, gravity: float = 9.8) -> ManipulationKnowledge:
    """K_S generation followed by K_M inference for ``scene``."""
    return infer_manipulation_knowledge(semantic_knowledge_generator(scene), scene.robot, gravity)


def _region_dict(region: ManipulationRegion) -> Dict[str, Any]:
    return {
        "id": region.id,
        "pose": [region.local_pose.x, region.local_pose.y, region.local_pose.heading],
        "extent": [region.extent.half_width, region.extent.half_depth],
        "push_direction": list(region.push_direction),
        "opposite": region.opposite_region_id,
    }


def manipulation_knowledge_to_dict(km: ManipulationKnowledge) -> Dict[str, Any]:
    bounds = km.bounds
    return {
        "robot": {
            "type": type(km.robot).__name__,
            "bounds": {
                key: getattr(bounds, key)
                for key in ("f_min", "f_max", "v_max", "tau_min", "tau_max", "steer_tau_max")
                if getattr(bounds, key) is not None
            },
            "joint_limits": [list(limit) for limit in km.robot_properties.joint_limits],
            "steer_limit": km.robot_properties.steer_limit,
            "push_capacity": push_capacity(km.robot),
        },
        "objects": [
            {
                "id": o.spec.id,
                "declared_class": o.declared_class.value,
                "class": o.object_class.value,
                "mass": o.properties.mass,
                "mu_ground": o.properties.mu_ground,
                "gravity": o.properties.gravity_affected,
                "dimensions": list(o.properties.dimensions),
                "friction_load": km.friction_load(o.spec.id),
                "motion_constraint": list(o.spec.motion_constraint) if o.spec.motion_constraint else None,
                "regions": [_region_dict(r) for r in o.regions],
            }
            for o in km.objects
        ],
    }


# ---------------------------------------------------------------------------
# Instantiated knowledge
# ---------------------------------------------------------------------------


class LocationKind(str, Enum):
    MOVE = "Move"
    INTERACTION = "Interaction"
    CONTACT = "Contact"


@dataclass(frozen=True)
class RobotLocation:
    kind: LocationKind
    object_id: Optional[str] = None
    region_id: Optional[str] = None
    touched: Tuple[str, ...] = ()  # every manipulatable object the robot touches

    @classmethod
    def move(cls) -> "RobotLocation":
        return cls(LocationKind.MOVE)

    def __str__(self) -> str:
        if self.kind is LocationKind.CONTACT:
            return f"Contact({self.object_id}, {self.region_id})"
        return self.kind.value


@dataclass(frozen=True)
class ControlRange:
    """Magnitude range per actuated axis: one entry for a force or drive torque, one per joint."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    unit: str = "N"

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("ControlRange needs matching, non-empty bounds")
        for lo, hi in zip(self.lower, self.upper):
            if not (0.0 <= lo <= hi):
                raise ValueError(f"ControlRange needs 0 <= lower <= upper, got [{lo}, {hi}]")

    @classmethod
    def scalar(cls, lower: float, upper: float, unit: str = "N") -> "ControlRange":
        return cls((lower,), (upper,), unit)

    def scaled(self, factor: float) -> "ControlRange":
        return ControlRange(
            tuple(v * factor for v in self.lower), tuple(v * factor for v in self.upper), self.unit
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": list(self.lower), "upper": list(self.upper), "unit": self.unit}


class RegionState(str, Enum):
    ACTIVE = "Active"
    OCCUPIED_BY_OBSTACLE = "OccupiedByObstacle"
    OPPOSITE_BLOCKED = "OppositeBlocked"
    RETYPED_CONSTRAINT = "RetypedConstraint"


class ObjectSnapshot(NamedTuple):
    object_class: ObjectClass
    mass: float
    mu_ground: float
    constraint_tag: Optional[Vec2]


@dataclass(frozen=True)
class InstantiatedKnowledge:
    """
    Knowledge valid for one planning step.

    ``enforce_regions`` is False for the fixed-range baselines, whose validity check accepts
    any robot contact with a manipulatable object.
    """

    active_region_ids: FrozenSet[str]
    control_range: ControlRange
    location: RobotLocation
    objects: Mapping[str, ObjectSnapshot] = field(default_factory=dict)
    region_status: Mapping[str, RegionState] = field(default_factory=dict)
    push_direction: Optional[Vec2] = None  # world frame, set at Contact
    enforce_regions: bool = True

    def tags(self) -> Dict[str, Optional[Vec2]]:
        return {object_id: snap.constraint_tag for object_id, snap in self.objects.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "location": str(self.location),
            "active_regions": sorted(self.active_region_ids),
            "control_range": self.control_range.to_dict(),
            "region_status": {k: v.value for k, v in sorted(self.region_status.items())},
            "classes": {k: v.object_class.value for k, v in sorted(self.objects.items())},
            "push_direction": list(self.push_direction) if self.push_direction else None,
            "enforce_regions": self.enforce_regions,
        }
