"""
Scene files: JSON documents describing the objects, the robot with its bounds, the initial
state, the goal region and optional extra semantic facts. The schema lives in
``assets/SCENE_FORMAT.md``; unknown keys are rejected.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .constants import CLASS_NAMES
from .utils import canonical_hash, read_json, write_json
from .world import (
    ArmState,
    Box,
    CarLike,
    CarState,
    ContractError,
    Disk,
    DiskState,
    DynamicBounds,
    HolonomicDisk,
    ManipulationRegion,
    ObjectClass,
    ObjectSpec,
    ObjectState,
    PlanarArm,
    Pose2,
    RobotModel,
    WorkspaceState,
    overlap,
    robot_footprint,
)

_logger = logging.getLogger(__name__)

ARENA_WALL_THICKNESS = 0.05


class SceneError(ValueError):
    """A scene file is malformed or describes an invalid world."""


# ---------------------------------------------------------------------------
# File schema
# ---------------------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoseModel(_Strict):
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0


class DiskModel(_Strict):
    type: Literal["disk"]
    radius: float


class BoxModel(_Strict):
    type: Literal["box"] = "box"
    half_width: float
    half_depth: float


ShapeModel = Union[DiskModel, BoxModel]


class RegionModel(_Strict):
    id: str
    pose: PoseModel
    extent: BoxModel
    push_direction: Tuple[float, float]
    opposite: Optional[str] = None


class ObjectModel(_Strict):
    id: str
    class_: str = Field(alias="class")
    shape: ShapeModel = Field(discriminator="type")
    mass: float
    mu_ground: float
    gravity: bool = True
    pose: PoseModel
    constraint_axis: Optional[Tuple[float, float]] = None
    regions: Optional[List[RegionModel]] = None


class BoundsModel(_Strict):
    f_min: float
    f_max: float
    v_max: float
    tau_min: Optional[float] = None
    tau_max: Optional[float] = None
    steer_tau_max: Optional[float] = None


class DiskRobotModel(_Strict):
    type: Literal["holonomic_disk"]
    radius: float
    mass: float
    mu_ground: float
    bounds: BoundsModel
    start: PoseModel


class CarRobotModel(_Strict):
    type: Literal["car"]
    chassis: BoxModel
    wheel_radius: float
    mass: float
    mu_wheel: float
    max_steer: float
    bounds: BoundsModel
    start: PoseModel


class ArmStartModel(_Strict):
    angles: List[float]


class ArmRobotModel(_Strict):
    type: Literal["planar_arm"]
    link_lengths: List[float]
    link_masses: List[float]
    joint_limits: List[Tuple[float, float]]
    link_thickness: float = 0.04
    base: PoseModel = Field(default_factory=PoseModel)
    bounds: BoundsModel
    start: ArmStartModel


class GoalModel(_Strict):
    center: List[float]
    radius: float


class WorkspaceBoundsModel(_Strict):
    x: Tuple[float, float]
    y: Tuple[float, float]


class FactModel(_Strict):
    subject: str
    predicate: str
    value: Union[float, str, List[float]]
    unit: Optional[str] = None


class SceneModel(_Strict):
    name: str
    bounds: WorkspaceBoundsModel
    arena_walls: bool = False
    robot: Union[DiskRobotModel, CarRobotModel, ArmRobotModel] = Field(discriminator="type")
    objects: List[ObjectModel] = Field(default_factory=list)
    goal: GoalModel
    knowledge: List[FactModel] = Field(default_factory=list)
    knowledge_file: Optional[str] = None


class KnowledgeFileModel(_Strict):
    knowledge: List[FactModel]


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Goal:
    """Ball of ``radius`` around ``center`` in the robot configuration projection."""

    center: Tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Scene:
    name: str
    objects: Tuple[ObjectSpec, ...]
    robot: RobotModel
    initial_state: WorkspaceState
    goal: Goal
    bounds: Tuple[Tuple[float, float], Tuple[float, float]]
    knowledge: Tuple[Dict[str, Any], ...] = ()
    source: Optional[Path] = field(default=None, compare=False)

    @property
    def object_map(self) -> Dict[str, ObjectSpec]:
        return {spec.id: spec for spec in self.objects}

    @property
    def extent(self) -> Tuple[float, float]:
        (x_lo, x_hi), (y_lo, y_hi) = self.bounds
        return (x_hi - x_lo, y_hi - y_lo)


def _resolve_class(name: str, object_id: str) -> ObjectClass:
    try:
        return ObjectClass(CLASS_NAMES[name.lower()])
    except KeyError:
        raise SceneError(f"object {object_id!r}: unknown class {name!r}") from None


def _pose(model: PoseModel) -> Pose2:
    return Pose2(model.x, model.y, model.heading)


def _bounds(model: BoundsModel, owner: str) -> DynamicBounds:
    try:
        return DynamicBounds(**model.model_dump())
    except ValueError as e:
        raise SceneError(f"{owner}: {e}") from e


def _build_robot(model) -> Tuple[RobotModel, Any]:
    bounds = _bounds(model.bounds, f"robot {model.type}")
    try:
        if model.type == "holonomic_disk":
            robot = HolonomicDisk(model.radius, model.mass, model.mu_ground, bounds)
            return robot, DiskState(model.start.x, model.start.y)
        if model.type == "car":
            robot = CarLike(
                Box(model.chassis.half_width, model.chassis.half_depth),
                model.wheel_radius,
                model.mass,
                model.mu_wheel,
                model.max_steer,
                bounds,
            )
            return robot, CarState(model.start.x, model.start.y, model.start.heading)
        robot = PlanarArm(
            tuple(model.link_lengths),
            tuple(model.link_masses),
            tuple(tuple(limit) for limit in model.joint_limits),
            bounds,
            base=_pose(model.base),
            link_thickness=model.link_thickness,
        )
        return robot, ArmState(tuple(model.start.angles))
    except ValueError as e:
        raise SceneError(f"robot {model.type}: {e}") from e


def _build_object(model: ObjectModel) -> Tuple[ObjectSpec, ObjectState]:
    object_class = _resolve_class(model.class_, model.id)
    try:
        if isinstance(model.shape, DiskModel):
            shape = Disk(model.shape.radius)
        else:
            shape = Box(model.shape.half_width, model.shape.half_depth)
        regions = tuple(
            ManipulationRegion(
                id=region.id,
                owner_object_id=model.id,
                local_pose=_pose(region.pose),
                extent=Box(region.extent.half_width, region.extent.half_depth),
                push_direction=region.push_direction,
                opposite_region_id=region.opposite,
            )
            for region in (model.regions or [])
        )
        spec = ObjectSpec(
            id=model.id,
            object_class=object_class,
            shape=shape,
            mass=model.mass,
            mu_ground=model.mu_ground,
            gravity_affected=model.gravity,
            regions=regions,
            motion_constraint=model.constraint_axis,
        )
    except ValueError as e:
        raise SceneError(f"object {model.id!r}: {e}") from e
    return spec, ObjectState(_pose(model.pose), constraint_tag=spec.motion_constraint)


def arena_walls(bounds: Tuple[Tuple[float, float], Tuple[float, float]]) -> List[Tuple[ObjectSpec, ObjectState]]:
    """Four Fixed walls enclosing ``bounds`` from the outside."""
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    t = ARENA_WALL_THICKNESS
    half_w, half_h = (x_hi - x_lo) / 2.0 + 2 * t, (y_hi - y_lo) / 2.0
    cx, cy = (x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0
    walls = {
        "arena_south": (Box(half_w, t), Pose2(cx, y_lo - t)),
        "arena_north": (Box(half_w, t), Pose2(cx, y_hi + t)),
        "arena_west": (Box(t, half_h), Pose2(x_lo - t, cy)),
        "arena_east": (Box(t, half_h), Pose2(x_hi + t, cy)),
    }
    return [
        (ObjectSpec(name, ObjectClass.FIXED, shape, mass=1000.0, mu_ground=1.0), ObjectState(pose))
        for name, (shape, pose) in walls.items()
    ]


def _validate_placement(scene: Scene) -> None:
    footprint = robot_footprint(scene.robot, scene.initial_state.robot_state)
    for spec in scene.objects:
        if spec.object_class is not ObjectClass.FIXED:
            continue
        pose = scene.initial_state.object_states[spec.id].pose
        for shape, robot_pose in footprint:
            if overlap(shape, robot_pose, spec.shape, pose):
                raise SceneError(
                    f"object {spec.id!r}: Fixed object overlaps the robot's initial placement"
                )
    expected = 2 if not isinstance(scene.robot, PlanarArm) else scene.robot.dof
    if len(scene.goal.center) != expected:
        raise SceneError(
            f"goal: center has {len(scene.goal.center)} coordinates, robot projection has {expected}"
        )
    if not scene.goal.radius > 0:
        raise SceneError(f"goal: radius must be > 0, got {scene.goal.radius}")


def scene_from_dict(payload: Dict[str, Any], base_dir: Optional[Path] = None) -> Scene:
    try:
        model = SceneModel.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise SceneError(f"scene schema violation at {location}: {first['msg']}") from e

    facts = [fact.model_dump(exclude_none=True) for fact in model.knowledge]
    if model.knowledge_file is not None:
        path = Path(model.knowledge_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            extra = KnowledgeFileModel.model_validate(read_json(path))
        except (OSError, ValueError) as e:
            raise SceneError(f"knowledge_file {str(path)!r}: {e}") from e
        facts.extend(fact.model_dump(exclude_none=True) for fact in extra.knowledge)

    robot, robot_state = _build_robot(model.robot)
    built = [_build_object(obj) for obj in model.objects]
    bounds = (tuple(model.bounds.x), tuple(model.bounds.y))
    if model.arena_walls:
        built.extend(arena_walls(bounds))

    seen = set()
    for spec, _ in built:
        if spec.id in seen:
            raise SceneError(f"object {spec.id!r}: duplicate id")
        seen.add(spec.id)

    scene = Scene(
        name=model.name,
        objects=tuple(spec for spec, _ in built),
        robot=robot,
        initial_state=WorkspaceState({spec.id: state for spec, state in built}, robot_state, 0.0),
        goal=Goal(tuple(model.goal.center), model.goal.radius),
        bounds=bounds,
        knowledge=tuple(facts),
    )
    try:
        _validate_placement(scene)
    except ContractError as e:
        raise SceneError(f"robot start: {e}") from e
    return scene


def load_scene(path: Union[str, Path]) -> Scene:
    """
    Load and validate a scene file.

    Parameters
    ----------
    path: str | Path
        Path to the JSON scene file.

    Returns
    -------
    Scene
        Object specs, robot model, initial workspace state and goal region.
    """
    path = Path(path)
    try:
        payload = read_json(path)
    except OSError as e:
        raise SceneError(f"cannot read scene {str(path)!r}: {e}") from e
    except ValueError as e:
        raise SceneError(f"malformed scene {str(path)!r}: {e}") from e
    scene = scene_from_dict(payload, base_dir=path.parent)
    _logger.debug("loaded scene %s with %d objects", scene.name, len(scene.objects))
    return Scene(
        scene.name,
        scene.objects,
        scene.robot,
        scene.initial_state,
        scene.goal,
        scene.bounds,
        scene.knowledge,
        source=path,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _pose_dict(pose: Pose2) -> Dict[str, float]:
    return {"x": pose.x, "y": pose.y, "heading": pose.heading}


def _bounds_dict(bounds: DynamicBounds) -> Dict[str, float]:
    payload = {"f_min": bounds.f_min, "f_max": bounds.f_max, "v_max": bounds.v_max}
    for key in ("tau_min", "tau_max", "steer_tau_max"):
        if getattr(bounds, key) is not None:
            payload[key] = getattr(bounds, key)
    return payload


def _robot_dict(robot: RobotModel, state) -> Dict[str, Any]:
    if isinstance(robot, HolonomicDisk):
        return {
            "type": "holonomic_disk",
            "radius": robot.radius,
            "mass": robot.mass,
            "mu_ground": robot.mu_ground,
            "bounds": _bounds_dict(robot.bounds),
            "start": {"x": state.x, "y": state.y, "heading": 0.0},
        }
    if isinstance(robot, CarLike):
        return {
            "type": "car",
            "chassis": {"type": "box", "half_width": robot.chassis.half_width, "half_depth": robot.chassis.half_depth},
            "wheel_radius": robot.wheel_radius,
            "mass": robot.mass,
            "mu_wheel": robot.mu_wheel,
            "max_steer": robot.max_steer,
            "bounds": _bounds_dict(robot.bounds),
            "start": {"x": state.x, "y": state.y, "heading": state.heading},
        }
    return {
        "type": "planar_arm",
        "link_lengths": list(robot.link_lengths),
        "link_masses": list(robot.link_masses),
        "joint_limits": [list(limit) for limit in robot.joint_limits],
        "link_thickness": robot.link_thickness,
        "base": _pose_dict(robot.base),
        "bounds": _bounds_dict(robot.bounds),
        "start": {"angles": list(state.angles)},
    }


def _object_dict(spec: ObjectSpec, state: ObjectState) -> Dict[str, Any]:
    if isinstance(spec.shape, Disk):
        shape = {"type": "disk", "radius": spec.shape.radius}
    else:
        shape = {"type": "box", "half_width": spec.shape.half_width, "half_depth": spec.shape.half_depth}
    payload = {
        "id": spec.id,
        "class": spec.object_class.value,
        "shape": shape,
        "mass": spec.mass,
        "mu_ground": spec.mu_ground,
        "gravity": spec.gravity_affected,
        "pose": _pose_dict(state.pose),
    }
    if spec.motion_constraint is not None:
        payload["constraint_axis"] = list(spec.motion_constraint)
    if spec.regions:
        payload["regions"] = [
            {
                "id": region.id,
                "pose": _pose_dict(region.local_pose),
                "extent": {"type": "box", "half_width": region.extent.half_width, "half_depth": region.extent.half_depth},
                "push_direction": list(region.push_direction),
                "opposite": region.opposite_region_id,
            }
            for region in spec.regions
        ]
    return payload


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    """Serializable form of ``scene``; generated arena walls are written out explicitly."""
    (x_lo, x_hi), (y_lo, y_hi) = scene.bounds
    return {
        "name": scene.name,
        "bounds": {"x": [x_lo, x_hi], "y": [y_lo, y_hi]},
        "robot": _robot_dict(scene.robot, scene.initial_state.robot_state),
        "objects": [
            _object_dict(spec, scene.initial_state.object_states[spec.id]) for spec in scene.objects
        ],
        "goal": {"center": list(scene.goal.center), "radius": scene.goal.radius},
        "knowledge": [dict(fact) for fact in scene.knowledge],
    }


def dump_scene(scene: Scene, path: Union[str, Path]) -> None:
    write_json(path, scene_to_dict(scene))


def scene_hash(scene: Scene) -> str:
    return canonical_hash(scene_to_dict(scene))
