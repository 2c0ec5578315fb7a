import pytest

from kpmp.knowledge import (
    ControlRange,
    Fact,
    KnowledgeInconsistencyError,
    arm_force_capacity,
    build_manipulation_knowledge,
    infer_manipulation_knowledge,
    manipulatable_region,
    manipulation_knowledge_to_dict,
    object_classification,
    object_properties,
    robot_properties,
    semantic_knowledge_generator,
)
from kpmp.scene import load_scene
from kpmp.world import Box, ContractError, DynamicBounds, ObjectClass, ObjectSpec

from .helper import ARM_SCENE, CAR_SCENE, HOLONOMIC_SCENE, cube, make_scene, two_link_arm


def test_data_facts_need_units():
    with pytest.raises(KnowledgeInconsistencyError, match="hasMass"):
        Fact("cube", "hasMass", 1.0)
    with pytest.raises(KnowledgeInconsistencyError):
        Fact("cube", "hasMass", 1.0, "lb")
    assert Fact("cube", "hasMass", 250.0, "g").quantity == pytest.approx(0.25)
    assert Fact("cube", "hasHalfWidth", 5.0, "cm").quantity == pytest.approx(0.05)
    assert Fact("robot", "hasForceBounds", [1, 12], "N").quantity == (1.0, 12.0)
    assert Fact("cube", "isA", "free").unit is None


def test_semantic_knowledge_of_a_scene():
    ks = semantic_knowledge_generator(load_scene(HOLONOMIC_SCENE))
    assert ks.classes("blue_cube") == ["FreeManipulatable"]
    assert ks.classes("south_wall") == ["Fixed"]
    assert ks.value("purple_cube", "hasMass") == 4.0
    assert ks.value("robot", "hasForceBounds") == (1.0, 12.0)
    assert "arena_east" in ks.object_ids


def test_extra_facts_override_values():
    scene = load_scene(HOLONOMIC_SCENE)
    ks = semantic_knowledge_generator(scene, [{"subject": "blue_cube", "predicate": "hasMass", "value": 500, "unit": "g"}])
    assert ks.value("blue_cube", "hasMass") == pytest.approx(0.5)
    assert len([f for f in ks.about("blue_cube") if f.predicate == "hasMass"]) == 1


def test_second_class_assertion_is_inconsistent():
    scene = load_scene(HOLONOMIC_SCENE)
    ks = semantic_knowledge_generator(scene, [{"subject": "blue_cube", "predicate": "isA", "value": "fixed"}])
    with pytest.raises(KnowledgeInconsistencyError) as info:
        infer_manipulation_knowledge(ks, scene.robot)
    assert info.value.subject == "blue_cube"


def test_unknown_motion_axis_is_inconsistent():
    scene = load_scene(CAR_SCENE)
    ks = semantic_knowledge_generator(scene, [{"subject": "toy_car", "predicate": "canMove", "value": "sideways"}])
    with pytest.raises(KnowledgeInconsistencyError, match="sideways"):
        infer_manipulation_knowledge(ks, scene.robot)


def test_object_classification():
    bounds = DynamicBounds(1.0, 10.0, 1.0)
    assert object_classification(cube("light", mass=1.0, mu=0.5), bounds) is ObjectClass.FREE
    assert object_classification(cube("heavy", mass=5.0, mu=0.5), bounds) is ObjectClass.FIXED
    assert object_classification(cube("heavy", mass=5.0, mu=0.5), bounds, capacity=30.0) is ObjectClass.FREE
    floating = ObjectSpec("f", ObjectClass.FREE, Box(0.1, 0.1), 50.0, 0.5, gravity_affected=False)
    assert object_classification(floating, bounds) is ObjectClass.FREE


def test_face_regions():
    regions = {r.id: r for r in manipulatable_region(cube("c", half=0.1))}
    assert sorted(regions) == ["c:+x", "c:+y", "c:-x", "c:-y"]
    plus_x = regions["c:+x"]
    assert plus_x.local_pose.position == pytest.approx((0.1125, 0.0))
    assert plus_x.extent.half_width == pytest.approx(0.0125)
    assert plus_x.extent.half_depth == pytest.approx(0.08)
    assert plus_x.push_direction == (-1.0, 0.0)
    assert plus_x.opposite_region_id == "c:-x"
    assert regions["c:-y"].push_direction == (0.0, 1.0)
    assert regions["c:-y"].opposite_region_id == "c:+y"


def test_constrained_object_keeps_axis_regions():
    toy = cube("toy", object_class=ObjectClass.CONSTRAINED, axis=(0.0, 1.0))
    assert sorted(r.id for r in manipulatable_region(toy)) == ["toy:+y", "toy:-y"]
    with pytest.raises(ContractError):
        manipulatable_region(ObjectSpec("w", ObjectClass.FIXED, Box(0.1, 0.1), 1.0, 0.5))


def test_holonomic_manipulation_knowledge():
    km = build_manipulation_knowledge(load_scene(HOLONOMIC_SCENE))
    purple = km.object("purple_cube")
    assert purple.object_class is ObjectClass.FREE
    assert km.friction_load("purple_cube") == pytest.approx(11.76)
    assert km.max_friction_load() == pytest.approx(11.76)
    assert len(purple.regions) == 4
    assert km.object("south_wall").regions == ()
    assert "blue_cube:+x" in km.regions


def test_too_heavy_object_becomes_fixed():
    km = build_manipulation_knowledge(load_scene(ARM_SCENE))
    blue = km.object("blue_cube")
    assert blue.declared_class is ObjectClass.FREE
    assert blue.object_class is ObjectClass.FIXED
    assert blue.regions == ()
    assert km.object("red_cube").object_class is ObjectClass.FREE
    assert "blue_cube:+x" not in km.regions


def test_car_constrained_object():
    km = build_manipulation_knowledge(load_scene(CAR_SCENE))
    toy = km.object("toy_car")
    assert toy.object_class is ObjectClass.CONSTRAINED
    assert toy.spec.motion_constraint == (1.0, 0.0)
    assert sorted(r.id for r in toy.regions) == ["toy_car:+x", "toy_car:-x"]


def test_arm_force_capacity():
    # stretched along x: the worst direction is across the chain
    assert arm_force_capacity(two_link_arm(tau=(0.1, 5.0), f=(0.5, 10.0))) == pytest.approx(2.5, rel=1e-3)
    assert arm_force_capacity(two_link_arm(tau=(0.1, 5.0), f=(0.5, 2.0))) == 2.0


def test_knowledge_dump_is_serializable():
    km = build_manipulation_knowledge(make_scene([(cube("c"), (0.5, 0.0))]))
    payload = manipulation_knowledge_to_dict(km)
    assert payload["robot"]["type"] == "HolonomicDisk"
    assert payload["robot"]["push_capacity"] == 10.0
    (entry,) = payload["objects"]
    assert entry["class"] == "FreeManipulatable"
    assert entry["friction_load"] == pytest.approx(4.9)
    assert len(entry["regions"]) == 4


def test_control_range_validation():
    assert ControlRange.scalar(1.0, 2.0).scaled(0.5) == ControlRange((0.5,), (1.0,))
    with pytest.raises(ValueError):
        ControlRange((2.0,), (1.0,))
    with pytest.raises(ValueError):
        ControlRange((), ())


def test_object_and_robot_properties():
    props = object_properties(cube("c", half=0.05, mass=2.0, mu=0.3))
    assert (props.mass, props.mu_ground, props.gravity_affected) == (2.0, 0.3, True)
    assert props.dimensions == (0.05, 0.05)
    arm = robot_properties(two_link_arm())
    assert arm.joint_limits == ((-3.0, 3.0), (-3.0, 3.0))
    assert arm.bounds.tau_max == 5.0
    car = robot_properties(load_scene(CAR_SCENE).robot)
    assert car.joint_limits == () and car.steer_limit > 0.0
