import math

import numpy as np
import pytest

from kpmp.constants import CONTACT_TOLERANCE
from kpmp.physics import (
    CarControl,
    ContactConstraint,
    DiskRobotBody,
    JointTorques,
    ObjectBody,
    PlanarForce,
    SimConfig,
    StatePropagator,
    arm_joint_inertia,
    arm_substep,
    car_substep,
    ground_friction_force,
    propagate,
    resolve_contacts,
)
from kpmp.world import (
    ArmState,
    Box,
    CarLike,
    CarState,
    ContractError,
    Disk,
    DiskState,
    DynamicBounds,
    ObjectClass,
    ObjectState,
    PlanarArm,
    Pose2,
    contact_between,
)

from .helper import cube, disk_robot, make_scene, two_link_arm, wall


def small_car() -> CarLike:
    return CarLike(Box(0.2, 0.1), 0.05, 2.0, 0.8, 0.6, DynamicBounds(0.5, 10.0, 1.0, steer_tau_max=0.5))


def test_sim_config_validation():
    assert SimConfig().substeps == 50
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, control_duration=0.05)
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(gravity=0.0)


def test_ground_friction_force():
    cfg = SimConfig(gravity=9.8)
    assert ground_friction_force(1.0, 0.2, (1.0, 0.0), (0.0, 0.0), cfg) == pytest.approx((-1.96, 0.0))
    assert ground_friction_force(1.0, 0.2, (0.0, 0.0), (0.5, 0.0), cfg) == pytest.approx((-0.5, 0.0))
    assert ground_friction_force(1.0, 0.2, (0.0, 0.0), (3.0, 0.0), cfg) == pytest.approx((-1.96, 0.0))
    with pytest.raises(ContractError):
        ground_friction_force(1.0, -0.1, (0.0, 0.0), (0.0, 0.0), cfg)


def test_frictionless_disk_follows_newton():
    scene = make_scene([], robot=disk_robot(mu=0.0, v_max=10.0))
    q, log = propagate(scene, scene.initial_state, PlanarForce(2.0, 0.0), steps=20)
    # semi-implicit Euler: x = a dt^2 n (n + 1) / 2
    assert q.robot_state.x == pytest.approx(1.001)
    assert abs(q.robot_state.x - 1.0) / 1.0 < 0.01
    assert q.robot_state.vx == pytest.approx(2.0)
    assert q.time == pytest.approx(1.0)
    assert len(log) == 1000


def test_ballistic_error_halves_with_dt():
    scene = make_scene([], robot=disk_robot(mu=0.0, v_max=10.0))
    errors = []
    for dt in (1e-3, 5e-4):
        q, _ = propagate(scene, scene.initial_state, PlanarForce(1.0, 0.0), steps=20, cfg=SimConfig(dt=dt))
        errors.append(abs(q.robot_state.x - 0.5))
    assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.02)
    assert errors[0] < 0.01 * 0.5


def test_zero_control_keeps_state_at_rest():
    scene = make_scene([(cube("c"), (0.5, 0.0)), (wall("w", 0.1, 0.3), (-0.5, 0.0))])
    q, _ = propagate(scene, scene.initial_state, PlanarForce(0.0, 0.0), steps=4)
    assert q.robot_state == scene.initial_state.robot_state
    assert q.object_states == scene.initial_state.object_states
    assert q.time == pytest.approx(0.2)

    arm_scene = make_scene([], robot=two_link_arm(), robot_state=ArmState((0.3, -0.4)))
    q, _ = propagate(arm_scene, arm_scene.initial_state, JointTorques((0.0, 0.0)), steps=4)
    assert q.robot_state == arm_scene.initial_state.robot_state


def test_coulomb_stop_time():
    cfg = SimConfig(dt=1e-3, control_duration=1e-3)
    robot = disk_robot(mu=0.2, v_max=2.0)
    scene = make_scene([], robot=robot, robot_state=DiskState(0.0, 0.0, 1.0, 0.0))
    propagator = StatePropagator(scene.objects, robot, cfg)
    q = scene.initial_state
    for _ in range(2000):
        q, _ = propagator.propagate(q, PlanarForce(0.0, 0.0))
        if q.robot_state.vx == 0.0:
            break
    assert q.robot_state.vx == 0.0
    assert abs(q.time - 1.0 / (0.2 * 9.8)) <= 2 * cfg.dt


def test_sub_threshold_force_does_not_move_robot():
    rng = np.random.default_rng(3)
    for _ in range(100):
        mass, mu = rng.uniform(0.5, 5.0), rng.uniform(0.05, 0.8)
        magnitude = rng.uniform(0.0, 0.95) * mu * mass * 9.8
        angle = rng.uniform(-math.pi, math.pi)
        robot = disk_robot(mass=mass, mu=mu, f_min=0.0)
        scene = make_scene([], robot=robot)
        q, _ = propagate(scene, scene.initial_state, PlanarForce(magnitude * math.cos(angle), magnitude * math.sin(angle)), steps=20)
        assert q.time == pytest.approx(1.0)
        assert (q.robot_state.x, q.robot_state.y) == (0.0, 0.0)


def test_heavy_cube_resists_push():
    scene = make_scene([(cube("heavy", mass=5.0, mu=0.5), (0.2, 0.0))])
    q, log = propagate(scene, scene.initial_state, PlanarForce(10.0, 0.0), steps=4)
    pose = q.object_states["heavy"].pose
    assert abs(pose.x - 0.2) < 1e-9
    assert abs(pose.y) < 1e-9
    assert log.robot_contacts()


def test_light_cube_is_pushed():
    scene = make_scene([(cube("light", mass=1.0, mu=0.3), (0.2, 0.0))])
    q, log = propagate(scene, scene.initial_state, PlanarForce(8.0, 0.0), steps=10)
    assert q.object_states["light"].pose.x > 0.21
    assert q.robot_state.x > 0.01
    events = log.robot_contacts()
    assert events and all(event.object_id == "light" for event in events)
    assert events[0].normal == pytest.approx((1.0, 0.0), abs=1e-6)


def test_constrained_object_moves_along_axis_only():
    toy = cube("toy", mu=0.3, object_class=ObjectClass.CONSTRAINED, axis=(1.0, 0.0))
    scene = make_scene([(toy, (0.2, 0.0))], robot_state=DiskState(0.0, -0.05))
    q, _ = propagate(scene, scene.initial_state, PlanarForce(6.0, 3.0), steps=6)
    state = q.object_states["toy"]
    assert state.pose.y == 0.0
    assert state.pose.heading == 0.0
    assert state.linear_velocity[1] == 0.0
    assert state.constraint_tag == (1.0, 0.0)


def test_fixed_wall_never_moves():
    scene = make_scene([(wall("w", 0.1, 0.5), (0.2, 0.0))], robot=disk_robot(f_max=12.0))
    q, log = propagate(scene, scene.initial_state, PlanarForce(12.0, 0.0), steps=20)
    assert q.object_states["w"].pose.position == (0.2, 0.0)
    assert q.robot_state.x < 0.01
    assert log.robot_contacts()


def test_propagation_is_deterministic_and_keeps_tags():
    toy = cube("toy", mu=0.3, object_class=ObjectClass.CONSTRAINED, axis=(0.0, 1.0))
    scene = make_scene([(cube("c"), (0.2, 0.0)), (toy, (0.5, 0.5))])
    first, first_log = propagate(scene, scene.initial_state, PlanarForce(9.0, 1.0), steps=3)
    second, second_log = propagate(scene, scene.initial_state, PlanarForce(9.0, 1.0), steps=3)
    assert first == second
    assert first_log.to_dict() == second_log.to_dict()
    assert first.object_states["toy"].constraint_tag == (0.0, 1.0)
    assert first.object_states["c"].constraint_tag is None
    assert first.time == pytest.approx(0.15)


def test_propagate_rejects_bad_input():
    scene = make_scene([])
    with pytest.raises(ContractError):
        propagate(scene, scene.initial_state, PlanarForce(1.0, 0.0), steps=0)
    with pytest.raises(ContractError):
        propagate(scene, scene.initial_state, JointTorques((1.0, 1.0)))
    with pytest.raises(ContractError):
        propagate(scene, scene.initial_state, PlanarForce(math.nan, 0.0))


def test_arm_joint_inertia():
    assert arm_joint_inertia(two_link_arm()) == pytest.approx((2.5, 0.25))


def test_arm_joint_stop():
    arm = two_link_arm()
    state = arm_substep(arm, ArmState((2.999, 0.0), (5.0, 0.0)), JointTorques((0.0, 0.0)), SimConfig())
    assert state.angles[0] == 3.0
    assert state.rates[0] == 0.0
    with pytest.raises(ContractError):
        arm_substep(arm, ArmState((0.0, 0.0)), JointTorques((1.0,)), SimConfig())


def test_single_link_reaches_unit_rate():
    # point mass at the midpoint of a 2 m link: I = 1 kg m^2
    link = PlanarArm((2.0,), (1.0,), ((-3.0, 3.0),), DynamicBounds(0.5, 10.0, 2.0, tau_min=0.1, tau_max=5.0))
    assert arm_joint_inertia(link) == pytest.approx((1.0,))
    cfg = SimConfig(joint_damping=0.0)
    state = ArmState((0.0,))
    for _ in range(1000):
        state = arm_substep(link, state, JointTorques((1.0,)), cfg)
    assert state.rates[0] == pytest.approx(1.0, rel=0.01)
    assert state.angles[0] == pytest.approx(0.5, rel=0.01)


def test_arm_torque_spins_joint():
    arm = two_link_arm()
    scene = make_scene([], robot=arm)
    q, log = propagate(scene, scene.initial_state, JointTorques((1.0, 0.0)), steps=2)
    assert q.robot_state.angles[0] > 0.0
    assert len(log.torques) == len(log.rates) == 100
    assert log.torques[0] == (1.0, 0.0)


def test_car_drive_speed_matches_closed_form():
    car = small_car()
    scene = make_scene([], robot=car, robot_state=CarState(0.0, 0.0, 0.0))
    torque = 0.05
    q, _ = propagate(scene, scene.initial_state, CarControl(torque, 0.0), steps=20)
    expected = torque / (car.wheel_radius * car.mass) * 1.0
    assert q.robot_state.speed == pytest.approx(expected, rel=0.01)
    assert q.robot_state.y == 0.0
    assert q.robot_state.heading == 0.0


def test_car_steering_at_rest_keeps_pose():
    car = small_car()
    scene = make_scene([], robot=car, robot_state=CarState(0.3, -0.2, 0.7))
    q, _ = propagate(scene, scene.initial_state, CarControl(0.0, 0.3), steps=10)
    state = q.robot_state
    assert (state.x, state.y, state.heading) == (0.3, -0.2, 0.7)
    assert state.speed == 0.0
    assert state.steer > 0.0


def test_car_traction_and_steering_limits():
    car = small_car()
    cfg = SimConfig()
    state = car_substep(car, CarState(0.0, 0.0, 0.0), CarControl(10.0, 0.0), cfg)
    traction = 0.8 * 2.0 * 9.8
    assert state.speed == pytest.approx(traction / 2.0 * cfg.dt)
    assert state.x == pytest.approx(state.speed * cfg.dt)
    saturated = car_substep(car, CarState(0.0, 0.0, 0.0, steer=0.6), CarControl(0.0, 0.5), cfg)
    assert saturated.steer == 0.6
    assert saturated.steer_rate == 0.0
    with pytest.raises(ContractError):
        car_substep(car, CarState(0.0, 0.0, 0.0, steer=0.7), CarControl(0.0, 0.0), cfg)


def test_car_turns_with_steering():
    car = small_car()
    scene = make_scene([], robot=car, robot_state=CarState(0.0, 0.0, 0.0))
    q, log = propagate(scene, scene.initial_state, CarControl(0.3, 0.2), steps=10)
    assert q.robot_state.x > 0.0
    assert q.robot_state.heading > 0.0
    assert log.torques[0] == (0.3, 0.2)


def test_head_on_contact_is_inelastic():
    cfg = SimConfig()
    a = ObjectBody(cube("a"), ObjectState(Pose2(0.0, 0.0), (1.0, 0.0)))
    b = ObjectBody(cube("b"), ObjectState(Pose2(0.2, 0.0)))
    contact = contact_between(a.shape, a.pose(), b.shape, b.pose(), CONTACT_TOLERANCE)
    assert contact.normal == pytest.approx((1.0, 0.0))
    constraint = ContactConstraint(a, 0, b, 0, contact, cfg)
    (impulse,) = resolve_contacts([constraint], cfg)
    assert impulse > 0.0
    assert a.vx + b.vx == pytest.approx(1.0)
    va = a.velocity_at(constraint.px, constraint.py)
    vb = b.velocity_at(constraint.px, constraint.py)
    assert vb[0] - va[0] == pytest.approx(0.0, abs=1e-6)
    assert b.vx > 0.0


def test_resting_touch_has_zero_impulse():
    cfg = SimConfig()
    robot = DiskRobotBody(disk_robot(), DiskState(0.0, 0.0))
    box = ObjectBody(cube("c"), ObjectState(Pose2(0.2, 0.0)))
    contact = contact_between(Disk(0.1), Pose2(0.0, 0.0), box.shape, box.pose(), CONTACT_TOLERANCE)
    assert contact is not None
    constraint = ContactConstraint(robot, 0, box, 0, contact, cfg)
    assert resolve_contacts([constraint], cfg, [box]) == [0.0]
    assert (robot.vx, robot.vy) == (0.0, 0.0)
    assert (box.vx, box.vy, box.w) == (0.0, 0.0, 0.0)
