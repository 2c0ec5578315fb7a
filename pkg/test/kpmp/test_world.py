import math

import numpy as np
import pytest

from kpmp.utils import angle_difference, wrap_angle
from kpmp.world import (
    ArmState,
    Box,
    ContractError,
    Disk,
    ManipulationRegion,
    ObjectClass,
    ObjectSpec,
    ObjectState,
    Pose2,
    arm_jacobian,
    arm_joint_positions,
    contact_between,
    overlap,
    point_in_shape,
    region_world_polygon,
    robot_footprint,
    shape_aabb,
    shape_polygon,
    tool_point,
)

from .helper import two_link_arm


def test_wrap_angle():
    assert wrap_angle(0.5) == 0.5
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert angle_difference(math.pi - 0.1, -math.pi + 0.1) == pytest.approx(-0.2)


def test_pose_compose_and_inverse():
    a = Pose2(1.0, 2.0, math.pi / 2)
    b = Pose2(0.5, 0.0, 0.25)
    ab = a.compose(b)
    assert ab.position == pytest.approx((1.0, 2.5))
    assert ab.heading == pytest.approx(math.pi / 2 + 0.25)
    identity = a.compose(a.inverse())
    assert identity.position == pytest.approx((0.0, 0.0), abs=1e-12)
    assert identity.heading == pytest.approx(0.0, abs=1e-12)
    px, py = a.transform_point(0.3, -0.7)
    assert a.inverse_transform_point(px, py) == pytest.approx((0.3, -0.7))


def test_box_box_contact():
    box = Box(0.5, 0.5)
    contact = contact_between(box, Pose2(), box, Pose2(0.9, 0.0))
    assert contact.normal == pytest.approx((1.0, 0.0))
    assert contact.depth == pytest.approx(0.1)
    assert overlap(box, Pose2(), box, Pose2(1.0, 0.0))
    assert not overlap(box, Pose2(), box, Pose2(1.01, 0.0))
    flipped = contact_between(box, Pose2(0.9, 0.0), box, Pose2())
    assert flipped.normal == pytest.approx((-1.0, 0.0))


def test_rotated_box_overlap():
    box = Box(0.5, 0.5)
    assert overlap(box, Pose2(), box, Pose2(1.2, 0.0, math.pi / 4))
    assert not overlap(box, Pose2(), box, Pose2(1.25, 0.0, math.pi / 4))


def test_disk_contacts():
    box, disk = Box(0.5, 0.5), Disk(0.2)
    contact = contact_between(box, Pose2(), disk, Pose2(0.6, 0.0))
    assert contact.normal == pytest.approx((1.0, 0.0))
    assert contact.depth == pytest.approx(0.1)
    assert contact.point == pytest.approx((0.5, 0.0))
    reverse = contact_between(disk, Pose2(0.6, 0.0), box, Pose2())
    assert reverse.normal == pytest.approx((-1.0, 0.0))
    assert reverse.depth == pytest.approx(0.1)
    assert contact_between(Disk(0.1), Pose2(), Disk(0.1), Pose2(0.15, 0.0)).depth == pytest.approx(0.05)
    assert contact_between(box, Pose2(), disk, Pose2(0.75, 0.0)) is None
    gap = contact_between(box, Pose2(), disk, Pose2(0.705, 0.0), margin=0.01)
    assert gap.depth == pytest.approx(-0.005)


def test_disk_inside_box():
    contact = contact_between(Box(0.5, 0.5), Pose2(), Disk(0.1), Pose2(0.4, 0.0))
    assert contact.normal == pytest.approx((1.0, 0.0))
    assert contact.depth == pytest.approx(0.2)


def _inside(shape, pose, points, inflate=0.0):
    dx, dy = points[:, 0] - pose.x, points[:, 1] - pose.y
    if isinstance(shape, Disk):
        return np.hypot(dx, dy) <= shape.radius + inflate
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    return (np.abs(lx) <= shape.half_width + inflate) & (np.abs(ly) <= shape.half_depth + inflate)


def _random_shape(rng):
    if rng.random() < 0.3:
        return Disk(rng.uniform(0.05, 0.5))
    return Box(rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5))


def _random_pose(rng):
    return Pose2(*rng.uniform(-0.6, 0.6, 2), rng.uniform(-math.pi, math.pi))


def test_overlap_agrees_with_membership_grid():
    rng = np.random.default_rng(7)
    n = 300
    agree = 0
    for _ in range(1000):
        a, b = _random_shape(rng), _random_shape(rng)
        pa, pb = _random_pose(rng), _random_pose(rng)
        result = overlap(a, pa, b, pb)
        assert overlap(b, pb, a, pa) == result

        box_a, box_b = shape_aabb(a, pa), shape_aabb(b, pb)
        lo = np.maximum(box_a[:2], box_b[:2])
        hi = np.minimum(box_a[2:], box_b[2:])
        if np.any(lo >= hi):
            assert not result
            agree += 1
            continue
        xs, ys = np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)
        points = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
        strict = bool(np.any(_inside(a, pa, points) & _inside(b, pb, points)))
        # any true intersection point lies within one cell diagonal of a grid point
        cell = math.hypot(xs[1] - xs[0], ys[1] - ys[0])
        loose = bool(np.any(_inside(a, pa, points, cell) & _inside(b, pb, points, cell)))
        if strict:
            assert result
        if not loose:
            assert not result
        if result == strict or strict != loose:
            agree += 1
    assert agree / 1000 >= 0.999


def test_point_in_shape():
    assert point_in_shape(Box(0.5, 0.2), Pose2(1.0, 0.0, math.pi / 2), 1.0, 0.45)
    assert not point_in_shape(Box(0.5, 0.2), Pose2(1.0, 0.0, math.pi / 2), 1.3, 0.0)
    assert point_in_shape(Box(0.5, 0.2), Pose2(1.0, 0.0, math.pi / 2), 1.203, 0.0, tolerance=0.005)
    assert point_in_shape(Disk(0.1), Pose2(), 0.0, 0.1)


def test_region_world_polygon():
    region = ManipulationRegion("c:+x", "c", Pose2(0.2, 0.0), Box(0.05, 0.1), (-1.0, 0.0))
    polygon = region_world_polygon(region, ObjectState(Pose2(1.0, 0.0, math.pi / 2)))
    assert polygon.shape == (4, 2)
    assert polygon.mean(axis=0) == pytest.approx([1.0, 0.2], abs=1e-12)
    assert np.ptp(polygon[:, 0]) == pytest.approx(0.2)
    assert np.ptp(polygon[:, 1]) == pytest.approx(0.1)


def test_region_world_polygon_inverts_with_owner_pose():
    rng = np.random.default_rng(13)
    for _ in range(200):
        local = Pose2(*rng.uniform(-0.3, 0.3, 2), rng.uniform(-math.pi, math.pi))
        extent = Box(*rng.uniform(0.01, 0.2, 2))
        region = ManipulationRegion("o:+x", "o", local, extent, (1.0, 0.0))
        owner = _random_pose(rng)
        polygon = region_world_polygon(region, ObjectState(owner))
        back = np.array([owner.inverse_transform_point(x, y) for x, y in polygon])
        assert np.max(np.abs(back - np.array(shape_polygon(extent, local)))) < 1e-9


def test_region_push_direction_must_be_unit():
    with pytest.raises(ValueError):
        ManipulationRegion("c:+x", "c", Pose2(), Box(0.05, 0.1), (-2.0, 0.0))


def test_object_spec_validation():
    region = ManipulationRegion("w:+x", "w", Pose2(), Box(0.05, 0.1), (-1.0, 0.0))
    with pytest.raises(ValueError, match="Fixed"):
        ObjectSpec("w", ObjectClass.FIXED, Box(0.1, 0.1), 1.0, 0.5, regions=(region,))
    with pytest.raises(ValueError, match="co-mObjects"):
        ObjectSpec("c", ObjectClass.FREE, Box(0.1, 0.1), 1.0, 0.5, motion_constraint=(1.0, 0.0))
    with pytest.raises(ValueError, match="mass"):
        ObjectSpec("c", ObjectClass.FREE, Box(0.1, 0.1), 0.0, 0.5)
    spec = ObjectSpec("t", ObjectClass.CONSTRAINED, Box(0.1, 0.1), 1.0, 0.5, motion_constraint=(0.0, 1.0))
    assert spec.motion_constraint == (0.0, 1.0)


def test_arm_kinematics():
    arm = two_link_arm()
    frames = arm_joint_positions(arm, (math.pi / 2, -math.pi / 2))
    assert frames[1][:2] == pytest.approx((0.0, 1.0), abs=1e-12)
    assert tool_point(arm, (math.pi / 2, -math.pi / 2)) == pytest.approx((1.0, 1.0))
    assert arm.reach == 2.0


def test_arm_jacobian_matches_finite_differences():
    arm = two_link_arm((0.5, 0.4))
    angles = np.array([0.3, -0.5])
    jacobian = arm_jacobian(arm, angles)
    h = 1e-6
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        plus = np.array(tool_point(arm, angles + step))
        minus = np.array(tool_point(arm, angles - step))
        assert jacobian[:, k] == pytest.approx((plus - minus) / (2 * h), rel=1e-6, abs=1e-9)


def test_arm_footprint_rejects_limit_violation():
    arm = two_link_arm()
    assert len(robot_footprint(arm, ArmState((0.0, 0.0)))) == 2
    with pytest.raises(ContractError):
        robot_footprint(arm, ArmState((3.5, 0.0)))
