from __future__ import annotations

import logging
from typing import Optional, Tuple

from ..constants import OBJECT_SPEED_LIMIT, REGION_TOLERANCE
from ..knowledge import InstantiatedKnowledge, ManipulationKnowledge
from ..physics import ROBOT_ID, PropagationLog
from ..world import (
    ArmState,
    ObjectClass,
    PlanarArm,
    WorkspaceState,
    overlap,
    point_in_shape,
    robot_footprint,
)

_logger = logging.getLogger(__name__)

Bounds = Tuple[Tuple[float, float], Tuple[float, float]]


class StateValidityChecker:
    """
    F: decides whether a propagated state may enter the tree.

    A state is rejected when the robot overlaps a Fixed object (classes as resolved in the
    manipulation knowledge), touched a manipulatable object outside the active regions of
    ``kappa`` during the step, left ``bounds``, exceeded a joint limit, or when an object
    moved faster than ``OBJECT_SPEED_LIMIT``. Object-object contacts are always allowed.
    """

    def __init__(self, km: ManipulationKnowledge, bounds: Optional[Bounds] = None):
        self.km = km
        self.bounds = bounds
        self._fixed = [o.spec for o in km.objects if o.object_class is ObjectClass.FIXED]

    def _within_bounds(self, q: WorkspaceState) -> bool:
        if self.bounds is None or isinstance(self.km.robot, PlanarArm):
            return True
        (x_lo, x_hi), (y_lo, y_hi) = self.bounds
        state = q.robot_state
        return x_lo <= state.x <= x_hi and y_lo <= state.y <= y_hi

    def _within_limits(self, state: ArmState) -> bool:
        return all(lo <= a <= hi for a, (lo, hi) in zip(state.angles, self.km.robot.joint_limits))

    def _contact_allowed(self, kappa: InstantiatedKnowledge, object_id: str, local_point) -> bool:
        knowledge = self.km.object(object_id)
        if knowledge.object_class is ObjectClass.FIXED:
            return False
        if not kappa.enforce_regions:
            return True
        for region in knowledge.regions:
            if region.id in kappa.active_region_ids and point_in_shape(
                region.extent, region.local_pose, *local_point, REGION_TOLERANCE
            ):
                return True
        return False

    def __call__(self, q: WorkspaceState, kappa: InstantiatedKnowledge, log: PropagationLog) -> bool:
        robot = self.km.robot
        if isinstance(robot, PlanarArm) and not self._within_limits(q.robot_state):
            return False
        if not self._within_bounds(q):
            return False
        if log.max_object_speed > OBJECT_SPEED_LIMIT:
            return False
        for event in log.contacts:
            if event.other_id == ROBOT_ID and not self._contact_allowed(kappa, event.object_id, event.local_point):
                return False
        footprint = robot_footprint(robot, q.robot_state)
        for spec in self._fixed:
            pose = q.object_states[spec.id].pose
            if any(overlap(shape, part_pose, spec.shape, pose) for shape, part_pose in footprint):
                return False
        return True


def state_validity_check(
    q_new: WorkspaceState,
    kappa: InstantiatedKnowledge,
    log: PropagationLog,
    km: ManipulationKnowledge,
    bounds: Optional[Bounds] = None,
) -> bool:
    return StateValidityChecker(km, bounds)(q_new, kappa, log)
