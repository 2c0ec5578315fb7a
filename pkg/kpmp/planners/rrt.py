from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ..world import CarLike, PlanarArm, RobotModel
from .base import (
    KinodynamicPlanner,
    Motion,
    angular_mask,
    configuration,
    default_weights,
    weighted_distance,
)


def select_node_rrt(
    tree: Sequence[Motion],
    q_rand: np.ndarray,
    weights: np.ndarray,
    robot: RobotModel,
    configs: Optional[np.ndarray] = None,
) -> Motion:
    """
    Nearest tree motion to ``q_rand`` under the weighted configuration distance.

    Object states do not enter the metric. Ties go to the lowest index. ``configs`` is an
    optional cached matrix whose row ``i`` holds the configuration of ``tree[i]``.
    """
    if configs is None:
        configs = np.vstack([configuration(robot, m.state) for m in tree])
    distances = weighted_distance(configs, np.asarray(q_rand, dtype=float), weights, angular_mask(robot))
    return tree[int(np.argmin(distances))]


class RRT(KinodynamicPlanner):
    """
    Kinodynamic RRT: extend the nearest motion toward a random configuration. With
    ``control_candidates`` above one, several sampled controls are propagated and the one
    ending closest to the random configuration is kept.
    """

    name = "rrt"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        weights = self.cfg.distance_weights
        self.weights = np.asarray(weights, dtype=float) if weights is not None else default_weights(self.robot)
        self.angular = angular_mask(self.robot)
        self._configs = np.empty((64, len(self.weights)))

    def add(self, motion: Motion) -> None:
        super().add(motion)
        if len(self.tree) > len(self._configs):
            grown = np.empty((2 * len(self._configs), self._configs.shape[1]))
            grown[: len(self._configs)] = self._configs
            self._configs = grown
        self._configs[motion.index] = configuration(self.robot, motion.state)

    def sample_configuration(self) -> np.ndarray:
        robot = self.robot
        goal = np.asarray(self.scene.goal.center, dtype=float)
        if isinstance(robot, PlanarArm):
            if self.rng.random() < self.cfg.goal_bias:
                return goal.copy()
            lower, upper = np.array(robot.joint_limits).T
            return self.rng.uniform(lower, upper)
        (x_lo, x_hi), (y_lo, y_hi) = self.scene.bounds
        if self.rng.random() < self.cfg.goal_bias:
            point = goal.copy()
        else:
            point = np.array([self.rng.uniform(x_lo, x_hi), self.rng.uniform(y_lo, y_hi)])
        if isinstance(robot, CarLike):
            return np.append(point, self.rng.uniform(-math.pi, math.pi))
        return point

    def select(self) -> Tuple[Motion, Optional[np.ndarray]]:
        q_rand = self.sample_configuration()
        node = select_node_rrt(self.tree, q_rand, self.weights, self.robot, self._configs[: len(self.tree)])
        return node, q_rand

    def grow(self, node: Motion, target: Optional[np.ndarray]) -> Tuple[Optional[Motion], bool]:
        best: Optional[Motion] = None
        best_distance = math.inf
        for _ in range(self.cfg.control_candidates):
            motion, reached, _ = self.extend(node, *self.sample(node))
            if motion is None:
                continue
            if reached:
                return motion, True
            distance = float(
                weighted_distance(configuration(self.robot, motion.state)[None, :], target, self.weights, self.angular)[0]
            )
            if distance < best_distance:
                best, best_distance = motion, distance
        return best, False
