"""Power consumption of propagated trajectories."""
from __future__ import annotations

from typing import Optional

import numpy as np
import pandas as pd

from ..physics import PropagationLog
from ..world import HolonomicDisk, RobotModel


def _translational_terms(log: PropagationLog) -> np.ndarray:
    if not log.forces:
        return np.zeros(0)
    forces = np.asarray(log.forces, dtype=float)
    displacements = np.asarray(log.displacements, dtype=float)
    return np.einsum("ij,ij->i", forces, displacements) / log.dt


def _rotational_terms(log: PropagationLog) -> np.ndarray:
    if not log.torques:
        return np.zeros(0)
    torques = np.asarray(log.torques, dtype=float)
    rates = np.asarray(log.rates, dtype=float)
    return np.einsum("ij,ij->i", torques, rates)


def power_translational(log: PropagationLog) -> float:
    """
    Sum of ``f . d / dt`` over the substeps of ``log``.

    Only the robot actuation force enters; contact and friction forces are not counted.

    >>> log = PropagationLog(dt=0.5, times=[0.5], forces=[(2.0, 0.0)], displacements=[(1.0, 0.0)])
    >>> power_translational(log)
    4.0
    """
    return float(_translational_terms(log).sum())


def power_rotational(log: PropagationLog) -> float:
    """Sum of ``tau . omega`` over the actuated axes and substeps of ``log``."""
    return float(_rotational_terms(log).sum())


def path_power(log: PropagationLog, robot: RobotModel) -> float:
    if isinstance(robot, HolonomicDisk):
        return power_translational(log)
    return power_rotational(log)


def power_trace(log: PropagationLog, robot: RobotModel, start_time: Optional[float] = None) -> pd.DataFrame:
    """
    Instantaneous and cumulative power against time.

    Returns
    -------
    pandas.DataFrame
        Columns ``time_s``, ``power_w`` and ``cumulative_power_w``, one row per substep.
    """
    terms = _translational_terms(log) if isinstance(robot, HolonomicDisk) else _rotational_terms(log)
    times = np.asarray(log.times, dtype=float)
    if start_time is not None:
        times = times - start_time
    return pd.DataFrame(
        {
            "time_s": times,
            "power_w": terms,
            "cumulative_power_w": np.cumsum(terms),
        }
    )
