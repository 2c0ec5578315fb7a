import math
import os
from pathlib import Path

import orjson

__all__ = [
    "KPMP_DT",
    "KPMP_CONTROL_DURATION",
    "KPMP_GRAVITY",
    "KPMP_ALPHA",
    "KPMP_TMAX",
    "KPMP_GOAL_BIAS",
    "KPMP_DB_PATH",
    "KPMP_LOG_LEVEL",
    "KPMP_SCENE_DIR",
    "SCENARIOS",
    "CONTACT_FRICTION",
    "CONTACT_TOLERANCE",
    "BAUMGARTE",
    "STATIC_FRICTION_EPSILON",
    "SOLVER_ITERATIONS",
    "INSTABILITY_SPEED",
    "OBJECT_SPEED_LIMIT",
    "JOINT_DAMPING",
    "STEER_INERTIA",
    "STEER_DAMPING",
    "REGION_DEPTH_FACTOR",
    "REGION_FACE_FRACTION",
    "REGION_TOLERANCE",
    "PUSH_BIAS_CONE",
    "KPIECE_GRID_DIVISIONS",
    "CLASS_NAMES",
    "CSV_COLUMNS",
    "SAVE_OPTIONS",
]

KPMP_DT = float(os.environ.get("KPMP_DT", 1e-3))
KPMP_CONTROL_DURATION = float(os.environ.get("KPMP_CONTROL_DURATION", 0.05))
KPMP_GRAVITY = float(os.environ.get("KPMP_GRAVITY", 9.8))
KPMP_ALPHA = float(os.environ.get("KPMP_ALPHA", 0.5))
KPMP_TMAX = float(os.environ.get("KPMP_TMAX", 150.0))
KPMP_GOAL_BIAS = float(os.environ.get("KPMP_GOAL_BIAS", 0.05))

KPMP_DB_PATH = Path(
    os.environ.get("KPMP_DB_PATH", Path.home() / ".kpmp" / "kpmp.db")
).expanduser()

KPMP_LOG_LEVEL = os.environ.get("KPMP_LOG_LEVEL", "WARNING")

KPMP_SCENE_DIR = Path(
    os.environ.get("KPMP_SCENE_DIR", Path(__file__).resolve().parent.parent / "assets" / "scenes")
).expanduser()
SCENARIOS = ("holonomic", "car", "arm")

CONTACT_FRICTION = 0.5
CONTACT_TOLERANCE = 1e-3  # m; also the allowed resting penetration
BAUMGARTE = 0.2
STATIC_FRICTION_EPSILON = 1e-3  # m/s
SOLVER_ITERATIONS = 10
INSTABILITY_SPEED = 1e3  # m/s
OBJECT_SPEED_LIMIT = 3.0  # m/s, sanity bound used by the validity checker
JOINT_DAMPING = 0.5  # N·m·s/rad
STEER_INERTIA = 0.02  # kg·m²
STEER_DAMPING = 0.2  # N·m·s/rad

REGION_DEPTH_FACTOR = 0.25
REGION_FACE_FRACTION = 0.8
REGION_TOLERANCE = 5e-3  # m, slack when testing contact points against region polygons

PUSH_BIAS_CONE = math.pi / 4  # half-angle, rad
KPIECE_GRID_DIVISIONS = 32

CLASS_NAMES = {
    "fixed": "Fixed",
    "fixedobject": "Fixed",
    "free": "FreeManipulatable",
    "free-mobject": "FreeManipulatable",
    "freemanipulatable": "FreeManipulatable",
    "co-mobject": "ConstraintOrientedManipulatable",
    "constrained": "ConstraintOrientedManipulatable",
    "constraintorientedmanipulatable": "ConstraintOrientedManipulatable",
}

CSV_COLUMNS = [
    "scenario",
    "planner",
    "mode",
    "seed",
    "success",
    "planning_time_s",
    "power_w",
    "path_duration_s",
    "contacts",
]

SAVE_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SERIALIZE_DATACLASS
