from typing import Optional

from ..knowledge import ManipulationKnowledge
from ..physics import SimConfig
from .base import (
    PLANNER_KINDS,
    KappaCallback,
    KinodynamicPlanner,
    Motion,
    PlannerConfig,
    PlanningMode,
    PlanResult,
    make_policy,
    sample_controls_and_steps,
)
from .kpiece import KPIECE, ProjectionGrid, select_cell_kpiece
from .path import (
    PathFile,
    ReplayDivergenceError,
    path_file_from_result,
    read_path,
    replay,
    state_hash,
    write_path,
)
from .rrt import RRT, select_node_rrt
from .validity import StateValidityChecker, state_validity_check

PLANNERS = {"rrt": RRT, "kpiece": KPIECE}


def plan(
    scene,
    km: ManipulationKnowledge,
    cfg: Optional[PlannerConfig] = None,
    sim_cfg: Optional[SimConfig] = None,
    on_kappa: Optional[KappaCallback] = None,
) -> PlanResult:
    """Run the planner named by ``cfg.kind`` on ``scene``."""
    cfg = cfg or PlannerConfig()
    return PLANNERS[cfg.kind](scene, km, cfg, sim_cfg, on_kappa).solve()
