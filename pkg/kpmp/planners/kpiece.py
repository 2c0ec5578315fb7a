from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..world import PlanarArm, tool_point
from .base import KinodynamicPlanner, Motion, workspace_projection

Coords = Tuple[int, int]

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(eq=False)
class GridCell:
    coords: Coords
    motions: List[Motion] = field(default_factory=list)
    coverage: int = 0
    selections: int = 0
    interior: bool = False

    @property
    def importance(self) -> float:
        """Exterior cells weigh twice as much; heavily covered or often selected cells weigh less."""
        return (1.0 if self.interior else 2.0) / ((1 + self.selections) * max(self.coverage, 1))


class ProjectionGrid:
    """
    Uniform grid over a two-dimensional projection of the tree. A cell is interior once all
    four of its axis neighbours hold motions.
    """

    def __init__(self, cell_size: Tuple[float, float], origin: Tuple[float, float] = (0.0, 0.0)):
        if min(cell_size) <= 0:
            raise ValueError(f"cell size must be positive, got {cell_size}")
        self.cell_size = tuple(float(s) for s in cell_size)
        self.origin = tuple(float(o) for o in origin)
        self.cells: Dict[Coords, GridCell] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def coords_of(self, point) -> Coords:
        return (
            int(math.floor((point[0] - self.origin[0]) / self.cell_size[0])),
            int(math.floor((point[1] - self.origin[1]) / self.cell_size[1])),
        )

    def add(self, motion: Motion, point) -> GridCell:
        coords = self.coords_of(point)
        cell = self.cells.get(coords)
        if cell is None:
            cell = self.cells[coords] = GridCell(coords)
            self._refresh(coords)
            for dx, dy in NEIGHBOURS:
                self._refresh((coords[0] + dx, coords[1] + dy))
        cell.motions.append(motion)
        cell.coverage += 1
        return cell

    def _refresh(self, coords: Coords) -> None:
        cell = self.cells.get(coords)
        if cell is not None:
            cell.interior = all((coords[0] + dx, coords[1] + dy) in self.cells for dx, dy in NEIGHBOURS)

    def nearest_cell(self, point) -> GridCell:
        """Occupied cell whose centre is closest to ``point``; ties go to the earliest cell."""
        best, best_distance = None, math.inf
        for cell in self.cells.values():
            cx = self.origin[0] + (cell.coords[0] + 0.5) * self.cell_size[0]
            cy = self.origin[1] + (cell.coords[1] + 0.5) * self.cell_size[1]
            distance = math.hypot(cx - point[0], cy - point[1])
            if distance < best_distance:
                best, best_distance = cell, distance
        return best


def select_cell_kpiece(grid: ProjectionGrid, rng: np.random.Generator) -> Tuple[GridCell, Motion]:
    """
    Pick a cell with probability proportional to its importance, then a motion uniformly
    within it. The chosen cell's selection count is incremented.
    """
    if not grid.cells:
        raise ValueError("cannot select from an empty projection grid")
    cells = list(grid.cells.values())
    weights = np.array([c.importance for c in cells])
    cell = cells[int(rng.choice(len(cells), p=weights / weights.sum()))]
    motion = cell.motions[int(rng.integers(len(cell.motions)))]
    cell.selections += 1
    return cell, motion


class KPIECE(KinodynamicPlanner):
    """
    KPIECE-style exploration: motions are binned by the robot's workspace projection (robot
    position, or the arm's tool point) and extension starts from important cells. With
    probability ``goal_bias`` the cell closest to the goal is used instead.
    """

    name = "kpiece"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        (x_lo, _), (y_lo, _) = self.scene.bounds
        width, height = self.scene.extent
        divisions = self.cfg.grid_divisions
        self.grid = ProjectionGrid((width / divisions, height / divisions), (x_lo, y_lo))
        goal = self.scene.goal.center
        if isinstance(self.robot, PlanarArm):
            self.goal_point = tool_point(self.robot, goal)
        else:
            self.goal_point = (goal[0], goal[1])

    def add(self, motion: Motion) -> None:
        super().add(motion)
        self.grid.add(motion, workspace_projection(self.robot, motion.state))

    def select(self) -> Tuple[Motion, Optional[np.ndarray]]:
        if self.cfg.goal_bias > 0 and self.rng.random() < self.cfg.goal_bias:
            cell = self.grid.nearest_cell(self.goal_point)
            cell.selections += 1
            return cell.motions[int(self.rng.integers(len(cell.motions)))], None
        _, motion = select_cell_kpiece(self.grid, self.rng)
        return motion, None
