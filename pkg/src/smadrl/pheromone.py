"""Digital pheromone medium deposited and read by the agents.

Each walkable cell carries a scalar intensity plus last-occupant
metadata. Intensity follows the per-step recurrence
``rho(t+1) = (1 - alpha) * rho(t) + beta`` on occupied cells and plain
exponential decay on unoccupied ones; deposits clamp intensity up to at
least ``rho0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .layout import CellKind, Coord, GridLayout


@dataclass(frozen=True)
class PheromoneParams:
    rho0: float = 1.0
    alpha: float = 0.1
    beta: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.beta < 0.0:
            raise ConfigError("beta must be >= 0")
        if self.rho0 <= 0.0:
            raise ConfigError("rho0 must be > 0")

    @property
    def norm_divisor(self) -> float:
        """Observation normalization constant: beta/alpha if beta > 0, else rho0."""
        return self.beta / self.alpha if self.beta > 0 else self.rho0


@dataclass
class PheromoneCell:
    """Read-only view of one cell's trace, used by tests and the CSV dump."""

    intensity: float
    last_laden: int
    last_action: int
    last_mode: int
    last_visit_step: int


# Moore-neighbourhood offsets in row-major order, center excluded.
def _fov_offsets(radius: int) -> list[tuple[int, int]]:
    return [
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if (dx, dy) != (0, 0)
    ]


class PheromoneMap:
    """Grid of pheromone intensities with last-writer-wins metadata."""

    def __init__(self, layout: GridLayout, params: PheromoneParams):
        self.layout = layout
        self.params = params
        shape = (layout.height, layout.width)
        self.intensity = np.zeros(shape)
        self.last_laden = np.zeros(shape, dtype=np.int8)
        self.last_action = np.zeros(shape, dtype=np.int8)
        self.last_mode = np.zeros(shape, dtype=np.int8)
        self.last_visit_step = np.full(shape, -1, dtype=np.int64)
        self._walkable = layout.kind != CellKind.WALL

    def clear(self) -> None:
        self.intensity[:] = 0.0
        self.last_laden[:] = 0
        self.last_action[:] = 0
        self.last_mode[:] = 0
        self.last_visit_step[:] = -1

    def deposit(self, cell: Coord, laden: int, action: int, mode: int, step: int) -> None:
        """Mark a cell as occupied this step. Intensity never drops below rho0."""
        x, y = cell
        if self.layout.is_wall(cell):
            raise ConfigError(f"cannot deposit pheromone on wall cell {cell}")
        self.intensity[y, x] = max(self.intensity[y, x], self.params.rho0)
        self.last_laden[y, x] = laden
        self.last_action[y, x] = action
        self.last_mode[y, x] = mode
        self.last_visit_step[y, x] = step

    def decay_all(self, occupied_cells: list[Coord] | tuple[Coord, ...]) -> None:
        """Apply one decay step; the beta reinforcement only feeds occupied cells."""
        self.intensity *= 1.0 - self.params.alpha
        for x, y in occupied_cells:
            self.intensity[y, x] += self.params.beta

    def read_fov(self, position: Coord, radius: int) -> list[tuple[float, float, float]]:
        """Normalized (intensity, last_laden, last_action) triples around a cell.

        Row-major Moore neighbourhood, center excluded; walls and
        out-of-bounds cells read as (0, 0, 0).
        """
        divisor = self.params.norm_divisor
        px, py = position
        triples = []
        for dx, dy in _fov_offsets(radius):
            cell = (px + dx, py + dy)
            if self.layout.is_wall(cell):
                triples.append((0.0, 0.0, 0.0))
            else:
                x, y = cell
                triples.append(
                    (
                        float(self.intensity[y, x]) / divisor,
                        float(self.last_laden[y, x]),
                        float(self.last_action[y, x]) / 4.0,
                    )
                )
        return triples

    def cell(self, coord: Coord) -> PheromoneCell:
        x, y = coord
        return PheromoneCell(
            intensity=float(self.intensity[y, x]),
            last_laden=int(self.last_laden[y, x]),
            last_action=int(self.last_action[y, x]),
            last_mode=int(self.last_mode[y, x]),
            last_visit_step=int(self.last_visit_step[y, x]),
        )

    def write_csv(self, path) -> None:
        """Dump the walkable cells for offline visualization."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y", "rho", "last_laden", "last_action", "last_visit_step"])
            for y in range(self.layout.height):
                for x in range(self.layout.width):
                    if self._walkable[y, x]:
                        writer.writerow(
                            [
                                x,
                                y,
                                repr(float(self.intensity[y, x])),
                                int(self.last_laden[y, x]),
                                int(self.last_action[y, x]),
                                int(self.last_visit_step[y, x]),
                            ]
                        )


def tunnel_density(layout: GridLayout, positions: list[Coord] | tuple[Coord, ...]) -> float:
    """Fraction n/L of tunnel cells currently occupied by agents."""
    tunnel = set(layout.tunnel_cells)
    n = sum(1 for p in positions if p in tunnel)
    return n / layout.tunnel_length
