"""Arena geometry: two chambers joined by a one-cell-wide corridor.

The default arena is a home chamber and a source chamber (both
``chamber_width x chamber_height``) connected by a horizontal tunnel of
configurable length. Agents spawn in the home chamber; pellet pickup
happens on the Source cells along the far wall of the source chamber.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigError

Coord = tuple[int, int]


class CellKind(IntEnum):
    WALL = 0
    FLOOR = 1
    HOME = 2
    SOURCE = 3
    TUNNEL = 4


@dataclass(frozen=True)
class GridLayout:
    """Immutable arena description.

    ``kind`` is indexed ``[y, x]``. Cell lists are row-major sorted;
    ``tunnel_cells`` is ordered from the home end to the source end.
    """

    width: int
    height: int
    kind: np.ndarray
    tunnel_length: int
    home_cells: tuple[Coord, ...]
    source_cells: tuple[Coord, ...]
    tunnel_cells: tuple[Coord, ...]

    def in_bounds(self, cell: Coord) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def kind_at(self, cell: Coord) -> CellKind:
        return CellKind(int(self.kind[cell[1], cell[0]]))

    def is_wall(self, cell: Coord) -> bool:
        return not self.in_bounds(cell) or self.kind[cell[1], cell[0]] == CellKind.WALL

    @property
    def tunnel_index(self) -> dict[Coord, int]:
        return {c: i for i, c in enumerate(self.tunnel_cells)}

    def walkable_cells(self) -> list[Coord]:
        ys, xs = np.nonzero(self.kind != CellKind.WALL)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]


def build_arena(chamber_width: int = 6, chamber_height: int = 5, tunnel_length: int = 8) -> GridLayout:
    """Build the default two-chamber arena.

    Home chamber cells are all Home kind; the source chamber is Floor
    except for the column hugging the far (east) wall, which is Source.
    """
    if chamber_width < 1 or chamber_height < 1 or tunnel_length < 1:
        raise ConfigError("chamber dimensions and tunnel length must be >= 1")
    width = 2 * chamber_width + tunnel_length + 2
    height = chamber_height + 2
    kind = np.full((height, width), CellKind.WALL, dtype=np.int8)

    yc = 1 + chamber_height // 2  # corridor row
    for y in range(1, chamber_height + 1):
        for x in range(1, chamber_width + 1):
            kind[y, x] = CellKind.HOME
        for x in range(chamber_width + tunnel_length + 1, 2 * chamber_width + tunnel_length + 1):
            kind[y, x] = CellKind.FLOOR
    for x in range(chamber_width + 1, chamber_width + tunnel_length + 1):
        kind[yc, x] = CellKind.TUNNEL
    source_x = 2 * chamber_width + tunnel_length
    for y in range(1, chamber_height + 1):
        kind[y, source_x] = CellKind.SOURCE

    layout = GridLayout(
        width=width,
        height=height,
        kind=kind,
        tunnel_length=tunnel_length,
        home_cells=_cells_of(kind, CellKind.HOME),
        source_cells=_cells_of(kind, CellKind.SOURCE),
        tunnel_cells=tuple(sorted(_cells_of(kind, CellKind.TUNNEL))),  # west->east = home->source
        )
    validate_layout(layout)
    return layout


def _cells_of(kind: np.ndarray, value: CellKind) -> tuple[Coord, ...]:
    ys, xs = np.nonzero(kind == value)
    return tuple(sorted((int(x), int(y)) for x, y in zip(xs, ys)))


def validate_layout(layout: GridLayout) -> None:
    """Check the arena invariants; raise ConfigError on violation."""
    if not layout.home_cells or not layout.source_cells or not layout.tunnel_cells:
        raise ConfigError("layout must contain home, source and tunnel cells")
    if len(layout.tunnel_cells) != layout.tunnel_length:
        raise ConfigError("tunnel_length does not match the number of tunnel cells")
    regions = (set(layout.home_cells), set(layout.source_cells), set(layout.tunnel_cells))
    if len(regions[0] | regions[1] | regions[2]) != sum(len(r) for r in regions):
        raise ConfigError("home, source and tunnel cells must be pairwise disjoint")
    # Width-1 corridor: every tunnel cell has exactly two walkable neighbours.
    for cell in layout.tunnel_cells:
        degree = sum(1 for nb in _neighbours(cell) if not layout.is_wall(nb))
        if degree != 2:
            raise ConfigError(f"tunnel cell {cell} is not part of a width-1 corridor")
    walkable = layout.walkable_cells()
    reachable = _flood_fill(layout, walkable[0])
    if len(reachable) != len(walkable):
        raise ConfigError("arena is disconnected: some cells are unreachable")


def _neighbours(cell: Coord) -> list[Coord]:
    x, y = cell
    return [(x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)]


def _flood_fill(layout: GridLayout, start: Coord) -> set[Coord]:
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nb in _neighbours(cur):
            if nb not in seen and not layout.is_wall(nb):
                seen.add(nb)
                queue.append(nb)
    return seen


def distance_field(layout: GridLayout, goal_cells: tuple[Coord, ...] | list[Coord]) -> np.ndarray:
    """Hop distance from every walkable cell to the nearest goal cell.

    Breadth-first over the 4-neighbourhood; Wall cells hold +inf. Raises
    ConfigError if some walkable cell cannot reach any goal.
    """
    if not goal_cells:
        raise ConfigError("goal_cells must be nonempty")
    dist = np.full((layout.height, layout.width), np.inf)
    queue: deque[Coord] = deque()
    for cell in goal_cells:
        if layout.is_wall(cell):
            raise ConfigError(f"goal cell {cell} is a wall")
        dist[cell[1], cell[0]] = 0.0
        queue.append(cell)
    while queue:
        x, y = queue.popleft()
        base = dist[y, x]
        for nx, ny in _neighbours((x, y)):
            if not layout.is_wall((nx, ny)) and dist[ny, nx] == np.inf:
                dist[ny, nx] = base + 1.0
                queue.append((nx, ny))
    walkable_mask = layout.kind != CellKind.WALL
    if not np.all(np.isfinite(dist[walkable_mask])):
        raise ConfigError("some walkable cells cannot reach the goal set")
    return dist
