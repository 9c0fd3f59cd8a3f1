"""Grid geometry helpers: distances, adjacency, line-of-sight, connectivity.

Cells are (x, y) tuples with x as column and y as row. Row-major order means
sorting by (y, x), which is the deterministic tie-break used everywhere.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

Cell = tuple[int, int]

# Relation strengths are strictly ordered: touching implies near, and near
# implies mutual visibility only on open ground (walls can break sight at
# distance 2, which keeps the three relations distinct).
NEAR_RADIUS = 2

ORTH_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))  # N, E, S, W


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def is_near(a: Cell, b: Cell) -> bool:
    return chebyshev(a, b) <= NEAR_RADIUS


def is_touching(a: Cell, b: Cell) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def row_major_key(cell: Cell) -> tuple[int, int]:
    return (cell[1], cell[0])


def supercover_line(a: Cell, b: Cell) -> list[Cell]:
    """All cells intersected by the segment between the centres of a and b.

    Unlike Bresenham, the supercover includes every cell the segment passes
    through; when the segment crosses exactly through a lattice corner, both
    side cells are included. Endpoints are included.
    """
    (x0, y0), (x1, y1) = a, b
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1

    cells = [(x0, y0)]
    x, y = x0, y0
    ix = iy = 0
    while ix < nx or iy < ny:
        # Compare fractional progress of the next vertical/horizontal crossing.
        t_x = (2 * ix + 1) * ny
        t_y = (2 * iy + 1) * nx
        if t_x == t_y:
            # Corner crossing: the segment touches both neighbours.
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif t_x < t_y:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def line_of_sight(a: Cell, b: Cell, blocked: set[Cell]) -> bool:
    """True when no blocked cell lies strictly between a and b on the ray."""
    for c in supercover_line(a, b):
        if c != a and c != b and c in blocked:
            return False
    return True


def flood_fill(start: Cell, passable: set[Cell]) -> set[Cell]:
    if start not in passable:
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in ORTH_DELTAS:
            nxt = (x + dx, y + dy)
            if nxt in passable and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def grid_distances(start: Cell, passable: set[Cell]) -> dict[Cell, int]:
    """BFS step counts from start over orthogonal moves; unreachable cells absent."""
    if start not in passable:
        return {}
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        d = dist[cur]
        for dx, dy in ORTH_DELTAS:
            nxt = (cur[0] + dx, cur[1] + dy)
            if nxt in passable and nxt not in dist:
                dist[nxt] = d + 1
                queue.append(nxt)
    return dist


def cells_within(center: Cell, radius: int) -> Iterable[Cell]:
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            yield (center[0] + dx, center[1] + dy)
