"""Pure-Python grid kernels: ray casting, obstacle inflation, A* search.

Reference implementation for the compiled module in ``_grid.pyx``; both must
keep identical semantics (the test suite checks them against each other).
All functions work in cell units on a uint8 occupancy array indexed
``occ[row, col]`` with 1 = occupied.  Cells outside the grid count as
occupied, so rays and paths can never leave the map.

Grid geometry conventions:
  * a cell (r, c) spans x in [c, c+1), y in [r, r+1)
  * diagonal moves are blocked when either adjacent orthogonal cell is
    occupied (no corner cutting)
"""

from __future__ import annotations

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)

# (dr, dc, step cost)
_MOVES = (
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)


def cast(occ: np.ndarray, x: float, y: float, dx: float, dy: float,
         max_dist: float) -> float:
    """Distance travelled from (x, y) along unit direction (dx, dy) before
    entering an occupied (or out-of-map) cell, capped at max_dist.

    Returns 0.0 when the start cell itself is occupied.
    """
    rows, cols = occ.shape
    ic = math.floor(x)
    ir = math.floor(y)
    if ir < 0 or ir >= rows or ic < 0 or ic >= cols or occ[ir, ic]:
        return 0.0

    if dx > 0.0:
        step_c, t_max_x, t_delta_x = 1, (ic + 1.0 - x) / dx, 1.0 / dx
    elif dx < 0.0:
        step_c, t_max_x, t_delta_x = -1, (ic - x) / dx, -1.0 / dx
    else:
        step_c, t_max_x, t_delta_x = 0, math.inf, math.inf
    if dy > 0.0:
        step_r, t_max_y, t_delta_y = 1, (ir + 1.0 - y) / dy, 1.0 / dy
    elif dy < 0.0:
        step_r, t_max_y, t_delta_y = -1, (ir - y) / dy, -1.0 / dy
    else:
        step_r, t_max_y, t_delta_y = 0, math.inf, math.inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            ic += step_c
            t_max_x += t_delta_x
        else:
            t = t_max_y
            ir += step_r
            t_max_y += t_delta_y
        if t >= max_dist:
            return max_dist
        if ir < 0 or ir >= rows or ic < 0 or ic >= cols or occ[ir, ic]:
            return t


def raycast(occ: np.ndarray, x: float, y: float, angle: float,
            max_dist: float) -> float:
    return cast(occ, x, y, math.cos(angle), math.sin(angle), max_dist)


def raycast_many(occ: np.ndarray, x: float, y: float, angles: np.ndarray,
                 max_dist: float) -> np.ndarray:
    out = np.empty(len(angles), dtype=np.float64)
    for i, a in enumerate(angles):
        out[i] = cast(occ, x, y, math.cos(a), math.sin(a), max_dist)
    return out


def first_hit(occ: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> float:
    """Fraction t in [0, 1] of the segment traversable before hitting an
    occupied cell; 1.0 when the whole segment is free."""
    length = math.hypot(x1 - x0, y1 - y0)
    if length == 0.0:
        rows, cols = occ.shape
        ir, ic = math.floor(y0), math.floor(x0)
        inside = 0 <= ir < rows and 0 <= ic < cols
        return 1.0 if inside and not occ[ir, ic] else 0.0
    dist = cast(occ, x0, y0, (x1 - x0) / length, (y1 - y0) / length, length)
    return dist / length


def inflation_offsets(radius_cells: float) -> list[tuple[int, int]]:
    """Cell offsets whose center lies within radius_cells of the occupied
    cell's unit-square region (inclusive).

    Region distance, not center-to-center: a diagonal neighbor's center is
    sqrt(0.5) from the corner of the occupied cell, so radius 1 inflates a
    single cell to a full 3x3 block.
    """
    if radius_cells < 0:
        raise ValueError("inflation radius must be >= 0")
    r_int = int(math.floor(radius_cells + 0.5))
    out = []
    for dr in range(-r_int, r_int + 1):
        for dc in range(-r_int, r_int + 1):
            if dr == 0 and dc == 0:
                continue
            dy = max(0.0, abs(dr) - 0.5)
            dx = max(0.0, abs(dc) - 0.5)
            if dx * dx + dy * dy <= radius_cells * radius_cells:
                out.append((dr, dc))
    return out


def inflate(occ: np.ndarray, radius_cells: float) -> np.ndarray:
    """Mark every cell within radius_cells of an occupied cell as occupied."""
    out = occ.astype(np.uint8).copy()
    rows, cols = occ.shape
    for dr, dc in inflation_offsets(radius_cells):
        src_r0, src_r1 = max(0, -dr), min(rows, rows - dr)
        dst_r0, dst_r1 = max(0, dr), min(rows, rows + dr)
        src_c0, src_c1 = max(0, -dc), min(cols, cols - dc)
        dst_c0, dst_c1 = max(0, dc), min(cols, cols + dc)
        out[dst_r0:dst_r1, dst_c0:dst_c1] |= occ[src_r0:src_r1, src_c0:src_c1]
    return out


def astar(occ: np.ndarray, sr: int, sc: int, gr: int, gc: int):
    """8-connected A* with Euclidean heuristic and sqrt(2) diagonal cost.

    Returns (cost, path) with cost in cell units and path an int32 array of
    (row, col) cells from start to goal inclusive; (inf, empty) when the goal
    is unreachable.  Start/goal on occupied cells raise ValueError.
    """
    rows, cols = occ.shape
    for name, (r, c) in (("start", (sr, sc)), ("goal", (gr, gc))):
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"{name} cell ({r}, {c}) outside grid")
        if occ[r, c]:
            raise ValueError(f"{name} cell ({r}, {c}) is occupied")

    if sr == gr and sc == gc:
        return 0.0, np.array([[sr, sc]], dtype=np.int32)

    g = np.full((rows, cols), np.inf)
    g[sr, sc] = 0.0
    parent = np.full((rows, cols), -1, dtype=np.int64)
    closed = np.zeros((rows, cols), dtype=bool)
    counter = 0
    start_h = math.hypot(gr - sr, gc - sc)
    heap = [(start_h, counter, sr, sc)]

    while heap:
        _, _, r, c = heapq.heappop(heap)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if r == gr and c == gc:
            break
        base = g[r, c]
        for dr, dc, step in _MOVES:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                continue
            if occ[nr, nc]:
                continue
            if dr != 0 and dc != 0 and (occ[r + dr, c] or occ[r, c + dc]):
                continue
            ng = base + step
            if ng < g[nr, nc]:
                g[nr, nc] = ng
                parent[nr, nc] = r * cols + c
                counter += 1
                f = ng + math.hypot(gr - nr, gc - nc)
                heapq.heappush(heap, (f, counter, nr, nc))

    if not closed[gr, gc]:
        return math.inf, np.empty((0, 2), dtype=np.int32)

    cells = []
    r, c = gr, gc
    while r != sr or c != sc:
        cells.append((r, c))
        packed = parent[r, c]
        r, c = packed // cols, packed % cols
    cells.append((sr, sc))
    cells.reverse()
    return float(g[gr, gc]), np.array(cells, dtype=np.int32)
