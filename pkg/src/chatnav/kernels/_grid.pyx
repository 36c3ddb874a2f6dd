# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels; same contracts as the pure module ``_grid_py``.

Keep the two implementations in lockstep: the parity tests compare them on
randomized inputs.
"""

import numpy as np

from libc.math cimport INFINITY, cos, floor, hypot, sin, sqrt
from libc.stdlib cimport free, malloc


cdef double _cast(const unsigned char[:, :] occ, double x, double y,
                  double dx, double dy, double max_dist) noexcept:
    cdef Py_ssize_t rows = occ.shape[0]
    cdef Py_ssize_t cols = occ.shape[1]
    cdef Py_ssize_t ic = <Py_ssize_t>floor(x)
    cdef Py_ssize_t ir = <Py_ssize_t>floor(y)
    cdef long step_c, step_r
    cdef double t_max_x, t_delta_x, t_max_y, t_delta_y, t

    if ir < 0 or ir >= rows or ic < 0 or ic >= cols or occ[ir, ic]:
        return 0.0

    if dx > 0.0:
        step_c = 1
        t_max_x = (ic + 1.0 - x) / dx
        t_delta_x = 1.0 / dx
    elif dx < 0.0:
        step_c = -1
        t_max_x = (ic - x) / dx
        t_delta_x = -1.0 / dx
    else:
        step_c = 0
        t_max_x = INFINITY
        t_delta_x = INFINITY
    if dy > 0.0:
        step_r = 1
        t_max_y = (ir + 1.0 - y) / dy
        t_delta_y = 1.0 / dy
    elif dy < 0.0:
        step_r = -1
        t_max_y = (ir - y) / dy
        t_delta_y = -1.0 / dy
    else:
        step_r = 0
        t_max_y = INFINITY
        t_delta_y = INFINITY

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


def cast(occ, double x, double y, double dx, double dy, double max_dist):
    cdef const unsigned char[:, :] view = occ
    return _cast(view, x, y, dx, dy, max_dist)


def raycast(occ, double x, double y, double angle, double max_dist):
    cdef const unsigned char[:, :] view = occ
    return _cast(view, x, y, cos(angle), sin(angle), max_dist)


def raycast_many(occ, double x, double y, angles, double max_dist):
    cdef const unsigned char[:, :] view = occ
    cdef double[:] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef Py_ssize_t n = ang.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] out_v = out
    cdef Py_ssize_t i
    for i in range(n):
        out_v[i] = _cast(view, x, y, cos(ang[i]), sin(ang[i]), max_dist)
    return out


def first_hit(occ, double x0, double y0, double x1, double y1):
    cdef const unsigned char[:, :] view = occ
    cdef double length = hypot(x1 - x0, y1 - y0)
    cdef Py_ssize_t ir, ic
    if length == 0.0:
        ir = <Py_ssize_t>floor(y0)
        ic = <Py_ssize_t>floor(x0)
        if 0 <= ir < view.shape[0] and 0 <= ic < view.shape[1] and not view[ir, ic]:
            return 1.0
        return 0.0
    return _cast(view, x0, y0, (x1 - x0) / length, (y1 - y0) / length, length) / length


def inflate(occ, double radius_cells):
    # Region distance: cell centers within radius of the occupied cell's
    # unit square (see _grid_py.inflation_offsets).
    if radius_cells < 0:
        raise ValueError("inflation radius must be >= 0")
    cdef const unsigned char[:, :] src = occ
    cdef Py_ssize_t rows = src.shape[0]
    cdef Py_ssize_t cols = src.shape[1]
    out = np.array(occ, dtype=np.uint8, copy=True)
    cdef unsigned char[:, :] dst = out
    cdef long r_int = <long>floor(radius_cells + 0.5)
    cdef double r_sq = radius_cells * radius_cells
    cdef double dx, dy
    cdef Py_ssize_t r, c
    cdef long dr, dc, nr, nc
    for r in range(rows):
        for c in range(cols):
            if not src[r, c]:
                continue
            for dr in range(-r_int, r_int + 1):
                for dc in range(-r_int, r_int + 1):
                    if dr == 0 and dc == 0:
                        continue
                    dy = abs(dr) - 0.5
                    if dy < 0:
                        dy = 0
                    dx = abs(dc) - 0.5
                    if dx < 0:
                        dx = 0
                    if dx * dx + dy * dy > r_sq:
                        continue
                    nr = r + dr
                    nc = c + dc
                    if 0 <= nr < rows and 0 <= nc < cols:
                        dst[nr, nc] = 1
    return out


cdef struct HeapItem:
    double f
    long order
    long idx


cdef inline bint _heap_less(HeapItem a, HeapItem b) noexcept:
    if a.f != b.f:
        return a.f < b.f
    return a.order < b.order


cdef void _heap_push(HeapItem* heap, Py_ssize_t* size, HeapItem item) noexcept:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t p
    heap[i] = item
    size[0] += 1
    while i > 0:
        p = (i - 1) >> 1
        if _heap_less(heap[i], heap[p]):
            heap[i], heap[p] = heap[p], heap[i]
            i = p
        else:
            break


cdef HeapItem _heap_pop(HeapItem* heap, Py_ssize_t* size) noexcept:
    cdef HeapItem top = heap[0]
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t child
    size[0] -= 1
    heap[0] = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and _heap_less(heap[child + 1], heap[child]):
            child += 1
        if _heap_less(heap[child], heap[i]):
            heap[i], heap[child] = heap[child], heap[i]
            i = child
        else:
            break
    return top


def astar(occ, long sr, long sc, long gr, long gc):
    cdef const unsigned char[:, :] view = occ
    cdef Py_ssize_t rows = view.shape[0]
    cdef Py_ssize_t cols = view.shape[1]

    if not (0 <= sr < rows and 0 <= sc < cols):
        raise ValueError(f"start cell ({sr}, {sc}) outside grid")
    if not (0 <= gr < rows and 0 <= gc < cols):
        raise ValueError(f"goal cell ({gr}, {gc}) outside grid")
    if view[sr, sc]:
        raise ValueError(f"start cell ({sr}, {sc}) is occupied")
    if view[gr, gc]:
        raise ValueError(f"goal cell ({gr}, {gc}) is occupied")

    if sr == gr and sc == gc:
        return 0.0, np.array([[sr, sc]], dtype=np.int32)

    cdef double SQRT2 = sqrt(2.0)
    cdef long[8] moves_r = [-1, 1, 0, 0, -1, -1, 1, 1]
    cdef long[8] moves_c = [0, 0, -1, 1, -1, 1, -1, 1]
    cdef double[8] moves_cost = [1.0, 1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2, SQRT2]

    g_arr = np.full(rows * cols, np.inf)
    parent_arr = np.full(rows * cols, -1, dtype=np.int64)
    closed_arr = np.zeros(rows * cols, dtype=np.uint8)
    cdef double[:] g = g_arr
    cdef long[:] parent = parent_arr
    cdef unsigned char[:] closed = closed_arr

    # Each cell is pushed at most 8 times (once per incoming edge).
    cdef Py_ssize_t cap = 8 * rows * cols + 8
    cdef HeapItem* heap = <HeapItem*>malloc(cap * sizeof(HeapItem))
    if heap == NULL:
        raise MemoryError("A* heap allocation failed")
    cdef Py_ssize_t heap_size = 0
    cdef long order = 0

    cdef long start_idx = sr * cols + sc
    cdef long goal_idx = gr * cols + gc
    cdef HeapItem item
    g[start_idx] = 0.0
    item.f = hypot(gr - sr, gc - sc)
    item.order = 0
    item.idx = start_idx
    _heap_push(heap, &heap_size, item)

    cdef long r, c, nr, nc, idx, nidx
    cdef double base, ng
    cdef int k

    try:
        while heap_size > 0:
            item = _heap_pop(heap, &heap_size)
            idx = item.idx
            if closed[idx]:
                continue
            closed[idx] = 1
            if idx == goal_idx:
                break
            r = idx // cols
            c = idx % cols
            base = g[idx]
            for k in range(8):
                nr = r + moves_r[k]
                nc = c + moves_c[k]
                if nr < 0 or nr >= rows or nc < 0 or nc >= cols:
                    continue
                if view[nr, nc]:
                    continue
                if moves_r[k] != 0 and moves_c[k] != 0:
                    if view[r + moves_r[k], c] or view[r, c + moves_c[k]]:
                        continue
                ng = base + moves_cost[k]
                nidx = nr * cols + nc
                if ng < g[nidx]:
                    g[nidx] = ng
                    parent[nidx] = idx
                    order += 1
                    item.f = ng + hypot(gr - nr, gc - nc)
                    item.order = order
                    item.idx = nidx
                    _heap_push(heap, &heap_size, item)
    finally:
        free(heap)

    if not closed[goal_idx]:
        return INFINITY, np.empty((0, 2), dtype=np.int32)

    cells = []
    idx = goal_idx
    while idx != start_idx:
        cells.append((idx // cols, idx % cols))
        idx = parent[idx]
    cells.append((sr, sc))
    cells.reverse()
    return float(g[goal_idx]), np.array(cells, dtype=np.int32)
