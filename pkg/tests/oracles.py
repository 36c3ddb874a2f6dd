"""Independent reference implementations used to check the package.

Everything here is deliberately written from scratch against the same
mathematical definitions (brute force where possible) and must not call into
the chatnav modules it is used to verify.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def dijkstra_cost(occ, start, goal):
    """Optimal 8-connected path cost as (straight_steps, diag_steps).

    Same movement semantics as the planner: unit straight cost, sqrt(2)
    diagonals, no corner cutting.  Returns None when unreachable.  The
    (straight, diag) pair identifies the cost exactly: a + b*sqrt(2) values
    coincide only for identical integer pairs.
    """
    rows, cols = occ.shape
    if occ[start] or occ[goal]:
        raise ValueError("start/goal occupied")
    best = {start: (0.0, 0, 0)}
    heap = [(0.0, 0, 0, start)]
    done = set()
    while heap:
        d, ns, nd, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell == goal:
            return ns, nd
        r, c = cell
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < rows and 0 <= nc < cols) or occ[nr, nc]:
                    continue
                diag = dr != 0 and dc != 0
                if diag and (occ[r + dr, c] or occ[r, c + dc]):
                    continue
                nd2 = d + (SQRT2 if diag else 1.0)
                prev = best.get((nr, nc))
                if prev is None or nd2 < prev[0]:
                    step = (ns, nd + 1) if diag else (ns + 1, nd)
                    best[(nr, nc)] = (nd2, *step)
                    heapq.heappush(heap, (nd2, *step, (nr, nc)))
    return None


def path_step_counts(cells):
    """(straight, diag) step counts of a cell path; validates 8-adjacency."""
    straight = diag = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        dr, dc = abs(r1 - r0), abs(c1 - c0)
        assert max(dr, dc) == 1, f"non-adjacent step ({r0},{c0})->({r1},{c1})"
        if dr and dc:
            diag += 1
        else:
            straight += 1
    return straight, diag


def brute_force_inflate(occ, radius_cells):
    """O(n^2) pairwise inflation: a free cell becomes occupied when its
    center is within the radius of any occupied cell's unit square."""
    rows, cols = occ.shape
    occupied = [(r, c) for r in range(rows) for c in range(cols) if occ[r, c]]
    out = occ.copy()
    for r in range(rows):
        for c in range(cols):
            if out[r, c]:
                continue
            for orr, occ_c in occupied:
                dy = max(0.0, abs(r - orr) - 0.5)
                dx = max(0.0, abs(c - occ_c) - 0.5)
                if dx * dx + dy * dy <= radius_cells * radius_cells:
                    out[r, c] = 1
                    break
    return out


def se2_compose(pose, bearing, rng):
    """Robot pose composed with a (bearing, range) observation, via an
    explicit rotation matrix."""
    x, y, theta = pose
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    local = np.array([rng * math.cos(bearing), rng * math.sin(bearing)])
    world = rot @ local + np.array([x, y])
    return float(world[0]), float(world[1])


def argmax_linear_scan(scores):
    """First index of the maximum value, by plain linear scan."""
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


def mc_argmax_accuracy(label_vectors, sigma, trials, seed):
    """Monte-Carlo accuracy of noisy-argmax recognition, written directly
    against the definition (noise + renormalize + dot products + argmax)."""
    rng = np.random.default_rng(seed)
    mat = np.stack(label_vectors)
    n, dim = mat.shape
    hits = 0
    for i in range(trials):
        k = i % n
        noisy = mat[k] + rng.normal(0.0, sigma, dim)
        norm = np.linalg.norm(noisy)
        if norm > 0:
            noisy = noisy / norm
        scores = [float(np.dot(noisy, mat[j])) for j in range(n)]
        hits += int(argmax_linear_scan(scores) == k)
    return hits / trials


def segment_wall_hit(x0, y0, dx, dy, wall_x):
    """Analytic distance from (x0, y0) along unit (dx, dy) to the vertical
    line x = wall_x (for the collision-clamp check)."""
    if dx == 0:
        return math.inf
    t = (wall_x - x0) / dx
    return t if t >= 0 else math.inf
