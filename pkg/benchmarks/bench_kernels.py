#!/usr/bin/env python3
"""Benchmark: compiled grid kernels vs the pure-Python fallback.

Runs the three hot kernels on the shipped office map:
  * raycast_many - the 90-ray scan cast every simulation tick
  * astar        - path planning across the map
  * inflate      - obstacle growth at the robot footprint radius

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from chatnav import kernels
from chatnav.runtime import data_path
from chatnav.world import load_world


def timeit(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    world = load_world(data_path("office_18x20.world"))
    occ = world.grid.occupied
    res = world.grid.resolution
    cx, cy = world.grid.to_cell_coords(world.robot.x, world.robot.y)
    angles = np.linspace(-math.pi, math.pi, 90, endpoint=False)
    max_cells = 10.0 / res

    inflated = kernels.inflate(occ, 0.3 / res)
    rng = np.random.default_rng(1)
    free = np.argwhere(inflated == 0)
    pairs = [tuple(map(int, free[i])) + tuple(map(int, free[j]))
             for i, j in rng.choice(len(free), size=(20, 2))]

    cases = {
        "raycast_many (90 rays x 100)": lambda impl: [
            impl.raycast_many(occ, cx, cy, angles, max_cells) for _ in range(100)],
        "astar (20 random pairs)": lambda impl: [
            impl.astar(inflated, sr, sc, gr, gc) for sr, sc, gr, gc in pairs],
        "inflate (180x200, r=3)": lambda impl: impl.inflate(occ, 0.3 / res),
    }

    impls = [("pure", kernels.pure)]
    if kernels.USING_COMPILED:
        impls.insert(0, ("compiled", kernels))
    else:
        print("note: compiled kernels not built; benchmarking the fallback only")

    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name, _ in impls)
          + ("     speedup" if len(impls) == 2 else ""))
    for case, runner in cases.items():
        times = [timeit(lambda impl=impl: runner(impl), args.repeats)
                 for _, impl in impls]
        row = f"{case:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2 and times[0] > 0:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
