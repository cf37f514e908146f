#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Runs the three hot passes (MLS projection, normal estimation, variation
map) on synthetic workpieces of increasing size and prints a timing table
plus speedups. Usage:

    python3 benchmarks/bench_kernels.py [--sizes 20000 80000 260000] [--threads N]
"""

import argparse
import time

import numpy as np

from groovekit import (
    WorkpieceSpec,
    all_radius_neighbors,
    build_index,
    kernels,
)


def make_cloud(target_points: int):
    side = (target_points / 0.75) ** 0.5 * 0.001  # length/width ratio 0.75
    spec = WorkpieceSpec(shape="straight-line", length=side, width=0.75 * side,
                         pitch=0.001, noise_sigma=0.0003, seed=0)
    from groovekit import generate_workpiece

    return generate_workpiece(spec).cloud


def time_call(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_size(n_points: int, threads: int, backends):
    cloud = make_cloud(n_points)
    n = len(cloud)
    index = build_index(cloud)
    r_mls, r_small = 0.006, 0.004
    csr_mls = all_radius_neighbors(index, r_mls)
    csr_small = all_radius_neighbors(index, r_small)

    rows = {}
    for backend in backends:
        with kernels.use_backend(backend):
            out = np.empty((n, 3))
            deg = np.zeros(n, np.uint8)
            t_mls = time_call(lambda: kernels.run_ranges(
                n, threads, lambda s, e: kernels.mls_pass(
                    cloud.points, *csr_mls, r_mls, 2, out, deg, s, e)))

            normals = np.zeros((n, 3))
            t_nrm = time_call(lambda: kernels.run_ranges(
                n, threads, lambda s, e: kernels.normal_pass(
                    cloud.points, *csr_small, np.asarray(cloud.viewpoint), normals, deg, s, e)))

            bad = np.linalg.norm(normals, axis=1) < 0.5
            normals[bad] = (0.0, 0.0, 1.0)
            ub = normals.sum(axis=0)
            ub /= np.linalg.norm(ub)
            sl, sg, d = np.zeros(n), np.zeros(n), np.zeros(n)
            flag = np.zeros(n, np.uint8)
            t_var = time_call(lambda: kernels.run_ranges(
                n, threads, lambda s, e: kernels.variation_pass(
                    normals, ub, *csr_small, sl, sg, d, flag, s, e)))
        rows[backend] = (t_mls, t_nrm, t_var)
    return n, csr_mls[1].size, rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[20_000, 80_000, 260_000])
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}   threads: {args.threads}")
    header = f"{'points':>9} {'pairs':>10} {'pass':>14}"
    for b in backends:
        header += f" {b:>10}"
    if len(backends) == 2:
        header += f" {'speedup':>8}"
    print(header)
    for size in args.sizes:
        n, pairs, rows = bench_size(size, args.threads, backends)
        for i, name in enumerate(("mls", "normals", "variation")):
            line = f"{n if i == 0 else '':>9} {pairs if i == 0 else '':>10} {name:>14}"
            for b in backends:
                line += f" {rows[b][i]:>9.3f}s"
            if len(backends) == 2:
                ratio = rows["python"][i] / max(rows["compiled"][i], 1e-12)
                line += f" {ratio:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()
