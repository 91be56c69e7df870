#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Run as ``python benchmarks/bench_kernels.py``.  First numba calls include
JIT compilation, so each kernel is warmed once before timing.
"""

import time

import numpy as np

from tastemap import _kernels


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jaccard(n_users=3000, m=101, density=0.08, threshold=65.0, seed=0):
    rng = np.random.default_rng(seed)
    bits = (rng.random((n_users, m)) < density).astype(np.uint8)
    rows = [("numpy", _time(_kernels.jaccard_edges_numpy, bits, threshold))]
    if _kernels.HAVE_NUMBA:
        _kernels.jaccard_edges_numba(bits[:50], threshold)  # warm the JIT
        rows.append(("numba", _time(_kernels.jaccard_edges_numba, bits, threshold)))
    n_edges = len(_kernels.jaccard_edges_numpy(bits, threshold)[0])
    print(f"jaccard pair scoring: {n_users} users x {m} features, "
          f"threshold {threshold:g}, {n_edges} edges")
    _report(rows)


def bench_point_in_polygon(n_points=200_000, n_countries=25, ring_vertices=64, seed=0):
    rng = np.random.default_rng(seed)
    xs, ys, country, boxes = [], [], [], []
    for c in range(n_countries):
        cx, cy = rng.uniform(-150, 150), rng.uniform(-60, 60)
        ang = np.linspace(0, 2 * np.pi, ring_vertices, endpoint=False)
        radius = rng.uniform(2.0, 8.0)
        rx = cx + radius * np.cos(ang)
        ry = cy + radius * np.sin(ang)
        rx = np.append(rx, rx[0])
        ry = np.append(ry, ry[0])
        xs.append(rx)
        ys.append(ry)
        country.append(c)
        boxes.append((rx.min(), ry.min(), rx.max(), ry.max()))
    ring_x = np.concatenate(xs)
    ring_y = np.concatenate(ys)
    indptr = np.zeros(n_countries + 1, np.int64)
    np.cumsum([len(r) for r in xs], out=indptr[1:])
    ring_country = np.asarray(country, np.int64)
    ring_bbox = np.asarray(boxes, np.float64)
    px = rng.uniform(-180, 180, n_points)
    py = rng.uniform(-90, 90, n_points)
    args = (px, py, ring_x, ring_y, indptr, ring_country, ring_bbox)

    rows = [("numpy", _time(_kernels.assign_countries_numpy, *args))]
    if _kernels.HAVE_NUMBA:
        _kernels.assign_countries_numba(px[:100], py[:100], *args[2:])  # warm the JIT
        rows.append(("numba", _time(_kernels.assign_countries_numba, *args)))
    hits = int((_kernels.assign_countries_numpy(*args) >= 0).sum())
    print(f"point-in-polygon: {n_points} points x {n_countries} rings, {hits} resolved")
    _report(rows)


def _report(rows):
    base = rows[0][1]
    for name, secs in rows:
        speedup = base / secs if secs > 0 else float("inf")
        print(f"  {name:>6}: {secs * 1e3:9.2f} ms   ({speedup:5.2f}x vs numpy)")
    print()


if __name__ == "__main__":
    print(f"numba available: {_kernels.HAVE_NUMBA}, enabled: {_kernels.NUMBA_ENABLED}\n")
    bench_jaccard()
    bench_point_in_polygon()
