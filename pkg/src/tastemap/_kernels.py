"""Hot numeric kernels with numba fast paths and pure-numpy fallbacks.

Two inner loops dominate pipeline runtime: scoring candidate user pairs when
building similarity networks, and ray-casting check-in coordinates against
country polygons.  Both ship in two functionally identical implementations:

* a numba ``@njit`` version (default when numba imports cleanly), and
* a vectorized numpy version.

Set ``TASTEMAP_NUMBA=0`` in the environment to force the numpy path.
``benchmarks/bench_kernels.py`` times the two side by side.
"""

from __future__ import annotations

import os

import numpy as np


def _env_wants_numba() -> bool:
    return os.environ.get("TASTEMAP_NUMBA", "1").strip().lower() not in {"0", "false", "no", "off"}


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


NUMBA_ENABLED = HAVE_NUMBA and _env_wants_numba()


# ---------------------------------------------------------------------------
# Jaccard pair scoring
#
# The threshold test is done as 100*inter >= threshold*union.  All quantities
# are small integers, exactly representable in float64, so the comparison is
# exact for integer thresholds (no 100*13/20 != 65 surprises).
# ---------------------------------------------------------------------------


def _profile_csr(bits: np.ndarray):
    """Row-wise CSR of set features plus the feature->users inverted index."""
    bits = np.ascontiguousarray(bits)
    n, m = bits.shape
    pops = bits.astype(bool).sum(axis=1).astype(np.int64)
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(pops, out=indptr[1:])
    rows, cols = np.nonzero(bits)
    indices = cols.astype(np.int64)
    order = np.lexsort((rows, cols))
    inv_indices = rows[order].astype(np.int64)
    inv_indptr = np.zeros(m + 1, np.int64)
    np.cumsum(np.bincount(cols, minlength=m), out=inv_indptr[1:])
    return indices, indptr, inv_indices, inv_indptr, pops


@njit(cache=True)
def _jaccard_edges_core(indices, indptr, inv_indices, inv_indptr, pops, threshold):
    n = indptr.shape[0] - 1
    shared = np.zeros(n, np.int64)
    touched = np.empty(n, np.int64)
    cap = 4096
    us = np.empty(cap, np.int64)
    vs = np.empty(cap, np.int64)
    cnt = 0
    for u in range(n):
        ntouch = 0
        for p in range(indptr[u], indptr[u + 1]):
            f = indices[p]
            for q in range(inv_indptr[f], inv_indptr[f + 1]):
                v = inv_indices[q]
                if v > u:
                    if shared[v] == 0:
                        touched[ntouch] = v
                        ntouch += 1
                    shared[v] += 1
        cand = np.sort(touched[:ntouch])
        for c in range(cand.shape[0]):
            v = cand[c]
            inter = shared[v]
            union = pops[u] + pops[v] - inter
            if 100.0 * inter >= threshold * union:
                if cnt == cap:
                    cap *= 2
                    nus = np.empty(cap, np.int64)
                    nus[:cnt] = us
                    us = nus
                    nvs = np.empty(cap, np.int64)
                    nvs[:cnt] = vs
                    vs = nvs
                us[cnt] = u
                vs[cnt] = v
                cnt += 1
            shared[v] = 0
    return us[:cnt], vs[:cnt]


def jaccard_edges_numba(bits: np.ndarray, threshold: float):
    """Inverted-index pair scoring; exact for threshold > 0 (zero-score pairs
    share no feature and cannot reach a positive threshold)."""
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    if threshold <= 0:
        raise ValueError("inverted-index kernel requires a positive threshold")
    indices, indptr, inv_indices, inv_indptr, pops = _profile_csr(bits)
    return _jaccard_edges_core(indices, indptr, inv_indices, inv_indptr, pops, float(threshold))


def jaccard_edges_numpy(bits: np.ndarray, threshold: float):
    """Dense all-pairs scoring, valid for any threshold >= 0.  Quadratic
    memory in the user count; fine up to a few thousand users."""
    mat = np.asarray(bits, dtype=np.int64)
    inter = mat @ mat.T
    pops = mat.astype(bool).sum(axis=1).astype(np.int64)
    union = pops[:, None] + pops[None, :] - inter
    iu, ju = np.triu_indices(mat.shape[0], k=1)
    inter_p = inter[iu, ju]
    union_p = union[iu, ju]
    ok = (union_p > 0) & (100.0 * inter_p >= float(threshold) * union_p)
    return iu[ok].astype(np.int64), ju[ok].astype(np.int64)


def jaccard_edges(bits: np.ndarray, threshold: float):
    """All index pairs (i < j), lexicographic, whose Jaccard score (x100)
    meets the threshold.  Pairs with an empty union never qualify."""
    if NUMBA_ENABLED and threshold > 0:
        return jaccard_edges_numba(bits, threshold)
    return jaccard_edges_numpy(bits, threshold)


# ---------------------------------------------------------------------------
# Point-in-polygon country assignment
#
# Rings are stored closed (last vertex == first) and concatenated into flat
# arrays.  A point on a ring edge counts as inside.  Rings are tried in file
# order; the first containing ring wins.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ring_contains(x, y, ring_x, ring_y, lo, hi):
    inside = False
    for k in range(lo, hi - 1):
        x1 = ring_x[k]
        y1 = ring_y[k]
        x2 = ring_x[k + 1]
        y2 = ring_y[k + 1]
        cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if cross == 0.0:
            if min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2):
                return True
        if (y1 > y) != (y2 > y):
            x_hit = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_hit:
                inside = not inside
    return inside


@njit(cache=True)
def _assign_countries_core(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox):
    out = np.full(px.shape[0], -1, np.int64)
    n_rings = ring_country.shape[0]
    for i in range(px.shape[0]):
        x = px[i]
        y = py[i]
        for r in range(n_rings):
            if (
                x < ring_bbox[r, 0]
                or y < ring_bbox[r, 1]
                or x > ring_bbox[r, 2]
                or y > ring_bbox[r, 3]
            ):
                continue
            if _ring_contains(x, y, ring_x, ring_y, ring_indptr[r], ring_indptr[r + 1]):
                out[i] = ring_country[r]
                break
    return out


def assign_countries_numba(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox):
    if not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    return _assign_countries_core(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox)


def _ring_contains_numpy(px, py, rx, ry):
    x1, y1 = rx[:-1][None, :], ry[:-1][None, :]
    x2, y2 = rx[1:][None, :], ry[1:][None, :]
    x, y = px[:, None], py[:, None]
    cross = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
    on_edge = (
        (cross == 0.0)
        & (x >= np.minimum(x1, x2))
        & (x <= np.maximum(x1, x2))
        & (y >= np.minimum(y1, y2))
        & (y <= np.maximum(y1, y2))
    )
    straddles = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hit = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crossings = (straddles & (x < x_hit)).sum(axis=1)
    return on_edge.any(axis=1) | ((crossings % 2) == 1)


def assign_countries_numpy(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox):
    out = np.full(px.shape[0], -1, np.int64)
    for r in range(ring_country.shape[0]):
        pending = out == -1
        if not pending.any():
            break
        in_box = (
            pending
            & (px >= ring_bbox[r, 0])
            & (py >= ring_bbox[r, 1])
            & (px <= ring_bbox[r, 2])
            & (py <= ring_bbox[r, 3])
        )
        if not in_box.any():
            continue
        idx = np.nonzero(in_box)[0]
        lo, hi = ring_indptr[r], ring_indptr[r + 1]
        hit = _ring_contains_numpy(px[idx], py[idx], ring_x[lo:hi], ring_y[lo:hi])
        out[idx[hit]] = ring_country[r]
    return out


def assign_countries(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox):
    """Country index per point (-1 where no ring contains the point)."""
    if NUMBA_ENABLED:
        return assign_countries_numba(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox)
    return assign_countries_numpy(px, py, ring_x, ring_y, ring_indptr, ring_country, ring_bbox)
