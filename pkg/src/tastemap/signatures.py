"""Spatial correlations, temporal curves, spatio-temporal vectors, entropy.

The spatio-temporal signature of an area has 8 entries per subcategory: the
day is split into the four 6-hour periods [0,6), [6,12), [12,18), [18,24)
and counted separately for weekdays and weekends.  Layout is subcategory-
major, weekday block before weekend block, periods in order, i.e. the entry
for (subcategory s, weekend w, hour h) sits at ``s*8 + w*4 + h//6``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyAreaError, UndefinedMetric
from .ingest import Corpus, area_mask
from .model import Area, AreaSignature, Taxonomy, class_slice
from .prefs import area_counts_matrix, region_counts

DAY_GROUPS = ("weekday", "weekend")
PERIODS_PER_DAY = 4
SLOTS_PER_SUBCATEGORY = PERIODS_PER_DAY * len(DAY_GROUPS)


def pearson(x, y) -> float:
    """Product-moment correlation; undefined when either input is constant."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("inputs must be equal-length vectors")
    if x.size < 2:
        raise DataError("correlation needs at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetric("constant vector has no defined correlation")
    r = float(xc @ yc) / np.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, r)))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Pairwise area correlations; entries are NaN where undefined."""

    labels: tuple[str, ...]
    values: np.ndarray
    scope: str


def correlation_matrix(
    signatures: Sequence[AreaSignature], taxonomy: Taxonomy, scope: str = "all"
) -> CorrelationMatrix:
    """Pearson correlation between every pair of area signatures.

    ``scope`` restricts the comparison to one class's feature block; "all"
    uses the full vector.  Degenerate (constant) pairs are marked NaN rather
    than dropped, so the matrix shape is stable.
    """
    if len(signatures) < 2:
        raise DataError("need at least two signatures to correlate")
    if scope == "all":
        vectors = [sig.normalized for sig in signatures]
    else:
        vectors = [class_slice(taxonomy, sig, scope) for sig in signatures]
    k = len(signatures)
    values = np.full((k, k), np.nan)
    for i in range(k):
        if np.ptp(vectors[i]) > 0:
            values[i, i] = 1.0
        for j in range(i + 1, k):
            try:
                values[i, j] = values[j, i] = pearson(vectors[i], vectors[j])
            except UndefinedMetric:
                pass
    return CorrelationMatrix(
        labels=tuple(sig.area_id for sig in signatures), values=values, scope=scope
    )


def write_matrix_csv(matrix: CorrelationMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["area", *matrix.labels])
        for label, row in zip(matrix.labels, matrix.values):
            writer.writerow([label, *("" if np.isnan(v) else repr(float(v)) for v in row)])


@dataclass(frozen=True, eq=False)
class TemporalSeries:
    """Hourly check-in curve for one (area, class, day group), peak-normalized."""

    area_id: str
    class_id: str
    day_group: str
    bins: np.ndarray


def temporal_series(
    corpus: Corpus,
    area: Area,
    class_id: str,
    day_group: str,
    checkin_countries: np.ndarray | None = None,
) -> TemporalSeries:
    """Check-ins per local hour, divided by the busiest hour of this series.

    Weekend means Saturday or Sunday.  An empty series stays all-zero.
    """
    if day_group not in DAY_GROUPS:
        raise DataError(f"day_group must be one of {DAY_GROUPS}")
    lo, hi = corpus.taxonomy.class_ranges.get(class_id, (None, None))
    if lo is None:
        raise DataError(f"unknown class id: {class_id!r}")
    mask = (
        area_mask(corpus, area, checkin_countries)
        & (corpus.subcat_idx >= lo)
        & (corpus.subcat_idx < hi)
        & (corpus.is_weekend == (day_group == "weekend"))
    )
    counts = np.bincount(corpus.hour[mask], minlength=24).astype(np.float64)
    peak = counts.max()
    if peak > 0:
        counts /= peak
    return TemporalSeries(area_id=area.area_id, class_id=class_id, day_group=day_group, bins=counts)


def spatiotemporal_index(subcat_index: int, is_weekend: bool, hour: int) -> int:
    """Flat position of one (subcategory, day group, hour) observation."""
    return subcat_index * SLOTS_PER_SUBCATEGORY + (4 if is_weekend else 0) + hour // 6


def spatiotemporal_vector(
    corpus: Corpus, area: Area, checkin_countries: np.ndarray | None = None
) -> AreaSignature:
    """The 8*m-dimensional signature of an area (808 for the m=101 taxonomy).

    A single maximum normalizes the whole flattened vector, mirroring the
    spatial rule on the enlarged feature set.
    """
    m = corpus.taxonomy.m
    mask = area_mask(corpus, area, checkin_countries)
    flat = (
        corpus.subcat_idx[mask] * SLOTS_PER_SUBCATEGORY
        + np.where(corpus.is_weekend[mask], 4, 0)
        + corpus.hour[mask] // 6
    )
    counts = np.bincount(flat, minlength=m * SLOTS_PER_SUBCATEGORY).astype(np.int64)
    peak = counts.max() if counts.size else 0
    if peak == 0:
        raise EmptyAreaError(f"area {area.area_id!r} has no check-ins")
    return AreaSignature(
        area_id=area.area_id,
        raw_counts=counts,
        normalized=counts / float(peak),
        variant=f"spatiotemporal_{m * SLOTS_PER_SUBCATEGORY}",
    )


def class_period_indices(taxonomy: Taxonomy, class_id: str, day_group: str) -> np.ndarray:
    """Positions of one class x day-group block inside the flattened layout
    (all four periods, every subcategory of the class)."""
    if day_group not in DAY_GROUPS:
        raise DataError(f"day_group must be one of {DAY_GROUPS}")
    lo, hi = taxonomy.class_ranges.get(class_id, (None, None))
    if lo is None:
        raise DataError(f"unknown class id: {class_id!r}")
    base = 4 if day_group == "weekend" else 0
    return np.array(
        [s * SLOTS_PER_SUBCATEGORY + base + p for s in range(lo, hi) for p in range(4)],
        np.int64,
    )


def subcategory_entropy(
    corpus: Corpus,
    subcategory: str,
    areas: Sequence[Area],
    checkin_countries: np.ndarray | None = None,
) -> float:
    """Shannon entropy (bits) of one subcategory's check-ins over areas.

    Low entropy means the subcategory concentrates in few areas; the maximum,
    log2(number of areas with activity), is reached by a uniform spread.
    """
    i = corpus.taxonomy.index_of(subcategory)
    column = np.array(
        [region_counts(corpus, area, checkin_countries)[i] for area in areas], np.float64
    )
    return _entropy_bits(column)


def _entropy_bits(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0:
        raise UndefinedMetric("no check-ins at this subcategory in any area")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class EntropySummary:
    class_id: str
    level: str
    n_subcategories: int
    mean: float | None
    sigma: float | None


def entropy_summary(
    corpus: Corpus,
    areas: Sequence[Area],
    checkin_countries: np.ndarray | None = None,
) -> list[EntropySummary]:
    """Mean and population standard deviation of subcategory entropies,
    per class, at the granularity the areas define."""
    if not areas:
        raise DataError("need at least one area")
    level = areas[0].kind
    matrix = area_counts_matrix(corpus, areas, checkin_countries)
    rows = []
    for class_id in corpus.taxonomy.class_ids:
        lo, hi = corpus.taxonomy.class_ranges[class_id]
        entropies = []
        for i in range(lo, hi):
            column = matrix[:, i].astype(np.float64)
            if column.sum() > 0:
                entropies.append(_entropy_bits(column))
        if entropies:
            arr = np.asarray(entropies)
            rows.append(
                EntropySummary(class_id, level, len(entropies), float(arr.mean()), float(arr.std()))
            )
        else:
            rows.append(EntropySummary(class_id, level, 0, None, None))
    return rows
