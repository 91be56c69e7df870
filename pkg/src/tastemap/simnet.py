"""User-similarity networks: thresholded Jaccard graphs and their metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import DataError, UndefinedMetric, UndefinedSimilarity
from .model import UserProfile
from .signatures import pearson


def _bits(profile) -> np.ndarray:
    return profile.bits if isinstance(profile, UserProfile) else np.asarray(profile)


def jaccard_score(u, v) -> float:
    """Jaccard index of two preference vectors' positive sets, times 100.

    Set membership is any nonzero entry, so binary and intensity vectors
    behave identically.  Two all-zero vectors have no defined score (0/0).
    """
    a, b = _bits(u) != 0, _bits(v) != 0
    if a.shape != b.shape:
        raise DataError("profiles have different feature counts")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        raise UndefinedSimilarity("both preference vectors are empty")
    return 100.0 * inter / union


@dataclass(frozen=True, eq=False)
class SimilarityNetwork:
    """Undirected, unweighted graph over users at one similarity threshold.

    ``edges`` are (i, j) index pairs into ``nodes`` with i < j, lexicographic.
    Isolated nodes are removed at construction and counted.
    """

    threshold: float
    nodes: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    attributes: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    isolated_removed: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def build_network(
    profiles: Sequence[UserProfile],
    threshold: float,
    attributes: Mapping[str, Mapping[str, str]] | None = None,
) -> SimilarityNetwork:
    """Connect every pair of users whose Jaccard score meets the threshold.

    Produces exactly the network that brute-force all-pairs comparison would:
    the inverted-index kernel only skips pairs that share no feature, which
    cannot reach a positive threshold, and a zero threshold falls back to the
    dense path where zero-score pairs are kept.
    """
    if not profiles:
        raise DataError("cannot build a network from zero profiles")
    if not 0.0 <= threshold <= 100.0:
        raise DataError("threshold must lie in [0, 100]")
    ordered = sorted(profiles, key=lambda p: p.user_id)
    ids = [p.user_id for p in ordered]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate user ids in profiles")
    bits = np.stack([p.bits != 0 for p in ordered]).astype(np.uint8)

    us, vs = _kernels.jaccard_edges(bits, threshold)

    degree = np.zeros(len(ids), np.int64)
    np.add.at(degree, us, 1)
    np.add.at(degree, vs, 1)
    keep = degree > 0
    remap = np.cumsum(keep) - 1
    nodes = tuple(u for u, k in zip(ids, keep) if k)
    edges = tuple(zip(remap[us].tolist(), remap[vs].tolist()))

    attrs: dict[str, dict[str, str]] = {}
    for idx, p in enumerate(ordered):
        if not keep[idx]:
            continue
        node_attrs: dict[str, str] = {}
        if p.home_country is not None:
            node_attrs["country"] = p.home_country
        if attributes and p.user_id in attributes:
            node_attrs.update(attributes[p.user_id])
        attrs[p.user_id] = node_attrs

    return SimilarityNetwork(
        threshold=float(threshold),
        nodes=nodes,
        edges=edges,
        attributes=attrs,
        isolated_removed=int((~keep).sum()),
    )


def component_sizes(net: SimilarityNetwork) -> list[int]:
    """Connected-component sizes, largest first."""
    n = net.n_nodes
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in net.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    sizes: dict[int, int] = {}
    for i in range(n):
        root = find(i)
        sizes[root] = sizes.get(root, 0) + 1
    return sorted(sizes.values(), reverse=True)


def largest_component_fractions(net: SimilarityNetwork) -> tuple[float, float]:
    """Fractions of nodes in the largest and second-largest components."""
    sizes = component_sizes(net)
    if not sizes:
        return 0.0, 0.0
    first = sizes[0] / net.n_nodes
    second = sizes[1] / net.n_nodes if len(sizes) > 1 else 0.0
    return first, second


def categorical_assortativity(net: SimilarityNetwork, attribute_key: str) -> float:
    """Newman's discrete assortativity over one node attribute.

    r = (sum_i e_ii - sum_i a_i b_i) / (1 - sum_i a_i b_i), with e the edge
    mixing matrix (each undirected edge counted once in each direction) and
    a, b its marginals.  A network whose nodes all share one value has no
    defined coefficient, and neither does an edgeless network.
    """
    if net.n_edges == 0:
        raise UndefinedMetric("assortativity needs at least one edge")
    try:
        values = [net.attributes[u][attribute_key] for u in net.nodes]
    except KeyError:
        raise DataError(f"attribute {attribute_key!r} missing on some node") from None
    levels = sorted(set(values))
    level_of = {v: i for i, v in enumerate(levels)}
    coded = [level_of[v] for v in values]
    e = np.zeros((len(levels), len(levels)), np.float64)
    for i, j in net.edges:
        e[coded[i], coded[j]] += 1.0
        e[coded[j], coded[i]] += 1.0
    e /= 2.0 * net.n_edges
    a = e.sum(axis=1)
    b = e.sum(axis=0)
    sab = float(a @ b)
    if 1.0 - sab <= 0.0:
        raise UndefinedMetric("all nodes share one attribute value")
    return float((np.trace(e) - sab) / (1.0 - sab))


def degree_assortativity(net: SimilarityNetwork) -> float:
    """Pearson correlation of the degrees at the two ends of each edge.

    Both orientations of every edge are included.  Degree-regular networks
    (cliques, cycles) have zero variance and no defined coefficient.
    """
    if net.n_edges == 0:
        raise UndefinedMetric("degree assortativity needs at least one edge")
    deg = net.degrees()
    us = np.fromiter((i for i, _ in net.edges), np.int64, net.n_edges)
    vs = np.fromiter((j for _, j in net.edges), np.int64, net.n_edges)
    x = np.concatenate([deg[us], deg[vs]]).astype(np.float64)
    y = np.concatenate([deg[vs], deg[us]]).astype(np.float64)
    return pearson(x, y)


def write_edge_list(net: SimilarityNetwork, path: str | Path) -> None:
    """Tab-separated ``u<TAB>v`` lines in deterministic order."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in net.edges:
            fh.write(f"{net.nodes[i]}\t{net.nodes[j]}\n")


def write_node_attributes(net: SimilarityNetwork, path: str | Path) -> None:
    """CSV of node ids and whatever attributes the nodes carry."""
    keys = sorted({k for attrs in net.attributes.values() for k in attrs})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user", *keys])
        for u in net.nodes:
            attrs = net.attributes.get(u, {})
            writer.writerow([u, *(attrs.get(k, "") for k in keys)])
