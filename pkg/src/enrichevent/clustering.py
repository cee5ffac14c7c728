"""HDBSCAN over per-frame entity feature vectors.

Exact O(k^2) implementation: core distances, mutual reachability, Kruskal
MST, single-linkage hierarchy, condensed tree, excess-of-mass (or leaf)
cluster selection. Frames hold tens to a few hundred entities, so no
spatial index is used.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Entity
from .enrichment import SimilarityFeatures

NOISE = -1


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        self.parent[self.find(b)] = self.find(a)


def _validate(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite coordinates")
    return pts


def pairwise_distances(points) -> np.ndarray:
    pts = _validate(points)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    # exact zeros on the diagonal and exact symmetry
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return dist


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its ``min_samples``-th nearest other point."""
    n = dist.shape[0]
    if n <= 1:
        return np.zeros(n)
    kth = min(min_samples, n - 1)
    return np.sort(dist, axis=1)[:, kth]


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def minimum_spanning_tree(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Kruskal MST of a dense symmetric weight matrix.

    Edges are considered in (weight, i, j) order with i < j, which fixes the
    tree when weights tie. Returned edges are in that same order.
    """
    n = weights.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    w = weights[iu, ju]
    order = np.lexsort((ju, iu, w))
    uf = _UnionFind(n)
    edges = []
    for e in order:
        a, b = int(iu[e]), int(ju[e])
        if uf.find(a) != uf.find(b):
            uf.union(a, b)
            edges.append((a, b, float(w[e])))
            if len(edges) == n - 1:
                break
    return edges


def single_linkage(mst: Sequence[tuple[int, int, float]], n: int) -> np.ndarray:
    """Linkage matrix (left, right, distance, size) from MST edges sorted by weight.

    Row r creates node ``n + r``; leaves are 0..n-1.
    """
    uf = _UnionFind(n)
    node_of = list(range(n))
    size = [1] * (2 * n - 1)
    rows = np.zeros((max(n - 1, 0), 4))
    for r, (a, b, w) in enumerate(mst):
        ra, rb = uf.find(a), uf.find(b)
        left, right = node_of[ra], node_of[rb]
        new = n + r
        size[new] = size[left] + size[right]
        rows[r] = (left, right, w, size[new])
        uf.union(ra, rb)
        node_of[uf.find(ra)] = new
    return rows


@dataclass(frozen=True)
class CondensedRow:
    parent: int
    child: int
    lambda_val: float
    size: int


def _lambda(distance: float) -> float:
    return math.inf if distance <= 0.0 else 1.0 / distance


def _leaves(linkage: np.ndarray, node: int, n: int) -> list[int]:
    out, stack = [], [node]
    while stack:
        x = stack.pop()
        if x < n:
            out.append(x)
        else:
            row = linkage[x - n]
            stack.append(int(row[1]))
            stack.append(int(row[0]))
    return out


def condense_tree(linkage: np.ndarray, n: int, min_cluster_size: int) -> list[CondensedRow]:
    """Collapse the single-linkage tree into clusters of at least ``min_cluster_size``.

    Condensed cluster ids start at ``n`` (the root). A split with two or more
    large enough parts creates a child cluster for each of them; points in
    smaller parts leave the parent at that lambda.
    """
    if n < 2:
        return []

    def node_size(x):
        return 1 if x < n else int(linkage[x - n, 3])

    root = 2 * n - 2
    label = {root: n}
    next_label = n + 1
    out: list[CondensedRow] = []
    queue = [root]
    while queue:
        node = queue.pop(0)
        dist = float(linkage[node - n, 2])
        lam = _lambda(dist)
        parent = label[node]
        # merges at the same height form one multi-way split, so the result
        # does not depend on how tied edges were ordered in the MST
        parts, stack = [], [node]
        while stack:
            x = stack.pop()
            if x >= n and float(linkage[x - n, 2]) == dist:
                stack.append(int(linkage[x - n, 1]))
                stack.append(int(linkage[x - n, 0]))
            else:
                parts.append(x)
        big = [c for c in parts if node_size(c) >= min_cluster_size]
        for child in parts:
            if child in big and len(big) > 1:
                label[child] = next_label
                out.append(CondensedRow(parent, next_label, lam, node_size(child)))
                next_label += 1
            elif child in big:
                label[child] = parent
            else:
                for leaf in _leaves(linkage, child, n):
                    out.append(CondensedRow(parent, leaf, lam, 1))
                continue
            if child >= n:
                queue.append(child)
    return out


def _span(lam: float, birth: float) -> float:
    if lam == birth:
        return 0.0
    return lam - birth


def compute_stability(condensed: Sequence[CondensedRow], n: int) -> dict[int, float]:
    birth = {n: 0.0}
    for row in condensed:
        if row.child >= n:
            birth[row.child] = row.lambda_val
    stability = {c: 0.0 for c in birth}
    for row in condensed:
        stability[row.parent] += _span(row.lambda_val, birth[row.parent]) * row.size
    return stability


def _cluster_children(condensed, n):
    children: dict[int, list[int]] = {}
    for row in condensed:
        if row.child >= n:
            children.setdefault(row.parent, []).append(row.child)
    return children


def select_clusters(
    condensed: Sequence[CondensedRow],
    n: int,
    method: str = "eom",
    allow_single_cluster: bool = True,
) -> list[int]:
    """Pick a flat set of condensed clusters by excess of mass or as the leaves."""
    if not condensed:
        return []
    children = _cluster_children(condensed, n)
    nodes = sorted({n} | {r.child for r in condensed if r.child >= n})
    if not allow_single_cluster and len(nodes) > 1:
        nodes = nodes[1:]

    if method == "leaf":
        leaves = [c for c in nodes if not children.get(c)]
        return sorted(leaves)
    if method != "eom":
        raise ValueError(f"unknown cluster selection method {method!r}")

    stability = compute_stability(condensed, n)
    selected = {c: True for c in nodes}
    for node in reversed(nodes):
        kids = children.get(node, [])
        subtree = sum(stability[k] for k in kids)
        if kids and subtree > stability[node]:
            selected[node] = False
            stability[node] = subtree
        else:
            stack = list(kids)
            while stack:
                x = stack.pop()
                if x in selected:
                    selected[x] = False
                stack.extend(children.get(x, []))
    return sorted(c for c, keep in selected.items() if keep)


def label_points(condensed: Sequence[CondensedRow], n: int, clusters: Sequence[int]) -> np.ndarray:
    """Every point under a selected cluster gets that cluster's label, others NOISE.

    Labels are numbered by the smallest point index of each cluster.
    """
    parent_of = {}
    for row in condensed:
        parent_of[row.child] = row.parent
    chosen = set(clusters)
    raw = np.full(n, NOISE, dtype=int)
    for point in range(n):
        node = parent_of.get(point)
        while node is not None:
            if node in chosen:
                raw[point] = node
                break
            node = parent_of.get(node)
    return relabel_by_first_point(raw)


def relabel_by_first_point(labels) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.full(labels.shape, NOISE, dtype=int)
    mapping: dict = {}
    for i, lab in enumerate(labels):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass
class HDBSCANResult:
    labels: np.ndarray
    core: np.ndarray
    mst: list[tuple[int, int, float]]
    linkage: np.ndarray
    condensed: list[CondensedRow]
    selected: list[int]

    def write_condensed_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parent", "child", "lambda", "size"])
            for row in self.condensed:
                writer.writerow([row.parent, row.child, repr(row.lambda_val), row.size])


def run_hdbscan(
    points,
    min_cluster_size: int = 2,
    min_samples: int = 1,
    cluster_selection: str = "eom",
    allow_single_cluster: bool = True,
) -> HDBSCANResult:
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be at least 2")
    if min_samples < 1:
        raise ValueError("min_samples must be at least 1")
    pts = _validate(points)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    dist = pairwise_distances(pts)
    core = core_distances(dist, min_samples)
    if n < min_cluster_size:
        return HDBSCANResult(np.full(n, NOISE, dtype=int), core, [], np.zeros((0, 4)), [], [])
    mr = mutual_reachability(dist, core)
    mst = minimum_spanning_tree(mr)
    linkage = single_linkage(mst, n)
    condensed = condense_tree(linkage, n, min_cluster_size)
    selected = select_clusters(condensed, n, cluster_selection, allow_single_cluster)
    labels = label_points(condensed, n, selected)
    return HDBSCANResult(labels, core, mst, linkage, condensed, selected)


def hdbscan(points, min_cluster_size: int = 2, min_samples: int = 1, cluster_selection: str = "eom") -> np.ndarray:
    """Cluster labels per point; NOISE (-1) for unclustered points."""
    return run_hdbscan(points, min_cluster_size, min_samples, cluster_selection).labels


def dbscan(points, eps: float, min_pts: int = 2) -> np.ndarray:
    """Plain DBSCAN, kept for comparison runs."""
    pts = _validate(points)
    n = pts.shape[0]
    dist = pairwise_distances(pts)
    neighbours = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    is_core = np.array([len(nb) >= min_pts for nb in neighbours])
    labels = np.full(n, NOISE, dtype=int)
    current = 0
    for i in range(n):
        if labels[i] != NOISE or not is_core[i]:
            continue
        labels[i] = current
        stack = [i]
        while stack:
            p = stack.pop()
            if not is_core[p]:
                continue
            for q in neighbours[p]:
                if labels[q] == NOISE:
                    labels[q] = current
                    stack.append(q)
        current += 1
    return relabel_by_first_point(labels)


@dataclass(frozen=True)
class Cluster:
    frame: int
    cluster_id: int
    entities: tuple[Entity, ...]
    tweet_ids: tuple[str, ...]
    user_ids: tuple[str, ...]

    @property
    def entity_set(self) -> frozenset[Entity]:
        return frozenset(self.entities)

    def user_counts(self) -> Counter:
        return Counter(self.user_ids)


def clusters_from_labels(features: SimilarityFeatures, labels) -> list[Cluster]:
    """Group non-noise entities by label; ids follow first appearance."""
    labels = list(labels)
    if len(labels) != len(features.records):
        raise ValueError("labels and entity count differ")
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        if lab != NOISE:
            groups.setdefault(int(lab), []).append(i)

    clusters = []
    for cid, members in enumerate(groups.values()):
        tweet_user: dict[str, str] = {}
        for i in members:
            rec = features.records[i]
            for tid, uid in zip(rec.tweet_ids, rec.user_ids):
                tweet_user.setdefault(tid, uid)
        tweet_ids = tuple(sorted(tweet_user))
        clusters.append(
            Cluster(
                frame=features.frame,
                cluster_id=cid,
                entities=tuple(features.records[i].entity for i in members),
                tweet_ids=tweet_ids,
                user_ids=tuple(tweet_user[t] for t in tweet_ids),
            )
        )
    return clusters


def cluster_frame(
    features: SimilarityFeatures,
    min_cluster_size: int = 2,
    min_samples: int = 1,
    cluster_selection: str = "eom",
    clusterer: str = "hdbscan",
    eps: float = 0.5,
    min_pts: int = 2,
    condensed_csv: Optional[str] = None,
):
    """Labels and clusters for one frame's features."""
    points = features.feature_vectors
    if clusterer == "dbscan":
        labels = dbscan(points, eps, min_pts)
    elif clusterer == "hdbscan":
        result = run_hdbscan(points, min_cluster_size, min_samples, cluster_selection)
        labels = result.labels
        if condensed_csv:
            result.write_condensed_csv(condensed_csv)
    else:
        raise ValueError(f"unknown clusterer {clusterer!r}")
    return labels, clusters_from_labels(features, labels)
