"""Linking clusters of consecutive frames into event chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .clustering import Cluster

OPEN = "open"
CLOSED = "closed"


@dataclass(frozen=True)
class BipartiteEdge:
    prev: int  # index into the previous frame's cluster list
    next: int  # index into the current frame's cluster list
    weight: int


def build_bipartite(
    prev_clusters: Sequence[Cluster],
    next_clusters: Sequence[Cluster],
    min_common: int = 0,
) -> list[BipartiteEdge]:
    """Edges between clusters sharing more than ``min_common`` entities."""
    if min_common < 0:
        raise ValueError("min_common must be non-negative")
    edges = []
    for i, a in enumerate(prev_clusters):
        sa = a.entity_set
        for j, b in enumerate(next_clusters):
            common = len(sa & b.entity_set)
            if common > min_common:
                edges.append(BipartiteEdge(i, j, common))
    return edges


def hungarian(cost: Sequence[Sequence]) -> list[int]:
    """Minimum-cost assignment on a square matrix (Kuhn-Munkres, O(n^3)).

    Returns ``assign`` with row ``i`` matched to column ``assign[i]``. Works
    with exact Python integers as well as floats.
    """
    n = len(cost)
    if n == 0:
        return []
    if any(len(row) != n for row in cost):
        raise ValueError("cost matrix must be square")
    # potentials and matching are 1-based; index 0 is a virtual column
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    match_col = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match_col[0] = i
        j0 = 0
        minv = [math.inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            delta = math.inf
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_col[j0] = match_col[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        if match_col[j]:
            assign[match_col[j] - 1] = j - 1
    return assign


def max_weight_matching(
    edges: Iterable[BipartiteEdge | tuple[int, int, int]],
    left_size: int,
    right_size: int,
) -> set[tuple[int, int]]:
    """One-to-one matching of maximum total weight.

    The problem is padded to a square zero-weight matrix and solved with
    the Hungarian algorithm. Among maximum-weight matchings the one using
    lexicographically earliest (left, right) edges is returned: each edge
    carries a tie-break bonus of a distinct power of two, scaled below one
    unit of real weight.
    """
    weights: dict[tuple[int, int], int] = {}
    for e in edges:
        i, j, w = (e.prev, e.next, e.weight) if isinstance(e, BipartiteEdge) else e
        if not (0 <= i < left_size and 0 <= j < right_size):
            raise ValueError(f"edge ({i}, {j}) out of range")
        if w <= 0 or int(w) != w:
            raise ValueError("edge weights must be positive integers")
        weights[(i, j)] = max(weights.get((i, j), 0), int(w))
    if not weights:
        return set()

    ranked = sorted(weights)
    m = len(ranked)
    scale = 1 << m
    n = max(left_size, right_size)
    cost = [[0] * n for _ in range(n)]
    for rank, (i, j) in enumerate(ranked):
        cost[i][j] = -(weights[(i, j)] * scale + (1 << (m - 1 - rank)))
    assign = hungarian(cost)
    return {(i, j) for i, j in enumerate(assign) if (i, j) in weights}


def matching_weight(matching: Iterable[tuple[int, int]], edges: Iterable[BipartiteEdge]) -> int:
    w = {(e.prev, e.next): e.weight for e in edges}
    return sum(w.get(p, 0) for p in matching)


@dataclass
class EventChain:
    chain_id: int
    links: list[tuple[int, int]] = field(default_factory=list)  # (frame, cluster_id)
    weights: list[int] = field(default_factory=list)
    status: str = OPEN
    clusters: list[Cluster] = field(default_factory=list)

    @property
    def tail(self) -> Cluster:
        return self.clusters[-1]

    def __len__(self):
        return len(self.links)

    def append(self, cluster: Cluster, weight: Optional[int] = None):
        if self.links:
            if cluster.frame != self.links[-1][0] + 1:
                raise ValueError("chain links must be in consecutive frames")
            self.weights.append(int(weight if weight is not None else 0))
        self.links.append((cluster.frame, cluster.cluster_id))
        self.clusters.append(cluster)

    def tweet_ids(self) -> list[str]:
        return [t for c in self.clusters for t in c.tweet_ids]

    def user_ids(self) -> list[str]:
        return [u for c in self.clusters for u in c.user_ids]

    def to_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "status": self.status,
            "length": len(self.links),
            "weights": list(self.weights),
            "links": [
                {
                    "frame": c.frame,
                    "cluster_id": c.cluster_id,
                    "entities": [e.to_list() for e in c.entities],
                    "tweet_ids": list(c.tweet_ids),
                    "user_ids": list(c.user_ids),
                }
                for c in self.clusters
            ],
        }


class ChainTracker:
    """Keeps event chains up to date as frames arrive in order."""

    def __init__(self, min_common: int = 0):
        self.min_common = min_common
        self.chains: list[EventChain] = []
        self._open: list[EventChain] = []
        self._last_frame: Optional[int] = None

    @property
    def open_chains(self) -> list[EventChain]:
        return list(self._open)

    def update(self, frame: int, clusters: Sequence[Cluster]) -> list[tuple[int, int]]:
        """Attach one frame's clusters; returns the (prev, next) index pairs matched."""
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(f"frame {frame} arrives after frame {self._last_frame}")
        if self._last_frame is not None and self._last_frame != frame - 1:
            for chain in self._open:
                chain.status = CLOSED
            self._open = []
        prev = self._open
        edges = build_bipartite([c.tail for c in prev], clusters, self.min_common)
        matching = max_weight_matching(edges, len(prev), len(clusters))
        self._open = extend_chains(self.chains, prev, matching, clusters, edges)
        self._last_frame = frame
        return sorted(matching)

    def skip(self, frame: int):
        """Record a frame without clusters: every open chain closes."""
        self.update(frame, [])

    def finish(self) -> list[EventChain]:
        return self.chains


def extend_chains(
    all_chains: list[EventChain],
    open_chains: Sequence[EventChain],
    matching: Iterable[tuple[int, int]],
    next_clusters: Sequence[Cluster],
    edges: Sequence[BipartiteEdge] = (),
) -> list[EventChain]:
    """Apply a matching to the open chains and return the new open set.

    Matched clusters extend their chain, unmatched clusters start new chains
    (appended to ``all_chains``), chains whose tail found no match close.
    """
    weight = {(e.prev, e.next): e.weight for e in edges}
    matched_next: dict[int, int] = {}
    for i, j in matching:
        if j in matched_next or not 0 <= j < len(next_clusters):
            raise AssertionError(f"invalid matching for next cluster {j}")
        matched_next[j] = i
    if len(set(matched_next.values())) != len(matched_next):
        raise AssertionError("a chain was matched twice")

    still_open = []
    extended = set()
    for j, cluster in enumerate(next_clusters):
        if j in matched_next:
            i = matched_next[j]
            chain = open_chains[i]
            chain.append(cluster, weight.get((i, j), 0))
            extended.add(i)
        else:
            chain = EventChain(chain_id=len(all_chains))
            chain.append(cluster)
            all_chains.append(chain)
        still_open.append(chain)
    for i, chain in enumerate(open_chains):
        if i not in extended:
            chain.status = CLOSED
    return still_open
