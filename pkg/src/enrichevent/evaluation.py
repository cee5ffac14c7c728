"""Chain quality metrics against labelled ground truth, and internal cluster indices.

Absent results (empty denominators, too few clusters) are returned as
``None``; unbounded indices are ``math.inf``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Entity, read_jsonl
from .clustering import NOISE


@dataclass(frozen=True)
class Label:
    event_id: Optional[str]
    relevant: bool


class GroundTruth:
    """Per (frame, entity) labels; entities without a row are unlabelled."""

    def __init__(self, labels: Optional[dict[tuple[int, Entity], Label]] = None):
        self.labels: dict[tuple[int, Entity], Label] = {}
        for key, lab in (labels or {}).items():
            self.add(key[0], key[1], lab.event_id, lab.relevant)

    def add(self, frame: int, entity: Entity, event_id: Optional[str], relevant: bool):
        if relevant and event_id is None:
            raise ValueError(f"relevant entity {entity.surface!r} needs an event_id")
        self.labels[(int(frame), entity)] = Label(None if event_id is None else str(event_id), bool(relevant))

    def get(self, frame: int, entity: Entity) -> Optional[Label]:
        return self.labels.get((frame, entity))

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_rows(cls, rows: Iterable[dict]) -> "GroundTruth":
        gt = cls()
        for i, row in enumerate(rows, start=1):
            try:
                entity = Entity(row["entity"], row.get("kind", "named_entity"))
                gt.add(int(row["frame"]), entity, row.get("event_id"), bool(row["relevant"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"ground truth row {i}: {exc}") from exc
        return gt

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_rows(read_jsonl(path))

    def to_rows(self) -> list[dict]:
        rows = []
        for (frame, ent), lab in sorted(self.labels.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            rows.append(
                {
                    "frame": frame,
                    "entity": ent.surface,
                    "kind": ent.kind,
                    "event_id": lab.event_id,
                    "relevant": lab.relevant,
                }
            )
        return rows


@dataclass
class FrameOutput:
    """What the system produced for one frame: the entities it saw and its clusters."""

    frame: int
    present: frozenset[Entity]
    clusters: list[frozenset[Entity]]

    def cluster_of(self) -> dict[Entity, int]:
        out = {}
        for cid, members in enumerate(self.clusters):
            for ent in members:
                out[ent] = cid
        return out


@dataclass
class PairCounts:
    related_total: int = 0  # sum of A_t
    related_together: int = 0  # sum of a_t
    unrelated_total: int = 0  # sum of B_t
    unrelated_apart: int = 0  # sum of b_t


def pair_counts(outputs: Sequence[FrameOutput], gt: GroundTruth) -> PairCounts:
    counts = PairCounts()
    for out in outputs:
        where = out.cluster_of()
        labelled = []
        for ent in sorted(out.present):
            lab = gt.get(out.frame, ent)
            if lab is not None and lab.event_id is not None:
                labelled.append((ent, lab))
        for (e1, l1), (e2, l2) in combinations(labelled, 2):
            if l1.event_id != l2.event_id:
                continue
            c1, c2 = where.get(e1), where.get(e2)
            together = c1 is not None and c1 == c2
            if l1.relevant and l2.relevant:
                counts.related_total += 1
                counts.related_together += together
            elif l1.relevant != l2.relevant:
                counts.unrelated_total += 1
                counts.unrelated_apart += not together
    return counts


def consolidation(outputs: Sequence[FrameOutput], gt: GroundTruth) -> Optional[float]:
    """Share of related entity pairs that the system puts in a common cluster."""
    c = pair_counts(outputs, gt)
    return c.related_together / c.related_total if c.related_total else None


def discrimination(outputs: Sequence[FrameOutput], gt: GroundTruth) -> Optional[float]:
    """Share of unrelated pairs (one relevant, one irrelevant member of an event) kept apart."""
    c = pair_counts(outputs, gt)
    return c.unrelated_apart / c.unrelated_total if c.unrelated_total else None


def clustering_score(consolidation_value: float, discrimination_value: float) -> float:
    """Harmonic mean of consolidation and discrimination."""
    c, d = consolidation_value, discrimination_value
    if not (0.0 <= c <= 1.0 and 0.0 <= d <= 1.0):
        raise ValueError("consolidation and discrimination must be within [0, 1]")
    if c + d == 0:
        return 0.0
    return 2.0 * c * d / (c + d)


def user_diversity(user_ids: Sequence[str]) -> float:
    """Shannon entropy (nats) of the author distribution over a set of tweets."""
    n = len(user_ids)
    if n == 0:
        raise ValueError("user diversity needs at least one tweet")
    h = 0.0
    for count in Counter(user_ids).values():
        p = count / n
        h -= p * math.log(p)
    return max(h, 0.0)


def fraction_related(clusters: Sequence[tuple[int, Iterable[Entity]]], gt: GroundTruth) -> Optional[float]:
    """Mean, over clusters, of the share of members relevant to the cluster's majority event.

    ``clusters`` holds (frame, members) pairs. Unlabelled members count as
    unrelated. Majority ties go to the smallest event id.
    """
    clusters = list(clusters)
    if not clusters:
        return None
    fractions = [cluster_fraction_related(frame, members, gt) for frame, members in clusters]
    return float(np.mean(fractions))


def cluster_fraction_related(frame: int, members: Iterable[Entity], gt: GroundTruth) -> float:
    members = list(members)
    if not members:
        raise ValueError("empty cluster")
    events = Counter()
    for ent in members:
        lab = gt.get(frame, ent)
        if lab is not None and lab.relevant:
            events[lab.event_id] += 1
    if not events:
        return 0.0
    top = max(events.values())
    majority = min(e for e, n in events.items() if n == top)
    return events[majority] / len(members)


def _clustered(points, labels):
    X = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    keep = labels != NOISE
    return X[keep], labels[keep]


def silhouette(points, labels) -> Optional[float]:
    """Mean silhouette over non-noise points; singleton clusters score 0."""
    X, lab = _clustered(points, labels)
    ids = np.unique(lab)
    if len(ids) < 2:
        return None
    dist = np.sqrt(np.maximum(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1), 0.0))
    scores = np.zeros(len(X))
    for i in range(len(X)):
        own = lab == lab[i]
        if own.sum() == 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, lab == other].mean() for other in ids if other != lab[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def calinski_harabasz(points, labels) -> Optional[float]:
    """Between-cluster over within-cluster dispersion, each per degree of freedom."""
    X, lab = _clustered(points, labels)
    ids = np.unique(lab)
    c, n = len(ids), len(X)
    if c < 2:
        return None
    mean = X.mean(axis=0)
    between = within = 0.0
    for k in ids:
        members = X[lab == k]
        centroid = members.mean(axis=0)
        between += len(members) * float(((centroid - mean) ** 2).sum())
        within += float(((members - centroid) ** 2).sum())
    if within == 0 or n == c:
        return math.inf
    return (between / (c - 1)) / (within / (n - c))


def davies_bouldin(points, labels) -> Optional[float]:
    """Mean over clusters of the worst (s_i + s_j) / d_ij ratio."""
    X, lab = _clustered(points, labels)
    ids = np.unique(lab)
    if len(ids) < 2:
        return None
    centroids = np.array([X[lab == k].mean(axis=0) for k in ids])
    spread = np.array(
        [np.linalg.norm(X[lab == k] - centroids[i], axis=1).mean() for i, k in enumerate(ids)]
    )
    worst = []
    for i in range(len(ids)):
        ratios = []
        for j in range(len(ids)):
            if i == j:
                continue
            d = float(np.linalg.norm(centroids[i] - centroids[j]))
            ratios.append(math.inf if d == 0 else (spread[i] + spread[j]) / d)
        worst.append(max(ratios))
    return float(np.mean(worst))


@dataclass
class FrameIndices:
    frame: int
    n_entities: int
    n_clusters: int
    silhouette: Optional[float]
    calinski_harabasz: Optional[float]
    davies_bouldin: Optional[float]

    @classmethod
    def compute(cls, frame, points, labels) -> "FrameIndices":
        labels = np.asarray(labels)
        n_clusters = len(set(labels[labels != NOISE].tolist()))
        return cls(
            frame,
            len(labels),
            n_clusters,
            silhouette(points, labels),
            calinski_harabasz(points, labels),
            davies_bouldin(points, labels),
        )

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "n_entities": self.n_entities,
            "n_clusters": self.n_clusters,
            "silhouette": self.silhouette,
            "calinski_harabasz": self.calinski_harabasz,
            "davies_bouldin": self.davies_bouldin,
        }


@dataclass
class MetricsReport:
    consolidation: Optional[float]
    discrimination: Optional[float]
    clustering_score: Optional[float]
    pairs: PairCounts
    user_diversity: dict[int, float] = field(default_factory=dict)
    fraction_related: dict[int, Optional[float]] = field(default_factory=dict)
    frames: list[FrameIndices] = field(default_factory=list)
    log_base: str = "e"

    def to_dict(self) -> dict:
        chains = sorted(self.user_diversity)
        return {
            "consolidation": self.consolidation,
            "discrimination": self.discrimination,
            "clustering_score": self.clustering_score,
            "pairs": {
                "related_total": self.pairs.related_total,
                "related_together": self.pairs.related_together,
                "unrelated_total": self.pairs.unrelated_total,
                "unrelated_apart": self.pairs.unrelated_apart,
            },
            "user_diversity_log": self.log_base,
            "mean_user_diversity": float(np.mean(list(self.user_diversity.values()))) if chains else None,
            "chains": [
                {
                    "chain_id": cid,
                    "user_diversity": self.user_diversity[cid],
                    "fraction_related": self.fraction_related.get(cid),
                }
                for cid in chains
            ],
            "frames": [f.to_dict() for f in self.frames],
        }

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "n_entities", "n_clusters", "silhouette", "calinski_harabasz", "davies_bouldin"])
            for f in self.frames:
                writer.writerow(
                    [f.frame, f.n_entities, f.n_clusters]
                    + ["" if v is None else repr(float(v)) for v in (f.silhouette, f.calinski_harabasz, f.davies_bouldin)]
                )


def evaluate(
    outputs: Sequence[FrameOutput],
    chains: Sequence[dict],
    gt: Optional[GroundTruth],
    frames: Sequence[FrameIndices] = (),
) -> MetricsReport:
    """Assemble every metric from frame outputs and serialized chains.

    ``chains`` are chain dicts as written to the chains document (each link
    carrying its frame, entities and user ids).
    """
    if gt is not None:
        counts = pair_counts(outputs, gt)
        cons = counts.related_together / counts.related_total if counts.related_total else None
        disc = counts.unrelated_apart / counts.unrelated_total if counts.unrelated_total else None
    else:
        counts, cons, disc = PairCounts(), None, None
    score = clustering_score(cons, disc) if cons is not None and disc is not None else None

    diversity, related = {}, {}
    for chain in chains:
        users = [u for link in chain["links"] for u in link["user_ids"]]
        if users:
            diversity[chain["chain_id"]] = user_diversity(users)
        if gt is not None:
            related[chain["chain_id"]] = fraction_related(
                [(link["frame"], [Entity(s, k) for s, k in link["entities"]]) for link in chain["links"]],
                gt,
            )
    return MetricsReport(cons, disc, score, counts, diversity, related, list(frames))


def outputs_from_document(doc: dict) -> list[FrameOutput]:
    """Rebuild per-frame system output from a chains document."""
    clusters_by_frame: dict[int, dict[int, frozenset[Entity]]] = {}
    for chain in doc.get("chains", []):
        for link in chain["links"]:
            members = frozenset(Entity(s, k) for s, k in link["entities"])
            clusters_by_frame.setdefault(link["frame"], {})[link["cluster_id"]] = members
    outputs = []
    for fr in doc.get("frames", []):
        idx = fr["index"]
        present = frozenset(Entity(s, k) for s, k in fr.get("entities", []))
        found = clusters_by_frame.get(idx, {})
        outputs.append(FrameOutput(idx, present, [found[c] for c in sorted(found)]))
    return outputs


def frame_indices_from_document(doc: dict) -> list[FrameIndices]:
    out = []
    for fr in doc.get("frames", []):
        q = fr.get("indices")
        if q:
            out.append(
                FrameIndices(
                    q["frame"],
                    q["n_entities"],
                    q["n_clusters"],
                    *(decode_number(q[k]) for k in ("silhouette", "calinski_harabasz", "davies_bouldin")),
                )
            )
    return out


def evaluate_document(doc: dict, gt: Optional[GroundTruth]) -> MetricsReport:
    return evaluate(outputs_from_document(doc), doc.get("chains", []), gt, frame_indices_from_document(doc))


def encode_number(v):
    """JSON-safe value: None stays null, infinities become the string 'inf'."""
    if v is None:
        return None
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def decode_number(v):
    if isinstance(v, str):
        return float(v)
    return v


def to_json_safe(obj):
    if isinstance(obj, dict):
        return {k: to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(v) for v in obj]
    if isinstance(obj, float):
        return encode_number(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_json_safe(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"
