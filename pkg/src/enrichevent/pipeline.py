"""End-to-end frame pipeline: filter, enrich, cluster, chain."""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Iterator, Optional

import numpy as np

from .chaining import ChainTracker, EventChain
from .clustering import NOISE, Cluster, cluster_frame
from .core import DAY_SECONDS, Entity, TimeFrame, Tweet, window_stream
from .embedding import DEFAULT_DIM, EmbeddingProvider
from .enrichment import EmptyFrameError, EntityExtractor, build_features, dump_matrices
from .evaluation import FrameIndices, FrameOutput, GroundTruth, MetricsReport, evaluate, to_json_safe
from .trend import TrendModel, TweetScorer, filter_frame

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    window_seconds: int = DAY_SECONDS
    origin: Optional[int] = None
    filter_threshold: float = 0.5
    no_filter: bool = False
    top_k: int = 5
    min_sim: float = 0.3
    min_sim_lexical: Optional[float] = None
    min_sim_contextual: Optional[float] = None
    min_entity_freq: int = 1
    clusterer: str = "hdbscan"
    min_cluster_size: int = 2
    min_samples: int = 1
    cluster_selection: str = "eom"
    eps: float = 0.5
    min_pts: int = 2
    min_common: int = 0
    max_gap: int = 0
    embed_dim: int = DEFAULT_DIM
    seed: int = 0
    embeddings_file: Optional[str] = None
    lexicon: Optional[str] = None
    model: Optional[str] = None
    skip_malformed: bool = False
    debug_dir: Optional[str] = None

    def validate(self) -> "RunConfig":
        checks = [
            (self.window_seconds > 0, "window_seconds must be positive"),
            (0.0 <= self.filter_threshold <= 1.0, "filter_threshold must be within [0, 1]"),
            (self.top_k >= 1, "top_k must be at least 1"),
            (0.0 <= self.min_sim <= 1.0, "min_sim must be within [0, 1]"),
            (self.min_entity_freq >= 1, "min_entity_freq must be at least 1"),
            (self.clusterer in ("hdbscan", "dbscan"), "clusterer must be hdbscan or dbscan"),
            (self.min_cluster_size >= 2, "min_cluster_size must be at least 2"),
            (self.min_samples >= 1, "min_samples must be at least 1"),
            (self.cluster_selection in ("eom", "leaf"), "cluster_selection must be eom or leaf"),
            (self.eps > 0, "eps must be positive"),
            (self.min_pts >= 1, "min_pts must be at least 1"),
            (self.min_common >= 0, "min_common must be non-negative"),
            (self.max_gap == 0, "max_gap other than 0 is not supported"),
            (self.embed_dim >= 1, "embed_dim must be positive"),
        ]
        for value in (self.min_sim_lexical, self.min_sim_contextual):
            checks.append((value is None or 0.0 <= value <= 1.0, "min_sim overrides must be within [0, 1]"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @property
    def lexical_threshold(self) -> float:
        return self.min_sim if self.min_sim_lexical is None else self.min_sim_lexical

    @property
    def contextual_threshold(self) -> float:
        return self.min_sim if self.min_sim_contextual is None else self.min_sim_contextual

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: f.type for f in fields(cls)}

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FrameResult:
    frame: TimeFrame
    kept: int
    dropped: int
    entities: list[Entity] = field(default_factory=list)
    labels: Optional[np.ndarray] = None
    clusters: list[Cluster] = field(default_factory=list)
    indices: Optional[FrameIndices] = None
    matching: list[tuple[int, int]] = field(default_factory=list)

    @property
    def output(self) -> FrameOutput:
        return FrameOutput(
            self.frame.index,
            frozenset(self.entities),
            [c.entity_set for c in self.clusters],
        )

    def to_dict(self) -> dict:
        noise = []
        if self.labels is not None:
            noise = [e.to_list() for e, lab in zip(self.entities, self.labels) if lab == NOISE]
        return {
            "index": self.frame.index,
            "start": self.frame.start,
            "end": self.frame.end,
            "tweets": self.kept + self.dropped,
            "kept": self.kept,
            "dropped": self.dropped,
            "entities": [e.to_list() for e in self.entities],
            "noise": noise,
            "clusters": [c.cluster_id for c in self.clusters],
            "indices": self.indices.to_dict() if self.indices else None,
        }


class Pipeline:
    """Runs frames through the four stages and tracks chains across them."""

    def __init__(
        self,
        config: Optional[RunConfig] = None,
        provider: Optional[EmbeddingProvider] = None,
        extractor: Optional[EntityExtractor] = None,
        model: Optional[TweetScorer] = None,
    ):
        self.config = (config or RunConfig()).validate()
        cfg = self.config
        if provider is None:
            if cfg.embeddings_file:
                provider = EmbeddingProvider.from_file(cfg.embeddings_file, seed=cfg.seed)
            else:
                provider = EmbeddingProvider(cfg.embed_dim, cfg.seed)
        self.provider = provider
        if extractor is None:
            extractor = EntityExtractor.from_lexicon_file(cfg.lexicon) if cfg.lexicon else EntityExtractor()
        self.extractor = extractor
        if model is None and cfg.model and not cfg.no_filter:
            model = TrendModel.load(cfg.model)
        if model is not None and model.dim != provider.dim:
            raise ConfigError(f"model dimension {model.dim} does not match embedding dimension {provider.dim}")
        self.model = None if cfg.no_filter else model
        if self.model is None and not cfg.no_filter:
            logger.info("no trend model given; all tweets pass the filter stage")
        self.tracker = ChainTracker(cfg.min_common)
        self.results: list[FrameResult] = []

    def process_frame(self, frame: TimeFrame) -> FrameResult:
        cfg = self.config
        if self.model is not None:
            filtered = filter_frame(frame, self.model, self.provider, cfg.filter_threshold)
            frame_in, kept, dropped = filtered.frame, filtered.kept, filtered.dropped
        else:
            frame_in, kept, dropped = frame, len(frame.tweets), 0
        result = FrameResult(frame_in, kept, dropped)

        try:
            features = build_features(
                frame_in,
                self.extractor,
                self.provider,
                top_k=cfg.top_k,
                min_sim=cfg.lexical_threshold,
                min_sim_contextual=cfg.contextual_threshold,
                min_entity_freq=cfg.min_entity_freq,
            )
        except EmptyFrameError:
            logger.debug("frame %d: no entities", frame.index)
            self.tracker.skip(frame.index)
            self.results.append(result)
            return result

        condensed_csv = None
        if cfg.debug_dir:
            dump_matrices(features, cfg.debug_dir)
            condensed_csv = os.path.join(cfg.debug_dir, f"frame{frame.index:04d}_condensed.csv")
        labels, clusters = cluster_frame(
            features,
            cfg.min_cluster_size,
            cfg.min_samples,
            cfg.cluster_selection,
            cfg.clusterer,
            cfg.eps,
            cfg.min_pts,
            condensed_csv,
        )
        result.entities = features.entities
        result.labels = labels
        result.clusters = clusters
        result.indices = FrameIndices.compute(frame.index, features.feature_vectors, labels)
        result.matching = self.tracker.update(frame.index, clusters)
        logger.info(
            "frame %d: %d tweets kept, %d entities, %d clusters",
            frame.index, kept, len(features.entities), len(clusters),
        )
        self.results.append(result)
        return result

    def run(self, tweets: Iterable[Tweet]) -> Iterator[FrameResult]:
        for frame in window_stream(tweets, self.config.window_seconds, self.config.origin):
            yield self.process_frame(frame)

    @property
    def chains(self) -> list[EventChain]:
        return self.tracker.chains

    def outputs(self) -> list[FrameOutput]:
        return [r.output for r in self.results]

    def document(self, metrics: Optional[MetricsReport] = None) -> dict:
        doc = {
            "config": self.config.to_dict(),
            "frames": [r.to_dict() for r in self.results],
            "chains": [c.to_dict() for c in self.chains],
        }
        if metrics is not None:
            doc["metrics"] = metrics.to_dict()
        return to_json_safe(doc)

    def metrics(self, gt: Optional[GroundTruth]) -> MetricsReport:
        return evaluate(
            self.outputs(),
            [c.to_dict() for c in self.chains],
            gt,
            [r.indices for r in self.results if r.indices is not None],
        )


def run_pipeline(tweets: Iterable[Tweet], config: Optional[RunConfig] = None, **kwargs) -> Pipeline:
    """Process a whole stream and return the finished pipeline."""
    pipe = Pipeline(config, **kwargs)
    for _ in pipe.run(tweets):
        pass
    return pipe
