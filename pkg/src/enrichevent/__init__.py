"""Entity-based event detection and chaining over tweet streams."""

from .chaining import ChainTracker, EventChain, max_weight_matching
from .clustering import NOISE, Cluster, hdbscan
from .core import Entity, TimeFrame, Tweet, read_tweets, window_stream
from .embedding import EmbeddingProvider
from .enrichment import EntityExtractor, build_features
from .evaluation import GroundTruth, MetricsReport, clustering_score, user_diversity
from .pipeline import Pipeline, RunConfig, run_pipeline
from .synth import SynthConfig, generate, planted_config
from .trend import TrendModel, filter_frame, train

__version__ = "0.1.0"

__all__ = [
    "ChainTracker", "Cluster", "EmbeddingProvider", "Entity", "EntityExtractor", "EventChain",
    "GroundTruth", "MetricsReport", "NOISE", "Pipeline", "RunConfig", "SynthConfig", "TimeFrame",
    "TrendModel", "Tweet", "build_features", "clustering_score", "filter_frame", "generate",
    "hdbscan", "max_weight_matching", "planted_config", "read_tweets", "run_pipeline", "train",
    "user_diversity", "window_stream",
]
