"""Entity extraction and per-frame lexical/contextual similarity features."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import HASHTAG, NAMED_ENTITY, Entity, TimeFrame, Tweet, normalize, strip_punct, tokenize
from .embedding import EmbeddingProvider

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5
DEFAULT_MIN_SIM = 0.3

# single capitalized words at sentence start that are not names
STOP_WORDS = frozenset(
    """
    a an the this that these those i we you he she it they my our your his her its their
    in on at of for to from by with and or but if when while after before as is are was
    were be been being do does did have has had will would can could should may might
    must not no yes so then there here what which who whom whose why how all any some
    just also very rt
    """.split()
)

_SENTENCE_END = (".", "!", "?", "…")


class EmptyFrameError(ValueError):
    """A frame yielded no entities and is skipped downstream."""


class EntityExtractor:
    """Rule-based stand-in for a trained NER model.

    ``baseline`` mode takes maximal runs of capitalized tokens; ``lexicon``
    mode takes longest matches against a set of known surfaces. Hashtags are
    added in both modes.
    """

    def __init__(self, lexicon: Optional[Iterable[str]] = None):
        self.lexicon: Optional[frozenset[tuple[str, ...]]] = None
        self._max_len = 0
        if lexicon is not None:
            entries = set()
            for surface in lexicon:
                toks = tuple(tokenize(surface))
                if toks:
                    entries.add(toks)
            self.lexicon = frozenset(entries)
            self._max_len = max((len(e) for e in entries), default=0)

    @property
    def mode(self) -> str:
        return "baseline" if self.lexicon is None else "lexicon"

    @classmethod
    def from_lexicon_file(cls, path) -> "EntityExtractor":
        with open(path, encoding="utf-8") as fh:
            return cls(line.strip() for line in fh if line.strip())

    def extract(self, tweet: Tweet) -> list[Entity]:
        found: dict[Entity, None] = {}
        names = self._capitalized_runs(tweet.text) if self.lexicon is None else self._lexicon_matches(tweet.text)
        for surface in names:
            found[Entity(surface, NAMED_ENTITY)] = None
        for tag in tweet.hashtags:
            found[Entity(tag, HASHTAG)] = None
        return list(found)

    def _capitalized_runs(self, text: str) -> list[str]:
        runs: list[list[tuple[str, bool]]] = []
        current: list[tuple[str, bool]] = []
        sentence_start = True
        for raw in text.split():
            clean = strip_punct(raw)
            capitalized = bool(clean) and not raw.startswith("#") and clean[0].isupper()
            if current and (not capitalized or clean[:1] != raw[:1]):
                runs.append(current)
                current = []
            if capitalized:
                current.append((clean, sentence_start))
                # trailing punctuation (",", ":", "!") closes the name
                if clean[-1] != raw[-1]:
                    runs.append(current)
                    current = []
            sentence_start = raw.endswith(_SENTENCE_END)
        if current:
            runs.append(current)

        names = []
        for run in runs:
            # "The", "Then" etc. are capitalized only because a sentence starts there
            if run[0][1] and normalize(run[0][0]) in STOP_WORDS:
                run = run[1:]
            if not run:
                continue
            names.append(normalize(" ".join(tok for tok, _ in run)))
        return names

    def _lexicon_matches(self, text: str) -> list[str]:
        toks = tokenize(text)
        names = []
        i = 0
        while i < len(toks):
            for length in range(min(self._max_len, len(toks) - i), 0, -1):
                cand = tuple(toks[i:i + length])
                if cand in self.lexicon:
                    names.append(" ".join(cand))
                    i += length
                    break
            else:
                i += 1
        return names


def extract_entities(extractor: EntityExtractor, tweet: Tweet) -> list[Entity]:
    return extractor.extract(tweet)


def count_occurrences(entity: Entity, tokens: Sequence[str]) -> int:
    """Non-overlapping token-sequence matches of the entity surface.

    Tokens come from ``tokenize`` which strips '#', so hashtags match with
    or without their sigil.
    """
    pattern = entity.surface.split(" ")
    width = len(pattern)
    count = 0
    i = 0
    while i + width <= len(tokens):
        if list(tokens[i:i + width]) == pattern:
            count += 1
            i += width
        else:
            i += 1
    return count


@dataclass(frozen=True)
class EntityFrameRecord:
    entity: Entity
    frame: int
    occurrence_row: np.ndarray
    tweet_ids: tuple[str, ...]
    user_ids: tuple[str, ...]


@dataclass(frozen=True)
class SimilarityFeatures:
    frame: int
    records: tuple[EntityFrameRecord, ...]
    lexical_sim: np.ndarray
    contextual_sim: np.ndarray

    @property
    def entities(self) -> list[Entity]:
        return [r.entity for r in self.records]

    @property
    def feature_vectors(self) -> np.ndarray:
        return np.hstack([self.lexical_sim, self.contextual_sim])

    def __len__(self):
        return len(self.records)


def frame_entities(frame: TimeFrame, extractor: EntityExtractor, min_entity_freq: int = 1) -> list[Entity]:
    """Entities of a frame in first-appearance order.

    Entities found in fewer than ``min_entity_freq`` tweets are pruned.
    """
    seen: dict[Entity, int] = {}
    for tweet in frame.tweets:
        for ent in extractor.extract(tweet):
            seen[ent] = seen.get(ent, 0) + 1
    return [e for e, n in seen.items() if n >= min_entity_freq]


def build_occurrence_matrix(frame: TimeFrame, entities: Sequence[Entity]) -> np.ndarray:
    if not entities:
        raise EmptyFrameError(f"frame {frame.index} has no entities")
    token_lists = [tokenize(t.text) for t in frame.tweets]
    counts = np.zeros((len(entities), len(frame.tweets)), dtype=np.float64)
    for i, ent in enumerate(entities):
        for j, toks in enumerate(token_lists):
            counts[i, j] = count_occurrences(ent, toks)
    # hashtags supplied only via the tweet's hashtag field still count once
    for i, ent in enumerate(entities):
        if ent.kind != HASHTAG:
            continue
        for j, tweet in enumerate(frame.tweets):
            if counts[i, j] == 0 and ent.surface in tweet.hashtags:
                counts[i, j] = 1
    return counts


def top_tweets(tweets: Sequence[Tweet], top_k: int) -> list[Tweet]:
    """Most retweeted first; ties broken by ascending id."""
    return sorted(tweets, key=lambda t: (-t.retweet_count, t.id))[:top_k]


def build_embedding_matrix(
    frame: TimeFrame,
    entities: Sequence[Entity],
    provider: EmbeddingProvider,
    top_k: int = DEFAULT_TOP_K,
    occurrence: Optional[np.ndarray] = None,
) -> np.ndarray:
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    if occurrence is None:
        occurrence = build_occurrence_matrix(frame, entities)
    rows = np.zeros((len(entities), provider.dim))
    for i in range(len(entities)):
        containing = [frame.tweets[j] for j in np.flatnonzero(occurrence[i])]
        text = " ".join(t.text for t in top_tweets(containing, top_k))
        rows[i] = provider.embed_text(text)
    return rows


def cosine_similarity_matrix(rows, min_sim: float = DEFAULT_MIN_SIM) -> np.ndarray:
    """Clamped, thresholded cosine similarity between rows.

    Negative cosines become 0, values below ``min_sim`` become 0 and the
    diagonal is 1, except for all-zero rows which get an all-zero row and column.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need a non-empty 2-D matrix")
    if not 0.0 <= min_sim <= 1.0:
        raise ValueError("min_sim must be within [0, 1]")
    norms = np.linalg.norm(rows, axis=1)
    zero = norms == 0
    if zero.any():
        logger.warning("%d zero rows in similarity input", int(zero.sum()))
    unit = np.divide(rows, norms[:, None], out=np.zeros_like(rows), where=~zero[:, None])
    sim = unit @ unit.T
    sim = (sim + sim.T) / 2.0
    np.clip(sim, 0.0, 1.0, out=sim)
    sim[sim < min_sim] = 0.0
    np.fill_diagonal(sim, np.where(zero, 0.0, 1.0))
    return sim


def build_features(
    frame: TimeFrame,
    extractor: EntityExtractor,
    provider: EmbeddingProvider,
    top_k: int = DEFAULT_TOP_K,
    min_sim: float = DEFAULT_MIN_SIM,
    min_sim_contextual: Optional[float] = None,
    min_entity_freq: int = 1,
) -> SimilarityFeatures:
    """Lexical and contextual similarity features for every entity in a frame."""
    entities = frame_entities(frame, extractor, min_entity_freq)
    if not entities:
        raise EmptyFrameError(f"frame {frame.index} has no entities")
    occurrence = build_occurrence_matrix(frame, entities)
    present = occurrence.sum(axis=1) > 0
    if not present.all():
        logger.warning("frame %d: %d entities never matched their tweets", frame.index, int((~present).sum()))
        entities = [e for e, keep in zip(entities, present) if keep]
        occurrence = occurrence[present]
        if not entities:
            raise EmptyFrameError(f"frame {frame.index} has no entities")
    embedding = build_embedding_matrix(frame, entities, provider, top_k, occurrence)
    lexical = cosine_similarity_matrix(occurrence, min_sim)
    contextual = cosine_similarity_matrix(
        embedding, min_sim if min_sim_contextual is None else min_sim_contextual
    )

    records = []
    for i, ent in enumerate(entities):
        idx = np.flatnonzero(occurrence[i])
        row = occurrence[i].copy()
        row.setflags(write=False)
        records.append(
            EntityFrameRecord(
                entity=ent,
                frame=frame.index,
                occurrence_row=row,
                tweet_ids=tuple(frame.tweets[j].id for j in idx),
                user_ids=tuple(frame.tweets[j].user_id for j in idx),
            )
        )
    lexical.setflags(write=False)
    contextual.setflags(write=False)
    return SimilarityFeatures(frame.index, tuple(records), lexical, contextual)


def dump_matrices(features: SimilarityFeatures, directory) -> None:
    """Write both similarity matrices of a frame as labelled CSV files."""
    os.makedirs(directory, exist_ok=True)
    labels = [f"{e.surface}" if e.kind == NAMED_ENTITY else f"#{e.surface}" for e in features.entities]
    for name, mat in (("lexical", features.lexical_sim), ("contextual", features.contextual_sim)):
        path = os.path.join(directory, f"frame{features.frame:04d}_{name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + labels)
            for label, row in zip(labels, mat):
                writer.writerow([label] + [f"{v:.6g}" for v in row])
