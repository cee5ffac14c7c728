"""Shared domain types, text normalization and stream windowing."""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

logger = logging.getLogger(__name__)

DAY_SECONDS = 86400

NAMED_ENTITY = "named_entity"
HASHTAG = "hashtag"
ENTITY_KINDS = (NAMED_ENTITY, HASHTAG)


class StreamError(ValueError):
    """Raised for malformed or out-of-order input streams."""


def normalize(text: str) -> str:
    """Case-fold, trim and collapse internal whitespace."""
    return " ".join(text.casefold().split())


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def strip_punct(token: str) -> str:
    """Remove leading/trailing punctuation (including the '#' sigil)."""
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Whitespace tokens of the normalized text, edge punctuation and '#' removed.

    Punctuation-only tokens are dropped.
    """
    out = []
    for raw in normalize(text).split(" "):
        tok = strip_punct(raw)
        if tok:
            out.append(tok)
    return out


@dataclass(frozen=True)
class Tweet:
    id: str
    timestamp: int
    text: str
    user_id: str
    retweet_count: int = 0
    hashtags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"tweet {self.id}: negative timestamp")
        if self.retweet_count < 0:
            raise ValueError(f"tweet {self.id}: negative retweet_count")

    @classmethod
    def from_dict(cls, obj: dict) -> "Tweet":
        for key in ("id", "timestamp", "text", "user_id", "retweet_count"):
            if key not in obj:
                raise KeyError(key)
        hashtags = obj.get("hashtags")
        if hashtags is None:
            hashtags = hashtags_in(obj["text"])
        else:
            hashtags = [normalize(h).lstrip("#") for h in hashtags]
            hashtags = [h for h in hashtags if h]
        ts = obj["timestamp"]
        rt = obj["retweet_count"]
        if isinstance(ts, bool) or not isinstance(ts, int):
            raise TypeError("timestamp must be an integer")
        if isinstance(rt, bool) or not isinstance(rt, int):
            raise TypeError("retweet_count must be an integer")
        return cls(
            id=str(obj["id"]),
            timestamp=ts,
            text=str(obj["text"]),
            user_id=str(obj["user_id"]),
            retweet_count=rt,
            hashtags=tuple(dict.fromkeys(hashtags)),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp,
            "text": self.text,
            "user_id": self.user_id,
            "retweet_count": self.retweet_count,
            "hashtags": list(self.hashtags),
        }


def hashtags_in(text: str) -> list[str]:
    """Hashtags (without sigil, normalized) from tokens beginning with '#'."""
    tags = []
    for raw in normalize(text).split(" "):
        if raw.startswith("#"):
            tag = strip_punct(raw)
            if tag and tag not in tags:
                tags.append(tag)
    return tags


@dataclass(frozen=True, order=True)
class Entity:
    surface: str
    kind: str = NAMED_ENTITY

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")
        surface = normalize(self.surface)
        if self.kind == HASHTAG:
            surface = surface.lstrip("#")
        if not surface:
            raise ValueError("entity surface must be non-empty")
        object.__setattr__(self, "surface", surface)

    def to_list(self) -> list[str]:
        return [self.surface, self.kind]


@dataclass(frozen=True)
class TimeFrame:
    index: int
    start: int
    end: int
    tweets: tuple[Tweet, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.tweets)

    def with_tweets(self, tweets: Iterable[Tweet]) -> "TimeFrame":
        return TimeFrame(self.index, self.start, self.end, tuple(tweets))


def default_origin(first_timestamp: int) -> int:
    """First timestamp truncated to midnight UTC."""
    return first_timestamp - first_timestamp % DAY_SECONDS


def window_stream(
    tweets: Iterable[Tweet],
    window_seconds: int = DAY_SECONDS,
    origin: Optional[int] = None,
) -> Iterator[TimeFrame]:
    """Group a time-ordered tweet stream into contiguous fixed-width frames.

    Frames are yielded as soon as a later tweet closes them, so the function
    can sit on an unbounded stream. Empty frames between occupied ones are
    emitted to keep indices contiguous.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")

    current: list[Tweet] = []
    current_index = None
    last_ts = None
    for pos, tweet in enumerate(tweets):
        if last_ts is not None and tweet.timestamp < last_ts:
            raise StreamError(
                f"stream not sorted at position {pos}: "
                f"{tweet.timestamp} < {last_ts}"
            )
        last_ts = tweet.timestamp
        if origin is None:
            origin = default_origin(tweet.timestamp)
        if tweet.timestamp < origin:
            raise StreamError(
                f"tweet at position {pos} precedes origin ({tweet.timestamp} < {origin})"
            )
        index = (tweet.timestamp - origin) // window_seconds
        if current_index is None:
            current_index = index
        while index > current_index:
            yield _frame(current_index, origin, window_seconds, current)
            current = []
            current_index += 1
        current.append(tweet)

    if current_index is not None:
        yield _frame(current_index, origin, window_seconds, current)


def _frame(index, origin, width, tweets):
    start = origin + index * width
    return TimeFrame(index=index, start=start, end=start + width, tweets=tuple(tweets))


def read_tweets(path, skip_malformed: bool = False) -> Iterator[Tweet]:
    """Read the JSON Lines ingestion format.

    Malformed lines raise StreamError with their line number unless
    ``skip_malformed`` is set, in which case they are logged and skipped.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise TypeError("not a JSON object")
                tweet = Tweet.from_dict(obj)
            except (ValueError, KeyError, TypeError) as exc:
                msg = f"{path}:{lineno}: malformed tweet ({exc.__class__.__name__}: {exc})"
                if skip_malformed:
                    logger.warning(msg)
                    continue
                raise StreamError(msg) from exc
            yield tweet


def write_jsonl(path, rows: Iterable[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StreamError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return rows

