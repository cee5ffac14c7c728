"""Seeded synthetic tweet streams with planted multi-frame events.

Every event has a pool of entities (capitalized ``EventN_ek`` names plus the
``#eventN`` hashtag) and one decoy entity that shows up in chatter during
the event but is labelled irrelevant. Noise tweets carry filler words and
background ``TopicK`` names.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import DAY_SECONDS, HASHTAG, NAMED_ENTITY, Entity, hashtags_in

DEFAULT_START = 1_672_531_200  # 2023-01-01T00:00:00Z


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthEvent:
    event_id: str
    entities: list[str]
    start: int
    duration: int
    tweets_per_frame: int = 20
    user_pool: int = 30
    decoy: Optional[str] = None

    def active(self, frame: int) -> bool:
        return self.start <= frame < self.start + self.duration


@dataclass
class SynthConfig:
    seed: int = 42
    frames: int = 3
    tweets_per_frame: int = 60
    events: list[SynthEvent] = field(default_factory=list)
    noise_ratio: float = 0.3
    vocabulary_size: int = 200
    background_entities: int = 40
    noise_users: int = 200
    decoy_tweets: int = 2
    entities_per_tweet: tuple[int, int] = (2, 4)
    filler_per_gap: tuple[int, int] = (1, 2)
    window_seconds: int = DAY_SECONDS
    start_timestamp: int = DEFAULT_START

    def validate(self):
        if self.frames < 1:
            raise SynthConfigError("frames must be at least 1")
        if self.tweets_per_frame < 1:
            raise SynthConfigError("tweets_per_frame must be at least 1")
        if not 0.0 <= self.noise_ratio <= 1.0:
            raise SynthConfigError("noise_ratio must be within [0, 1]")
        if self.vocabulary_size < 1:
            raise SynthConfigError("vocabulary_size must be at least 1")
        if self.background_entities < 1 or self.noise_users < 1:
            raise SynthConfigError("background_entities and noise_users must be positive")
        lo, hi = self.entities_per_tweet
        if not 1 <= lo <= hi:
            raise SynthConfigError("entities_per_tweet must satisfy 1 <= min <= max")
        if not 0 <= self.filler_per_gap[0] <= self.filler_per_gap[1]:
            raise SynthConfigError("filler_per_gap must satisfy 0 <= min <= max")
        if self.window_seconds < 1 or self.start_timestamp < 0:
            raise SynthConfigError("window_seconds must be positive and start_timestamp non-negative")
        ids = [e.event_id for e in self.events]
        if len(set(ids)) != len(ids):
            raise SynthConfigError("event ids must be unique")
        for ev in self.events:
            if not ev.entities:
                raise SynthConfigError(f"event {ev.event_id}: empty entity pool")
            if ev.start < 0 or ev.duration < 1 or ev.start + ev.duration > self.frames:
                raise SynthConfigError(
                    f"event {ev.event_id}: frames {ev.start}..{ev.start + ev.duration - 1} "
                    f"do not fit in {self.frames} frames"
                )
            if ev.tweets_per_frame < 0 or ev.user_pool < 1:
                raise SynthConfigError(f"event {ev.event_id}: bad tweets_per_frame or user_pool")
        for f in range(self.frames):
            load = sum(e.tweets_per_frame for e in self.events if e.active(f))
            if load > self.tweets_per_frame:
                raise SynthConfigError(
                    f"frame {f}: active events need {load} tweets but tweets_per_frame is {self.tweets_per_frame}"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthConfig":
        obj = dict(obj)
        events = [SynthEvent(**e) for e in obj.pop("events", [])]
        for key in ("entities_per_tweet", "filler_per_gap"):
            if key in obj:
                obj[key] = tuple(obj[key])
        try:
            return cls(events=events, **obj)
        except TypeError as exc:
            raise SynthConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def make_event(number: int, n_entities: int = 5, start: int = 0, duration: int = 3,
               tweets_per_frame: int = 20, user_pool: int = 30) -> SynthEvent:
    """Event ``number`` with ``n_entities - 1`` names plus its hashtag."""
    names = [f"Event{number}_e{k}" for k in range(max(n_entities - 1, 0))]
    return SynthEvent(
        event_id=f"event{number}",
        entities=names + [f"#event{number}"],
        start=start,
        duration=duration,
        tweets_per_frame=tweets_per_frame,
        user_pool=user_pool,
        decoy=f"Decoy{number}",
    )


def planted_config(seed=42, n_events=3, frames=3, event_tweets=20, noise_ratio=0.3,
                   n_entities=5, background_tweets=0) -> SynthConfig:
    """Concurrent events spanning every frame, frames sized to fit them exactly."""
    events = [make_event(i + 1, n_entities, 0, frames, event_tweets) for i in range(n_events)]
    return SynthConfig(
        seed=seed,
        frames=frames,
        tweets_per_frame=n_events * event_tweets + background_tweets,
        events=events,
        noise_ratio=noise_ratio,
    )


def _entity_of(surface: str) -> Entity:
    if surface.startswith("#"):
        return Entity(surface[1:], HASHTAG)
    return Entity(surface, NAMED_ENTITY)


@dataclass
class SynthOutput:
    tweets: list[dict]
    ground_truth: list[dict]
    labels: list[dict]


class _Generator:
    def __init__(self, config: SynthConfig):
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)

    def filler(self, lo=None, hi=None) -> list[str]:
        lo = self.cfg.filler_per_gap[0] if lo is None else lo
        hi = self.cfg.filler_per_gap[1] if hi is None else hi
        n = int(self.rng.integers(lo, hi + 1))
        return [f"w{int(i)}" for i in self.rng.integers(0, self.cfg.vocabulary_size, size=n)]

    def weave(self, names: list[str]) -> str:
        # lowercase filler between names keeps adjacent names from fusing
        words = self.filler(1, 2)
        for name in names:
            words.append(name)
            words.extend(self.filler(max(1, self.cfg.filler_per_gap[0]), max(1, self.cfg.filler_per_gap[1])))
        return " ".join(words)

    def retweets(self) -> int:
        return int(min(self.rng.zipf(2.0) - 1, 100_000))

    def event_text(self, ev: SynthEvent) -> str:
        lo, hi = self.cfg.entities_per_tweet
        hi = min(hi, len(ev.entities))
        lo = min(lo, hi)
        k = int(self.rng.integers(lo, hi + 1))
        chosen = [ev.entities[i] for i in self.rng.choice(len(ev.entities), size=k, replace=False)]
        return self.weave(chosen)

    def noise_text(self) -> str:
        k = int(self.rng.integers(1, 3))
        picks = self.rng.choice(self.cfg.background_entities, size=k, replace=False)
        return self.weave([f"Topic{int(i)}" for i in picks])

    def run(self) -> SynthOutput:
        cfg = self.cfg
        tweets, labels = [], []
        gt: dict[tuple[int, Entity], dict] = {}
        for f in range(cfg.frames):
            # (text, user, label, event, is_decoy)
            drafts = []
            background = cfg.tweets_per_frame
            for ev in cfg.events:
                if not ev.active(f):
                    continue
                background -= ev.tweets_per_frame
                n_noise = int(round(cfg.noise_ratio * ev.tweets_per_frame))
                planted = ev.tweets_per_frame - n_noise
                n_decoy = min(cfg.decoy_tweets, planted) if ev.decoy else 0
                for _ in range(planted - n_decoy):
                    user = f"{ev.event_id}_u{int(self.rng.integers(ev.user_pool))}"
                    drafts.append((self.event_text(ev), user, 1, ev, False))
                for _ in range(n_decoy):
                    user = f"u{int(self.rng.integers(cfg.noise_users))}"
                    drafts.append((self.weave([ev.decoy]), user, 1, ev, True))
                for _ in range(n_noise):
                    drafts.append((self.noise_text(), f"u{int(self.rng.integers(cfg.noise_users))}", 0, None, False))
            for _ in range(background):
                drafts.append((self.noise_text(), f"u{int(self.rng.integers(cfg.noise_users))}", 0, None, False))

            start = cfg.start_timestamp + f * cfg.window_seconds
            stamps = self.rng.integers(start, start + cfg.window_seconds, size=len(drafts))
            frame_rows = []
            for seq, ((text, user, label, ev, is_decoy), ts) in enumerate(zip(drafts, stamps)):
                row = {
                    "id": f"f{f:04d}t{seq:05d}",
                    "timestamp": int(ts),
                    "text": text,
                    "user_id": user,
                    "retweet_count": self.retweets(),
                    "hashtags": hashtags_in(text),
                }
                frame_rows.append(row)
                labels.append({"text": text, "label": label})
                if ev is None:
                    continue
                words = set(text.split())
                if is_decoy:
                    gt[(f, _entity_of(ev.decoy))] = {"event_id": ev.event_id, "relevant": False}
                else:
                    for surface in ev.entities:
                        if surface in words:
                            gt[(f, _entity_of(surface))] = {"event_id": ev.event_id, "relevant": True}
            frame_rows.sort(key=lambda r: (r["timestamp"], r["id"]))
            tweets.extend(frame_rows)

        gt_rows = [
            {"frame": f, "entity": ent.surface, "kind": ent.kind, **lab}
            for (f, ent), lab in sorted(gt.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        ]
        return SynthOutput(tweets, gt_rows, labels)


def generate(config: SynthConfig) -> SynthOutput:
    """Tweets (ingestion format), ground-truth rows and (text, label) rows for a config."""
    config.validate()
    return _Generator(config).run()


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n" for r in rows)


def write_output(out: SynthOutput, directory) -> dict[str, str]:
    """Write stream.jsonl, ground_truth.jsonl and labels.jsonl into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name, rows in (("stream", out.tweets), ("ground_truth", out.ground_truth), ("labels", out.labels)):
        path = os.path.join(directory, f"{name}.jsonl")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_jsonl(rows))
        paths[name] = path
    return paths
