import filecmp
from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enrichevent.core import Tweet, tokenize
from enrichevent.synth import SynthConfig, SynthConfigError, SynthEvent, generate, make_event, planted_config, write_output


def test_one_event_labelled_in_every_frame():
    cfg = SynthConfig(seed=1, frames=3, tweets_per_frame=25, events=[make_event(1, duration=3)])
    gt = generate(cfg).ground_truth
    frames = {r["frame"] for r in gt if r["event_id"] == "event1" and r["relevant"]}
    assert frames == {0, 1, 2}
    entities = {r["entity"] for r in gt if r["relevant"]}
    assert entities == {"event1_e0", "event1_e1", "event1_e2", "event1_e3", "event1"}
    decoys = [r for r in gt if not r["relevant"]]
    assert decoys and all(r["entity"] == "decoy1" and r["event_id"] == "event1" for r in decoys)


def test_full_noise_has_no_event_ids():
    out = generate(planted_config(seed=2, noise_ratio=1.0))
    assert all(r["event_id"] is None for r in out.ground_truth)
    assert all(r["label"] == 0 for r in out.labels)


def test_same_seed_same_bytes(tmp_path):
    cfg = planted_config(seed=9)
    write_output(generate(cfg), tmp_path / "a")
    write_output(generate(planted_config(seed=9)), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert sorted(cmp.same_files) == ["ground_truth.jsonl", "labels.jsonl", "stream.jsonl"]
    assert not cmp.diff_files
    write_output(generate(planted_config(seed=10)), tmp_path / "c")
    assert not filecmp.cmp(tmp_path / "a" / "stream.jsonl", tmp_path / "c" / "stream.jsonl", shallow=False)


def test_stream_is_valid_ingestion_format():
    out = generate(planted_config(seed=4))
    tweets = [Tweet.from_dict(r) for r in out.tweets]
    stamps = [t.timestamp for t in tweets]
    assert stamps == sorted(stamps)
    assert len({t.id for t in tweets}) == len(tweets)
    assert max(t.retweet_count for t in tweets) > 0


def test_planted_tweets_carry_two_to_four_pool_entities():
    cfg = planted_config(seed=5, noise_ratio=0.0)
    pools = {ev.event_id: {s.lstrip("#").lower() for s in ev.entities} for ev in cfg.events}
    for row in generate(cfg).tweets:
        if not row["user_id"].startswith("event"):
            continue
        pool = pools[row["user_id"].split("_")[0]]
        n = len(set(tokenize(row["text"])) & pool)
        assert 2 <= n <= 4


@pytest.mark.parametrize("bad", [
    dict(frames=0),
    dict(noise_ratio=1.5),
    dict(events=[SynthEvent("a", ["A"], 2, 5)]),
    dict(events=[SynthEvent("a", ["A"], 0, 1, tweets_per_frame=500)]),
    dict(events=[SynthEvent("a", [], 0, 1)]),
    dict(events=[SynthEvent("a", ["A"], 0, 1), SynthEvent("a", ["B"], 0, 1)]),
])
def test_inconsistent_configs_rejected(bad):
    with pytest.raises(SynthConfigError):
        generate(SynthConfig(**{"frames": 3, **bad}))


def test_config_round_trip(tmp_path):
    import json

    cfg = planted_config(seed=3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SynthConfig.load(path) == cfg


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.3))
def test_within_event_cooccurrence_beats_cross_event(seed, noise):
    cfg = planted_config(seed=seed, noise_ratio=noise)
    owner = {}
    for ev in cfg.events:
        for s in ev.entities:
            owner[s.lstrip("#").lower()] = ev.event_id
    within, cross = Counter(), Counter()
    for row in generate(cfg).tweets:
        ents = sorted({t for t in tokenize(row["text"]) if t in owner})
        for a, b in combinations(ents, 2):
            (within if owner[a] == owner[b] else cross)[(a, b)] += 1
    assert sum(within.values()) > 0
    assert sum(within.values()) > sum(cross.values())
