import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enrichevent.core import (
    DAY_SECONDS,
    HASHTAG,
    Entity,
    StreamError,
    Tweet,
    default_origin,
    hashtags_in,
    normalize,
    read_tweets,
    tokenize,
    window_stream,
)


def test_two_tweets_share_a_day_third_starts_the_next(make_tweet):
    tweets = [make_tweet("a", 0), make_tweet("b", 10), make_tweet("c", 86401)]
    frames = list(window_stream(tweets, 86400, origin=0))
    assert [[t.text for t in f.tweets] for f in frames] == [["a", "b"], ["c"]]
    assert [(f.start, f.end) for f in frames] == [(0, 86400), (86400, 172800)]


def test_empty_stream_gives_no_frames():
    assert list(window_stream([], 86400)) == []


def test_gap_days_become_empty_frames(make_tweet):
    frames = list(window_stream([make_tweet("a", 0), make_tweet("b", 259200)], 86400, origin=0))
    # hand enumeration: 0 // 86400 = 0, 259200 // 86400 = 3
    assert [f.index for f in frames] == [0, 1, 2, 3]
    assert [len(f) for f in frames] == [1, 0, 0, 1]


def test_default_origin_is_utc_midnight(make_tweet):
    t = 1_672_531_200 + 3600 * 5
    assert default_origin(t) == 1_672_531_200
    frames = list(window_stream([make_tweet("x", t)]))
    assert frames[0].start == 1_672_531_200 and frames[0].end == 1_672_531_200 + DAY_SECONDS


def test_unsorted_stream_reports_position(make_tweet):
    with pytest.raises(StreamError, match="position 1"):
        list(window_stream([make_tweet("a", 100), make_tweet("b", 50)], 86400, origin=0))


def test_tweet_before_origin_rejected(make_tweet):
    with pytest.raises(StreamError):
        list(window_stream([make_tweet("a", 5)], 10, origin=100))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 10**6), max_size=40), st.integers(1, 200_000))
def test_windowing_partitions_the_stream(stamps, width):
    tweets = [Tweet(f"t{i}", ts, "x", "u") for i, ts in enumerate(sorted(stamps))]
    frames = list(window_stream(tweets, width, origin=0))
    emitted = [t for f in frames for t in f.tweets]
    assert emitted == tweets
    if frames:
        first = frames[0].index
        assert [f.index for f in frames] == list(range(first, first + len(frames)))
    frame_of = {t.id: f.index for f in frames for t in f.tweets}
    for a, b in zip(tweets, tweets[1:]):
        if a.timestamp < b.timestamp:
            assert frame_of[a.id] <= frame_of[b.id]
    for f in frames:
        assert all(f.start <= t.timestamp < f.end for t in f.tweets)


@given(st.text(max_size=40))
def test_normalize_is_idempotent(s):
    assert normalize(normalize(s)) == normalize(s)


def test_normalize_and_tokenize():
    assert normalize("  Silicon\tVALLEY \n Bank ") == "silicon valley bank"
    assert tokenize("Wow!! #Bankruptcy, at SVB... ?") == ["wow", "bankruptcy", "at", "svb"]
    assert hashtags_in("#A b #c! #a") == ["a", "c"]


def test_entity_normalizes_surface():
    assert Entity("  Notre   Dame ") == Entity("notre dame")
    assert Entity("#SVB", HASHTAG).surface == "svb"
    with pytest.raises(ValueError):
        Entity("   ")
    with pytest.raises(ValueError):
        Entity("x", "person")


def test_tweet_round_trip_and_hashtag_fallback():
    t = Tweet.from_dict({"id": 7, "timestamp": 3, "text": "go #Team", "user_id": "u", "retweet_count": 2, "extra": 1})
    assert t.id == "7" and t.hashtags == ("team",)
    assert Tweet.from_dict(t.to_dict()) == t


@pytest.mark.parametrize("bad", [
    {"id": "a", "timestamp": "3", "text": "", "user_id": "u", "retweet_count": 0},
    {"id": "a", "timestamp": True, "text": "", "user_id": "u", "retweet_count": 0},
    {"id": "a", "timestamp": 1, "text": "", "user_id": "u"},
    {"id": "a", "timestamp": -1, "text": "", "user_id": "u", "retweet_count": 0},
])
def test_bad_tweets_rejected(bad):
    with pytest.raises((TypeError, KeyError, ValueError)):
        Tweet.from_dict(bad)


def test_read_tweets_line_numbers(tmp_path):
    path = tmp_path / "s.jsonl"
    good = json.dumps({"id": "1", "timestamp": 1, "text": "x", "user_id": "u", "retweet_count": 0})
    path.write_text(good + "\n{oops\n\n" + good + "\n")
    with pytest.raises(StreamError, match=r":2:"):
        list(read_tweets(path))
    assert len(list(read_tweets(path, skip_malformed=True))) == 2
