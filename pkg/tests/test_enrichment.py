import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

sys.path.insert(0, str(Path(__file__).parent))

import reference as ref  # noqa: E402
from enrichevent.core import HASHTAG, NAMED_ENTITY, Entity, TimeFrame, Tweet  # noqa: E402
from enrichevent.embedding import EmbeddingProvider  # noqa: E402
from enrichevent.enrichment import (  # noqa: E402
    EmptyFrameError,
    EntityExtractor,
    build_embedding_matrix,
    build_features,
    build_occurrence_matrix,
    cosine_similarity_matrix,
    dump_matrices,
)


def frame_of(*tweets):
    return TimeFrame(0, 0, 86400, tuple(tweets))


def tw(tid, text, rt=0, user="u"):
    return Tweet.from_dict({"id": tid, "timestamp": 0, "text": text, "user_id": user, "retweet_count": rt})


# -- extraction ---------------------------------------------------------------

def test_sample_tweet_entities():
    got = EntityExtractor().extract(tw("1", "Silicon Valley Bank collapsed #bankruptcy"))
    assert set(got) == {Entity("silicon valley bank", NAMED_ENTITY), Entity("bankruptcy", HASHTAG)}


def test_lowercase_tweet_has_no_entities():
    assert EntityExtractor().extract(tw("1", "nothing to see here today")) == []


def test_lexicon_match():
    ex = EntityExtractor(["notre-dame"])
    assert ex.mode == "lexicon"
    assert ex.extract(tw("1", "fire at Notre-Dame tonight")) == [Entity("notre-dame")]


def test_lexicon_prefers_longest():
    ex = EntityExtractor(["new york", "new york times"])
    assert ex.extract(tw("1", "read the New York Times, then New York")) == [
        Entity("new york times"), Entity("new york")]


def test_sentence_initial_stop_word_dropped_but_names_kept():
    got = EntityExtractor().extract(tw("1", "The market fell. Then Apple rose, Tim Cook said"))
    assert got == [Entity("apple"), Entity("tim cook")]


def test_punctuation_closes_a_name():
    got = EntityExtractor().extract(tw("1", "Paris, London and Rome"))
    assert got == [Entity("paris"), Entity("london"), Entity("rome")]


# -- occurrence matrix ----------------------------------------------------------

def test_occurrence_rows():
    fr = frame_of(tw("1", "x Alpha"), tw("2", "Alpha y"), tw("3", "z Alpha"))
    assert build_occurrence_matrix(fr, [Entity("alpha")]).tolist() == [[1, 1, 1]]
    fr = frame_of(tw("1", "Alpha w Alpha"), tw("2", "b"), tw("3", "c"))
    assert build_occurrence_matrix(fr, [Entity("alpha")]).tolist() == [[2, 0, 0]]


def test_occurrence_matches_naive_count():
    texts = ["Red Sox beat the red sox fans #win", "red sox", "nothing", "#win WIN win Red sox red"]
    fr = frame_of(*(tw(str(i), t) for i, t in enumerate(texts)))
    ents = [Entity("red sox"), Entity("win", HASHTAG), Entity("fans")]

    def naive(surface, text):
        # strip punctuation and the sigil word by word, then count non-overlapping windows
        words = ["".join(ch for ch in w.lower() if ch.isalnum()) for w in text.split()]
        words = [w for w in words if w]
        pat = surface.split()
        i = count = 0
        while i + len(pat) <= len(words):
            if words[i:i + len(pat)] == pat:
                count, i = count + 1, i + len(pat)
            else:
                i += 1
        return count

    want = [[naive(e.surface, t) for t in texts] for e in ents]
    assert build_occurrence_matrix(fr, ents).tolist() == want


def test_hashtag_field_only_counts_once():
    t = Tweet("1", 0, "no sigil here", "u", 0, ("secret",))
    assert build_occurrence_matrix(frame_of(t), [Entity("secret", HASHTAG)]).tolist() == [[1]]


# -- contextual matrix ---------------------------------------------------------

def test_single_tweet_row_is_its_embedding():
    p = EmbeddingProvider(8)
    fr = frame_of(tw("1", "Alpha rises"), tw("2", "other"))
    row = build_embedding_matrix(fr, [Entity("alpha")], p, top_k=5)[0]
    assert np.allclose(row, p.embed_text("Alpha rises"))


def test_top_k_selects_most_retweeted():
    p = EmbeddingProvider(8)
    fr = frame_of(tw("a", "Alpha low", rt=2), tw("b", "Alpha high", rt=5))
    row = build_embedding_matrix(fr, [Entity("alpha")], p, top_k=1)[0]
    assert np.allclose(row, p.embed_text("Alpha high"))


def test_top_two_of_three_concatenated_by_hand():
    p = EmbeddingProvider(8)
    fr = frame_of(tw("a", "Alpha one", rt=1), tw("b", "Alpha two", rt=9), tw("c", "Alpha three w9", rt=4))
    row = build_embedding_matrix(fr, [Entity("alpha")], p, top_k=2)[0]
    assert np.allclose(row, p.embed_text("Alpha two Alpha three w9"))


# -- cosine ------------------------------------------------------------------------

def test_cosine_trivial_cases():
    assert cosine_similarity_matrix([[1, 0], [0, 1]])[0, 1] == 0.0
    assert cosine_similarity_matrix([[1, 1], [2, 2]])[0, 1] == pytest.approx(1.0)
    assert cosine_similarity_matrix([[1, 0], [-1, 0.1]], 0.0)[0, 1] == 0.0


def test_cosine_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rows = rng.uniform(0, 1, size=(4, 5))
        rows[rng.random(4) < 0.2] = 0
        got = cosine_similarity_matrix(rows, 0.3)
        assert np.allclose(got, ref.thresholded_cosine_matrix(rows.tolist(), 0.3), atol=1e-12)


mats = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0, 5, width=32))


@settings(max_examples=60, deadline=None)
@given(mats, st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 10))
def test_cosine_properties(rows, m1, m2, scale):
    lo, hi = sorted((m1, m2))
    a = cosine_similarity_matrix(rows, lo)
    assert np.array_equal(a, a.T)
    assert np.all(cosine_similarity_matrix(rows, hi) <= a)
    scaled = rows.copy()
    scaled[0] *= scale
    diff = np.abs(cosine_similarity_matrix(scaled, lo) - a)
    # entries sitting on the threshold may flip; everything else is unchanged
    near = np.abs(a - lo) < 1e-9
    assert np.all(diff[~near] <= 1e-12)


# -- features --------------------------------------------------------------------

def test_single_entity_feature():
    f = build_features(frame_of(tw("1", "Alpha w1")), EntityExtractor(), EmbeddingProvider(8))
    assert f.feature_vectors.tolist() == [[1.0, 1.0]]


def test_disjoint_pairs_separate():
    texts = ["Alpha w1 Beta", "Beta w2 Alpha w3", "Alpha w4 Beta", "Gamma w5 Delta", "Delta w6 Gamma", "Gamma w7 Delta w8"]
    fr = frame_of(*(tw(str(i), t) for i, t in enumerate(texts)))
    f = build_features(fr, EntityExtractor(), EmbeddingProvider(32), min_sim=0.0)
    names = [e.surface for e in f.entities]
    assert names == ["alpha", "beta", "gamma", "delta"]
    for mat in (f.lexical_sim, f.contextual_sim):
        within = min(mat[0, 1], mat[2, 3])
        cross = max(mat[0, 2], mat[0, 3], mat[1, 2], mat[1, 3])
        assert within > cross
    k = len(names)
    assert f.feature_vectors.shape == (k, 2 * k)


def test_no_entities_raises():
    with pytest.raises(EmptyFrameError):
        build_features(frame_of(tw("1", "all lower case")), EntityExtractor(), EmbeddingProvider(4))


def test_min_entity_freq_prunes():
    fr = frame_of(tw("1", "Alpha w Beta"), tw("2", "Alpha x"))
    f = build_features(fr, EntityExtractor(), EmbeddingProvider(4), min_entity_freq=2)
    assert f.entities == [Entity("alpha")]


def test_dump_matrices(tmp_path):
    f = build_features(frame_of(tw("1", "Alpha w #tag")), EntityExtractor(), EmbeddingProvider(4))
    dump_matrices(f, tmp_path)
    text = (tmp_path / "frame0000_lexical.csv").read_text()
    assert "#tag" in text and "alpha" in text
