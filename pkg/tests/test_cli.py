import json

import pytest

from enrichevent.cli import main, read_config_file
from enrichevent.embedding import EmbeddingProvider
from enrichevent.pipeline import ConfigError
from enrichevent.trend import TrendModel


@pytest.fixture
def synth_dir(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "syn")]) == 0
    return tmp_path / "syn"


def test_default_synth_stream_yields_chains(synth_dir, tmp_path):
    out = tmp_path / "chains.json"
    assert main(["run", str(synth_dir / "stream.jsonl"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["chains"]) >= 1
    # one sidecar line per frame, written as frames complete
    lines = (tmp_path / "chains.json.frames.jsonl").read_text().splitlines()
    assert [json.loads(x)["frame"]["index"] for x in lines] == [0, 1, 2]


def test_empty_input(tmp_path, capsys):
    (tmp_path / "e.jsonl").write_text("")
    assert main(["run", str(tmp_path / "e.jsonl")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["chains"] == [] and doc["frames"] == []


def test_missing_file_and_bad_lines(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.jsonl")]) != 0
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "1", "timestamp": 1, "text": "A b", "user_id": "u", "retweet_count": 0}\nnot json\n')
    assert main(["run", str(bad)]) != 0
    assert ":2:" in capsys.readouterr().err
    assert main(["run", str(bad), "--skip-malformed"]) == 0


def test_invalid_flag_values(tmp_path, synth_dir):
    assert main(["run", str(synth_dir / "stream.jsonl"), "--min-cluster-size", "1"]) != 0
    assert main(["run", str(synth_dir / "stream.jsonl"), "--top-k", "many"]) != 0


def test_config_file_overridden_by_flags(tmp_path, synth_dir, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ntop-k = 3\nmin_sim = 0.4\nno_filter = yes\nlexicon = none\n")
    assert read_config_file(cfg) == {"top_k": 3, "min_sim": 0.4, "no_filter": True, "lexicon": None}
    assert main(["run", str(synth_dir / "stream.jsonl"), "--config", str(cfg), "--top-k", "2"]) == 0
    conf = json.loads(capsys.readouterr().out)["config"]
    assert conf["top_k"] == 2 and conf["min_sim"] == 0.4 and conf["no_filter"] is True
    cfg.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def test_train_then_run_filters_noise(tmp_path, capsys):
    # separable toy set: event tweets use one vocabulary, noise another
    event_words = ["Quake", "Tsunami", "Alert", "Rescue"]
    noise_words = ["lunch", "coffee", "sleepy", "monday"]
    rows = []
    for i in range(40):
        rows.append({"text": f"{event_words[i % 4]} {event_words[(i + 1) % 4]} now", "label": 1})
        rows.append({"text": f"{noise_words[i % 4]} {noise_words[(i + 2) % 4]} now", "label": 0})
    _write_jsonl(tmp_path / "labels.jsonl", rows)
    assert main(["train-filter", str(tmp_path / "labels.jsonl"), "--out", str(tmp_path / "m.json"), "--embed-dim", "16"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["macro"]["f1"] == 1.0

    # same vocabulary as training, reordered; noise tweets are capitalized so they still yield entities
    tweets = [
        {"id": f"e{i}", "timestamp": 100 + i, "text": f"now {event_words[(i + 1) % 4]} {event_words[i % 4]}",
         "user_id": f"u{i}", "retweet_count": i}
        for i in range(6)
    ] + [
        {"id": f"n{i}", "timestamp": 200 + i, "text": f"{noise_words[(i + 2) % 4].title()} {noise_words[i % 4]} now",
         "user_id": f"v{i}", "retweet_count": 0}
        for i in range(6)
    ]
    _write_jsonl(tmp_path / "s.jsonl", tweets)
    assert main(["run", str(tmp_path / "s.jsonl"), "--model", str(tmp_path / "m.json"), "--embed-dim", "16"]) == 0
    doc = json.loads(capsys.readouterr().out)

    # oracle: score each tweet on its own with the saved model
    model = TrendModel.load(tmp_path / "m.json")
    provider = EmbeddingProvider(16, 0)
    passing = [t for t in tweets if model.score(provider.embed_text(t["text"])) >= 0.5]
    assert doc["frames"][0]["kept"] == len(passing)
    assert {t["id"][0] for t in passing} == {"e"}
    seen = {s for s, _ in doc["frames"][0]["entities"]}
    assert any("quake" in name for name in seen)
    assert not any(w in name for name in seen for w in noise_words)


def test_eval_on_perfect_chains(tmp_path, capsys):
    gt = [{"frame": 0, "entity": n, "kind": "named_entity", "event_id": "x", "relevant": True} for n in ("a", "b", "c")]
    _write_jsonl(tmp_path / "gt.jsonl", gt)
    doc = {
        "frames": [{"index": 0, "entities": [[n, "named_entity"] for n in "abc"], "indices": None}],
        "chains": [{"chain_id": 0, "links": [{"frame": 0, "cluster_id": 0, "entities": [[n, "named_entity"] for n in "abc"],
                                              "tweet_ids": ["t"], "user_ids": ["u", "v"]}]}],
    }
    (tmp_path / "chains.json").write_text(json.dumps(doc))
    assert main(["eval", str(tmp_path / "chains.json"), "--ground-truth", str(tmp_path / "gt.jsonl"),
                 "--csv", str(tmp_path / "idx.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["consolidation"] == 1.0
    assert (tmp_path / "idx.csv").read_text().startswith("frame,")


def test_run_with_ground_truth_matches_eval(synth_dir, tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["run", str(synth_dir / "stream.jsonl"), "--ground-truth", str(synth_dir / "ground_truth.jsonl"),
                 "--out", str(out), "--csv", str(tmp_path / "idx.csv")]) == 0
    inline = json.loads(out.read_text())["metrics"]
    assert main(["eval", str(out), "--ground-truth", str(synth_dir / "ground_truth.jsonl")]) == 0
    separate = json.loads(capsys.readouterr().out)
    assert separate == inline
    assert len((tmp_path / "idx.csv").read_text().splitlines()) == 4


def test_synth_twice_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / name), "--seed", "5"]) == 0
    for f in ("stream.jsonl", "ground_truth.jsonl", "labels.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_eval_rejects_non_document(tmp_path):
    (tmp_path / "x.json").write_text("[1, 2]")
    (tmp_path / "gt.jsonl").write_text("")
    assert main(["eval", str(tmp_path / "x.json"), "--ground-truth", str(tmp_path / "gt.jsonl")]) != 0

