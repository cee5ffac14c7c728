"""Command-line entry point: ``enrichevent run|synth|train-filter|eval``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

from .core import read_tweets
from .embedding import EmbeddingProvider
from .evaluation import GroundTruth, dumps, evaluate_document, to_json_safe
from .pipeline import ConfigError, Pipeline, RunConfig
from .synth import SynthConfig, generate, planted_config, write_output
from .trend import DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, evaluate_model, featurize, load_labeled, train

logger = logging.getLogger("enrichevent")

LOG_ENV = "ENRICHEVENT_LOG"

# flag name -> help text; every flag maps onto a RunConfig field of the same name
RUN_FLAGS = {
    "window-seconds": "frame width in seconds",
    "origin": "timestamp of frame 0 (default: midnight UTC before the first tweet)",
    "filter-threshold": "minimum event probability for a tweet to pass the filter",
    "top-k": "most-retweeted tweets joined per entity for the contextual vector",
    "min-sim": "cosine similarities below this become 0",
    "min-sim-lexical": "override --min-sim for the occurrence matrix",
    "min-sim-contextual": "override --min-sim for the embedding matrix",
    "min-entity-freq": "drop entities seen in fewer tweets of a frame",
    "clusterer": "hdbscan or dbscan",
    "min-cluster-size": "HDBSCAN minimum cluster size",
    "min-samples": "HDBSCAN neighbours used for core distance",
    "cluster-selection": "eom or leaf",
    "eps": "DBSCAN radius",
    "min-pts": "DBSCAN core point threshold",
    "min-common": "clusters must share more than this many entities to link",
    "max-gap": "frames a chain may skip (only 0 is supported)",
    "embed-dim": "dimension of hashed embeddings",
    "seed": "embedding seed",
    "embeddings-file": "pretrained vectors (text format, 'dim=<d>' header)",
    "lexicon": "entity lexicon, one surface form per line",
    "model": "trend filter model written by train-filter",
    "debug-dir": "write per-frame matrices and condensed trees here",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class UsageError(ValueError):
    pass


def _coerce(name: str, type_name: str, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    optional = type_name.startswith("Optional[")
    base = type_name[len("Optional["):-1] if optional else type_name
    if optional and text.lower() in ("", "none", "null"):
        return None
    try:
        if base == "bool":
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {text!r} as {base}") from None
    return text


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, keys may use dashes."""
    types = RunConfig.field_types()
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, types[key], value)
    return values


def build_run_config(args: argparse.Namespace) -> RunConfig:
    types = RunConfig.field_types()
    values = read_config_file(args.config) if args.config else {}
    for key in types:
        if key in vars(args):
            values[key] = _coerce(key, types[key], getattr(args, key))
    return RunConfig(**values).validate()


def _add_run_flags(p: argparse.ArgumentParser):
    for flag, text in RUN_FLAGS.items():
        p.add_argument(f"--{flag}", help=text, default=argparse.SUPPRESS)
    p.add_argument("--no-filter", action="store_true", default=argparse.SUPPRESS,
                   help="skip the trend filter")
    p.add_argument("--skip-malformed", action="store_true", default=argparse.SUPPRESS,
                   help="log and skip malformed input lines instead of aborting")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enrichevent", description="Entity-based event detection over tweet streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="detect event chains in a tweet stream")
    p.add_argument("input", help="tweets in JSON Lines")
    p.add_argument("--config", help="file of 'key = value' lines; flags take precedence")
    _add_run_flags(p)
    p.add_argument("--ground-truth", help="labels to evaluate against")
    p.add_argument("--out", help="chains document path (default: stdout)")
    p.add_argument("--csv", help="write the per-frame index table here")

    p = sub.add_parser("synth", help="generate a synthetic stream with planted events")
    p.add_argument("config", nargs="?", help="SynthConfig JSON (default: three planted events)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("train-filter", help="fit the trend filter on labelled texts")
    p.add_argument("labeled", help="JSON Lines with 'text' and 'label' (0 or 1)")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--learning-rate", type=float, default=DEFAULT_LEARNING_RATE)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0, help="embedding and shuffling seed")
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--embeddings-file")

    p = sub.add_parser("eval", help="score a chains document against ground truth")
    p.add_argument("chains", help="document written by 'run'")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--csv", help="write the per-frame index table here")
    return parser


def _write_text(path: Optional[str], text: str):
    if path is None:
        sys.stdout.write(text)
        return
    # write then rename, so readers never see a half-written document
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cmd_run(args) -> int:
    config = build_run_config(args)
    gt = GroundTruth.load(args.ground_truth) if args.ground_truth else None
    pipe = Pipeline(config)
    sidecar = open(f"{args.out}.frames.jsonl", "w", encoding="utf-8") if args.out else None
    try:
        for result in pipe.run(read_tweets(args.input, config.skip_malformed)):
            if sidecar is None:
                continue
            row = {
                "frame": result.to_dict(),
                "matching": [list(p) for p in result.matching],
                "open_chains": [c.chain_id for c in pipe.tracker.open_chains],
            }
            sidecar.write(json.dumps(to_json_safe(row), ensure_ascii=False, allow_nan=False) + "\n")
            sidecar.flush()
    finally:
        if sidecar is not None:
            sidecar.close()
    metrics = pipe.metrics(gt)
    _write_text(args.out, dumps(pipe.document(metrics if gt is not None else None)))
    if args.csv:
        metrics.write_csv(args.csv)
    logger.info("%d frames, %d chains", len(pipe.results), len(pipe.chains))
    return 0


def cmd_synth(args) -> int:
    config = SynthConfig.load(args.config) if args.config else planted_config()
    if args.seed is not None:
        config.seed = args.seed
    paths = write_output(generate(config), args.out)
    for name, path in paths.items():
        logger.info("wrote %s: %s", name, path)
    return 0


def cmd_train(args) -> int:
    rows = load_labeled(args.labeled)
    if args.embeddings_file:
        provider = EmbeddingProvider.from_file(args.embeddings_file, seed=args.seed)
    else:
        provider = EmbeddingProvider(args.embed_dim, args.seed)
    X, kept = featurize([text for text, _ in rows], provider)
    if len(kept) < len(rows):
        logger.warning("%d labelled texts have no tokens and were skipped", len(rows) - len(kept))
    examples = [(X[n], rows[i][1]) for n, i in enumerate(kept)]
    if args.epochs < 0 or args.learning_rate <= 0:
        raise UsageError("epochs must be non-negative and learning rate positive")
    model = train(examples, args.epochs, args.learning_rate, args.seed, args.batch_size)
    model.save(args.out)
    sys.stdout.write(dumps(evaluate_model(model, examples).to_dict()))
    return 0


def cmd_eval(args) -> int:
    with open(args.chains, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "chains" not in doc:
        raise UsageError(f"{args.chains}: not a chains document")
    report = evaluate_document(doc, GroundTruth.load(args.ground_truth))
    _write_text(args.out, dumps(report.to_dict()))
    if args.csv:
        report.write_csv(args.csv)
    return 0


COMMANDS = {"run": cmd_run, "synth": cmd_synth, "train-filter": cmd_train, "eval": cmd_eval}


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        # StreamError, ConfigError and friends are all ValueErrors
        print(f"enrichevent: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
