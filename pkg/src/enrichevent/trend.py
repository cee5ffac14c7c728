"""Per-tweet event/no-event scoring and the frame filter built on it."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .core import TimeFrame
from .embedding import EmbeddingProvider, EmptyTextError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_EPOCHS = 500
DEFAULT_LEARNING_RATE = 2.0


class TweetScorer(Protocol):
    dim: int

    def score(self, x: np.ndarray) -> float: ...


def sigmoid(z):
    # split branches keep exp() from overflowing
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class TrendModel:
    weights: np.ndarray
    bias: float = 0.0
    trained_on: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.size

    @classmethod
    def zeros(cls, dim: int) -> "TrendModel":
        return cls(np.zeros(dim), 0.0, 0)

    def score(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {x.shape}")
        return float(sigmoid(np.array([self.weights @ x + self.bias]))[0])

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {X.shape[1]}")
        return sigmoid(X @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "trained_on": int(self.trained_on),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrendModel":
        weights = obj["weights"]
        if len(weights) != obj["dim"]:
            raise ValueError(f"model dim {obj['dim']} does not match {len(weights)} weights")
        return cls(np.array(weights, dtype=np.float64), float(obj["bias"]), int(obj["trained_on"]))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrendModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def bce_loss(weights, bias, X, y) -> float:
    """Mean binary cross-entropy of a logistic model."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = X @ weights + bias
    # log(1 + e^z) - y z, written to stay finite for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def bce_gradient(weights, bias, X, y):
    """Gradient of ``bce_loss`` with respect to (weights, bias)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    err = sigmoid(X @ weights + bias) - y
    return X.T @ err / len(y), float(np.mean(err))


def train(
    examples: Sequence[tuple[np.ndarray, int]],
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
    batch_size: int = 32,
    on_epoch: Optional[Callable[[int, TrendModel], None]] = None,
) -> TrendModel:
    """Fit a logistic scorer by mini-batch gradient descent on cross-entropy.

    Examples are reshuffled every epoch with a generator seeded once from
    ``seed``, so the result depends only on (examples, hyperparameters, seed).
    ``on_epoch(epoch, model)`` is called after every completed epoch.
    """
    if not examples:
        raise ValueError("no training examples")
    X = np.array([np.asarray(x, dtype=np.float64) for x, _ in examples])
    y = np.array([int(label) for _, label in examples], dtype=np.float64)
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise ValueError("training data needs at least one example of each label")
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")

    n, dim = X.shape
    weights = np.zeros(dim)
    bias = 0.0
    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            gw, gb = bce_gradient(weights, bias, X[idx], y[idx])
            weights = weights - learning_rate * gw
            bias = bias - learning_rate * gb
        if on_epoch is not None:
            on_epoch(epoch, TrendModel(weights.copy(), bias, n))
    return TrendModel(weights, bias, n if epochs > 0 else 0)


def featurize(texts, provider: EmbeddingProvider):
    """Embed texts; returns (matrix, kept indices). Token-less texts are skipped."""
    rows, kept = [], []
    for i, text in enumerate(texts):
        try:
            rows.append(provider.embed_text(text))
        except EmptyTextError:
            continue
        kept.append(i)
    X = np.array(rows) if rows else np.zeros((0, provider.dim))
    return X, kept


def load_labeled(path) -> list[tuple[str, int]]:
    from .core import read_jsonl

    out = []
    for i, row in enumerate(read_jsonl(path), start=1):
        if "text" not in row or "label" not in row:
            raise ValueError(f"{path}:{i}: need 'text' and 'label'")
        label = row["label"]
        if label not in (0, 1) or isinstance(label, bool):
            raise ValueError(f"{path}:{i}: label must be 0 or 1")
        out.append((str(row["text"]), int(label)))
    return out


@dataclass(frozen=True)
class FilterResult:
    frame: TimeFrame
    kept: int
    dropped: int


def filter_frame(
    frame: TimeFrame,
    model: TweetScorer,
    provider: EmbeddingProvider,
    threshold: float = DEFAULT_THRESHOLD,
) -> FilterResult:
    """Keep the tweets whose event probability is at least ``threshold``.

    Tweets without any token cannot be embedded and are dropped.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be within [0, 1]")
    kept = []
    for tweet in frame.tweets:
        try:
            x = provider.embed_text(tweet.text)
        except EmptyTextError:
            continue
        if model.score(x) >= threshold:
            kept.append(tweet)
    dropped = len(frame.tweets) - len(kept)
    logger.debug("frame %d: kept %d, dropped %d", frame.index, len(kept), dropped)
    return FilterResult(frame.with_tweets(kept), len(kept), dropped)


@dataclass
class ClassReport:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassificationReport:
    classes: dict[int, ClassReport]
    macro: ClassReport
    weighted: ClassReport
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def row(r):
            return {"precision": r.precision, "recall": r.recall, "f1": r.f1, "support": r.support}

        return {
            "classes": {str(k): row(v) for k, v in self.classes.items()},
            "macro": row(self.macro),
            "weighted": row(self.weighted),
            "counts": dict(self.counts),
        }


def _ratio(num, den):
    return num / den if den else 0.0


def classification_report(y_true, y_pred) -> ClassificationReport:
    """Per-class precision/recall/F1 for binary labels, plus macro and weighted means."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise ValueError("classification_report needs at least one example")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")

    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))

    classes = {}
    for label, (t, f_pos, f_neg) in ((0, (tn, fn, fp)), (1, (tp, fp, fn))):
        p = _ratio(t, t + f_pos)
        r = _ratio(t, t + f_neg)
        f1 = _ratio(2 * p * r, p + r)
        classes[label] = ClassReport(p, r, f1, t + f_neg)

    total = y_true.size
    macro = ClassReport(
        *(float(np.mean([getattr(c, a) for c in classes.values()])) for a in ("precision", "recall", "f1")),
        support=total,
    )
    weighted = ClassReport(
        *(sum(getattr(c, a) * c.support for c in classes.values()) / total for a in ("precision", "recall", "f1")),
        support=total,
    )
    return ClassificationReport(classes, macro, weighted, {"tp": tp, "fp": fp, "fn": fn, "tn": tn})


def evaluate_model(model: TrendModel, examples, threshold=DEFAULT_THRESHOLD) -> ClassificationReport:
    """Report for (vector, label) pairs scored against ``threshold``."""
    X = np.array([x for x, _ in examples])
    y = np.array([label for _, label in examples])
    pred = (model.predict_proba(X) >= threshold).astype(int)
    return classification_report(y, pred)
