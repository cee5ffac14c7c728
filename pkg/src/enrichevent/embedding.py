"""Deterministic token and text embeddings.

Two modes share one interface: ``hashed`` derives every component from a
keyed hash of (token, component index); ``file`` looks tokens up in a
vectors file and falls back to the hashed vector for unknown tokens.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Mapping, Optional

import numpy as np

from .core import tokenize

DEFAULT_DIM = 64
DEFAULT_SEED = 0

_U64 = float(2**64)


class EmptyTextError(ValueError):
    """Text produced no tokens to average."""


class VectorsFileError(ValueError):
    pass


@lru_cache(maxsize=200_000)
def _hashed_vector(token: str, dim: int, seed: int) -> np.ndarray:
    key = seed.to_bytes(8, "little", signed=True)
    values = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        digest = hashlib.blake2b(
            f"{token}\x1f{i}".encode("utf-8"), digest_size=8, key=key
        ).digest()
        values[i] = int.from_bytes(digest, "little") / _U64
    vec = values * 2.0 - 1.0
    vec.setflags(write=False)
    return vec


class EmbeddingProvider:
    """Maps tokens and texts to fixed-length float vectors.

    Read-only after construction, so it can be shared between threads.
    """

    def __init__(
        self,
        dim: int = DEFAULT_DIM,
        seed: int = DEFAULT_SEED,
        vectors: Optional[Mapping[str, np.ndarray]] = None,
    ):
        if dim <= 0:
            raise ValueError("embedding dimension must be positive")
        self.dim = int(dim)
        self.seed = int(seed)
        self._vectors: dict[str, np.ndarray] = {}
        for token, vec in (vectors or {}).items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise VectorsFileError(
                    f"vector for {token!r} has shape {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise VectorsFileError(f"vector for {token!r} is not finite")
            arr = arr.copy()
            arr.setflags(write=False)
            self._vectors[token] = arr

    @property
    def mode(self) -> str:
        return "file" if self._vectors else "hashed"

    @classmethod
    def from_file(cls, path, seed: int = DEFAULT_SEED) -> "EmbeddingProvider":
        """Load ``token<TAB>v1 ... vd`` lines after a required ``dim=<d>`` header."""
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("dim="):
                raise VectorsFileError(f"{path}: missing 'dim=<d>' header")
            try:
                dim = int(header[4:])
            except ValueError as exc:
                raise VectorsFileError(f"{path}: bad header {header!r}") from exc
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                token, sep, rest = line.partition("\t")
                if not sep:
                    raise VectorsFileError(f"{path}:{lineno}: missing tab separator")
                try:
                    values = [float(v) for v in rest.split()]
                except ValueError as exc:
                    raise VectorsFileError(f"{path}:{lineno}: {exc}") from exc
                if len(values) != dim:
                    raise VectorsFileError(
                        f"{path}:{lineno}: expected {dim} values, got {len(values)}"
                    )
                vectors[token] = values
        return cls(dim=dim, seed=seed, vectors=vectors)

    def embed_token(self, token: str) -> np.ndarray:
        if not token:
            raise ValueError("token must be non-empty")
        vec = self._vectors.get(token)
        if vec is None:
            vec = _hashed_vector(token, self.dim, self.seed)
        return vec

    def embed_tokens(self, tokens) -> np.ndarray:
        if not tokens:
            raise EmptyTextError("no tokens to embed")
        return np.mean([self.embed_token(t) for t in tokens], axis=0)

    def embed_text(self, text: str) -> np.ndarray:
        """Mean of the token vectors of ``text``."""
        tokens = tokenize(text)
        if not tokens:
            raise EmptyTextError(f"text has no tokens: {text!r}")
        return self.embed_tokens(tokens)
