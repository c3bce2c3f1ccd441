"""Text embedders and similarity matching of generator outputs to actions."""

from __future__ import annotations

import hashlib
import re
from typing import Mapping, Optional

import numpy as np

from ..exceptions import ConfigurationError


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ConfigurationError("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def cosine_matrix(queries, keys):
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    K = np.atleast_2d(np.asarray(keys, dtype=float))
    qn = np.linalg.norm(Q, axis=1, keepdims=True)
    kn = np.linalg.norm(K, axis=1, keepdims=True)
    if np.any(qn == 0) or np.any(kn == 0):
        raise ConfigurationError("cosine similarity is undefined for a zero vector")
    return (Q / qn) @ (K / kn).T


def match_output(output_embedding, action_embeddings) -> int:
    """Id of the most similar action; ties go to the lowest id."""
    sims = cosine_matrix(output_embedding, action_embeddings)[0]
    return int(np.argmax(sims))


def _seed_from(*parts) -> int:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little")


class HashEmbedder:
    """Deterministic unit vector per distinct text, seeded by a hash.

    Identical texts embed identically, so a generator that echoes an action
    text matches that action with similarity 1.
    """

    def __init__(self, dim=64, seed=0):
        self.dim = dim
        self.seed = seed

    def __call__(self, text: str) -> np.ndarray:
        rng = np.random.default_rng(_seed_from("hash-embedder", self.seed, text))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)


class NgramEmbedder:
    """Hashed bag of character n-grams; paraphrases land near each other."""

    def __init__(self, dim=256, n=3):
        self.dim = dim
        self.n = n

    def __call__(self, text: str) -> np.ndarray:
        s = " " + re.sub(r"\s+", " ", text.lower().strip()) + " "
        v = np.zeros(self.dim)
        for i in range(max(len(s) - self.n + 1, 1)):
            v[_seed_from("ngram", s[i:i + self.n]) % self.dim] += 1.0
        norm = np.linalg.norm(v)
        return v / norm if norm else v


class TableEmbedder:
    """Look texts up in a precomputed table, falling back to another embedder."""

    def __init__(self, table: Mapping[str, np.ndarray], fallback: Optional[object] = None):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.fallback = fallback

    def __call__(self, text):
        if text in self.table:
            return self.table[text]
        if self.fallback is None:
            raise KeyError(f"no embedding for {text!r}")
        return self.fallback(text)
