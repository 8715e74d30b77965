"""Static semantic relevance between queries and model descriptions.

The embedder is a deterministic hashed bag-of-tokens stand-in for a neural
sentence encoder: stable across runs and platforms, cheap enough to score a
whole fleet per request. Anything exposing ``embed`` / ``embed_token`` with
the same dimension can be dropped in instead.
"""

from __future__ import annotations

import math
import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

DEFAULT_DIM = 256


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def stable_hash(token: str) -> int:
    """FNV-1a over UTF-8 bytes; independent of PYTHONHASHSEED."""
    h = _FNV_OFFSET
    for b in token.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


class Embedder:
    """Hashed token-count vectors, L2-normalized ('' maps to the zero vector)."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.dim = dim
        self._token_cache: dict[str, list[float]] = {}

    def bucket(self, token: str) -> int:
        return stable_hash(token) % self.dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in tokenize(text):
            vec[self.bucket(token)] += 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            return vec
        return [v / norm for v in vec]

    def embed_token(self, token: str) -> list[float]:
        """Unit vector for a single token (cached; tokens repeat heavily)."""
        cached = self._token_cache.get(token)
        if cached is None:
            cached = self.embed(token)
            self._token_cache[token] = cached
        return cached


def cosine_similarity(a: list[float], b: list[float]) -> float:
    """Dot product of unit vectors; components are non-negative so the
    result lies in [0, 1]. A zero vector on either side yields 0."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return sum(x * y for x, y in zip(a, b))


def maxsim_similarity(
    query_tokens: list[str], description_tokens: list[str], embedder: Embedder
) -> float:
    """Mean over query tokens of the best single-token match in the
    description. Both token lists must be non-empty."""
    if not query_tokens:
        raise ValueError("query token list is empty")
    if not description_tokens:
        raise ValueError("description token list is empty")
    desc_vecs = [embedder.embed_token(t) for t in description_tokens]
    total = 0.0
    for token in query_tokens:
        qv = embedder.embed_token(token)
        total += max(cosine_similarity(qv, dv) for dv in desc_vecs)
    return total / len(query_tokens)
