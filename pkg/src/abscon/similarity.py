"""Label and element similarity used by graph matching.

Node labels are compared either by exact (normalized) match or by cosine
similarity of text embeddings. Relations are always compared exactly.
"""
from __future__ import annotations

import enum
import hashlib
import os
from typing import Protocol, Sequence

import numpy as np

from .errors import ProviderFailure
from .graph import Edge, Node, normalize_label

EMBED_DIM = 256


class SimilarityMode(enum.Enum):
    EMBEDDING = "embedding"
    EXACT_LABEL = "exact"


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        """Return one unit-norm vector per text, all of equal dimension."""
        ...


def _bucket(feature: str) -> int:
    # md5 keeps the hash stable across runs and platforms.
    digest = hashlib.md5(feature.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % EMBED_DIM


def builtin_embed(texts: Sequence[str]) -> list[np.ndarray]:
    """Hashed character-trigram + word-unigram term-frequency vectors.

    Deterministic offline substitute for a sentence-embedding service.
    Empty text maps to the zero vector (similarity 0 to everything).
    """
    out = []
    for text in texts:
        vec = np.zeros(EMBED_DIM)
        norm = normalize_label(text)
        for word in norm.split():
            vec[_bucket("w:" + word)] += 1.0
        for i in range(len(norm) - 2):
            vec[_bucket("t:" + norm[i : i + 3])] += 1.0
        length = np.linalg.norm(vec)
        if length > 0:
            vec /= length
        out.append(vec)
    return out


class BuiltinProvider:
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return builtin_embed(texts)


class RemoteProvider:
    """HTTP embedding service: POST {"texts": [...]} -> {"vectors": [[...]]}.

    The auth token is taken from the ABSCON_EMBED_TOKEN environment variable.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        import requests

        headers = {}
        token = os.environ.get("ABSCON_EMBED_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = requests.post(
                self.endpoint, json={"texts": list(texts)}, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except Exception as exc:
            raise ProviderFailure(str(exc)) from exc
        if len(vectors) != len(texts):
            raise ProviderFailure("provider returned wrong number of vectors")
        out = [np.asarray(v, dtype=float) for v in vectors]
        dims = {v.shape for v in out}
        if len(dims) > 1:
            raise ProviderFailure("provider returned vectors of mixed dimension")
        return out


class CachingProvider:
    """Memoizes embeddings; optionally falls back to the builtin provider."""

    def __init__(self, inner: EmbeddingProvider, fallback_to_builtin: bool = False):
        self.inner = inner
        self.fallback_to_builtin = fallback_to_builtin
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = sorted({t for t in texts if t not in self._cache})
        if missing:
            try:
                vectors = self.inner.embed(missing)
            except ProviderFailure:
                if not self.fallback_to_builtin:
                    raise
                vectors = builtin_embed(missing)
            self._cache.update(zip(missing, vectors))
        return [self._cache[t] for t in texts]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def node_similarity(
    a: Node,
    b: Node,
    mode: SimilarityMode = SimilarityMode.EMBEDDING,
    provider: EmbeddingProvider | None = None,
    case_sensitive: bool = False,
) -> float:
    """Similarity in [0, 1]; 0 whenever the node kinds differ."""
    if a.kind != b.kind:
        return 0.0
    la = normalize_label(a.label, case_sensitive)
    lb = normalize_label(b.label, case_sensitive)
    if mode == SimilarityMode.EXACT_LABEL:
        return 1.0 if la == lb else 0.0
    if la == lb:
        return 1.0
    provider = provider or _DEFAULT_PROVIDER
    va, vb = provider.embed([a.label, b.label])
    return min(1.0, max(0.0, cosine(va, vb)))


def relation_match(e1: Edge, e2: Edge, node_map: dict[str, str], case_sensitive: bool = False) -> bool:
    """Exact relation match: mapped endpoints coincide and labels are equal."""
    if node_map.get(e1.source) != e2.source or node_map.get(e1.target) != e2.target:
        return False
    return normalize_label(e1.label, case_sensitive) == normalize_label(e2.label, case_sensitive)


_DEFAULT_PROVIDER = CachingProvider(BuiltinProvider())
