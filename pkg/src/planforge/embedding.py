"""Snippet embedding providers.

The default provider is fully offline: token counts hashed into a fixed
number of buckets, L2-normalized. It is deterministic across processes and
platforms (stable md5 bucketing, no interpreter hash seed involved), which is
what makes whole-pipeline runs reproducible without a network. A remote
neural provider with the same interface can be dropped in for fidelity runs.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .errors import PreconditionError, TransportError
from .models import Snippet
from .tokenizer import TokenKind, tokenize

_EMBEDDED_KINDS = frozenset({
    TokenKind.IDENTIFIER, TokenKind.NUMBER, TokenKind.STRING,
    TokenKind.OPERATOR, TokenKind.DELIMITER, TokenKind.KEYWORD,
})


def content_hash(code: str) -> str:
    return hashlib.sha256(code.encode("utf-8")).hexdigest()


def _bucket(kind: TokenKind, text: str, dim: int) -> int:
    digest = hashlib.md5(f"{kind.value}:{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


class HashEmbeddingProvider:
    """Term-frequency hash embedding over code tokens, unit L2 norm."""

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.provider_id = f"hash-tf-{dim}"

    def embed(self, code: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokenize(code):
            if token.kind in _EMBEDDED_KINDS:
                vec[_bucket(token.kind, token.text, self.dim)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_batch(self, codes: list[str]) -> np.ndarray:
        return np.stack([self.embed(c) for c in codes]) if codes else np.zeros((0, self.dim))


class RemoteEmbeddingProvider:
    """Batch HTTPS embedding client; API key comes from the environment."""

    def __init__(self, endpoint: str, model: str, dim: int,
                 api_key_env: str = "PLANFORGE_API_KEY", transport=None,
                 batch_size: int = 64):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.provider_id = f"remote-{model}"
        self._transport = transport

    def embed_batch(self, codes: list[str]) -> np.ndarray:
        import httpx

        api_key = os.environ.get(self.api_key_env, "")
        if not api_key:
            raise TransportError(f"{self.api_key_env} is not set")
        vectors: list[list[float]] = []
        try:
            with httpx.Client(transport=self._transport, timeout=120.0) as client:
                for lo in range(0, len(codes), self.batch_size):
                    batch = codes[lo : lo + self.batch_size]
                    resp = client.post(
                        self.endpoint,
                        json={"model": self.model, "input": batch},
                        headers={"Authorization": f"Bearer {api_key}"},
                    )
                    if resp.status_code >= 400:
                        raise TransportError(f"embedding endpoint returned {resp.status_code}")
                    data = resp.json()["data"]
                    vectors.extend(item["embedding"] for item in data)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        return np.asarray(vectors, dtype=float)

    def embed(self, code: str) -> np.ndarray:
        return self.embed_batch([code])[0]


def embed_snippet(snippet: Snippet, provider) -> np.ndarray:
    if not snippet.code.strip():
        raise PreconditionError(f"snippet {snippet.id} has empty code")
    return provider.embed(snippet.code)
