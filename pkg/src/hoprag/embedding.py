"""Optional dense retriever backed by an external embedding service.

The wire format is the common embeddings shape: POST {"input": [texts],
"model": name} and read back {"data": [{"embedding": [floats]}]}. Passage
embeddings are computed once at index build and cached; queries rank by
cosine similarity of unit-normalized vectors.
"""
from __future__ import annotations

import os

import numpy as np
import requests

from .environments import Corpus, EmptyCorpusError, Passage


class ServiceUnavailableError(Exception):
    """The embedding service could not be reached or returned a server error."""


class DimensionMismatchError(ValueError):
    """Embedding dimensions disagree between passages and/or queries."""


class EmbeddingClient:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "HOPRAG_API_KEY",
        timeout: float = 30.0,
    ):
        self.url = base_url.rstrip("/") + "/v1/embeddings"
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def embed(self, texts: list[str]) -> np.ndarray:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = requests.post(
                self.url,
                json={"input": texts, "model": self.model},
                headers=headers,
                timeout=self.timeout,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise ServiceUnavailableError(str(exc)) from exc
        if resp.status_code >= 500:
            raise ServiceUnavailableError(f"service returned {resp.status_code}")
        if resp.status_code != 200:
            raise ServiceUnavailableError(
                f"unexpected status {resp.status_code}: {resp.text[:200]}"
            )
        try:
            rows = [item["embedding"] for item in resp.json()["data"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceUnavailableError(f"malformed embedding response: {exc}") from exc
        if len(rows) != len(texts):
            raise ServiceUnavailableError(
                f"asked for {len(texts)} embeddings, got {len(rows)}"
            )
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise DimensionMismatchError(f"mixed embedding widths: {sorted(widths)}")
        return np.asarray(rows, dtype=np.float64)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalize rows; all-zero rows are left at zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


class EmbeddingIndex:
    """Cosine-similarity retriever over precomputed passage embeddings."""

    def __init__(self, corpus: Corpus, client: EmbeddingClient, batch_size: int = 64):
        if len(corpus) == 0:
            raise EmptyCorpusError("cannot index an empty corpus")
        self.passages: list[Passage] = list(corpus.passages)
        self.client = client
        chunks = []
        texts = [p.title + " " + p.body for p in self.passages]
        for start in range(0, len(texts), batch_size):
            chunks.append(client.embed(texts[start : start + batch_size]))
        widths = {c.shape[1] for c in chunks}
        if len(widths) > 1:
            raise DimensionMismatchError(f"mixed embedding widths: {sorted(widths)}")
        self.matrix = normalize_rows(np.vstack(chunks))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def retrieve(self, query: str, k: int) -> list[tuple[Passage, float]]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        q = self.client.embed([query])[0]
        if q.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"query embedding has width {q.shape[0]}, index has {self.dim}"
            )
        qn = np.linalg.norm(q)
        if qn > 0:
            q = q / qn
        sims = self.matrix @ q
        order = sorted(
            range(len(self.passages)),
            key=lambda i: (-sims[i], self.passages[i].id),
        )
        return [(self.passages[i], float(sims[i])) for i in order[:k]]
