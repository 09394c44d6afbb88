"""Embedding client: chunk and claim texts to unit-norm float32 vectors.

Talks to an OpenAI-compatible embeddings endpoint (request ``{model, input}``,
response ``{data: [{index, embedding}]}``), which is what the common local
model servers expose. ``mock://hash`` as the endpoint URL selects a
deterministic hash-derived embedder so the whole pipeline can run and be
tested without a model server.
"""

from __future__ import annotations

import hashlib
import logging
import threading
import time
from dataclasses import dataclass

import httpx
import numpy as np

logger = logging.getLogger(__name__)

MOCK_SCHEME = "mock://"


class EmbeddingError(Exception):
    """Endpoint failure or a response that violates the embedding contract."""


@dataclass
class EmbedderConfig:
    endpoint_url: str = "http://localhost:11434/v1/embeddings"
    model_name: str = "mxbai-embed-large"
    dim: int = 1024
    batch_size: int = 32
    timeout_s: float = 30.0
    max_retries: int = 3
    concurrency: int = 4
    auth_token: str | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def normalize(vector: np.ndarray | list[float]) -> np.ndarray:
    """Scale a vector to unit L2 norm (float32). Zero vectors are an error."""
    arr = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or not np.isfinite(norm):
        raise EmbeddingError("cannot normalize a zero or non-finite vector")
    return (arr / norm).astype(np.float32)


def hash_embedding(text: str, dim: int) -> np.ndarray:
    """Deterministic pseudo-embedding derived from the text alone.

    SHA-256 in counter mode supplies 4*dim bytes, read as little-endian
    uint32 and mapped to [-1, 1) before normalization. No RNG involved, so
    the result is bit-identical across runs and platforms.
    """
    needed = 4 * dim
    buf = bytearray()
    counter = 0
    seed = text.encode("utf-8")
    while len(buf) < needed:
        buf.extend(hashlib.sha256(seed + counter.to_bytes(4, "little")).digest())
        counter += 1
    words = np.frombuffer(bytes(buf[:needed]), dtype="<u4").astype(np.float64)
    return normalize(words / 2**31 - 1.0)


class EmbedClient:
    """Batching embedding client with retries and bounded request concurrency.

    Shareable across worker threads; a semaphore caps in-flight HTTP calls
    at ``cfg.concurrency``.
    """

    def __init__(
        self,
        cfg: EmbedderConfig,
        transport: httpx.BaseTransport | None = None,
        retry_base_s: float = 0.5,
    ):
        self.cfg = cfg
        self._retry_base_s = retry_base_s
        self._semaphore = threading.Semaphore(max(1, cfg.concurrency))
        self._mock = cfg.endpoint_url.startswith(MOCK_SCHEME)
        self._client: httpx.Client | None = None
        if not self._mock:
            headers = {}
            if cfg.auth_token:
                headers["Authorization"] = f"Bearer {cfg.auth_token}"
            self._client = httpx.Client(
                timeout=cfg.timeout_s, headers=headers, transport=transport
            )

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        """Embed texts in request batches, preserving input order.

        Only the raw texts are sent, no metadata. Every returned vector is
        unit-norm float32 of the configured dimension.
        """
        for i, text in enumerate(texts):
            if not isinstance(text, str) or not text:
                raise EmbeddingError(f"text {i} is empty; only non-empty strings can be embedded")
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.cfg.batch_size):
            batch = texts[start : start + self.cfg.batch_size]
            if self._mock:
                vectors = [hash_embedding(text, self.cfg.dim) for text in batch]
            else:
                vectors = self._embed_batch(batch)
            for i, vec in enumerate(vectors):
                if vec.shape != (self.cfg.dim,):
                    raise EmbeddingError(
                        f"endpoint returned a {vec.shape[0]}-dim vector for text "
                        f"{start + i}, expected {self.cfg.dim}"
                    )
                out.append(normalize(vec))
        return out

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_texts([text])[0]

    def _embed_batch(self, batch: list[str]) -> list[np.ndarray]:
        payload = {"model": self.cfg.model_name, "input": batch}
        data = self._post_with_retries(payload)
        try:
            rows = data["data"]
            by_index = {int(row["index"]): row["embedding"] for row in rows}
            vectors = [
                np.asarray(by_index[i], dtype=np.float32) for i in range(len(batch))
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"malformed embedding response: {exc}") from exc
        if len(rows) != len(batch):
            raise EmbeddingError(
                f"endpoint returned {len(rows)} embeddings for {len(batch)} inputs"
            )
        return vectors

    def _post_with_retries(self, payload: dict) -> dict:
        assert self._client is not None
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                delay = min(30.0, self._retry_base_s * 2 ** (attempt - 1))
                logger.warning(
                    "embedding request failed (%s), retry %d/%d in %.1fs",
                    last_error,
                    attempt,
                    self.cfg.max_retries,
                    delay,
                )
                time.sleep(delay)
            try:
                with self._semaphore:
                    response = self._client.post(self.cfg.endpoint_url, json=payload)
                if response.status_code >= 500:
                    last_error = EmbeddingError(f"endpoint returned HTTP {response.status_code}")
                    continue
                response.raise_for_status()
                return response.json()
            except httpx.HTTPStatusError as exc:
                raise EmbeddingError(f"embedding endpoint rejected request: {exc}") from exc
            except httpx.HTTPError as exc:
                last_error = exc
        raise EmbeddingError(
            f"embedding endpoint unreachable after {self.cfg.max_retries} retries: {last_error}"
        )
