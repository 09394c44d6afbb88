"""Per-claim persistent vector store with exact cosine kNN.

Rows are unit-norm float32 embeddings, one per chunk, so cosine similarity
is a plain dot product and search is an exact full scan of the matrix:
no approximation, no result drift. Store sizes are per-claim (thousands of
chunks), well within sub-second scan range.

On disk: ``<claim_id>.vs`` holds magic ``AICVS`` + version 0x01, then
little-endian u32 dim and count, then count*dim float32 row-major;
``<claim_id>.meta.jsonl`` holds one chunk-metadata object per row.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Chunk

MAGIC = b"AICVS"
VERSION = 1
_HEADER = struct.Struct("<5sBII")

BINARY_SUFFIX = ".vs"
META_SUFFIX = ".meta.jsonl"


class StoreError(Exception):
    """Inconsistent build inputs or a corrupt/unreadable store on disk."""


@dataclass
class VectorStore:
    claim_id: int
    dim: int
    vectors: np.ndarray  # count x dim float32, unit-norm rows
    metadata: list[Chunk]

    @property
    def count(self) -> int:
        return len(self.metadata)


@dataclass
class Hit:
    """A kNN result row; carries its embedding for downstream reranking."""

    row: int
    score: float
    chunk: Chunk
    vector: np.ndarray


def build_store(claim_id: int, chunks: list[Chunk], embeddings: list[np.ndarray]) -> VectorStore:
    """Assemble a store; row i holds embeddings[i] with metadata chunks[i]."""
    if len(chunks) != len(embeddings):
        raise StoreError(
            f"claim {claim_id}: {len(chunks)} chunks but {len(embeddings)} embeddings"
        )
    if not chunks:
        raise StoreError(f"claim {claim_id}: empty store")
    dims = {len(vec) for vec in embeddings}
    if len(dims) != 1:
        raise StoreError(f"claim {claim_id}: mixed embedding dimensions {sorted(dims)}")
    matrix = np.stack([np.asarray(vec, dtype=np.float32) for vec in embeddings])
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
    if not np.all(np.abs(norms - 1.0) <= 1e-3):
        raise StoreError(f"claim {claim_id}: embeddings are not unit-norm")
    return VectorStore(claim_id=claim_id, dim=matrix.shape[1], vectors=matrix, metadata=list(chunks))


def knn(store: VectorStore, query: np.ndarray, k: int) -> list[Hit]:
    """Exact top-k by dot product, descending; ties go to the lower row."""
    query = np.asarray(query, dtype=np.float32)
    if query.shape != (store.dim,):
        raise StoreError(f"query dim {query.shape} does not match store dim {store.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = store.vectors @ query
    order = np.argsort(-scores, kind="stable")[: min(k, store.count)]
    return [
        Hit(row=int(row), score=float(scores[row]), chunk=store.metadata[row], vector=store.vectors[row])
        for row in order
    ]


def store_paths(stores_dir: str | Path, claim_id: int) -> tuple[Path, Path]:
    stores_dir = Path(stores_dir)
    return stores_dir / f"{claim_id}{BINARY_SUFFIX}", stores_dir / f"{claim_id}{META_SUFFIX}"


def save_store(store: VectorStore, stores_dir: str | Path) -> tuple[Path, Path]:
    """Write binary matrix + metadata sidecar atomically; returns both paths."""
    binary_path, meta_path = store_paths(stores_dir, store.claim_id)
    binary_path.parent.mkdir(parents=True, exist_ok=True)

    header = _HEADER.pack(MAGIC, VERSION, store.dim, store.count)
    body = np.ascontiguousarray(store.vectors, dtype="<f4").tobytes()
    tmp_bin = binary_path.with_suffix(binary_path.suffix + ".tmp")
    tmp_bin.write_bytes(header + body)

    tmp_meta = meta_path.with_suffix(meta_path.suffix + ".tmp")
    with tmp_meta.open("w", encoding="utf-8") as handle:
        for chunk in store.metadata:
            handle.write(json.dumps(chunk.to_json_dict(), ensure_ascii=False) + "\n")

    tmp_bin.replace(binary_path)
    tmp_meta.replace(meta_path)
    return binary_path, meta_path


def peek_store(stores_dir: str | Path, claim_id: int) -> tuple[int, int] | None:
    """Cheap validity probe. Returns (dim, count) or None if absent/corrupt."""
    binary_path, meta_path = store_paths(stores_dir, claim_id)
    if not binary_path.exists() or not meta_path.exists():
        return None
    try:
        with binary_path.open("rb") as handle:
            magic, version, dim, count = _HEADER.unpack(handle.read(_HEADER.size))
        if magic != MAGIC or version != VERSION:
            return None
        if binary_path.stat().st_size != _HEADER.size + 4 * dim * count:
            return None
        with meta_path.open("r", encoding="utf-8") as handle:
            lines = sum(1 for line in handle if line.strip())
        if lines != count:
            return None
        return dim, count
    except (OSError, struct.error):
        return None


def load_store(stores_dir: str | Path, claim_id: int) -> VectorStore:
    """Load a store; bit-exact inverse of save_store."""
    binary_path, meta_path = store_paths(stores_dir, claim_id)
    try:
        raw = binary_path.read_bytes()
    except OSError as exc:
        raise StoreError(f"claim {claim_id}: cannot read store: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise StoreError(f"claim {claim_id}: corrupt store (truncated header)")
    magic, version, dim, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise StoreError(f"claim {claim_id}: bad magic bytes {magic!r}")
    if version != VERSION:
        raise StoreError(f"claim {claim_id}: unsupported store version {version}")
    expected = _HEADER.size + 4 * dim * count
    if len(raw) != expected:
        raise StoreError(
            f"claim {claim_id}: corrupt store ({len(raw)} bytes, expected {expected})"
        )
    vectors = (
        np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim).copy()
    )

    metadata: list[Chunk] = []
    try:
        with meta_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle):
                if not line.strip():
                    continue
                try:
                    metadata.append(Chunk.from_json_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise StoreError(
                        f"claim {claim_id}: corrupt metadata line {line_no}: {exc}"
                    ) from exc
    except OSError as exc:
        raise StoreError(f"claim {claim_id}: cannot read metadata: {exc}") from exc
    if len(metadata) != count:
        raise StoreError(
            f"claim {claim_id}: metadata has {len(metadata)} rows, binary has {count}"
        )
    return VectorStore(claim_id=claim_id, dim=dim, vectors=vectors, metadata=metadata)
