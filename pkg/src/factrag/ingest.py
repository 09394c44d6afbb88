"""Knowledge-store loading and document chunking.

Each claim's knowledge store is a line-delimited file of scraped documents
(URL plus a list of text blocks). Documents are split into chunks of at most
``max_chunk_chars`` characters, and every chunk carries the full text of its
neighbours so the prompt can show local context without re-reading the store.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class KnowledgeStoreError(Exception):
    """Raised when a knowledge-store file or one of its lines is unusable."""


@dataclass
class DocumentRecord:
    """One scraped document from a claim's knowledge store."""

    claim_id: int
    url: str
    text: str
    doc_index: int


@dataclass
class Chunk:
    """A slice of a document, wired to its neighbours.

    context_before/context_after hold the full text of the adjacent chunks
    in the same document (empty string at document edges).
    """

    claim_id: int
    doc_index: int
    chunk_index: int
    text: str
    url: str
    context_before: str = ""
    context_after: str = ""

    def to_json_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "doc_index": self.doc_index,
            "chunk_index": self.chunk_index,
            "text": self.text,
            "url": self.url,
            "context_before": self.context_before,
            "context_after": self.context_after,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Chunk":
        return cls(
            claim_id=int(data["claim_id"]),
            doc_index=int(data["doc_index"]),
            chunk_index=int(data["chunk_index"]),
            text=data["text"],
            url=data["url"],
            context_before=data.get("context_before", ""),
            context_after=data.get("context_after", ""),
        )


@dataclass
class ChunkingParams:
    max_chunk_chars: int = 2048

    def __post_init__(self) -> None:
        if self.max_chunk_chars < 1:
            raise ValueError("max_chunk_chars must be >= 1")


def load_knowledge_store(
    path: str | Path,
    claim_id: int,
    url_field: str = "url",
    text_field: str = "url2text",
) -> list[DocumentRecord]:
    """Read a claim's knowledge store, one JSON document per line.

    Each line must hold an object with a non-empty URL string and a list of
    text blocks; the blocks are newline-joined into the document text. A
    malformed line fails the whole claim with its line number.
    """
    path = Path(path)
    docs: list[DocumentRecord] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KnowledgeStoreError(
                    f"{path.name}: invalid JSON on line {line_no}: {exc}"
                ) from exc
            if not isinstance(record, dict):
                raise KnowledgeStoreError(f"{path.name}: line {line_no} is not an object")
            url = record.get(url_field)
            blocks = record.get(text_field)
            if not isinstance(url, str) or not url:
                raise KnowledgeStoreError(
                    f"{path.name}: line {line_no} has no usable '{url_field}' field"
                )
            if not isinstance(blocks, list):
                raise KnowledgeStoreError(
                    f"{path.name}: line {line_no} has no '{text_field}' list"
                )
            text = "\n".join(str(block) for block in blocks)
            docs.append(DocumentRecord(claim_id=claim_id, url=url, text=text, doc_index=len(docs)))
    return docs


def _split_blocks(text: str, max_chars: int) -> list[str]:
    """Newline-separated blocks, empties dropped, oversized ones hard-split.

    Every non-final piece of a hard split is exactly max_chars long; this is
    what lets a reader tell hard-split boundaries (no separator) apart from
    block boundaries (one consumed newline) when reassembling the document.
    """
    pieces: list[str] = []
    for block in text.split("\n"):
        if not block:
            continue
        if len(block) <= max_chars:
            pieces.append(block)
        else:
            pieces.extend(block[i : i + max_chars] for i in range(0, len(block), max_chars))
    return pieces


def chunk_document(doc: DocumentRecord, params: ChunkingParams) -> list[Chunk]:
    """Split one document into chunks of at most max_chunk_chars characters.

    Blocks are packed greedily, joined with a single newline inside a chunk.
    Lengths count Unicode code points, so a hard split never lands inside a
    scalar value. Empty documents yield no chunks.
    """
    max_chars = params.max_chunk_chars
    texts: list[str] = []
    current: list[str] = []
    current_len = 0
    for piece in _split_blocks(doc.text, max_chars):
        if not current:
            current = [piece]
            current_len = len(piece)
        elif current_len + 1 + len(piece) <= max_chars:
            current.append(piece)
            current_len += 1 + len(piece)
        else:
            texts.append("\n".join(current))
            current = [piece]
            current_len = len(piece)
    if current:
        texts.append("\n".join(current))

    chunks = [
        Chunk(
            claim_id=doc.claim_id,
            doc_index=doc.doc_index,
            chunk_index=i,
            text=text,
            url=doc.url,
        )
        for i, text in enumerate(texts)
    ]
    for i, chunk in enumerate(chunks):
        if i > 0:
            chunk.context_before = chunks[i - 1].text
        if i < len(chunks) - 1:
            chunk.context_after = chunks[i + 1].text
    return chunks


def build_chunks(docs: list[DocumentRecord], params: ChunkingParams) -> list[Chunk]:
    """Chunk every document, keeping (doc_index, chunk_index) order."""
    out: list[Chunk] = []
    for doc in docs:
        out.extend(chunk_document(doc, params))
    return out
