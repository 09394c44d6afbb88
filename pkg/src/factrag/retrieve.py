"""Claim-side retrieval: embed, kNN, then MMR diversification.

The claim is embedded with the same model as the chunks, the top
``n_candidates`` chunks are fetched by exact cosine kNN, and a greedy
Maximal Marginal Relevance pass picks ``n_sources`` of them that stay close
to the claim while avoiding redundancy with each other. Each selected source
already carries its surrounding context and URL in the chunk metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbedClient
from .ingest import Chunk
from .vstore import Hit, StoreError, VectorStore, knn


@dataclass
class RetrievalParams:
    n_candidates: int = 40  # kNN pool size
    n_sources: int = 10  # sources kept after MMR
    mmr_lambda: float = 0.75  # 1.0 = pure similarity, 0.0 = pure diversity

    def __post_init__(self) -> None:
        if not 1 <= self.n_sources <= self.n_candidates:
            raise ValueError("need 1 <= n_sources <= n_candidates")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ValueError("mmr_lambda must be in [0, 1]")


@dataclass
class RetrievedSource:
    """A chunk selected by MMR; source_id is its 1-based prompt-facing ID."""

    source_id: int
    chunk: Chunk
    similarity: float  # cosine to the claim
    mmr_score: float  # objective value at selection time


def mmr_select(
    query: np.ndarray, candidates: list[Hit], params: RetrievalParams
) -> list[RetrievedSource]:
    """Greedy MMR over kNN candidates.

    Each step picks the unselected candidate maximizing
    ``lambda * sim(c, query) - (1 - lambda) * max_selected sim(c, s)``,
    where the max over an empty selection is 0 (so the first pick is the
    most similar candidate). Ties go to the lower kNN rank. Candidate
    similarities reuse the unit-norm dot product from the store; no
    re-embedding happens here.
    """
    if not candidates:
        raise ValueError("mmr_select needs at least one candidate")
    lam = params.mmr_lambda
    n_pick = min(params.n_sources, len(candidates))

    sims = np.array([hit.score for hit in candidates], dtype=np.float64)
    vectors = np.stack([hit.vector for hit in candidates]).astype(np.float64)
    # true running max of sim(c, selected); can be negative, so only the
    # first pick uses the defined-empty-max of zero
    max_sim_to_selected = np.full(len(candidates), -np.inf)
    unselected = np.ones(len(candidates), dtype=bool)

    selected: list[RetrievedSource] = []
    for step in range(n_pick):
        diversity = max_sim_to_selected if step else np.zeros(len(candidates))
        objective = lam * sims - (1.0 - lam) * diversity
        objective[~unselected] = -np.inf
        best = int(np.argmax(objective))  # first max wins: lower kNN rank on ties
        selected.append(
            RetrievedSource(
                source_id=len(selected) + 1,
                chunk=candidates[best].chunk,
                similarity=float(sims[best]),
                mmr_score=float(objective[best]),
            )
        )
        unselected[best] = False
        max_sim_to_selected = np.maximum(max_sim_to_selected, vectors @ vectors[best])
    return selected


def retrieve_sources(
    claim_text: str,
    store: VectorStore,
    embedder: EmbedClient,
    params: RetrievalParams,
) -> list[RetrievedSource]:
    """Embed the claim, fetch candidates, and MMR-select the final sources."""
    if store.count == 0:
        raise StoreError(f"claim {store.claim_id}: store is empty")
    query = embedder.embed_text(claim_text)
    candidates = knn(store, query, params.n_candidates)
    return mmr_select(query, candidates, params)


def prompt_budget_chars(sources: list[RetrievedSource]) -> int:
    """Total prompt-facing characters across sources (text plus contexts)."""
    return sum(
        len(s.chunk.text) + len(s.chunk.context_before) + len(s.chunk.context_after)
        for s in sources
    )
