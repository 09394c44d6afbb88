"""MMR and retrieval tests; the oracle re-derives greedy MMR from scratch."""

import math

import numpy as np
import pytest

from factrag.embed import EmbedClient, EmbedderConfig
from factrag.ingest import Chunk
from factrag.retrieve import (
    RetrievalParams,
    mmr_select,
    prompt_budget_chars,
    retrieve_sources,
)
from factrag.vstore import Hit, build_store


def hit(row: int, score: float, vector: np.ndarray) -> Hit:
    chunk = Chunk(claim_id=0, doc_index=0, chunk_index=row, text=f"t{row}", url=f"u{row}")
    return Hit(row=row, score=score, chunk=chunk, vector=vector)


def oracle_mmr(query, vectors, sims, lam, n_pick):
    """Independent greedy MMR: explicit loops, no shared code with the
    implementation. Returns selected candidate indices in order."""
    selected = []
    remaining = list(range(len(vectors)))
    for _ in range(min(n_pick, len(vectors))):
        best_index, best_value = None, None
        for c in remaining:
            if selected:
                diversity = max(
                    float(np.dot(vectors[c], vectors[s])) for s in selected
                )
            else:
                diversity = 0.0
            value = lam * sims[c] - (1 - lam) * diversity
            if best_value is None or value > best_value:  # strict: first wins ties
                best_index, best_value = c, value
        selected.append(best_index)
        remaining.remove(best_index)
    return selected


def random_candidates(rng: np.random.Generator, n: int, dim: int):
    vectors = rng.normal(size=(n, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    query = rng.normal(size=dim)
    query /= np.linalg.norm(query)
    sims = vectors @ query
    order = np.argsort(-sims, kind="stable")
    candidates = [hit(int(i), float(sims[i]), vectors[i]) for i in order]
    return query, candidates


class TestMmrSelect:
    def test_lambda_one_is_similarity_order(self):
        rng = np.random.default_rng(0)
        query, candidates = random_candidates(rng, 20, 8)
        params = RetrievalParams(n_candidates=20, n_sources=8, mmr_lambda=1.0)
        picked = mmr_select(query, candidates, params)
        assert [p.chunk.chunk_index for p in picked] == [c.chunk.chunk_index for c in candidates[:8]]
        assert [p.source_id for p in picked] == list(range(1, 9))

    def test_duplicate_penalized_orthogonal_wins(self):
        # two copies of A (sim .9) and an orthogonal B (sim .8): after A is
        # taken, the second A scores .75*.9 - .25*1 = .425 < B's .6
        a = np.array([1.0, 0.0], dtype=np.float64)
        b = np.array([0.0, 1.0], dtype=np.float64)
        candidates = [hit(0, 0.9, a), hit(1, 0.9, a), hit(2, 0.8, b)]
        params = RetrievalParams(n_candidates=3, n_sources=2, mmr_lambda=0.75)
        picked = mmr_select(np.array([1.0, 0.0]), candidates, params)
        assert [p.chunk.chunk_index for p in picked] == [0, 2]
        assert picked[0].mmr_score == pytest.approx(0.75 * 0.9)
        assert picked[1].mmr_score == pytest.approx(0.75 * 0.8)
        assert picked[1].similarity == pytest.approx(0.8)

    def test_matches_oracle_on_random_sets(self):
        rng = np.random.default_rng(1)
        for trial in range(50):
            query, candidates = random_candidates(rng, 20, 6)
            lam = [0.0, 0.25, 0.75, 1.0][trial % 4]
            params = RetrievalParams(n_candidates=20, n_sources=5, mmr_lambda=lam)
            picked = mmr_select(query, candidates, params)
            vectors = [c.vector for c in candidates]
            sims = [c.score for c in candidates]
            expected = oracle_mmr(query, vectors, sims, lam, 5)
            assert [p.chunk.chunk_index for p in picked] == [
                candidates[i].chunk.chunk_index for i in expected
            ]

    def test_argmax_invariant_under_positive_scaling(self):
        # scaling every similarity by c > 0 scales the whole objective by c:
        # score * c and vector * sqrt(c) leave selection and order unchanged
        rng = np.random.default_rng(9)
        query, candidates = random_candidates(rng, 15, 5)
        params = RetrievalParams(n_candidates=15, n_sources=6, mmr_lambda=0.75)
        baseline = [p.chunk.chunk_index for p in mmr_select(query, candidates, params)]
        for scale in (0.25, 4.0):
            scaled = [
                hit(c.chunk.chunk_index, c.score * scale, c.vector * math.sqrt(scale))
                for c in candidates
            ]
            picked = [p.chunk.chunk_index for p in mmr_select(query, scaled, params)]
            assert picked == baseline

    def test_no_duplicates_and_capped(self):
        rng = np.random.default_rng(2)
        query, candidates = random_candidates(rng, 6, 4)
        params = RetrievalParams(n_candidates=40, n_sources=10, mmr_lambda=0.5)
        picked = mmr_select(query, candidates, params)
        rows = [p.chunk.chunk_index for p in picked]
        assert len(picked) == 6
        assert len(set(rows)) == 6

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            mmr_select(np.ones(4), [], RetrievalParams())

    def test_params_validated(self):
        with pytest.raises(ValueError):
            RetrievalParams(n_candidates=5, n_sources=10)
        with pytest.raises(ValueError):
            RetrievalParams(mmr_lambda=1.5)


def make_store(texts: list[str], embedder: EmbedClient, claim_id: int = 0):
    chunks = [
        Chunk(claim_id=claim_id, doc_index=i, chunk_index=0, text=t, url=f"https://s/{i}",
              context_before="", context_after="")
        for i, t in enumerate(texts)
    ]
    return build_store(claim_id, chunks, embedder.embed_texts(texts))


@pytest.fixture
def mock_embedder():
    return EmbedClient(EmbedderConfig(endpoint_url="mock://hash", dim=24))


class TestRetrieveSources:
    def test_self_match_ranks_first(self, mock_embedder):
        texts = [f"document number {i}" for i in range(8)] + ["the exact claim text"]
        store = make_store(texts, mock_embedder)
        params = RetrievalParams(n_candidates=9, n_sources=3, mmr_lambda=0.75)
        sources = retrieve_sources("the exact claim text", store, mock_embedder, params)
        assert sources[0].source_id == 1
        assert sources[0].chunk.text == "the exact claim text"
        assert sources[0].similarity == pytest.approx(1.0, abs=1e-5)

    def test_fewer_chunks_than_requested(self, mock_embedder):
        store = make_store([f"text {i}" for i in range(6)], mock_embedder)
        params = RetrievalParams(n_candidates=40, n_sources=10, mmr_lambda=0.75)
        sources = retrieve_sources("anything", store, mock_embedder, params)
        assert len(sources) == 6
        assert [s.source_id for s in sources] == [1, 2, 3, 4, 5, 6]

    def test_budget_counts_text_and_contexts(self, mock_embedder):
        store = make_store(["abc", "defg"], mock_embedder)
        store.metadata[0].context_after = "xy"
        params = RetrievalParams(n_candidates=2, n_sources=2, mmr_lambda=1.0)
        sources = retrieve_sources("q", store, mock_embedder, params)
        assert prompt_budget_chars(sources) == 3 + 4 + 2

    def test_golden_selection_is_stable(self, mock_embedder):
        texts = [f"topic {i % 5} sentence {i} about {'tax' if i % 2 else 'health'}" for i in range(30)]
        store = make_store(texts, mock_embedder)
        params = RetrievalParams(n_candidates=20, n_sources=10, mmr_lambda=0.75)
        sources = retrieve_sources("a claim about tax policy", store, mock_embedder, params)
        picked_rows = [s.chunk.doc_index for s in sources]
        # frozen from an oracle-checked run of this configuration
        assert picked_rows == GOLDEN_RETRIEVAL_ROWS


# regenerate by printing picked_rows above after any intended change
GOLDEN_RETRIEVAL_ROWS = [23, 12, 18, 4, 10, 6, 22, 27, 25, 29]
