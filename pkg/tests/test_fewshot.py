"""BM25 ranking tests, including the hand-evaluated toy-corpus oracle."""

import json
import math

import pytest

from factrag.fewshot import (
    Bm25Index,
    Bm25Params,
    TrainExample,
    bm25_rank,
    load_train_set,
    tokenize,
)


def example(claim: str, label: str = "Supported") -> TrainExample:
    return TrainExample(claim=claim, gold_label=label, qa_pairs=[("q", "a", "Boolean")])


class TestTokenize:
    def test_apostrophe_and_punctuation(self):
        assert tokenize("Imran Khan's critique!") == ["imran", "khan", "s", "critique"]

    def test_empty(self):
        assert tokenize("") == []

    def test_hyphen_split_and_lowercase(self):
        assert tokenize("A-B a b") == ["a", "b", "a", "b"]

    def test_underscore_is_a_separator(self):
        assert tokenize("foo_bar") == ["foo", "bar"]

    def test_unicode_letters_kept(self):
        assert tokenize("Café counts") == ["café", "counts"]


def hand_scores():
    """Okapi terms for corpus ["a b", "a a", "c"], query "a", k1=1.5, b=0.75,
    written out term by term rather than via the implementation."""
    idf_a = math.log(1 + (3 - 2 + 0.5) / (2 + 0.5))
    avgdl = (2 + 2 + 1) / 3
    norm_len2 = 1.5 * (1 - 0.75 + 0.75 * 2 / avgdl)
    score_ab = idf_a * 1 * (1.5 + 1) / (1 + norm_len2)
    score_aa = idf_a * 2 * (1.5 + 1) / (2 + norm_len2)
    return score_ab, score_aa, 0.0


class TestBm25:
    def test_toy_corpus_matches_hand_oracle(self):
        corpus = [example("a b"), example("a a"), example("c")]
        index = Bm25Index(corpus, Bm25Params())
        expected = hand_scores()
        for got, want in zip(index.scores("a"), expected):
            assert got == pytest.approx(want, abs=1e-9)
        ranked = index.rank("a", n=3)
        assert [ex.claim for ex, _ in ranked] == ["a a", "a b", "c"]

    def test_exact_claim_ranks_first(self):
        corpus = [example("the moon is made of cheese"), example("x y z"), example("p q r")]
        ranked = bm25_rank(corpus, "the moon is made of cheese", Bm25Params(n_examples=1))
        assert ranked[0][0].claim == "the moon is made of cheese"
        assert ranked[0][1] > 0

    def test_zero_overlap_keeps_corpus_order(self):
        corpus = [example("aa"), example("bb"), example("cc")]
        ranked = bm25_rank(corpus, "zz qq", Bm25Params(n_examples=2))
        assert [ex.claim for ex, _ in ranked] == ["aa", "bb"]
        assert all(score == 0.0 for _, score in ranked)

    def test_scores_non_negative(self):
        corpus = [example(f"word{i} filler common") for i in range(20)]
        index = Bm25Index(corpus, Bm25Params())
        assert all(score >= 0.0 for score in index.scores("common word3"))

    def test_irrelevant_document_does_not_reorder_others(self):
        base = [example("tax cut passed"), example("tax rise vetoed"), example("budget tax")]
        query = "tax cut"
        before = Bm25Index(base, Bm25Params()).scores(query)
        extended = base + [example("zebra stripes photosynthesis")]
        after = Bm25Index(extended, Bm25Params()).scores(query)[:3]
        assert sorted(range(3), key=lambda i: -before[i]) == sorted(
            range(3), key=lambda i: -after[i]
        )

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            bm25_rank([], "q", Bm25Params())

    def test_params_validated(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=0)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)
        with pytest.raises(ValueError):
            Bm25Params(n_examples=0)

    def test_deterministic(self):
        corpus = [example(f"claim {i} about topic {i % 3}") for i in range(10)]
        params = Bm25Params(n_examples=4)
        first = [(ex.claim, score) for ex, score in bm25_rank(corpus, "topic 1", params)]
        second = [(ex.claim, score) for ex, score in bm25_rank(corpus, "topic 1", params)]
        assert first == second


class TestLoadTrainSet:
    def test_standard_release_records(self, tmp_path):
        records = [
            {
                "claim": "c1",
                "label": "Refuted",
                "questions": [
                    {
                        "question": "q1",
                        "answers": [
                            {"answer": "Yes", "answer_type": "Boolean",
                             "boolean_explanation": "because records show it"},
                            {"answer": "extract", "answer_type": "Extractive"},
                        ],
                    },
                    {"question": "q2", "answers": []},
                ],
            },
            {"claim": "c2", "label": "Supported", "questions": []},
        ]
        path = tmp_path / "train.json"
        path.write_text(json.dumps(records), encoding="utf-8")
        examples = load_train_set(path)
        assert len(examples) == 1  # c2 has no usable QA pairs
        ex = examples[0]
        assert ex.gold_label == "Refuted"
        assert ex.qa_pairs[0] == ("q1", "Yes. because records show it", "Boolean")
        assert ex.qa_pairs[1] == ("q1", "extract", "Extractive")
        assert ex.qa_pairs[2] == ("q2", "No answer could be found.", "Unanswerable")
