"""Few-shot example selection from the train set via Okapi BM25.

The prompt's QA-generation examples are the train claims lexically closest
to the claim under test. The index is built once over the whole train set
and kept in memory; it is immutable afterwards, so concurrent queries are
safe.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

_TOKEN_RE = re.compile(r"[^\W_]+")  # alphanumeric runs, Unicode-aware, no underscore


@dataclass
class TrainExample:
    claim: str
    gold_label: str
    qa_pairs: list[tuple[str, str, str]]  # (question, answer, answer_type)


@dataclass
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    n_examples: int = 3

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.n_examples < 1:
            raise ValueError("n_examples must be >= 1")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


class Bm25Index:
    """Okapi BM25 over the tokenized train claims.

    score(q, d) = sum over query tokens t of
        idf(t) * f(t,d) * (k1 + 1) / (f(t,d) + k1 * (1 - b + b * |d| / avgdl))
    with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is non-negative.
    """

    def __init__(self, corpus: list[TrainExample], params: Bm25Params | None = None):
        self.corpus = list(corpus)
        self.params = params or Bm25Params()
        self._docs = [tokenize(example.claim) for example in self.corpus]
        self._term_freqs = [Counter(doc) for doc in self._docs]
        self._doc_lens = [len(doc) for doc in self._docs]
        n_docs = len(self._docs)
        self._avgdl = (sum(self._doc_lens) / n_docs) if n_docs else 0.0
        df: Counter[str] = Counter()
        for freqs in self._term_freqs:
            df.update(freqs.keys())
        self._idf = {
            term: math.log(1.0 + (n_docs - count + 0.5) / (count + 0.5))
            for term, count in df.items()
        }

    def scores(self, query: str) -> list[float]:
        """BM25 score of every corpus document against the query."""
        k1, b = self.params.k1, self.params.b
        tokens = tokenize(query)
        out = []
        for freqs, doc_len in zip(self._term_freqs, self._doc_lens):
            norm = k1 * (1.0 - b + b * doc_len / self._avgdl) if self._avgdl else 0.0
            score = 0.0
            for token in tokens:
                tf = freqs.get(token)
                if not tf:
                    continue
                score += self._idf[token] * tf * (k1 + 1.0) / (tf + norm)
            out.append(score)
        return out

    def rank(self, query: str, n: int | None = None) -> list[tuple[TrainExample, float]]:
        """Top-n examples by score descending; ties keep corpus order."""
        n = self.params.n_examples if n is None else n
        scored = list(zip(self.corpus, self.scores(query)))
        scored.sort(key=lambda pair: -pair[1])  # stable: corpus order on ties
        return scored[:n]


def bm25_rank(
    corpus: list[TrainExample], query: str, params: Bm25Params
) -> list[tuple[TrainExample, float]]:
    """One-shot convenience: build an index over the corpus and rank."""
    if not corpus:
        raise ValueError("bm25_rank needs a non-empty corpus")
    return Bm25Index(corpus, params).rank(query)


@dataclass
class TrainSetFormat:
    """Field names of the train file; defaults follow the common release."""

    claim_field: str = "claim"
    label_field: str = "label"
    questions_field: str = "questions"
    question_field: str = "question"
    answers_field: str = "answers"
    answer_field: str = "answer"
    answer_type_field: str = "answer_type"
    boolean_explanation_field: str = "boolean_explanation"


def load_train_set(path: str | Path, fmt: TrainSetFormat | None = None) -> list[TrainExample]:
    """Load the train set (a JSON array) into few-shot examples.

    Boolean answers get their explanation appended; questions without
    answers render as unanswerable. Records with no usable QA pairs are
    skipped.
    """
    fmt = fmt or TrainSetFormat()
    with Path(path).open("r", encoding="utf-8") as handle:
        records = json.load(handle)
    examples: list[TrainExample] = []
    for record in records:
        claim = record.get(fmt.claim_field)
        label = record.get(fmt.label_field, "")
        if not claim:
            continue
        qa_pairs: list[tuple[str, str, str]] = []
        for question_rec in record.get(fmt.questions_field) or []:
            question = question_rec.get(fmt.question_field)
            if not question:
                continue
            answers = question_rec.get(fmt.answers_field) or [
                {fmt.answer_field: "No answer could be found.", fmt.answer_type_field: "Unanswerable"}
            ]
            for answer_rec in answers:
                answer = answer_rec.get(fmt.answer_field) or "No answer could be found."
                answer_type = answer_rec.get(fmt.answer_type_field) or "Unanswerable"
                explanation = answer_rec.get(fmt.boolean_explanation_field)
                if answer_type == "Boolean" and explanation:
                    answer = f"{answer}. {explanation}"
                qa_pairs.append((question, answer, answer_type))
        if qa_pairs:
            examples.append(TrainExample(claim=claim, gold_label=label, qa_pairs=qa_pairs))
    return examples
