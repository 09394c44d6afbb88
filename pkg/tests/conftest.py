"""Shared fixtures: a synthetic workspace the whole pipeline can run on."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

WORDS = (
    "government health economy election border tax vaccine climate court "
    "minister senator budget inflation police treaty protest energy trade "
    "hospital school census currency drought refugee pipeline tariff strike"
).split()

LABEL_CYCLE = (
    "Supported",
    "Refuted",
    "Not Enough Evidence",
    "Conflicting Evidence/Cherrypicking",
)


def synth_sentence(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words)).capitalize() + "."


def synth_document_text(rng: random.Random, n_blocks: int) -> str:
    return "\n".join(synth_sentence(rng, rng.randint(8, 40)) for _ in range(n_blocks))


def write_knowledge_store(path: Path, claim_id: int, n_docs: int = 12) -> None:
    rng = random.Random(1000 + claim_id)
    with path.open("w", encoding="utf-8") as handle:
        for doc_index in range(n_docs):
            record = {
                "url": f"https://example.org/claim{claim_id}/doc{doc_index}",
                "url2text": [
                    synth_sentence(rng, rng.randint(10, 50))
                    for _ in range(rng.randint(2, 8))
                ],
            }
            handle.write(json.dumps(record) + "\n")


def write_claims_file(path: Path, n_claims: int) -> None:
    rng = random.Random(7)
    claims = []
    for claim_id in range(n_claims):
        claims.append(
            {
                "claim_id": claim_id,
                "claim": synth_sentence(rng, rng.randint(6, 14)),
                "speaker": f"Speaker {claim_id}",
                "claim_date": f"2024-0{claim_id % 9 + 1}-15",
                "label": LABEL_CYCLE[claim_id % 4],
            }
        )
    path.write_text(json.dumps(claims, indent=1), encoding="utf-8")


def write_train_file(path: Path, n_examples: int = 6) -> None:
    rng = random.Random(42)
    records = []
    for i in range(n_examples):
        records.append(
            {
                "claim": synth_sentence(rng, rng.randint(6, 12)),
                "label": LABEL_CYCLE[i % 4],
                "questions": [
                    {
                        "question": f"Was fact {i}.{q} reported?",
                        "answers": [
                            {
                                "answer": "Yes" if q % 2 == 0 else synth_sentence(rng, 10),
                                "answer_type": "Boolean" if q % 2 == 0 else "Extractive",
                                **({"boolean_explanation": "records confirm it"} if q % 2 == 0 else {}),
                            }
                        ],
                    }
                    for q in range(2)
                ],
            }
        )
    path.write_text(json.dumps(records, indent=1), encoding="utf-8")


CONFIG_TEMPLATE = """\
paths:
  claims_file: claims.json
  knowledge_store_dir: knowledge_store
  stores_dir: stores
  train_file: train.json
  output_file: out/predictions.json
chunking:
  max_chunk_chars: {max_chunk_chars}
retrieval:
  k: {k}
  l: {l}
  lambda: 0.75
fewshot:
  n_examples: 3
embedder:
  endpoint_url: mock://hash
  model_name: test-embed
  dim: {dim}
  batch_size: 16
llm:
  endpoint_url: mock://chat
  model_name: test-llm
  think: false
workers: {workers}
per_claim_budget_s: 60
"""


def build_workspace(
    root: Path,
    n_claims: int = 10,
    n_docs: int = 12,
    dim: int = 32,
    k: int = 40,
    l: int = 10,
    max_chunk_chars: int = 512,
    workers: int = 4,
) -> Path:
    """Create claims, knowledge stores, train set, and a mock-backed config.

    Returns the config path. All content is seeded, so repeated builds are
    byte-identical.
    """
    (root / "knowledge_store").mkdir(parents=True, exist_ok=True)
    (root / "out").mkdir(exist_ok=True)
    write_claims_file(root / "claims.json", n_claims)
    write_train_file(root / "train.json")
    for claim_id in range(n_claims):
        write_knowledge_store(root / "knowledge_store" / f"{claim_id}.json", claim_id, n_docs)
    config_path = root / "config.yaml"
    config_path.write_text(
        CONFIG_TEMPLATE.format(
            max_chunk_chars=max_chunk_chars, k=k, l=l, dim=dim, workers=workers
        ),
        encoding="utf-8",
    )
    return config_path


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    """Config path of a ready 10-claim mock workspace."""
    return build_workspace(tmp_path)


FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR
