"""Batch orchestration: precompute stores, verify claims, score labels.

Precompute is embarrassingly parallel per claim (bounded by the embedding
client's own concurrency cap); verification runs retrieval and prompting
in parallel workers while generations are serialized by the chat client's
semaphore. Every input claim yields exactly one prediction - stage failures
are encoded in the prediction status, never thrown past the claim boundary.

The predictions file is a JSON array ordered by claim_id with deterministic
content (no timings); per-claim timings and budget figures go to the run
report and the ``<output>.metrics.json`` sidecar. A crash-safe journal
(``<output>.partial.jsonl``) makes interrupted runs resumable without
repeating LLM calls.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .embed import EmbedClient
from .fewshot import Bm25Index, TrainExample, load_train_set
from .ingest import build_chunks, load_knowledge_store
from .labels import LABELS, canonical_label
from .llm import ChatClient
from .prompt import build_prompt_bundle
from .retrieve import prompt_budget_chars, retrieve_sources
from .vstore import build_store, load_store, peek_store, save_store
from .verdict import VerdictParseError, parse_llm_output

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_PARSE_FALLBACK = "parse_fallback"
STATUS_ERROR = "error"


class PipelineError(Exception):
    """Batch-level failure: bad inputs, id mismatches, unresumable output."""


@dataclass
class Claim:
    claim_id: int
    text: str
    speaker: str | None = None
    claim_date: str | None = None
    gold_label: str | None = None


@dataclass
class Timings:
    retrieval_s: float = 0.0
    llm_s: float = 0.0
    total_s: float = 0.0


@dataclass
class Prediction:
    claim_id: int
    claim: str
    evidence: list[dict]
    pred_label: str
    status: str
    timings: Timings = field(default_factory=Timings)
    source_budget_chars: int = 0
    detail: str = ""

    def to_output_record(self) -> dict:
        """The deterministic record written to the predictions file."""
        return {
            "claim_id": self.claim_id,
            "claim": self.claim,
            "evidence": self.evidence,
            "pred_label": self.pred_label,
            "status": self.status,
        }


@dataclass
class StoreBuildResult:
    claim_id: int
    status: str  # built | skipped | failed
    chunks: int = 0
    elapsed_s: float = 0.0
    error: str = ""


@dataclass
class PrecomputeReport:
    built: int = 0
    skipped: int = 0
    failed: int = 0
    elapsed_s: float = 0.0
    details: list[StoreBuildResult] = field(default_factory=list)


@dataclass
class ClaimMetric:
    claim_id: int
    status: str
    retrieval_s: float
    llm_s: float
    total_s: float
    source_budget_chars: int
    over_budget: bool


@dataclass
class BatchReport:
    total: int = 0
    ok: int = 0
    parse_fallback: int = 0
    error: int = 0
    resumed: int = 0
    mean_total_s: float = 0.0
    p95_total_s: float = 0.0
    output_file: str = ""
    metrics: list[ClaimMetric] = field(default_factory=list)


@dataclass
class EvaluationReport:
    n_claims: int
    accuracy: float
    confusion: dict[str, dict[str, int]]  # confusion[gold][pred]
    per_label: dict[str, dict[str, float]]  # precision / recall / support


def load_claims(config: RunConfig) -> list[Claim]:
    """Read the claims file (JSON array) using the configured field names.

    Records without an id field get their 0-based array index as claim_id.
    """
    fmt = config.claims_format
    path = config.paths.claims_file
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PipelineError(f"cannot load claims file {path}: {exc}") from exc
    if not isinstance(records, list):
        raise PipelineError(f"claims file {path} is not a JSON array")
    claims: list[Claim] = []
    for index, record in enumerate(records):
        if not isinstance(record, dict):
            raise PipelineError(f"claims file {path}: record {index} is not an object")
        text = record.get(fmt.text_field)
        if not text or not isinstance(text, str):
            raise PipelineError(f"claims file {path}: record {index} has no claim text")
        claim_id = record.get(fmt.id_field, index)
        claims.append(
            Claim(
                claim_id=int(claim_id),
                text=text,
                speaker=record.get(fmt.speaker_field) or None,
                claim_date=record.get(fmt.date_field) or None,
                gold_label=record.get(fmt.label_field) or None,
            )
        )
    seen: set[int] = set()
    duplicates: set[int] = set()
    for claim in claims:
        if claim.claim_id in seen:
            duplicates.add(claim.claim_id)
        seen.add(claim.claim_id)
    if duplicates:
        raise PipelineError(f"claims file {path}: duplicate claim ids {sorted(duplicates)}")
    return claims


def _journal_path(output_file: Path) -> Path:
    return output_file.parent / (output_file.name + ".partial.jsonl")


def _read_journal(journal: Path) -> dict[int, dict]:
    """Validated journal records by claim_id; any damage refuses the resume."""
    done: dict[int, dict] = {}
    required = ("claim_id", "claim", "evidence", "pred_label", "status")
    try:
        lines = journal.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PipelineError(f"cannot read partial output {journal}: {exc}") from exc
    for line_no, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PipelineError(
                f"refusing resume: corrupt partial output {journal} line {line_no}: {exc}"
            ) from exc
        if not isinstance(record, dict) or any(key not in record for key in required):
            raise PipelineError(
                f"refusing resume: partial output {journal} line {line_no} is incomplete"
            )
        done[int(record["claim_id"])] = record
    return done


def _percentile_95(values: list[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    return ordered[max(0, math.ceil(0.95 * len(ordered)) - 1)]


class Runner:
    """Owns the clients and indexes one run needs; shareable across requests.

    ``embedder``/``chat``/``train_examples`` can be injected for tests; by
    default they are built from the config.
    """

    def __init__(
        self,
        config: RunConfig,
        embedder: EmbedClient | None = None,
        chat: ChatClient | None = None,
        train_examples: list[TrainExample] | None = None,
    ):
        self.config = config
        self.embedder = embedder or EmbedClient(config.embedder)
        self.chat = chat or ChatClient(config.llm, concurrency=config.llm_concurrency)
        self._train_examples = train_examples
        self._fewshot_index: Bm25Index | None = None
        self._fewshot_lock = threading.Lock()
        self._chat_variants: dict[bool, ChatClient] = {}
        self._chat_lock = threading.Lock()

    @property
    def fewshot_index(self) -> Bm25Index | None:
        """BM25 index over the train set, built once on first use."""
        with self._fewshot_lock:
            if self._fewshot_index is None:
                examples = self._train_examples
                if examples is None:
                    if self.config.paths.train_file is None:
                        examples = []
                    else:
                        examples = load_train_set(
                            self.config.paths.train_file, self.config.train_format
                        )
                    self._train_examples = examples
                if examples:
                    self._fewshot_index = Bm25Index(examples, self.config.fewshot)
            return self._fewshot_index

    # ------------------------------------------------------------------
    # precompute

    def precompute_claim(self, claim_id: int, force: bool = False) -> StoreBuildResult:
        """Build (or skip) the vector store for one claim."""
        config = self.config
        started = time.perf_counter()
        if not force:
            existing = peek_store(config.paths.stores_dir, claim_id)
            if existing is not None and existing[0] == config.embedder.dim:
                return StoreBuildResult(claim_id=claim_id, status="skipped", chunks=existing[1])
        try:
            store_file = config.paths.knowledge_store_dir / f"{claim_id}.json"
            if not store_file.exists():
                raise PipelineError(f"knowledge store not found: {store_file}")
            docs = load_knowledge_store(
                store_file,
                claim_id,
                url_field=config.knowledge_format.url_field,
                text_field=config.knowledge_format.text_field,
            )
            chunks = build_chunks(docs, config.chunking)
            if not chunks:
                raise PipelineError("knowledge store produced no chunks")
            embeddings = self.embedder.embed_texts([chunk.text for chunk in chunks])
            store = build_store(claim_id, chunks, embeddings)
            save_store(store, config.paths.stores_dir)
        except Exception as exc:
            logger.error("claim=%s stage=precompute failed: %s", claim_id, exc)
            return StoreBuildResult(
                claim_id=claim_id,
                status="failed",
                elapsed_s=time.perf_counter() - started,
                error=str(exc),
            )
        elapsed = time.perf_counter() - started
        logger.info(
            "claim=%s stage=precompute chunks=%d elapsed=%.2fs", claim_id, len(chunks), elapsed
        )
        return StoreBuildResult(
            claim_id=claim_id, status="built", chunks=len(chunks), elapsed_s=elapsed
        )

    def precompute(
        self,
        force: bool = False,
        claim_ids: list[int] | None = None,
        workers: int | None = None,
    ) -> PrecomputeReport:
        """Build stores for every claim; per-claim failures don't stop the batch."""
        started = time.perf_counter()
        if claim_ids is None:
            claim_ids = [claim.claim_id for claim in load_claims(self.config)]
        workers = workers or self.config.workers
        results: list[StoreBuildResult] = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self.precompute_claim, cid, force) for cid in claim_ids]
            results = [future.result() for future in futures]
        report = PrecomputeReport(elapsed_s=time.perf_counter() - started, details=results)
        for result in results:
            if result.status == "built":
                report.built += 1
            elif result.status == "skipped":
                report.skipped += 1
            else:
                report.failed += 1
        return report

    # ------------------------------------------------------------------
    # verify

    def _chat_for(self, think: bool | None) -> ChatClient:
        """The shared chat client, or a cached variant with think overridden.

        Variants are cached so the generation-concurrency cap stays global
        across a batch instead of per-claim.
        """
        if think is None or think == self.config.llm.think:
            return self.chat
        with self._chat_lock:
            if think not in self._chat_variants:
                cfg = dataclasses.replace(self.config.llm, think=think)
                self._chat_variants[think] = ChatClient(
                    cfg, concurrency=self.config.llm_concurrency
                )
            return self._chat_variants[think]

    def verify_claim(self, claim: Claim, think: bool | None = None) -> Prediction:
        """Run retrieval, prompting, generation and parsing for one claim.

        Never raises: any stage failure produces a prediction with the
        fallback label and an explanatory status.
        """
        config = self.config
        chat = self._chat_for(think)
        started = time.perf_counter()
        timings = Timings()
        try:
            store = load_store(config.paths.stores_dir, claim.claim_id)
            retrieval_started = time.perf_counter()
            sources = retrieve_sources(claim.text, store, self.embedder, config.retrieval)
            timings.retrieval_s = time.perf_counter() - retrieval_started
            budget = prompt_budget_chars(sources)

            index = self.fewshot_index
            examples = [example for example, _ in index.rank(claim.text)] if index else []
            bundle = build_prompt_bundle(
                sources,
                examples,
                claim.text,
                speaker=claim.speaker,
                claim_date=claim.claim_date,
                include_metadata=config.include_claim_metadata,
            )
            urls = [source.chunk.url for source in sources]

            report = None
            parse_error: VerdictParseError | None = None
            for attempt in range(2):  # one same-prompt retry on parse failure
                result = chat.chat(bundle.system, bundle.user)
                timings.llm_s += result.latency_s
                try:
                    report = parse_llm_output(result.text, len(sources), urls)
                    break
                except VerdictParseError as exc:
                    parse_error = exc
                    logger.warning(
                        "claim=%s stage=parse attempt=%d failed: %s", claim.claim_id, attempt, exc
                    )
            if report is None:
                timings.total_s = time.perf_counter() - started
                return Prediction(
                    claim_id=claim.claim_id,
                    claim=claim.text,
                    evidence=[],
                    pred_label=config.fallback_label,
                    status=STATUS_PARSE_FALLBACK,
                    timings=timings,
                    source_budget_chars=budget,
                    detail=str(parse_error),
                )
            evidence = [
                {"question": triple.question, "answer": triple.answer, "url": triple.url}
                for triple in report.qa
            ]
            timings.total_s = time.perf_counter() - started
            logger.info(
                "claim=%s stage=verify label=%s elapsed=%.2fs",
                claim.claim_id,
                report.final_label,
                timings.total_s,
            )
            return Prediction(
                claim_id=claim.claim_id,
                claim=claim.text,
                evidence=evidence,
                pred_label=report.final_label,
                status=STATUS_OK,
                timings=timings,
                source_budget_chars=budget,
            )
        except Exception as exc:
            timings.total_s = time.perf_counter() - started
            logger.error("claim=%s stage=verify failed: %s", claim.claim_id, exc)
            return Prediction(
                claim_id=claim.claim_id,
                claim=claim.text,
                evidence=[],
                pred_label=config.fallback_label,
                status=STATUS_ERROR,
                timings=timings,
                detail=str(exc),
            )

    def verify_batch(
        self,
        resume: bool = False,
        think: bool | None = None,
        workers: int | None = None,
    ) -> BatchReport:
        """Verify every claim, write the predictions file, report timings."""
        config = self.config
        claims = load_claims(config)
        output_file = config.paths.output_file
        journal = _journal_path(output_file)

        done: dict[int, dict] = {}
        if resume and journal.exists():
            done = _read_journal(journal)
        elif not resume and journal.exists():
            journal.unlink()

        pending = [claim for claim in claims if claim.claim_id not in done]
        journal.parent.mkdir(parents=True, exist_ok=True)
        journal_lock = threading.Lock()
        report = BatchReport(total=len(claims), resumed=len(done), output_file=str(output_file))

        new_records: dict[int, dict] = {}
        with journal.open("a", encoding="utf-8") as journal_handle:
            with ThreadPoolExecutor(max_workers=workers or config.workers) as pool:
                futures = {
                    pool.submit(self.verify_claim, claim, think): claim for claim in pending
                }
                for future in as_completed(futures):
                    prediction = future.result()
                    record = prediction.to_output_record()
                    with journal_lock:
                        journal_handle.write(json.dumps(record, ensure_ascii=False) + "\n")
                        journal_handle.flush()
                    new_records[prediction.claim_id] = record
                    report.metrics.append(
                        ClaimMetric(
                            claim_id=prediction.claim_id,
                            status=prediction.status,
                            retrieval_s=prediction.timings.retrieval_s,
                            llm_s=prediction.timings.llm_s,
                            total_s=prediction.timings.total_s,
                            source_budget_chars=prediction.source_budget_chars,
                            over_budget=prediction.timings.total_s > config.per_claim_budget_s,
                        )
                    )

        all_records = {**done, **new_records}
        ordered = [all_records[cid] for cid in sorted(all_records)]
        output_file.parent.mkdir(parents=True, exist_ok=True)
        with output_file.open("w", encoding="utf-8") as handle:
            json.dump(ordered, handle, ensure_ascii=False, indent=1)
            handle.write("\n")
        journal.unlink(missing_ok=True)

        report.metrics.sort(key=lambda metric: metric.claim_id)
        for record in ordered:
            status = record.get("status", STATUS_OK)
            if status == STATUS_OK:
                report.ok += 1
            elif status == STATUS_PARSE_FALLBACK:
                report.parse_fallback += 1
            else:
                report.error += 1
        times = [metric.total_s for metric in report.metrics]
        if times:
            report.mean_total_s = sum(times) / len(times)
            report.p95_total_s = _percentile_95(times)

        metrics_file = output_file.parent / (output_file.name + ".metrics.json")
        metrics_file.write_text(
            json.dumps(
                {
                    "total": report.total,
                    "ok": report.ok,
                    "parse_fallback": report.parse_fallback,
                    "error": report.error,
                    "resumed": report.resumed,
                    "mean_total_s": report.mean_total_s,
                    "p95_total_s": report.p95_total_s,
                    "claims": [dataclasses.asdict(metric) for metric in report.metrics],
                },
                indent=1,
            )
            + "\n",
            encoding="utf-8",
        )
        logger.info(
            "batch done: %d claims, mean=%.2fs p95=%.2fs (ok=%d fallback=%d error=%d)",
            report.total,
            report.mean_total_s,
            report.p95_total_s,
            report.ok,
            report.parse_fallback,
            report.error,
        )
        return report


def evaluate_labels(
    predictions_file: str | Path, gold_file: str | Path, label_field: str = "label"
) -> EvaluationReport:
    """Exact-match label accuracy plus a 4x4 confusion matrix.

    The gold file is a claims-style JSON array carrying gold labels; ids
    must match the predictions exactly (missing ids on either side are an
    error).
    """
    try:
        predictions = json.loads(Path(predictions_file).read_text(encoding="utf-8"))
        gold_records = json.loads(Path(gold_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PipelineError(f"cannot load evaluation inputs: {exc}") from exc
    if not isinstance(predictions, list) or not isinstance(gold_records, list):
        raise PipelineError("evaluation inputs must be JSON arrays")

    pred_by_id: dict[int, str] = {}
    for index, record in enumerate(predictions):
        claim_id = int(record.get("claim_id", index))
        pred_by_id[claim_id] = record.get("pred_label", "")

    gold_by_id: dict[int, str] = {}
    for index, record in enumerate(gold_records):
        claim_id = int(record.get("claim_id", index))
        label = canonical_label(record.get(label_field))
        if label is None:
            raise PipelineError(f"gold record {claim_id} has no recognizable '{label_field}'")
        gold_by_id[claim_id] = label

    missing_gold = sorted(set(pred_by_id) - set(gold_by_id))
    missing_pred = sorted(set(gold_by_id) - set(pred_by_id))
    if missing_gold or missing_pred:
        raise PipelineError(
            f"claim id mismatch: missing in gold {missing_gold}, missing in predictions {missing_pred}"
        )

    confusion = {gold: {pred: 0 for pred in LABELS} for gold in LABELS}
    hits = 0
    for claim_id, gold in gold_by_id.items():
        pred = canonical_label(pred_by_id[claim_id]) or pred_by_id[claim_id]
        if pred in LABELS:
            confusion[gold][pred] += 1
        if pred == gold:
            hits += 1

    per_label: dict[str, dict[str, float]] = {}
    for label in LABELS:
        support = sum(confusion[label].values())
        predicted = sum(confusion[gold][label] for gold in LABELS)
        true_pos = confusion[label][label]
        per_label[label] = {
            "precision": true_pos / predicted if predicted else 0.0,
            "recall": true_pos / support if support else 0.0,
            "support": float(support),
        }
    n_claims = len(gold_by_id)
    return EvaluationReport(
        n_claims=n_claims,
        accuracy=hits / n_claims if n_claims else 0.0,
        confusion=confusion,
        per_label=per_label,
    )
