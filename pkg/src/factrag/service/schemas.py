"""Request/response models for the verification service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    config_loaded: bool


class PrecomputeRequest(BaseModel):
    force: bool = False
    claim_ids: list[int] | None = None
    workers: int | None = Field(default=None, ge=1)


class StoreBuildInfo(BaseModel):
    claim_id: int
    status: str
    chunks: int = 0
    elapsed_s: float = 0.0
    error: str = ""


class PrecomputeResponse(BaseModel):
    built: int
    skipped: int
    failed: int
    elapsed_s: float
    details: list[StoreBuildInfo]


class VerifyClaimRequest(BaseModel):
    claim_id: int
    claim: str | None = None  # omitted: look the claim up in the claims file
    think: bool | None = None


class EvidenceItem(BaseModel):
    question: str
    answer: str
    url: str


class TimingsModel(BaseModel):
    retrieval_s: float
    llm_s: float
    total_s: float


class PredictionResponse(BaseModel):
    claim_id: int
    claim: str
    evidence: list[EvidenceItem]
    pred_label: str
    status: str
    timings: TimingsModel
    source_budget_chars: int


class VerifyBatchRequest(BaseModel):
    resume: bool = False
    think: bool | None = None
    workers: int | None = Field(default=None, ge=1)


class ClaimMetricModel(BaseModel):
    claim_id: int
    status: str
    retrieval_s: float
    llm_s: float
    total_s: float
    source_budget_chars: int
    over_budget: bool


class VerifyBatchResponse(BaseModel):
    total: int
    ok: int
    parse_fallback: int
    error: int
    resumed: int
    mean_total_s: float
    p95_total_s: float
    output_file: str
    metrics: list[ClaimMetricModel]


class EvaluateRequest(BaseModel):
    predictions_file: str
    gold_file: str
    label_field: str = "label"


class PerLabelStats(BaseModel):
    precision: float
    recall: float
    support: float


class EvaluateResponse(BaseModel):
    n_claims: int
    accuracy: float
    confusion: dict[str, dict[str, int]]
    per_label: dict[str, PerLabelStats]
