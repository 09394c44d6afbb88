"""HTTP service wrapping the verification pipeline.

The app is created around one run configuration; endpoints operate on the
paths it names. Without a config only /health and /evaluate are usable -
that keeps label scoring available to thin clients that have nothing to
configure.
"""

from __future__ import annotations

import dataclasses
import logging

from fastapi import FastAPI, HTTPException

from ..config import RunConfig
from ..pipeline import (
    Claim,
    PipelineError,
    Runner,
    evaluate_labels,
    load_claims,
)
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    PrecomputeRequest,
    PrecomputeResponse,
    PredictionResponse,
    VerifyBatchRequest,
    VerifyBatchResponse,
    VerifyClaimRequest,
)

logger = logging.getLogger(__name__)


def create_app(config: RunConfig | None = None, runner: Runner | None = None) -> FastAPI:
    """Build the service; ``runner`` can be injected for tests."""
    app = FastAPI(title="factrag", version="0.1.0")
    if config is not None:
        config.validate_paths()
        app.state.runner = runner or Runner(config)
    else:
        app.state.runner = runner

    def require_runner() -> Runner:
        if app.state.runner is None:
            raise HTTPException(status_code=503, detail="service started without a run config")
        return app.state.runner

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", config_loaded=app.state.runner is not None)

    @app.post("/precompute", response_model=PrecomputeResponse)
    def precompute(request: PrecomputeRequest) -> PrecomputeResponse:
        runner = require_runner()
        try:
            report = runner.precompute(
                force=request.force, claim_ids=request.claim_ids, workers=request.workers
            )
        except PipelineError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return PrecomputeResponse(
            built=report.built,
            skipped=report.skipped,
            failed=report.failed,
            elapsed_s=report.elapsed_s,
            details=[dataclasses.asdict(result) for result in report.details],
        )

    @app.post("/verify/claim", response_model=PredictionResponse)
    def verify_claim(request: VerifyClaimRequest) -> PredictionResponse:
        runner = require_runner()
        if request.claim:
            claim = Claim(claim_id=request.claim_id, text=request.claim)
        else:
            by_id = {c.claim_id: c for c in load_claims(runner.config)}
            claim = by_id.get(request.claim_id)
            if claim is None:
                raise HTTPException(
                    status_code=404, detail=f"claim {request.claim_id} not in claims file"
                )
        prediction = runner.verify_claim(claim, think=request.think)
        return PredictionResponse(
            claim_id=prediction.claim_id,
            claim=prediction.claim,
            evidence=prediction.evidence,
            pred_label=prediction.pred_label,
            status=prediction.status,
            timings=dataclasses.asdict(prediction.timings),
            source_budget_chars=prediction.source_budget_chars,
        )

    @app.post("/verify/batch", response_model=VerifyBatchResponse)
    def verify_batch(request: VerifyBatchRequest) -> VerifyBatchResponse:
        runner = require_runner()
        try:
            report = runner.verify_batch(
                resume=request.resume, think=request.think, workers=request.workers
            )
        except PipelineError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return VerifyBatchResponse(
            total=report.total,
            ok=report.ok,
            parse_fallback=report.parse_fallback,
            error=report.error,
            resumed=report.resumed,
            mean_total_s=report.mean_total_s,
            p95_total_s=report.p95_total_s,
            output_file=report.output_file,
            metrics=[dataclasses.asdict(metric) for metric in report.metrics],
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(request: EvaluateRequest) -> EvaluateResponse:
        try:
            report = evaluate_labels(
                request.predictions_file, request.gold_file, request.label_field
            )
        except PipelineError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return EvaluateResponse(
            n_claims=report.n_claims,
            accuracy=report.accuracy,
            confusion=report.confusion,
            per_label=report.per_label,
        )

    return app
