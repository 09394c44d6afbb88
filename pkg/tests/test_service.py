"""HTTP surface tests via the in-process test client."""

import json

import pytest
from fastapi.testclient import TestClient

from factrag.config import load_config
from factrag.service import create_app


@pytest.fixture
def client(workspace):
    config = load_config(workspace, env={})
    app = create_app(config)
    with TestClient(app) as test_client:
        yield test_client


class TestHealth:
    def test_with_config(self, client):
        data = client.get("/health").json()
        assert data == {"status": "ok", "config_loaded": True}

    def test_without_config(self):
        with TestClient(create_app(None)) as bare:
            assert bare.get("/health").json()["config_loaded"] is False
            assert bare.post("/precompute", json={}).status_code == 503


class TestPrecomputeEndpoint:
    def test_build_then_skip(self, client):
        first = client.post("/precompute", json={}).json()
        assert first["built"] == 10 and first["failed"] == 0
        second = client.post("/precompute", json={}).json()
        assert second["skipped"] == 10
        third = client.post("/precompute", json={"force": True, "claim_ids": [0, 1]}).json()
        assert third["built"] == 2

    def test_failure_detail_included(self, client, workspace):
        (workspace.parent / "knowledge_store" / "2.json").write_text("", encoding="utf-8")
        data = client.post("/precompute", json={"force": True}).json()
        assert data["failed"] == 1
        failed = [d for d in data["details"] if d["status"] == "failed"][0]
        assert failed["claim_id"] == 2 and failed["error"]


class TestVerifyEndpoints:
    def test_single_claim_by_id(self, client):
        client.post("/precompute", json={})
        data = client.post("/verify/claim", json={"claim_id": 0}).json()
        assert data["claim_id"] == 0
        assert data["pred_label"] == "Refuted"
        assert data["status"] == "ok"
        assert len(data["evidence"]) == 10
        assert data["timings"]["total_s"] > 0
        assert 0 < data["source_budget_chars"] <= 62000

    def test_single_claim_with_text(self, client):
        client.post("/precompute", json={})
        data = client.post(
            "/verify/claim", json={"claim_id": 1, "claim": "An ad-hoc claim about taxes."}
        ).json()
        assert data["claim"] == "An ad-hoc claim about taxes."
        assert data["status"] == "ok"

    def test_unknown_claim_id_404(self, client):
        response = client.post("/verify/claim", json={"claim_id": 555})
        assert response.status_code == 404

    def test_batch(self, client, workspace):
        client.post("/precompute", json={})
        data = client.post("/verify/batch", json={"workers": 2}).json()
        assert data["total"] == 10 and data["ok"] == 10
        assert data["resumed"] == 0
        assert len(data["metrics"]) == 10
        assert all(not m["over_budget"] for m in data["metrics"])
        output = workspace.parent / "out" / "predictions.json"
        records = json.loads(output.read_text(encoding="utf-8"))
        assert len(records) == 10

    def test_batch_think_override(self, client):
        client.post("/precompute", json={})
        data = client.post("/verify/batch", json={"think": True}).json()
        assert data["ok"] == 10


class TestEvaluateEndpoint:
    def test_evaluate_own_predictions(self, client, workspace):
        client.post("/precompute", json={})
        client.post("/verify/batch", json={})
        payload = {
            "predictions_file": str(workspace.parent / "out" / "predictions.json"),
            "gold_file": str(workspace.parent / "claims.json"),
        }
        data = client.post("/evaluate", json=payload).json()
        assert data["n_claims"] == 10
        # mock chat always answers Refuted; gold labels cycle through 4 labels
        assert data["accuracy"] == pytest.approx(0.3)
        assert data["confusion"]["Supported"]["Refuted"] == 3

    def test_evaluate_without_config(self, tmp_path):
        preds = tmp_path / "p.json"
        gold = tmp_path / "g.json"
        preds.write_text(json.dumps([{"claim_id": 0, "pred_label": "Refuted"}]), encoding="utf-8")
        gold.write_text(json.dumps([{"claim_id": 0, "label": "Refuted"}]), encoding="utf-8")
        with TestClient(create_app(None)) as bare:
            data = bare.post(
                "/evaluate", json={"predictions_file": str(preds), "gold_file": str(gold)}
            ).json()
        assert data["accuracy"] == 1.0

    def test_bad_inputs_400(self, client):
        response = client.post(
            "/evaluate", json={"predictions_file": "/does/not/exist.json", "gold_file": "/nope.json"}
        )
        assert response.status_code == 400
