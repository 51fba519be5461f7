"""Endpoint tests against the FastAPI app (in-process TestClient)."""

import math

import pytest
from fastapi.testclient import TestClient

from autkc.service.app import app

client = TestClient(app)

FIG2 = {
    "scores": [[5, 4, 3, 2, 1], [4, 3, 2, 5, 1]],
    "labels": [0, 0],
    "K": 3,
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200 and resp.json()["status"] == "ok"


def test_eval_endpoint():
    resp = client.post("/eval", json=FIG2)
    assert resp.status_code == 200
    body = resp.json()
    assert body["autkc_up"] == pytest.approx(5 / 6)
    assert body["n"] == 2 and len(body["topk_curve"]) == 4


def test_eval_endpoint_validation():
    resp = client.post("/eval", json={**FIG2, "K": 0})
    assert resp.status_code == 422  # schema-level: K >= 1
    resp = client.post("/eval", json={**FIG2, "K": 5})
    assert resp.status_code == 422  # domain-level: K <= C-1


def test_compare_endpoint():
    resp = client.post("/compare-metrics", json={"C": 5, "k": 2, "K": 3})
    assert resp.status_code == 200
    body = resp.json()
    assert (body["R"], body["S"], body["Q"]) == (6, 0, 0)
    assert body["degree_of_consistency"] == 1.0
    assert body["discriminancy_infinite"] and body["degree_of_discriminancy"] is None
    assert body["closed_form_match"]


def test_compare_endpoint_rejects_k_ge_K():
    resp = client.post("/compare-metrics", json={"C": 5, "k": 3, "K": 3})
    assert resp.status_code == 422


def test_lipschitz_endpoint():
    resp = client.post(
        "/lipschitz", json={"family": "autkc-sq@2", "C": 5, "trials": 500, "seed": 0}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] and 0 < body["max_ratio"] <= 1.0
    assert body["bound_pair"][0] == pytest.approx(2 * math.sqrt(6) / 2)


def test_lipschitz_endpoint_rejects_hinge():
    resp = client.post("/lipschitz", json={"family": "autkc-hinge@2", "C": 5, "trials": 10})
    assert resp.status_code == 422
    assert "normalized" in resp.json()["detail"]


def test_consistency_endpoint_hinge():
    resp = client.post(
        "/consistency", json={"family": "hinge", "C": 23, "K": 1, "trials": 1, "seed": 0}
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] and body["risk_gap"] > 0
    assert body["tail_mass"] > body["condition_threshold"] == 0.5


def test_consistency_endpoint_infeasible_hinge():
    resp = client.post("/consistency", json={"family": "hinge", "C": 5, "K": 2, "trials": 1})
    assert resp.status_code == 422
    assert "unsatisfiable" in resp.json()["detail"]


def test_train_endpoint_smoke():
    req = {
        "loss": "autkc-exp@3",
        "K_eval": [1, 3],
        "epochs": 3,
        "warmup_epochs": 1,
        "seed": 1,
        "model": "linear",
        "data": {"C": 6, "d": 4, "n_train": 200, "n_test": 100, "tau": 1.5},
    }
    resp = client.post("/train", json=req)
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["history"]) == 3
    assert body["history"][0]["loss_family"] == "ce"
    assert body["history"][-1]["loss_family"] == "autkc-exp@3"
    assert set(body["final"]["autkc_up"]) == {"1", "3"}
    assert body["config"]["seed"] == 1


def test_train_endpoint_csv_payload():
    csv_text = "f0,f1,label\n" + "\n".join(
        f"{x},{y},{int(x + y > 0)}" for x, y in [(1.0, 1.0), (-1.0, -1.0), (2.0, 0.5), (-2.0, -0.5)]
    )
    req = {
        "loss": "ce",
        "K_eval": [1],
        "epochs": 2,
        "warmup_epochs": 0,
        "batch_size": 2,
        "model": "linear",
        "train_csv": csv_text,
    }
    resp = client.post("/train", json=req)
    assert resp.status_code == 200
    assert len(resp.json()["history"]) == 2


def test_train_endpoint_bad_loss():
    resp = client.post("/train", json={"loss": "nope@3"})
    assert resp.status_code == 422
    assert "Grammar" in resp.json()["detail"] or "grammar" in resp.json()["detail"].lower()
