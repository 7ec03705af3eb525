import time

import numpy as np
import pandas as pd
import pytest
from fastapi.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from app.core.settings import get_settings

AUTH = {"Authorization": "Bearer test-token"}
SCHEMA = b'{"a": {"role": "feature"}, "b": {"role": "feature"}, "y": {"role": "response"}}'


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setenv("MATCHVAR_API_TOKEN", "test-token")
    monkeypatch.setenv("MATCHVAR_RESULTS_DIR", str(tmp_path / "results"))
    get_settings.cache_clear()
    from main import app

    with TestClient(app) as c:
        yield c
    get_settings.cache_clear()


def training_csv() -> bytes:
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(50, 2))
    frame = pd.DataFrame({"a": x[:, 0], "b": x[:, 1], "y": x[:, 0] + rng.normal(size=50)})
    return frame.to_csv(index=False).encode()


def predict_files(train: bytes | None = None):
    return {
        "train": ("train.csv", train or training_csv(), "text/csv"),
        "schema": ("schema.json", SCHEMA, "application/json"),
        "targets": ("targets.csv", b"a,b\n0.5,0.5\n0.1,0.9\n", "text/csv"),
    }


def tiny_experiment() -> dict:
    return {
        "model": "mlr",
        "n": 20,
        "k": 5,
        "m": 2,
        "b": 3,
        "mtry": 2,
        "nodesize": 2,
        "n_mc": 2,
        "n_truth": 3,
        "targets": "center",
        "seed": 4,
    }


def wait_for(client, run_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.get(f"/simulations/{run_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise AssertionError(f"simulation {run_id} did not finish")


def test_root_and_stats(client):
    assert client.get("/").status_code == 200
    stats = client.get("/stats").json()
    assert {"memory_mb", "cpu_percent", "threads", "pid", "runs"} <= stats.keys()


def test_oracle_check(client):
    body = client.get("/oracle-check", params={"max_n": 8}).json()
    assert body["passed"] is True
    assert body["tap"].startswith("TAP version 13")
    assert all(check["passed"] for check in body["checks"])


def test_predict_requires_token(client):
    response = client.post("/predict", params={"k": 10}, files=predict_files())
    assert response.status_code == 401


def test_predict(client):
    response = client.post("/predict", params={"k": 10, "b": 20, "seed": 3}, files=predict_files(), headers=AUTH)
    assert response.status_code == 200
    rows = response.json()
    assert [r["target_id"] for r in rows] == [0, 1]
    for r in rows:
        assert r["variance"] >= 0.0
        assert r["ci_low"] <= r["point"] <= r["ci_high"]
        assert r["mode"] == "matched"


def test_predict_reports_domain_errors(client):
    response = client.post("/predict", params={"k": 50}, files=predict_files(), headers=AUTH)
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "invalid_config"

    broken = client.post("/predict", params={"k": 10}, files=predict_files(b"a,b,y\n1,x,2\n"), headers=AUTH)
    assert broken.status_code == 422
    assert broken.json()["detail"]["code"] == "malformed_csv"


def test_simulation_lifecycle(client):
    created = client.post("/simulations", json=tiny_experiment(), headers=AUTH)
    assert created.status_code == 202
    run_id = created.json()["run_id"]

    status = wait_for(client, run_id)
    assert status["state"] == "done", status["error"]
    assert status["completed"] == 2
    assert len(status["summary"]) == 1
    assert run_id in [r["run_id"] for r in client.get("/simulations").json()]


def test_invalid_simulation_is_rejected(client):
    response = client.post("/simulations", json=tiny_experiment() | {"k": 8, "m": 3}, headers=AUTH)
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "invalid_config"


def test_unknown_simulation(client):
    assert client.get("/simulations/nope").status_code == 404


def test_progress_socket(client):
    run_id = client.post("/simulations", json=tiny_experiment(), headers=AUTH).json()["run_id"]
    wait_for(client, run_id)
    with client.websocket_connect(f"/ws/simulations/{run_id}", headers=AUTH) as ws:
        message = ws.receive_json()
    assert message["event"] == "status"
    assert message["state"] == "done"
    assert message["total"] == 2


def test_progress_socket_requires_token(client):
    with pytest.raises(WebSocketDisconnect):
        with client.websocket_connect("/ws/simulations/anything") as ws:
            ws.receive_json()
