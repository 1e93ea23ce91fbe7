"""HTTP service endpoints, checked against the core functions they wrap."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from smadrl import __version__, analysis
from smadrl.service.app import create_app


@pytest.fixture
def client():
    return TestClient(create_app())


def tiny_config(tmp_path):
    return {
        "method": "IQL",
        "env": {
            "chamber_width": 2,
            "chamber_height": 2,
            "tunnel_length": 2,
            "num_agents": 1,
            "episode_length": 40,
        },
        "learner": {
            "learning_rate": 1e-3,
            "batch_size": 8,
            "buffer_capacity": 300,
            "learn_start": 16,
            "target_sync_interval": 50,
        },
        "run": {"episodes": 1, "seeds": [0], "output_dir": str(tmp_path)},
    }


def wait_for_job(client, job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.get(f"/jobs/{job_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise AssertionError("job did not finish in time")


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "version": __version__}


def test_workload_endpoint_matches_core(client):
    workload = [1, 2, 3]
    response = client.post("/analysis/workload", json={"workload": workload})
    assert response.status_code == 200
    body = response.json()
    assert body["gini"] == pytest.approx(analysis.gini(workload))
    assert not body["degenerate"]
    expected = [list(p) for p in analysis.lorenz_points(workload).points]
    assert body["lorenz_points"] == expected


def test_workload_endpoint_degenerate(client):
    response = client.post("/analysis/workload", json={"workload": [0, 0]})
    assert response.status_code == 200
    body = response.json()
    assert body["degenerate"] and body["gini"] is None


def test_workload_endpoint_validation(client):
    assert client.post("/analysis/workload", json={"workload": []}).status_code == 422
    assert client.post("/analysis/workload", json={"workload": [-1, 2]}).status_code == 422


def test_unknown_job_404(client):
    assert client.get("/jobs/doesnotexist").status_code == 404


def test_train_job_eval_and_trace_flow(client, tmp_path):
    response = client.post(
        "/train", json={"config": tiny_config(tmp_path), "seed": 0, "out_dir": str(tmp_path)}
    )
    assert response.status_code == 200
    job_id = response.json()["job_id"]
    status = wait_for_job(client, job_id)
    assert status["state"] == "done", status
    checkpoint = status["artifacts"]["checkpoint"]

    trace_path = str(tmp_path / "trace.ndjson")
    response = client.post(
        "/eval",
        json={
            "checkpoint": checkpoint,
            "episodes": 2,
            "seed": 1,
            "out_dir": str(tmp_path / "eval"),
            "trace_path": trace_path,
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert len(body["episodes"]) == 2
    assert body["total_pellets"] == sum(e["total_pellets"] for e in body["episodes"])
    assert (tmp_path / "eval" / "metrics.csv").exists()

    response = client.post("/analysis/trace", json={"trace_path": trace_path})
    assert response.status_code == 200
    assert len(response.json()["episodes"]) == 2


def test_train_rejects_unknown_config_key(client, tmp_path):
    config = tiny_config(tmp_path)
    config["learner"]["batchsize"] = 8
    response = client.post("/train", json={"config": config, "seed": 0, "out_dir": str(tmp_path)})
    assert response.status_code == 422
    assert "batchsize" in json.dumps(response.json())


def test_eval_missing_checkpoint_404(client, tmp_path):
    response = client.post(
        "/eval", json={"checkpoint": str(tmp_path / "none.bin"), "episodes": 1, "seed": 0}
    )
    assert response.status_code == 404


def test_trace_endpoint_missing_file_404(client, tmp_path):
    response = client.post("/analysis/trace", json={"trace_path": str(tmp_path / "none.ndjson")})
    assert response.status_code == 404
