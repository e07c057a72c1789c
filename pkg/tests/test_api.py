import json
import time

import pytest
from fastapi.testclient import TestClient

from datascout.core import dumps_manifest
from datascout.experts import deserialize_expert
from datascout.server.app import create_app
from conftest import blob_manifest, make_manifest

FAST_BUILD = {
    "gating_cfg": {"K": 2, "scheme": "unsupervised", "seed": 0},
    "train_cfg": {"epochs": 2},
    "wait": True,
}


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "store")
    with TestClient(app) as c:
        yield c


def upload(client, manifest):
    resp = client.post("/v1/datasets", content=dumps_manifest(manifest))
    assert resp.status_code == 201, resp.text
    return resp.json()["dataset_id"]


def report_body(ref, z, mode="proxy"):
    return {
        "dataset_ref": ref,
        "mode": mode,
        "z": z,
        "target_size": 10,
        "client_nonce": "cafe01",
    }


def test_upload_list_build_status_flow(client):
    manifest, _ = blob_manifest(name="flow", seed=0)
    dataset_id = upload(client, manifest)

    listing = client.get("/v1/datasets").json()["datasets"]
    assert [d["dataset_id"] for d in listing] == [dataset_id]
    assert listing[0]["status"] == "registered"

    resp = client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    assert resp.status_code == 200
    assert resp.json()["status"] == "ready"

    status = client.get(f"/v1/datasets/{dataset_id}/status").json()
    assert status == {"dataset_id": dataset_id, "status": "ready", "error": None}


def test_background_build_polls_to_ready(client):
    manifest, _ = blob_manifest(name="bg", seed=1)
    dataset_id = upload(client, manifest)
    body = dict(FAST_BUILD, wait=False)
    resp = client.post(f"/v1/datasets/{dataset_id}/build", json=body)
    assert resp.status_code == 202
    deadline = time.monotonic() + 60
    while time.monotonic() < deadline:
        status = client.get(f"/v1/datasets/{dataset_id}/status").json()["status"]
        if status == "ready":
            break
        time.sleep(0.05)
    assert status == "ready"


def test_malformed_manifest_rejected(client):
    resp = client.post("/v1/datasets", content="garbage")
    assert resp.status_code == 400
    body = resp.json()
    assert set(body) == {"code", "message", "detail"}
    assert body["code"] == "invalid-manifest"


def test_target_role_rejected(client):
    manifest = make_manifest(n=5, role="target", name="t")
    resp = client.post("/v1/datasets", content=dumps_manifest(manifest))
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid-role"


def test_duplicate_name_conflict(client):
    a, _ = blob_manifest(name="dup", seed=2)
    b, _ = blob_manifest(name="dup", seed=3)
    upload(client, a)
    resp = client.post("/v1/datasets", content=dumps_manifest(b))
    assert resp.status_code == 409
    assert resp.json()["code"] == "duplicate-name"


def test_unknown_dataset_404(client):
    assert client.get("/v1/datasets/nope/status").status_code == 404
    assert client.get("/v1/experts", params={"datasets": "nope"}).status_code == 404


def test_experts_not_ready_409(client):
    manifest, _ = blob_manifest(name="raw", seed=4)
    dataset_id = upload(client, manifest)
    resp = client.get("/v1/experts", params={"datasets": dataset_id})
    assert resp.status_code == 409
    assert resp.json()["code"] == "not-ready"


def test_bundle_manifest_and_blob_download(client):
    manifest, _ = blob_manifest(name="bundle", seed=5)
    dataset_id = upload(client, manifest)
    client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    bundle = client.get("/v1/experts", params={"datasets": dataset_id}).json()
    assert bundle["total_K"] == 2
    assert bundle["dataset_ref"] == dataset_id
    for entry in bundle["experts"]:
        blob = client.get(entry["blob_url"]).content
        model = deserialize_expert(blob)
        assert model.subset_index == entry["subset_index"]
        import hashlib

        assert hashlib.sha256(blob).hexdigest() == entry["sha256"]


def test_recommendation_roundtrip_and_determinism(client):
    manifest, _ = blob_manifest(name="rec", n_blobs=2, per_blob=20, seed=6)
    dataset_id = upload(client, manifest)
    client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    payload = {
        "report": report_body(dataset_id, [0.9, 0.2]),
        "budget": 8,
        "temperature": 0.1,
        "seed": 5,
    }
    a = client.post("/v1/recommendations", json=payload)
    assert a.status_code == 200
    b = client.post("/v1/recommendations", json=payload)
    assert a.text == b.text
    body = a.json()
    assert len(body["items"]) == 8
    assert {"id", "url"} == set(body["items"][0])
    assert body["flags"] == {"padded": False}
    assert len(body["weights"]) == 2
    # response carries ids and urls, never features
    assert "features" not in a.text


def test_recommendation_wrong_k_is_length_mismatch(client):
    manifest, _ = blob_manifest(name="wrongk", seed=7)
    dataset_id = upload(client, manifest)
    client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    payload = {"report": report_body(dataset_id, [0.9]), "budget": 3}
    resp = client.post("/v1/recommendations", json=payload)
    assert resp.status_code == 400
    assert resp.json()["code"] == "length-mismatch"


def test_invalid_budget_rejected(client):
    manifest, _ = blob_manifest(name="budget", seed=8)
    dataset_id = upload(client, manifest)
    client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    payload = {"report": report_body(dataset_id, [0.9, 0.2]), "budget": 0}
    resp = client.post("/v1/recommendations", json=payload)
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid-budget"


def test_request_log_contains_only_scalars_and_the_k_floats(client):
    manifest, _ = blob_manifest(name="log", seed=9)
    dataset_id = upload(client, manifest)
    client.post(f"/v1/datasets/{dataset_id}/build", json=FAST_BUILD)
    payload = {"report": report_body(dataset_id, [0.4, 0.6]), "budget": 2, "seed": 0}
    client.post("/v1/recommendations", json=payload)
    log = client.app.state.request_log
    entry = [e for e in log if e["endpoint"] == "recommend"][-1]
    allowed = {
        "endpoint",
        "dataset_ref",
        "mode",
        "z",
        "target_size",
        "client_nonce",
        "budget",
        "temperature",
        "seed",
    }
    assert set(entry) <= allowed
    assert len(entry["z"]) == 2
    for value in entry.values():
        assert isinstance(value, (str, int, float)) or (
            isinstance(value, list) and len(value) == 2
        )
