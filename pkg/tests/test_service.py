from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from sketchmatch.encoder import EncoderConfig, init_weights, save_weights
from sketchmatch.geometry import QueryObject, QuerySegment, VisualQuery, query_to_tracks
from sketchmatch.service import (
    ServiceConfig,
    create_app,
    parse_visual_query,
    visual_query_to_json,
)
from sketchmatch.store import build_store, save_store

ENC = EncoderConfig(T=16, max_objects=3, d_model=16, n_heads=2, n_layers=1, d_ff=32, d_embed=8)

MOT_LINES = "".join(
    f"{f},1,{10 + 2 * f},50,20,12,0.9,3\n" for f in range(1, 61)
) + "".join(f"{f},2,{300 - 2 * f},80,10,24,0.8,1\n" for f in range(1, 41))


def query_json(span=20.0, n_objects=1, types=("car", "person")):
    objects = []
    for i in range(n_objects):
        objects.append(
            {
                "id": f"q{i}",
                "type": types[i % len(types)],
                "nominalW": 10.0,
                "nominalH": 10.0,
                "segments": [
                    {
                        "panelStart": 0.0,
                        "panelEnd": span,
                        "points": [[0.0, 10.0 * i], [30.0, 10.0 * i], [60.0, 5.0 + 10.0 * i]],
                    }
                ],
            }
        )
    return {"schemaVersion": 1, "canvasW": 400.0, "canvasH": 300.0, "objects": objects}


@pytest.fixture()
def client(tmp_path):
    weights_path = tmp_path / "weights.bin"
    save_weights(init_weights(ENC, seed=0), weights_path)
    config = ServiceConfig(
        weights_path=str(weights_path),
        data_dir=str(tmp_path / "data"),
        cache_size=4,
    )
    return TestClient(create_app(config))


def upload_mot(client, name="demo", fps="10"):
    return client.post(
        "/datasets",
        files={"file": ("demo.txt", MOT_LINES.encode())},
        data={"name": name, "fps": fps},
    )


class TestDatasets:
    def test_upload_and_list(self, client):
        r = upload_mot(client)
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ready"

        listing = client.get("/datasets").json()["datasets"]
        assert len(listing) == 1
        entry = listing[0]
        assert entry["datasetId"] == body["datasetId"]
        assert entry["frameCount"] == 60
        assert sum(entry["typeHistogram"].values()) == entry["objectCount"] == 2
        assert entry["typeHistogram"] == {"car": 1, "person": 1}

    def test_garbage_upload_reports_line(self, client):
        r = client.post(
            "/datasets",
            files={"file": ("bad.txt", b"1,1,0,0,10,10,1,3\ngarbage line\n")},
            data={"name": "bad", "fps": "10"},
        )
        assert r.status_code == 400
        assert "line 2" in r.json()["message"]

    def test_reupload_same_name_versions(self, client):
        first = upload_mot(client).json()["datasetId"]
        second = upload_mot(client).json()["datasetId"]
        assert first != second
        listing = client.get("/datasets").json()["datasets"]
        assert [d["datasetId"] for d in listing] == [second]

    def test_mot_upload_requires_fps(self, client):
        r = client.post(
            "/datasets",
            files={"file": ("demo.txt", MOT_LINES.encode())},
            data={"name": "nofps"},
        )
        assert r.status_code == 400
        assert r.json()["code"] == "missing_fps"

    def test_types_endpoint(self, client):
        types = client.get("/types").json()["types"]
        assert "car" in types and "person" in types


def self_retrieval_setup(tmp_path):
    """A store that is exactly one query's own rendered trajectory."""
    span = 20
    raw = query_json(span=float(span))
    q = parse_visual_query(raw, ("car", "person"))
    (track,) = query_to_tracks(q)
    store = build_store([track], fps=10, dataset_id="fixture")
    path = tmp_path / "fixture_store.jsonl"
    save_store(store, path)
    overrides = {"lengthFactors": [(span + 1) / span], "strideFrames": 7}
    return raw, path, overrides


class TestQueries:
    def upload_fixture(self, client, tmp_path):
        raw, path, overrides = self_retrieval_setup(tmp_path)
        r = client.post(
            "/datasets",
            files={"file": ("fixture.jsonl", path.read_bytes())},
            data={"name": "fixture"},
        )
        assert r.status_code == 200
        return raw, r.json()["datasetId"], overrides

    def test_self_retrieval_scores_one(self, client, tmp_path):
        raw, dataset_id, overrides = self.upload_fixture(client, tmp_path)
        r = client.post(
            "/queries",
            json={
                "datasetId": dataset_id,
                "visualQuery": raw,
                "k": 3,
                "searchOverrides": overrides,
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["results"]
        top = body["results"][0]
        assert top["score"] == pytest.approx(1.0, abs=1e-6)
        assert top["startFrame"] == 0
        assert top["tracks"][0]["objectId"] == top["objectIds"][0]
        assert len(top["tracks"][0]["values"]) == ENC.T

    def test_query_echo_round_trips(self, client, tmp_path):
        raw, dataset_id, overrides = self.upload_fixture(client, tmp_path)
        r = client.post(
            "/queries",
            json={"datasetId": dataset_id, "visualQuery": raw, "searchOverrides": overrides},
        )
        echo = r.json()["queryEcho"]["visualQuery"]
        reparsed = parse_visual_query(echo, ("car", "person"))
        assert visual_query_to_json(reparsed) == echo

    def test_k_zero_rejected(self, client, tmp_path):
        raw, dataset_id, _ = self.upload_fixture(client, tmp_path)
        r = client.post("/queries", json={"datasetId": dataset_id, "visualQuery": raw, "k": 0})
        assert r.status_code == 422
        assert r.json()["fieldPath"] == "k"

    def test_capacity_mismatch_409(self, client, tmp_path):
        raw, dataset_id, _ = self.upload_fixture(client, tmp_path)
        big = query_json(n_objects=4)
        r = client.post("/queries", json={"datasetId": dataset_id, "visualQuery": big})
        assert r.status_code == 409
        assert r.json()["code"] == "capacity_mismatch"

    def test_unknown_dataset_404(self, client):
        r = client.post(
            "/queries", json={"datasetId": "nope", "visualQuery": query_json()}
        )
        assert r.status_code == 404

    def test_invalid_query_names_field(self, client, tmp_path):
        raw, dataset_id, _ = self.upload_fixture(client, tmp_path)
        bad = query_json()
        bad["objects"][0]["segments"][0]["points"] = [[0.0, 0.0]]
        r = client.post("/queries", json={"datasetId": dataset_id, "visualQuery": bad})
        assert r.status_code == 422
        assert r.json()["fieldPath"] == "visualQuery.objects[0].segments[0].points"

    def test_unknown_type_rejected(self, client, tmp_path):
        raw, dataset_id, _ = self.upload_fixture(client, tmp_path)
        bad = query_json()
        bad["objects"][0]["type"] = "dragon"
        r = client.post("/queries", json={"datasetId": dataset_id, "visualQuery": bad})
        assert r.status_code == 422
        assert r.json()["fieldPath"] == "visualQuery.objects[0].type"


class TestResultsCache:
    def test_replay_returns_equal_payload(self, client, tmp_path):
        raw, dataset_id, overrides = TestQueries().upload_fixture(client, tmp_path)
        body = client.post(
            "/queries",
            json={"datasetId": dataset_id, "visualQuery": raw, "searchOverrides": overrides},
        ).json()
        replay = client.get(f"/results/{body['queryId']}")
        assert replay.status_code == 200
        assert replay.json() == body

    def test_distinct_query_ids(self, client, tmp_path):
        raw, dataset_id, overrides = TestQueries().upload_fixture(client, tmp_path)
        payload = {"datasetId": dataset_id, "visualQuery": raw, "searchOverrides": overrides}
        id1 = client.post("/queries", json=payload).json()["queryId"]
        id2 = client.post("/queries", json=payload).json()["queryId"]
        assert id1 != id2

    def test_eviction_404(self, tmp_path):
        weights_path = tmp_path / "w.bin"
        save_weights(init_weights(ENC, seed=0), weights_path)
        config = ServiceConfig(
            weights_path=str(weights_path), data_dir=str(tmp_path / "d"), cache_size=1
        )
        client = TestClient(create_app(config))
        raw, dataset_id, overrides = TestQueries().upload_fixture(client, tmp_path)
        payload = {"datasetId": dataset_id, "visualQuery": raw, "searchOverrides": overrides}
        id1 = client.post("/queries", json=payload).json()["queryId"]
        client.post("/queries", json=payload)
        assert client.get(f"/results/{id1}").status_code == 404


class TestRestartDeterminism:
    def test_same_results_after_restart(self, tmp_path):
        weights_path = tmp_path / "w.bin"
        save_weights(init_weights(ENC, seed=0), weights_path)
        config = ServiceConfig(
            weights_path=str(weights_path), data_dir=str(tmp_path / "d"), cache_size=4
        )
        client = TestClient(create_app(config))
        raw, dataset_id, overrides = TestQueries().upload_fixture(client, tmp_path)
        payload = {"datasetId": dataset_id, "visualQuery": raw, "searchOverrides": overrides}
        before = client.post("/queries", json=payload).json()["results"]

        fresh = TestClient(create_app(config))
        after = fresh.post("/queries", json=payload).json()["results"]
        assert before == after
