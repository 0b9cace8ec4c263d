import json

import pytest
from fastapi.testclient import TestClient

from duetfe import agents, dataset, dsl
from duetfe.service import create_app
from conftest import SAMPLE_CSV, SAMPLE_META


@pytest.fixture
def client():
    app = create_app(backend_name="heuristic")
    with TestClient(app) as c:
        yield c


def upload(client):
    files = {
        "csv": ("sample.csv", SAMPLE_CSV.read_bytes(), "text/csv"),
        "meta": ("sample.meta.json", SAMPLE_META.read_bytes(), "application/json"),
    }
    resp = client.post("/sessions", files=files)
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestSessions:
    def test_create(self, client):
        body = upload(client)
        assert len(body["session_id"]) == 32
        assert [c["name"] for c in body["columns"]][:2] == ["f1_signal", "f2_signal"]
        assert body["stats"]["row_count"] == 400

    def test_bad_upload(self, client):
        files = {
            "csv": ("d.csv", b"a,b\n1,2\n", "text/csv"),
            "meta": ("m.json", json.dumps({"target": "zzz"}).encode(), "application/json"),
        }
        resp = client.post("/sessions", files=files)
        assert resp.status_code == 400
        assert resp.json()["code"] == "BAD_REQUEST"

    def test_unknown_session(self, client):
        resp = client.get("/sessions/deadbeef")
        assert resp.status_code == 404
        assert resp.json()["code"] == "NOT_FOUND"

    def test_delete(self, client):
        sid = upload(client)["session_id"]
        assert client.delete(f"/sessions/{sid}").status_code == 204
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_isolation(self, client):
        sid1 = upload(client)["session_id"]
        sid2 = upload(client)["session_id"]
        client.post(f"/sessions/{sid1}/instruct", json={"text": "variants of f1"})
        client.post(f"/sessions/{sid1}/accept", json={"indices": [0]})
        cols1 = client.get(f"/sessions/{sid1}").json()["columns"]
        cols2 = client.get(f"/sessions/{sid2}").json()["columns"]
        assert len(cols1) == 5 and len(cols2) == 4


class TestConversationalFlow:
    def test_instruct_accept_export(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/instruct",
                           json={"text": "Please generate new variants of f3."})
        assert resp.status_code == 200
        proposal = resp.json()
        assert proposal["expressions"]
        assert len(proposal["preview"]) == len(proposal["expressions"])

        resp = client.post(f"/sessions/{sid}/accept", json={"indices": [0]})
        assert resp.status_code == 200
        assert len(resp.json()["accepted"]) == 1

        resp = client.get(f"/sessions/{sid}/export")
        assert resp.status_code == 200
        header = resp.text.splitlines()[0].split(",")
        assert len(header) == 5
        dsl.parse_expr(header[-1])  # generated header is a valid expression

    def test_pending_conflict(self, client):
        sid = upload(client)["session_id"]
        client.post(f"/sessions/{sid}/instruct", json={"text": "variants of f2"})
        resp = client.post(f"/sessions/{sid}/instruct", json={"text": "more"})
        assert resp.status_code == 409
        assert resp.json()["code"] == "CONFLICT"

    def test_empty_instruction(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/instruct", json={"text": "  "})
        assert resp.status_code == 400

    def test_accept_out_of_range(self, client):
        sid = upload(client)["session_id"]
        client.post(f"/sessions/{sid}/instruct", json={"text": "variants of f1"})
        resp = client.post(f"/sessions/{sid}/accept", json={"indices": [42]})
        assert resp.status_code == 400
        assert resp.json()["code"] == "BAD_REQUEST"

    def test_accept_without_pending(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/accept", json={"indices": []})
        assert resp.status_code == 409

    def test_undo_restores(self, client):
        sid = upload(client)["session_id"]
        before = client.get(f"/sessions/{sid}/export").text
        client.post(f"/sessions/{sid}/instruct", json={"text": "variants of f1"})
        client.post(f"/sessions/{sid}/accept", json={"indices": [0]})
        assert client.get(f"/sessions/{sid}/export").text != before
        resp = client.post(f"/sessions/{sid}/undo")
        assert resp.json()["undone"] is True
        assert client.get(f"/sessions/{sid}/export").text == before

    def test_unparseable_generation_422(self):
        transcript = agents.Transcript()
        for _ in range(3):
            transcript.append("generator", "", "", "<SEQ>garbage $$</SEQ>")
        path = "/tmp/duetfe_garbage_transcript.jsonl"
        transcript.save(path)
        app = create_app(backend_name="replay", transcript_path=path)
        with TestClient(app) as client:
            sid = upload(client)["session_id"]
            resp = client.post(f"/sessions/{sid}/instruct", json={"text": "anything f1"})
            assert resp.status_code == 422
            assert resp.json()["code"] == "PARSE_FAILED"

    def test_backend_exhausted_502(self):
        path = "/tmp/duetfe_empty_transcript.jsonl"
        agents.Transcript().save(path)
        app = create_app(backend_name="replay", transcript_path=path)
        with TestClient(app) as client:
            sid = upload(client)["session_id"]
            resp = client.post(f"/sessions/{sid}/instruct", json={"text": "anything f1"})
            assert resp.status_code == 502


class TestDiagnoseAndAuto:
    def test_diagnose(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/diagnose")
        assert resp.status_code == 200
        body = resp.json()
        assert body["semantic"] and body["distribution"]

    def test_auto_rounds(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/auto", json={"iterations": 1})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["iterations"]) == 1
        assert len(body["columns"]) > 4

    def test_auto_validation(self, client):
        sid = upload(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/auto", json={"iterations": 0})
        assert resp.status_code == 400


class TestIdempotency:
    def test_token_replays_response(self, client):
        sid = upload(client)["session_id"]
        headers = {"X-Request-Token": "tok-1"}
        first = client.post(f"/sessions/{sid}/instruct",
                            json={"text": "variants of f1"}, headers=headers)
        again = client.post(f"/sessions/{sid}/instruct",
                            json={"text": "variants of f1"}, headers=headers)
        assert again.status_code == 200
        assert again.json() == first.json()  # replayed, not a 409


class TestExportRoundTrip:
    def test_seventeen_digits(self, client, tmp_path):
        sid = upload(client)["session_id"]
        client.post(f"/sessions/{sid}/instruct", json={"text": "variants of f2"})
        client.post(f"/sessions/{sid}/accept", json={"indices": [0, 1]})
        text = client.get(f"/sessions/{sid}/export").text
        path = tmp_path / "export.csv"
        path.write_text(text, encoding="utf-8")
        loaded = dataset.load_feature_csv(path)
        snapshot = client.get(f"/sessions/{sid}").json()
        assert len(loaded.column_names) == len(snapshot["columns"])
        # numeric values survive exactly at 17 significant digits
        reexport = loaded.to_csv()
        assert reexport == text
