import json

import pytest
from fastapi.testclient import TestClient

from typeweaver.cli import main as cli_main
from typeweaver.service import ServiceConfig, create_app


@pytest.fixture()
def service(fig1_path, tmp_path):
    config = ServiceConfig(
        project_path=str(fig1_path),
        backend="heuristic",
        state_dir=str(tmp_path / "state"),
    )
    return config, TestClient(create_app(config))


def accept_all(client, sid):
    while True:
        view = client.get(f"/sessions/{sid}/current").json()
        if view["done"]:
            return
        decisions = {
            str(s["index"]): {"action": "accept"} for s in view["slots"]
        }
        resp = client.post(
            f"/sessions/{sid}/decision",
            json={"element_id": view["element_id"], "decisions": decisions},
        )
        assert resp.status_code == 200, resp.text


class TestSessionFlow:
    def test_create_and_count(self, service):
        _, client = service
        resp = client.post("/sessions", json={})
        assert resp.status_code == 200
        data = resp.json()
        assert data["element_count"] == 6
        assert data["session_id"]

    def test_current_view_shape(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        view = client.get(f"/sessions/{sid}/current").json()
        assert view["done"] is False
        assert view["element_id"] == "data.chunk_srcs"
        assert set(view["segments"]) == {"preamble", "usees", "main_code", "users"}
        assert [s["role"] for s in view["slots"]] == ["parameter", "parameter", "return"]
        assert all("predicted" in s for s in view["slots"])

    def test_accept_all_equals_batch_decode(self, service, fig1_path, tmp_path):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        accept_all(client, sid)
        via_session = client.get(f"/sessions/{sid}/assignment").content

        from click.testing import CliRunner

        out = tmp_path / "batch.json"
        result = CliRunner().invoke(
            cli_main,
            [
                "decode",
                "--project",
                str(fig1_path),
                "--strategy",
                "useetouser",
                "--backend",
                "heuristic",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert via_session == out.read_bytes()

    def test_override_conditions_later_contexts(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        view = client.get(f"/sessions/{sid}/current").json()
        assert view["element_id"] == "data.chunk_srcs"
        decisions = {str(s["index"]): {"action": "accept"} for s in view["slots"]}
        decisions["2"] = {"action": "override", "type": "ChunkedDataset"}
        client.post(
            f"/sessions/{sid}/decision",
            json={"element_id": view["element_id"], "decisions": decisions},
        )
        while True:
            view = client.get(f"/sessions/{sid}/current").json()
            if view["done"]:
                pytest.fail("eval_on_dataset never became current")
            if view["element_id"] == "eval.eval_on_dataset":
                assert "-> ChunkedDataset" in view["segments"]["usees"]
                break
            client.post(
                f"/sessions/{sid}/decision",
                json={
                    "element_id": view["element_id"],
                    "decisions": {
                        str(s["index"]): {"action": "accept"} for s in view["slots"]
                    },
                },
            )

    def test_override_normalized_in_assignment(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        view = client.get(f"/sessions/{sid}/current").json()
        decisions = {str(s["index"]): {"action": "accept"} for s in view["slots"]}
        decisions["2"] = {"action": "override", "type": "Union[int,None]"}
        client.post(
            f"/sessions/{sid}/decision",
            json={"element_id": view["element_id"], "decisions": decisions},
        )
        data = json.loads(client.get(f"/sessions/{sid}/assignment").content)
        entry = next(
            r
            for r in data["entries"]
            if r["path"] == "chunk_srcs" and r["slot"] == 2
        )
        assert entry["type"] == "Union[int,None]"
        assert entry["provenance"] == "user_override"


class TestSessionErrors:
    def test_unknown_session_404(self, service):
        _, client = service
        assert client.get("/sessions/nope/current").status_code == 404

    def test_wrong_element_409(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        resp = client.post(
            f"/sessions/{sid}/decision",
            json={"element_id": "model.ModelWrapper.predict", "decisions": {}},
        )
        assert resp.status_code == 409

    def test_incomplete_decisions_409(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        view = client.get(f"/sessions/{sid}/current").json()
        resp = client.post(
            f"/sessions/{sid}/decision",
            json={
                "element_id": view["element_id"],
                "decisions": {"0": {"action": "accept"}},
            },
        )
        assert resp.status_code == 409

    def test_unparseable_override_422(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        view = client.get(f"/sessions/{sid}/current").json()
        decisions = {str(s["index"]): {"action": "accept"} for s in view["slots"]}
        decisions["0"] = {"action": "override", "type": "dict["}
        resp = client.post(
            f"/sessions/{sid}/decision",
            json={"element_id": view["element_id"], "decisions": decisions},
        )
        assert resp.status_code == 422

    def test_undo_without_decisions_409(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        assert client.post(f"/sessions/{sid}/undo").status_code == 409


class TestUndoAndResume:
    def test_undo_rewinds_one_element(self, service):
        _, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        first = client.get(f"/sessions/{sid}/current").json()
        client.post(
            f"/sessions/{sid}/decision",
            json={
                "element_id": first["element_id"],
                "decisions": {
                    str(s["index"]): {"action": "accept"} for s in first["slots"]
                },
            },
        )
        resp = client.post(f"/sessions/{sid}/undo")
        assert resp.status_code == 200
        assert resp.json()["element_id"] == first["element_id"]
        again = client.get(f"/sessions/{sid}/current").json()
        assert again["element_id"] == first["element_id"]

    def test_service_restart_resumes_cursor(self, service):
        config, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        for _ in range(2):
            view = client.get(f"/sessions/{sid}/current").json()
            client.post(
                f"/sessions/{sid}/decision",
                json={
                    "element_id": view["element_id"],
                    "decisions": {
                        str(s["index"]): {"action": "accept"} for s in view["slots"]
                    },
                },
            )
        before = client.get(f"/sessions/{sid}/assignment").content

        fresh_client = TestClient(create_app(config))
        view = fresh_client.get(f"/sessions/{sid}/current").json()
        assert view["index"] == 2
        assert fresh_client.get(f"/sessions/{sid}/assignment").content == before
        accept_all(fresh_client, sid)
        assert fresh_client.get(f"/sessions/{sid}/current").json()["done"] is True

    def test_resume_after_undo_replay(self, service):
        config, client = service
        sid = client.post("/sessions", json={}).json()["session_id"]
        first = client.get(f"/sessions/{sid}/current").json()
        client.post(
            f"/sessions/{sid}/decision",
            json={
                "element_id": first["element_id"],
                "decisions": {
                    str(s["index"]): {"action": "accept"} for s in first["slots"]
                },
            },
        )
        client.post(f"/sessions/{sid}/undo")
        fresh = TestClient(create_app(config))
        view = fresh.get(f"/sessions/{sid}/current").json()
        assert view["index"] == 0
        assert view["element_id"] == first["element_id"]
