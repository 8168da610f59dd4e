import hashlib
import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from clad.demo import DEMO_AGREEMENT, demo_cases, demo_model, demo_votes
from clad.model_io import save_model
from clad.service import ModelRegistry, SessionStore, create_app


@pytest.fixture()
def service(tmp_path):
    store_dir = tmp_path / "store"
    models_dir = tmp_path / "models"
    models_dir.mkdir()
    save_model(demo_model(), models_dir / "reviewer.json")
    cases = {rec.record_id: rec for rec in demo_cases().records}
    app = create_app(
        store=SessionStore(store_dir),
        registry=ModelRegistry(models_dir),
        cases=cases,
        mr=0.05,
        admin_cost=10.0,
        fp_variant="full_limit",
    )
    return TestClient(app), store_dir, models_dir


def _open_session(client, case_ids=None, alpha=0.2, blind=False):
    body = {
        "alpha": alpha,
        "model": "reviewer",
        "case_ids": case_ids if case_ids is not None else [r.record_id for r in demo_cases().records],
        "blind": blind,
    }
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestHealthAndModels:
    def test_healthz(self, service):
        client, _, _ = service
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    def test_models_listing(self, service):
        client, _, _ = service
        resp = client.get("/models")
        assert resp.status_code == 200
        models = resp.json()["models"]
        assert len(models) == 1
        assert models[0]["name"] == "reviewer"
        assert models[0]["family"] == "gbdt"
        assert len(models[0]["fingerprint"]) == 12


class TestOpenSession:
    def test_full_review_queue_scored(self, service):
        client, _, _ = service
        session = _open_session(client)
        assert session["status"] == "open"
        assert session["counts"] == {"cases": 153, "decided": 0, "remaining": 153}
        queue = client.get(f"/sessions/{session['session_id']}/queue").json()
        assert len(queue["items"]) == 153
        grants = sum(item["model"]["decision"] for item in queue["items"])
        assert grants == DEMO_AGREEMENT["tp"] + DEMO_AGREEMENT["fn"]  # 120
        first = queue["items"][0]
        assert set(first["model"]) >= {"probability", "threshold", "decision", "recommendation", "c_fp", "c_fn"}
        # money rides as 2-decimal strings
        assert first["model"]["c_fp"].count(".") == 1
        assert len(first["model"]["c_fp"].split(".")[1]) == 2

    def test_empty_session_is_valid(self, service):
        client, _, _ = service
        session = _open_session(client, case_ids=[])
        assert session["counts"]["cases"] == 0

    def test_two_sessions_are_independent(self, service):
        client, _, _ = service
        a = _open_session(client)
        b = _open_session(client)
        assert a["session_id"] != b["session_id"]

    def test_unknown_model_404(self, service):
        client, _, _ = service
        resp = client.post("/sessions", json={"alpha": 0.2, "model": "ghost", "case_ids": []})
        assert resp.status_code == 404

    def test_unknown_case_404(self, service):
        client, _, _ = service
        resp = client.post("/sessions", json={"alpha": 0.2, "model": "reviewer", "case_ids": ["nope"]})
        assert resp.status_code == 404

    def test_rescoring_is_deterministic(self, service):
        client, _, _ = service
        a = _open_session(client)
        b = _open_session(client)
        qa = client.get(f"/sessions/{a['session_id']}/queue").json()["items"]
        qb = client.get(f"/sessions/{b['session_id']}/queue").json()["items"]
        assert [i["model"]["probability"] for i in qa] == [i["model"]["probability"] for i in qb]


class TestDecisions:
    def test_record_and_agreement_counts(self, service):
        client, _, _ = service
        session = _open_session(client)
        sid = session["session_id"]
        resp = client.post(f"/sessions/{sid}/decisions",
                           json={"record_id": "OCT-001", "decision": 1, "note": "looks fine"})
        assert resp.status_code == 201
        body = resp.json()
        assert body["decided"] is True
        assert body["committee_decision"] == 1
        agreement = client.get(f"/sessions/{sid}/agreement").json()
        # model granted OCT-001, committee agreed: one true positive
        assert agreement["matrix"] == {"tp": 1, "fp": 0, "fn": 0, "tn": 0}
        assert agreement["kappa"] is None  # unanimous single decision: chance agreement is 1

    def test_double_decide_conflicts(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        first = client.post(f"/sessions/{sid}/decisions", json={"record_id": "OCT-002", "decision": 1})
        assert first.status_code == 201
        second = client.post(f"/sessions/{sid}/decisions", json={"record_id": "OCT-002", "decision": 0})
        assert second.status_code == 409

    def test_unknown_record_404(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/decisions", json={"record_id": "nope", "decision": 1})
        assert resp.status_code == 404

    def test_closed_session_refuses_decisions(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        assert client.post(f"/sessions/{sid}/close").status_code == 200
        resp = client.post(f"/sessions/{sid}/decisions", json={"record_id": "OCT-003", "decision": 1})
        assert resp.status_code == 409

    def test_agreement_before_any_decision_is_empty_report_error(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        assert client.get(f"/sessions/{sid}/agreement").status_code == 400


class TestReplayAgreement:
    def test_committee_replay_reaches_081(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        for record_id, vote in demo_votes().items():
            resp = client.post(f"/sessions/{sid}/decisions", json={"record_id": record_id, "decision": vote})
            assert resp.status_code == 201
        agreement = client.get(f"/sessions/{sid}/agreement").json()
        assert agreement["matrix"] == DEMO_AGREEMENT
        assert f"{agreement['kappa']:.2f}" == "0.81"
        assert agreement["band"] == "almost perfect"
        assert agreement["counts"]["decided"] == 153


class TestWhatIf:
    def test_same_alpha_changes_nothing(self, service):
        client, _, _ = service
        session = _open_session(client, alpha=0.2)
        sid = session["session_id"]
        whatif = client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.2}).json()
        assert whatif["flips"] == 0
        assert all(not case["flipped"] for case in whatif["cases"])

    def test_zero_alpha_leaves_admin_cost_only(self, service):
        client, _, _ = service
        sid = _open_session(client, alpha=0.2)["session_id"]
        whatif = client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.0}).json()
        assert all(case["c_fn"] == "10.00" for case in whatif["cases"])

    def test_raising_alpha_raises_every_exposure(self, service):
        client, _, _ = service
        sid = _open_session(client, alpha=0.2)["session_id"]
        queue = client.get(f"/sessions/{sid}/queue").json()["items"]
        base = {i["record_id"]: float(i["model"]["c_fp"]) for i in queue}
        whatif = client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.5}).json()
        assert all(float(case["c_fp"]) > base[case["record_id"]] for case in whatif["cases"])

    def test_whatif_never_mutates_the_store(self, service):
        client, store_dir, _ = service
        sid = _open_session(client)["session_id"]
        log = store_dir / "sessions" / f"{sid}.jsonl"
        before = hashlib.sha256(log.read_bytes()).hexdigest()
        client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.9})
        assert hashlib.sha256(log.read_bytes()).hexdigest() == before

    def test_negative_alpha_rejected(self, service):
        client, _, _ = service
        sid = _open_session(client)["session_id"]
        assert client.get(f"/sessions/{sid}/whatif", params={"alpha": -0.1}).status_code == 400


class TestEventSourcing:
    def test_replaying_the_log_reproduces_agreement_bytes(self, service, tmp_path):
        client, store_dir, models_dir = service
        sid = _open_session(client)["session_id"]
        votes = demo_votes()
        for record_id in list(votes)[:40]:
            client.post(f"/sessions/{sid}/decisions", json={"record_id": record_id, "decision": votes[record_id]})
        live = client.get(f"/sessions/{sid}/agreement")

        # a fresh service over the same log directory replays to the same bytes
        cases = {rec.record_id: rec for rec in demo_cases().records}
        replayed_app = create_app(
            store=SessionStore(store_dir),
            registry=ModelRegistry(models_dir),
            cases=cases,
            mr=0.05,
            admin_cost=10.0,
            fp_variant="full_limit",
        )
        with TestClient(replayed_app) as replay_client:
            replayed = replay_client.get(f"/sessions/{sid}/agreement")
        assert replayed.content == live.content

        queue_live = client.get(f"/sessions/{sid}/queue")
        with TestClient(replayed_app) as replay_client:
            queue_replayed = replay_client.get(f"/sessions/{sid}/queue")
        assert queue_replayed.content == queue_live.content

    def test_log_is_append_only_across_operations(self, service):
        client, store_dir, _ = service
        sid = _open_session(client)["session_id"]
        log = store_dir / "sessions" / f"{sid}.jsonl"
        snapshots = [log.read_bytes()]
        client.post(f"/sessions/{sid}/decisions", json={"record_id": "OCT-005", "decision": 0})
        snapshots.append(log.read_bytes())
        client.post(f"/sessions/{sid}/close")
        snapshots.append(log.read_bytes())
        for earlier, later in zip(snapshots, snapshots[1:]):
            assert later.startswith(earlier)
            assert len(later) > len(earlier)
        kinds = [json.loads(line)["type"] for line in snapshots[-1].decode().splitlines()]
        assert kinds == ["session_opened", "decision_recorded", "session_closed"]


class TestBlindMode:
    def test_model_fields_hidden_until_decided(self, service):
        client, _, _ = service
        sid = _open_session(client, blind=True)["session_id"]
        queue = client.get(f"/sessions/{sid}/queue").json()
        assert all(item["model"] is None for item in queue["items"])
        client.post(f"/sessions/{sid}/decisions", json={"record_id": "OCT-001", "decision": 1})
        queue = client.get(f"/sessions/{sid}/queue").json()
        by_id = {item["record_id"]: item for item in queue["items"]}
        assert by_id["OCT-001"]["model"] is not None
        assert by_id["OCT-002"]["model"] is None


class TestAuth:
    def test_token_guards_everything_but_health(self, tmp_path):
        models_dir = tmp_path / "models"
        models_dir.mkdir()
        save_model(demo_model(), models_dir / "reviewer.json")
        app = create_app(
            store=SessionStore(tmp_path / "store"),
            registry=ModelRegistry(models_dir),
            cases={},
            token="sesame",
        )
        client = TestClient(app)
        assert client.get("/healthz").status_code == 200
        assert client.get("/models").status_code == 401
        assert client.get("/models", headers={"X-API-Token": "wrong"}).status_code == 401
        assert client.get("/models", headers={"X-API-Token": "sesame"}).status_code == 200


class TestTrainingJobs:
    def test_async_training_job_lifecycle(self, tmp_path):
        from clad.data import SyntheticConfig, generate_synthetic

        ds = generate_synthetic(SyntheticConfig(n_records=300, seed=4))
        models_dir = tmp_path / "models"
        app = create_app(
            store=SessionStore(tmp_path / "store"),
            registry=ModelRegistry(models_dir),
            cases={rec.record_id: rec for rec in ds.records},
            dataset=ds,
        )
        client = TestClient(app)
        resp = client.post("/models/train", json={
            "name": "fresh",
            "family": "gbdt",
            "params": {"max_depth": 2, "n_rounds": 3, "seed": 1},
            "alpha": 0.2,
        })
        assert resp.status_code == 202
        job_id = resp.json()["job_id"]
        for _ in range(100):
            status = client.get(f"/models/train/{job_id}").json()
            if status["status"] != "running":
                break
            time.sleep(0.05)
        assert status["status"] == "done"
        assert (models_dir / "fresh.json").exists()
        names = [m["name"] for m in client.get("/models").json()["models"]]
        assert "fresh" in names

    def test_training_without_dataset_rejected(self, tmp_path):
        app = create_app(
            store=SessionStore(tmp_path / "store"),
            registry=ModelRegistry(tmp_path / "models"),
            cases={},
        )
        client = TestClient(app)
        resp = client.post("/models/train", json={"name": "x", "family": "gbdt"})
        assert resp.status_code == 400

    def test_failed_job_reports_error(self, tmp_path):
        from clad.data import SyntheticConfig, generate_synthetic

        ds = generate_synthetic(SyntheticConfig(n_records=100, seed=4))
        app = create_app(
            store=SessionStore(tmp_path / "store"),
            registry=ModelRegistry(tmp_path / "models"),
            cases={},
            dataset=ds,
        )
        client = TestClient(app)
        job_id = client.post("/models/train", json={
            "name": "bad", "family": "gbdt", "params": {"max_depth": -1},
        }).json()["job_id"]
        for _ in range(100):
            status = client.get(f"/models/train/{job_id}").json()
            if status["status"] != "running":
                break
            time.sleep(0.05)
        assert status["status"] == "failed"
        assert "max_depth" in status["error"]

    def test_unknown_job_404(self, tmp_path):
        app = create_app(
            store=SessionStore(tmp_path / "store"),
            registry=ModelRegistry(tmp_path / "models"),
            cases={},
        )
        assert TestClient(app).get("/models/train/J-missing").status_code == 404
