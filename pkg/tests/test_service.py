import json

import pytest
from fastapi.testclient import TestClient

from dosefind.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "sessions")
    with TestClient(app) as c:
        yield c


CRM_CONFIG = {
    "design": {
        "design": "crm",
        "skeleton": [0.05, 0.11, 0.22, 0.40, 0.60, 0.78],
        "prior": {"mu": -0.2, "sigma": 0.85},
        "cohort_size": 2,
    },
    "levels": 6,
    "target": 0.3,
}


def test_create_trial_starts_at_second_level(client):
    r = client.post("/trials", json=CRM_CONFIG)
    assert r.status_code == 201
    body = r.json()
    assert body["recommendation"] == 2
    assert body["status"] == "active"


def test_create_trial_rejects_bad_config(client):
    bad = dict(CRM_CONFIG, design={"design": "crm", "skeleton": [0.5, 0.2],
                                   "prior": {"mu": 0, "sigma": 1}})
    assert client.post("/trials", json=bad).status_code == 400


def test_snapshot_roundtrip(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    snap = client.get(f"/trials/{tid}").json()
    assert snap["config"]["design"] == CRM_CONFIG["design"]
    assert snap["state"]["cohorts"] == []
    assert snap["curve"]["kind"] == "model"
    assert len(snap["curve"]["g_hat"]) == 6


def test_unknown_trial_404(client):
    assert client.get("/trials/nope").status_code == 404


def test_post_cohort_updates_recommendation(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    r = client.post(f"/trials/{tid}/cohorts",
                    json={"level": 2, "size": 2, "dlt_count": 0})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "active"
    assert body["recommendation"] == 3
    assert body["diagnostics"]["coherence_warning"] is None
    assert body["diagnostics"]["curve"]["kind"] == "model"


def test_invalid_counts_422(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    r = client.post(f"/trials/{tid}/cohorts",
                    json={"level": 2, "size": 2, "dlt_count": 3})
    assert r.status_code == 422
    assert client.post(f"/trials/{tid}/cohorts",
                       json={"level": 9, "size": 2, "dlt_count": 0}).status_code == 422


def test_crm_dlt_never_escalates_at_estimate(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    level = 2
    for _ in range(4):
        r = client.post(f"/trials/{tid}/cohorts",
                        json={"level": level, "size": 2, "dlt_count": 2})
        body = r.json()
        assert body["recommendation"] <= level
        assert body["diagnostics"]["coherence_warning"] is None
        level = body["recommendation"]


def test_override_is_flagged_not_rejected(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    r = client.post(f"/trials/{tid}/cohorts",
                    json={"level": 4, "size": 2, "dlt_count": 0})
    assert r.status_code == 200
    assert r.json()["diagnostics"]["override"] is True
    snap = client.get(f"/trials/{tid}").json()
    assert snap["audit"][0]["override"] is True


def test_three_plus_three_stop_flow(client):
    cfg = {"design": {"design": "three_plus_three"}, "levels": 4, "target": 0.3,
           "start_level": 1}
    tid = client.post("/trials", json=cfg).json()["id"]
    client.post(f"/trials/{tid}/cohorts", json={"level": 1, "size": 3, "dlt_count": 1})
    client.post(f"/trials/{tid}/cohorts", json={"level": 1, "size": 3, "dlt_count": 0})
    r = client.post(f"/trials/{tid}/cohorts", json={"level": 2, "size": 3, "dlt_count": 2})
    body = r.json()
    assert body["status"] == "stopped"
    assert body["selected"] == 1
    # no more cohorts accepted
    r = client.post(f"/trials/{tid}/cohorts", json={"level": 1, "size": 3, "dlt_count": 0})
    assert r.status_code == 409
    # read-only access still works
    assert client.get(f"/trials/{tid}").json()["status"] == "stopped"


def test_preview_equals_commit_and_does_not_persist(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    payload = {"level": 2, "size": 2, "dlt_count": 1}
    preview = client.post(f"/trials/{tid}/preview", json=payload).json()
    snap_before = client.get(f"/trials/{tid}").json()
    assert snap_before["state"]["cohorts"] == []
    assert len(snap_before["audit"]) == 0
    commit = client.post(f"/trials/{tid}/cohorts", json=payload).json()
    assert preview == commit


def test_preview_rejected_on_stopped_session(client):
    cfg = {"design": {"design": "three_plus_three"}, "levels": 3, "target": 0.3,
           "start_level": 1, "max_cohorts": 1}
    tid = client.post("/trials", json=cfg).json()["id"]
    client.post(f"/trials/{tid}/cohorts", json={"level": 1, "size": 3, "dlt_count": 0})
    assert client.post(f"/trials/{tid}/preview",
                       json={"level": 2, "size": 3, "dlt_count": 0}).status_code == 409


def test_posterior_endpoint_matches_module(client):
    tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
    client.post(f"/trials/{tid}/cohorts", json={"level": 2, "size": 2, "dlt_count": 0})
    curve = client.get(f"/trials/{tid}/posterior").json()

    from dosefind.core import empty_state
    from dosefind.crm import LogNormalPrior, PowerModel, Skeleton, posterior_theta

    state = empty_state(6, 0.3).with_cohort(2, 2, 0)
    summary = posterior_theta(state, PowerModel(Skeleton(tuple(
        CRM_CONFIG["design"]["skeleton"]))), LogNormalPrior(-0.2, 0.85))
    assert curve["g_hat"] == pytest.approx(list(summary.g_hat))
    assert curve["theta_mean"] == pytest.approx(summary.theta_mean)
    assert curve["mtd_weights"] == pytest.approx(list(summary.weights))


def test_empirical_curve_for_walk_design(client):
    cfg = {"design": {"design": "group_ud", "k": 2}, "levels": 6, "target": 0.3}
    tid = client.post("/trials", json=cfg).json()["id"]
    r = client.post(f"/trials/{tid}/cohorts", json={"level": 2, "size": 2, "dlt_count": 1})
    curve = r.json()["diagnostics"]["curve"]
    assert curve["kind"] == "empirical"
    assert curve["f_hat"][1] == pytest.approx(0.5)
    assert curve["fit_values"] == pytest.approx([0.5])


def test_settled_flag(client):
    cfg = {"design": {"design": "ccd", "half_width": 0.1, "cohort_size": 2},
           "levels": 6, "target": 0.3}
    tid = client.post("/trials", json=cfg).json()["id"]
    last = None
    for i in range(6):
        last = client.post(f"/trials/{tid}/cohorts",
                           json={"level": 3, "size": 2, "dlt_count": 1}).json()
    assert last["diagnostics"]["settled"] is True


def test_replay_reproduces_recommendations(tmp_path):
    data_dir = tmp_path / "sessions"
    app = create_app(data_dir)
    recs = []
    with TestClient(app) as client:
        tid = client.post("/trials", json=CRM_CONFIG).json()["id"]
        for level, dlts in [(2, 0), (3, 1), (3, 0), (3, 1)]:
            r = client.post(f"/trials/{tid}/cohorts",
                            json={"level": level, "size": 2, "dlt_count": dlts})
            recs.append(r.json()["recommendation"])
        snap = client.get(f"/trials/{tid}").json()

    # a fresh service instance over the same event-log directory
    app2 = create_app(data_dir)
    with TestClient(app2) as client2:
        snap2 = client2.get(f"/trials/{tid}").json()
        assert snap2["state"] == snap["state"]
        assert snap2["recommendation"] == snap["recommendation"]
        assert [e["recommendation"] for e in snap2["audit"]] == recs
        assert snap2["curve"] == snap["curve"]


def test_list_trials(client):
    client.post("/trials", json=dict(CRM_CONFIG, label="one"))
    client.post("/trials", json=dict(CRM_CONFIG, label="two"))
    trials = client.get("/trials").json()["trials"]
    assert {t["label"] for t in trials} == {"one", "two"}
