import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from krigseq import config_from_dict, run, toy_oracle
from krigseq.service import create_app
from conftest import small_toy_doc


@pytest.fixture
def client(tmp_path):
    app = create_app(state_dir=tmp_path / "state")
    with TestClient(app) as c:
        yield c


def _poll_proposal(client, sid, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        r = client.get(f"/sessions/{sid}/proposal")
        if r.status_code == 200:
            return r.json()
        assert r.status_code == 202
        time.sleep(0.05)
    raise AssertionError("proposal did not materialize in time")


def test_create_session_auto_oracle(client):
    r = client.post("/sessions", json=small_toy_doc())
    assert r.status_code == 201
    body = r.json()
    assert 0.0 <= body["estimate"] <= 1.0
    assert body["step"] == 8
    assert len(body["initial_design"]["points"]) == 8


def test_create_rejects_bad_config(client):
    doc = small_toy_doc()
    doc["params"]["tau2"] = -1.0
    r = client.post("/sessions", json=doc)
    assert r.status_code == 400
    body = r.json()
    assert body["field_path"] == "params.tau2"
    assert body["code"] == "invalid-config"


def test_distinct_session_ids(client):
    a = client.post("/sessions", json=small_toy_doc()).json()["id"]
    b = client.post("/sessions", json=small_toy_doc()).json()["id"]
    assert a != b
    ids = client.get("/sessions").json()["sessions"]
    assert a in ids and b in ids


def test_proposal_flow_and_idempotency(client):
    sid = client.post("/sessions", json=small_toy_doc()).json()["id"]
    prop = _poll_proposal(client, sid)
    bounds = np.array(small_toy_doc()["initial_design"]["bounds"])
    x = np.array(prop["x"])
    assert np.all(x >= bounds[:, 0]) and np.all(x <= bounds[:, 1])
    again = client.get(f"/sessions/{sid}/proposal")
    assert again.status_code == 200
    assert again.json() == prop

    # mismatched observation in strict mode
    bad = client.post(f"/sessions/{sid}/observations",
                      json={"x": (x + 0.5).tolist(), "y": 1.0})
    assert bad.status_code == 409

    ok = client.post(f"/sessions/{sid}/observations", json={"x": prop["x"]})
    assert ok.status_code == 200
    assert ok.json()["step"] == 1
    assert 0.0 <= ok.json()["estimate"] <= 1.0

    # exactly-once: replaying the same body returns the applied result
    replay = client.post(f"/sessions/{sid}/observations", json={"x": prop["x"]})
    assert replay.status_code == 200
    assert replay.json() == ok.json()
    assert client.get(f"/sessions/{sid}/estimate").json()["step"] == 1

    nxt = _poll_proposal(client, sid)
    assert nxt["x"] != prop["x"]


def test_estimate_endpoint(client):
    sid = client.post("/sessions", json=small_toy_doc()).json()["id"]
    r = client.get(f"/sessions/{sid}/estimate")
    assert r.status_code == 200
    body = r.json()
    assert body["step"] == 0
    assert body["sample_count"] == 400
    assert 0.0 <= body["estimate"] <= 1.0


def test_unknown_session_is_404(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.get("/sessions/nope/proposal").status_code == 404
    assert client.delete("/sessions/nope").status_code == 404


def test_delete_session(client):
    sid = client.post("/sessions", json=small_toy_doc()).json()["id"]
    assert client.delete(f"/sessions/{sid}").json()["deleted"] is True
    assert client.get(f"/sessions/{sid}").status_code == 404


def test_service_trace_matches_headless_run(client, tmp_path):
    doc = small_toy_doc(steps=3)
    sid = client.post("/sessions", json=doc).json()["id"]
    for _ in range(3):
        prop = _poll_proposal(client, sid)
        r = client.post(f"/sessions/{sid}/observations", json={"x": prop["x"]})
        assert r.status_code == 200
    served = client.get(f"/sessions/{sid}/trace").json()["records"]

    state = run(config_from_dict(doc))
    direct = state.records
    assert len(served) == len(direct) == 4
    for a, b in zip(served, direct):
        a = dict(a)
        b = dict(b)
        a.pop("wall_ms")
        b.pop("wall_ms")
        assert a == b


def test_manual_session_with_initial_responses(client):
    doc = small_toy_doc(oracle={"id": "manual"}, steps=3)
    pts_doc = {"config": doc}
    # compute the LHS points the service will use, to supply responses
    cfg = config_from_dict(doc)
    from krigseq.campaign import initial_points

    pts = initial_points(cfg)
    pts_doc["initial_responses"] = [toy_oracle(p) for p in pts]
    r = client.post("/sessions", json=pts_doc)
    assert r.status_code == 201
    sid = r.json()["id"]

    prop = _poll_proposal(client, sid)
    # manual submission requires y
    missing = client.post(f"/sessions/{sid}/observations",
                          json={"x": prop["x"]})
    assert missing.status_code == 400
    y = toy_oracle(prop["x"])
    ok = client.post(f"/sessions/{sid}/observations",
                     json={"x": prop["x"], "y": y})
    assert ok.status_code == 200
    assert ok.json()["step"] == 1


def test_manual_session_pending_initial_flow(client):
    doc = small_toy_doc(oracle={"id": "manual"},
                        initial_design={"count": 3,
                                        "bounds": [[-3.0, 3.0], [-3.0, 3.0]]})
    r = client.post("/sessions", json=doc)
    assert r.status_code == 201
    pending = r.json()["pending_initial"]
    assert len(pending) == 3
    # proposals are refused until the seed experiments arrive
    assert client.get(f"/sessions/{r.json()['id']}/proposal").status_code == 409
    sid = r.json()["id"]
    for i, p in enumerate(pending):
        resp = client.post(f"/sessions/{sid}/observations",
                           json={"x": p, "y": toy_oracle(p)})
        assert resp.status_code == 200
    assert client.get(f"/sessions/{sid}/estimate").status_code == 200


def test_duplicate_observation_is_422(client):
    doc = small_toy_doc(free_form_observations=True)
    sid = client.post("/sessions", json=doc).json()["id"]
    cfg = config_from_dict(doc)
    from krigseq.campaign import initial_points

    existing = initial_points(cfg)[0]
    r = client.post(f"/sessions/{sid}/observations",
                    json={"x": existing.tolist(), "y": 0.0})
    assert r.status_code == 422
    assert r.json()["code"] == "duplicate-design-point"


def test_field_endpoint_grids_and_markers(client):
    doc = small_toy_doc(
        oracle={"id": "manual"},
        gamma=1.0,
        initial_design={"bounds": [[0.0, 1.0], [0.0, 1.0]],
                        "points": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                                   [1.0, 1.0]]},
    )
    body = {"config": doc, "initial_responses": [-3.0, 5.0, -2.0, 4.0]}
    sid = client.post("/sessions", json=body).json()["id"]
    r = client.get(f"/sessions/{sid}/field", params={"nx": 2, "ny": 2})
    assert r.status_code == 200
    f = r.json()
    assert len(f["mean"]) == 4 and len(f["exceedance"]) == 4
    tau2 = doc["params"]["tau2"]
    assert all(0.0 <= v <= tau2 * (1 + 1e-8) for v in f["variance"])
    # grid corners coincide with the design: indicator probabilities
    assert set(f["exceedance"]) <= {0.0, 1.0}
    assert f["design"]["exceeds"] == [False, True, False, True]
    # 1x1 grid equals the pointwise value at the grid node
    r1 = client.get(f"/sessions/{sid}/field", params={"nx": 1, "ny": 1})
    from krigseq import build_design, pointwise_exceedance, KernelParams

    cfg = config_from_dict(doc)
    d = build_design(np.array(doc["initial_design"]["points"]),
                     body["initial_responses"], cfg.params)
    expect = pointwise_exceedance([0.0, 0.0], d, cfg.params, cfg.gamma)
    assert r1.json()["exceedance"][0] == expect


def test_field_rejects_non_2d(client):
    doc = small_toy_doc(
        oracle={"id": "manual"},
        env={"kind": "iid-standard-gaussian", "dim": 3},
        initial_design={"bounds": [[-1.0, 1.0]] * 3,
                        "points": [[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]]},
    )
    body = {"config": doc, "initial_responses": [0.0, 1.5]}
    r = client.post("/sessions", json=body)
    assert r.status_code == 201
    sid = r.json()["id"]
    f = client.get(f"/sessions/{sid}/field")
    assert f.status_code == 422


def test_persistence_across_restart(tmp_path):
    state_dir = tmp_path / "state"
    app1 = create_app(state_dir=state_dir)
    with TestClient(app1) as c1:
        sid = c1.post("/sessions", json=small_toy_doc()).json()["id"]
        prop = _poll_proposal(c1, sid)
        c1.post(f"/sessions/{sid}/observations", json={"x": prop["x"]})
        trace1 = c1.get(f"/sessions/{sid}/trace").json()

    app2 = create_app(state_dir=state_dir)
    with TestClient(app2) as c2:
        assert sid in c2.get("/sessions").json()["sessions"]
        trace2 = c2.get(f"/sessions/{sid}/trace").json()
        assert trace1 == trace2


def test_long_computation_returns_202_then_result(client):
    doc = small_toy_doc(
        sa={"a0": 20.0, "iterations": 300, "grad_samples": 500,
            "rescore_outer": 8, "rescore_inner": 100})
    sid = client.post("/sessions", json=doc).json()["id"]
    first = client.get(f"/sessions/{sid}/proposal")
    assert first.status_code == 202
    assert first.json()["code"] == "computing"
    assert first.json()["retry_after_ms"] > 0
    prop = _poll_proposal(client, sid, timeout=120.0)
    assert len(prop["x"]) == 2


def test_seventeen_digit_floats_in_payloads(client):
    sid = client.post("/sessions", json=small_toy_doc()).json()["id"]
    raw = client.get(f"/sessions/{sid}/estimate").content.decode()
    parsed = json.loads(raw)
    assert parsed["estimate"] == float(repr(parsed["estimate"]))
