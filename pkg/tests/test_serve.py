from __future__ import annotations

import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from abuse_forecast.cli import main as cli_main
from abuse_forecast.errors import SchemaError, StageMismatchError
from abuse_forecast.serve import (
    build_app,
    draft_conversation,
    load_snapshot,
    score_draft,
)

HOSTILE = ("you are all idiots and morons #rage #fury #anger @them @those "
           "what a total loser clown fool !!! moron idiot !!!")
BENIGN = "lovely calm morning by the lake"


def _run(*args: str) -> None:
    assert cli_main(list(args)) == 0


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """One labeled corpus, four small trained artifacts."""
    root = tmp_path_factory.mktemp("serve")
    raw, labeled = root / "raw.jsonl", root / "labeled.jsonl"
    _run("synth", "--out", str(raw), "--seed", "5", "--n", "150")
    _run("label", "--corpus", str(raw), "--out", str(labeled))
    fast = ["--trees", "8", "--depth", "8", "--min-leaf", "2",
            "--max-features", "sqrt", "--seed", "3"]
    paths = {"corpus": labeled}
    for name, model, mask, stage in (
        ("et", "extra_trees", "mt,tw", "prepost"),
        ("narrow", "extra_trees", "tw", "prepost"),
        ("ada", "adaboost_r2", "mt,tw", "prepost"),
        ("posthoc", "extra_trees", "mt,tw", "posthoc"),
    ):
        out = root / f"{name}.json"
        _run("train", "--corpus", str(labeled), "--mask", mask,
             "--stage", stage, "--model", model, "--out", str(out), *fast)
        paths[name] = out
    return paths


@pytest.fixture(scope="module")
def client(artifacts):
    app = build_app(model_path=artifacts["et"])
    with TestClient(app) as c:
        yield c


# ---------------------------------------------------------------------------
# request shaping

def test_draft_conversation_derives_counts():
    conv = draft_conversation(
        {"draft_text": "go #one #two @a www.example.org $tag hi"})
    assert conv.parent.hashtag_count == 2
    assert conv.parent.mention_count == 1
    assert conv.parent.url_count == 1
    assert conv.parent.symbol_count == 1
    assert len(conv.replies) == 1


def test_draft_conversation_explicit_counts_override():
    conv = draft_conversation({"draft_text": "#a #b", "hashtags": 7})
    assert conv.parent.hashtag_count == 7


def test_draft_conversation_account_block():
    conv = draft_conversation({
        "draft_text": "hi there",
        "account": {"followers_count": 12, "verified": True,
                    "time_zone": "UTC"},
    })
    assert conv.account.followers_count == 12
    assert conv.account.verified is True
    assert conv.account.time_zone == "UTC"


@pytest.mark.parametrize("payload", [
    [],
    {"draft_text": ""},
    {"draft_text": "   "},
    {"draft_text": 3},
    {"draft_text": "ok", "hashtags": -1},
    {"draft_text": "ok", "hashtags": True},
    {"draft_text": "ok", "surprise": 1},
    {"draft_text": "ok", "account": {"followers_count": -5}},
    {"draft_text": "ok", "account": {"verified": "yes"}},
    {"draft_text": "ok", "account": {"handle": "x"}},
])
def test_draft_conversation_rejects_bad_payloads(payload):
    with pytest.raises(SchemaError):
        draft_conversation(payload)


# ---------------------------------------------------------------------------
# snapshot + scoring core

def test_snapshot_digest_names_file_bytes(artifacts):
    snap = load_snapshot(artifacts["et"])
    assert snap.model_id == hashlib.sha256(
        artifacts["et"].read_bytes()).hexdigest()
    assert snap.mask.to_string() == "mt,tw"
    assert len(snap.columns) == snap.model.n_features
    assert snap.background.shape[1] == snap.model.n_features


def test_score_draft_fields_and_range(artifacts):
    snap = load_snapshot(artifacts["et"])
    out = score_draft(snap, {"draft_text": BENIGN})
    assert out["stage"] == "prepost"
    assert out["model_id"] == snap.model_id
    lo, hi = snap.y_range
    assert lo <= out["predicted_abusive_replies"] <= hi
    assert out["verdict_of_draft"] == "neutral"
    assert 1 <= len(out["top_attributions"]) <= 10


def test_score_draft_attribution_efficiency_when_narrow(artifacts):
    # tw-only model: 8 features, so the response holds every attribution
    snap = load_snapshot(artifacts["narrow"])
    out = score_draft(snap, {"draft_text": HOSTILE})
    total = out["attribution_base"] + sum(
        t["attribution"] for t in out["top_attributions"])
    assert total == pytest.approx(out["predicted_abusive_replies"], abs=1e-4)


def test_score_draft_verdict_flags_hostile_text(artifacts):
    snap = load_snapshot(artifacts["et"])
    assert score_draft(snap, {"draft_text": HOSTILE})["verdict_of_draft"] == "abusive"


def test_adaboost_scores_without_attributions(artifacts):
    snap = load_snapshot(artifacts["ada"])
    out = score_draft(snap, {"draft_text": HOSTILE})
    assert out["top_attributions"] == []
    assert out["attribution_base"] is None
    assert out["predicted_abusive_replies"] >= 0


def test_build_app_refuses_posthoc_model(artifacts):
    with pytest.raises(StageMismatchError):
        build_app(model_path=artifacts["posthoc"])


# ---------------------------------------------------------------------------
# HTTP surface

def test_predict_endpoint_roundtrip(client):
    r = client.post("/v1/predict", json={"draft_text": BENIGN})
    assert r.status_code == 200
    body = r.json()
    assert set(body) >= {"predicted_abusive_replies", "verdict_of_draft",
                         "top_attributions", "model_id", "stage"}


def test_predict_is_deterministic_per_snapshot(client):
    payload = {"draft_text": HOSTILE, "hashtags": 3}
    first = client.post("/v1/predict", json=payload)
    second = client.post("/v1/predict", json=payload)
    assert first.content == second.content


def test_hostile_draft_scores_above_benign(client):
    hostile = client.post("/v1/predict", json={"draft_text": HOSTILE}).json()
    benign = client.post("/v1/predict", json={"draft_text": BENIGN}).json()
    assert hostile["predicted_abusive_replies"] > benign["predicted_abusive_replies"]


def test_predict_rejects_bad_requests(client):
    assert client.post("/v1/predict", json={"draft_text": ""}).status_code == 400
    assert client.post("/v1/predict", json={"nope": 1}).status_code == 400
    r = client.post("/v1/predict", content=b"{broken",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400
    assert "error" in r.json()


def test_model_endpoint_reports_digest(client, artifacts):
    r = client.get("/v1/model")
    assert r.status_code == 200
    body = r.json()
    assert body["model_id"] == hashlib.sha256(
        artifacts["et"].read_bytes()).hexdigest()
    assert body["mask"] == "mt,tw"
    assert body["stage"] == "prepost"
    assert body["kind"] == "extra_trees"
    assert body["feature_manifest"]["columns"]


def test_health_ok(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_empty_app_returns_503_and_no_model(artifacts):
    with TestClient(build_app()) as c:
        assert c.get("/v1/health").json() == {"status": "no_model"}
        assert c.post("/v1/predict", json={"draft_text": "hi"}).status_code == 503
        assert c.get("/v1/model").status_code == 503


def test_reload_swaps_snapshot(artifacts):
    with TestClient(build_app()) as c:
        r = c.post("/v1/reload", json={"path": str(artifacts["et"])})
        assert r.status_code == 200
        assert r.json()["model_id"] == hashlib.sha256(
            artifacts["et"].read_bytes()).hexdigest()
        assert c.get("/v1/health").json() == {"status": "ok"}
        assert c.post("/v1/predict", json={"draft_text": "hi"}).status_code == 200
        # swap to the narrow model; responses must track the new snapshot
        r2 = c.post("/v1/reload", json={"path": str(artifacts["narrow"])})
        predicted = c.post("/v1/predict", json={"draft_text": "hi"}).json()
        assert predicted["model_id"] == r2.json()["model_id"]


def test_reload_rejects_posthoc_with_409(client, artifacts):
    before = client.get("/v1/model").json()["model_id"]
    r = client.post("/v1/reload", json={"path": str(artifacts["posthoc"])})
    assert r.status_code == 409
    # failed reload leaves the old snapshot serving
    assert client.get("/v1/model").json()["model_id"] == before


def test_reload_rejects_bad_artifacts(client, tmp_path):
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert client.post("/v1/reload",
                       json={"path": str(junk)}).status_code == 400
    assert client.post("/v1/reload",
                       json={"path": str(tmp_path / "missing.json")}).status_code == 400
    assert client.post("/v1/reload", json={"nope": 1}).status_code == 400
    truncated = tmp_path / "trunc.json"
    truncated.write_text(json.dumps({"format_version": 1, "kind": "extra_trees"}))
    assert client.post("/v1/reload",
                       json={"path": str(truncated)}).status_code == 400


def test_static_mount_serves_ui_bundle(artifacts, tmp_path):
    (tmp_path / "index.html").write_text("<!doctype html><title>composer</title>")
    app = build_app(model_path=artifacts["et"], static_dir=tmp_path)
    with TestClient(app) as c:
        assert c.post("/v1/predict",
                      json={"draft_text": "hi"}).status_code == 200
        home = c.get("/")
        assert home.status_code == 200
        assert "composer" in home.text
