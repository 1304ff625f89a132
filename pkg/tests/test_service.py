"""HTTP API: queues, labels, triage verdicts, calibration, no raw text."""

import json

import pytest
from fastapi.testclient import TestClient

from textveil.annotate import PredictionRecord, save_predictions
from textveil.config import from_dict
from textveil.corpus import StageStore, SyntheticCorpusSpec, generate_synthetic_corpus, load_corpus, save_corpus
from textveil.leakscan import ScanConfig, scan_corpus, save_report
from textveil.pipeline import run_stage
from textveil.service import create_app

N_DOCS = 8


class ServiceEnv:
    def __init__(self, tmp_path):
        docs, _ = generate_synthetic_corpus(SyntheticCorpusSpec(n_docs=N_DOCS, seed=3))
        save_corpus(docs, tmp_path / "corpus.jsonl")
        self.config = from_dict({"embedding": {"endpoint_url": "mock://0", "dim": 16}}, tmp_path)
        run_stage("summarize", self.config)
        run_stage("redact", self.config)
        self.docs = load_corpus(self.config.corpus_path)
        self.by_id = {d.doc_id: d for d in self.docs}
        self.ids = sorted(self.by_id)

    def inject_leak(self):
        """Plant one name back into a redacted summary and scan it."""
        store = StageStore(self.config.stage_path("redacted"), "redacted")
        victim = self.ids[0]
        name = self.by_id[victim].metadata.full_name
        tainted = store.get(victim).payload["redacted_text"] + f" Contact {name} for details."
        payload = {
            "redacted_text": tainted,
            "replacements": [],
            "candidates": [["Capio Maria", 2], ["Beroendecentrum", 1]],
        }
        store.put(victim, "tainted", payload)
        summaries = {
            rec.doc_id: rec.payload["redacted_text"] for rec in store.records()
        }
        metadata = {d.doc_id: d.metadata for d in self.docs}
        report = scan_corpus(summaries, metadata, ScanConfig())
        save_report(report, self.config.scan_report_path)
        self.victim = victim
        self.victim_name = name
        return report

    def write_predictions(self, probabilities):
        records = [
            PredictionRecord(doc_id, p, "model-v1")
            for doc_id, p in zip(self.ids, probabilities)
        ]
        save_predictions(records, self.config.predictions_path)
        return records

    def write_posthoc(self, doc_ids):
        self.config.posthoc_path.parent.mkdir(parents=True, exist_ok=True)
        self.config.posthoc_path.write_text(json.dumps(list(doc_ids)), encoding="utf-8")

    def client(self):
        return TestClient(create_app(self.config))


@pytest.fixture()
def env(tmp_path):
    return ServiceEnv(tmp_path)


def post_label(client, doc_id, label=1, annotator="ann-a", status="single"):
    return client.post(
        "/api/labels",
        json={"doc_id": doc_id, "label": label, "annotator": annotator, "status": status},
    )


# -- health and summaries -----------------------------------------------------

def test_health(env):
    client = env.client()
    body = client.get("/api/health").json()
    assert body == {"status": "ok", "corpus_size": N_DOCS}


def test_summary_serves_redacted_text_only(env):
    client = env.client()
    store = StageStore(env.config.stage_path("redacted"), "redacted")
    for doc_id in env.ids:
        response = client.get(f"/api/summary/{doc_id}")
        assert response.status_code == 200
        body = response.json()
        assert body["summary_text"] == store.get(doc_id).payload["redacted_text"]
        assert body["summary_text"] != env.by_id[doc_id].raw_text
        assert env.by_id[doc_id].metadata.full_name not in body["summary_text"]
    assert client.get("/api/summary/doc-99999").status_code == 404


# -- annotation queue -----------------------------------------------------------

def test_annotation_queue_excludes_labeled_and_posthoc(env):
    env.write_posthoc(env.ids[6:])
    client = env.client()
    body = client.get("/api/queue", params={"task": "annotation"}).json()
    assert body["task"] == "annotation"
    assert body["remaining"] == N_DOCS - 2
    queued = [item["doc_id"] for item in body["items"]]
    assert set(queued).isdisjoint(env.ids[6:])
    assert all(item["summary_text"] for item in body["items"])

    assert post_label(client, queued[0]).status_code == 201
    after = client.get("/api/queue", params={"task": "annotation"}).json()
    assert after["remaining"] == N_DOCS - 3
    assert queued[0] not in [item["doc_id"] for item in after["items"]]


def test_queue_limit_caps_items_not_remaining(env):
    client = env.client()
    body = client.get("/api/queue", params={"task": "annotation", "limit": 3}).json()
    assert len(body["items"]) == 3
    assert body["remaining"] == N_DOCS


def test_queue_rejects_unknown_task(env):
    client = env.client()
    assert client.get("/api/queue", params={"task": "coffee"}).status_code == 422


def test_posthoc_queue_carries_probability(env):
    env.write_predictions([i / 10 for i in range(N_DOCS)])
    env.write_posthoc(env.ids[:3])
    client = env.client()
    body = client.get("/api/queue", params={"task": "posthoc"}).json()
    assert body["remaining"] == 3
    probabilities = {item["doc_id"]: item["probability"] for item in body["items"]}
    assert probabilities == {env.ids[0]: 0.0, env.ids[1]: 0.1, env.ids[2]: 0.2}

    post_label(client, env.ids[0], label=0)
    assert client.get("/api/queue", params={"task": "posthoc"}).json()["remaining"] == 2


# -- labels ---------------------------------------------------------------------

def test_label_round_trip_and_validation(env):
    client = env.client()
    created = post_label(client, env.ids[1], label=1, annotator="ann-b", status="consensus")
    assert created.status_code == 201
    body = created.json()
    assert body["doc_id"] == env.ids[1]
    assert body["label"] == 1 and body["status"] == "consensus"
    assert body["timestamp"]

    assert post_label(client, "doc-99999").status_code == 404
    assert post_label(client, env.ids[1], label=2).status_code == 422
    bad_status = client.post(
        "/api/labels",
        json={"doc_id": env.ids[1], "label": 0, "annotator": "a", "status": "maybe"},
    )
    assert bad_status.status_code == 422
    # the label landed on disk as well as in memory
    assert env.config.effective_labels_path.exists()


def test_label_export_matches_posts(env):
    client = env.client()
    post_label(client, env.ids[0], label=1)
    post_label(client, env.ids[0], label=0, annotator="ann-b")
    post_label(client, env.ids[2], label=1)
    text = client.get("/api/labels/export").text
    assert text.endswith("\n")
    lines = [json.loads(line) for line in text.splitlines()]
    assert len(lines) == 3
    assert lines[0]["doc_id"] == env.ids[0]
    assert {line["annotator"] for line in lines[:2]} == {"ann-a", "ann-b"}


def test_label_export_empty(env):
    assert env.client().get("/api/labels/export").text == ""


# -- leak triage -------------------------------------------------------------------

def test_leak_queue_and_verdicts(env):
    report = env.inject_leak()
    assert report.hits
    client = env.client()
    body = client.get("/api/queue", params={"task": "leak_triage"}).json()
    assert body["remaining"] == len(report.hits)
    first = body["items"][0]
    assert first["doc_id"] == env.victim
    assert env.victim_name in first["context"] or first["surface"] in first["context"]

    verdict = client.post(f"/api/leaks/{first['id']}/verdict", json={"verdict": "confirmed"})
    assert verdict.status_code == 200
    after = client.get("/api/queue", params={"task": "leak_triage"}).json()
    assert after["remaining"] == len(report.hits) - 1

    listed = client.get("/api/leaks").json()["hits"]
    tagged = {h["id"]: h["verdict"] for h in listed}
    assert tagged[first["id"]] == "confirmed"
    assert sum(1 for v in tagged.values() if v is None) == len(report.hits) - 1


def test_leak_context_window(env):
    report = env.inject_leak()
    client = env.client()
    hit = client.get("/api/leaks").json()["hits"][0]
    store = StageStore(env.config.stage_path("redacted"), "redacted")
    text = store.get(hit["doc_id"]).payload["redacted_text"]
    expected = text[max(0, hit["start"] - 120) : min(len(text), hit["end"] + 120)]
    assert hit["context"] == expected


def test_leak_verdict_unknown_hit(env):
    env.inject_leak()
    client = env.client()
    assert client.post("/api/leaks/hit-99999/verdict", json={"verdict": "dismissed"}).status_code == 404
    assert client.post("/api/leaks/hit-00000/verdict", json={"verdict": "shrug"}).status_code == 422


def test_leak_verdicts_persist_across_restarts(env):
    env.inject_leak()
    client = env.client()
    hit_id = client.get("/api/leaks").json()["hits"][0]["id"]
    client.post(f"/api/leaks/{hit_id}/verdict", json={"verdict": "dismissed"})

    reopened = env.client()
    verdicts = {h["id"]: h["verdict"] for h in reopened.get("/api/leaks").json()["hits"]}
    assert verdicts[hit_id] == "dismissed"


# -- entity triage --------------------------------------------------------------------

def test_entity_candidates_sorted_and_verdicts(env):
    env.inject_leak()
    client = env.client()
    body = client.get("/api/entities/candidates").json()["candidates"]
    surfaces = [c["surface"] for c in body]
    assert "Capio Maria" in surfaces and "Beroendecentrum" in surfaces
    keys = [(-c["frequency"], c["surface"]) for c in body]
    assert keys == sorted(keys)
    assert all(c["verdict"] is None for c in body)

    allowed = client.post("/api/entities/Capio Maria/verdict", json={"verdict": "allow"})
    assert allowed.status_code == 200
    refreshed = client.get("/api/entities/candidates").json()["candidates"]
    verdicts = {c["surface"]: c["verdict"] for c in refreshed}
    assert verdicts["Capio Maria"] == "allow"


def test_entity_verdict_conflict_is_409(env):
    env.inject_leak()
    client = env.client()
    assert client.post("/api/entities/Capio Maria/verdict", json={"verdict": "allow"}).status_code == 200
    # repeating the same verdict is fine
    assert client.post("/api/entities/Capio Maria/verdict", json={"verdict": "allow"}).status_code == 200
    conflict = client.post("/api/entities/Capio Maria/verdict", json={"verdict": "redact"})
    assert conflict.status_code == 409
    body = conflict.json()
    assert body["existing"] == "allow" and body["requested"] == "redact"


def test_allow_verdict_feeds_allowlist_overlay(env):
    env.inject_leak()
    client = env.client()
    client.post("/api/entities/Capio Maria/verdict", json={"verdict": "allow"})
    client.post("/api/entities/Capio Maria/verdict", json={"verdict": "allow"})
    overlay = env.config.allowlist_overlay_path
    lines = [l for l in overlay.read_text("utf-8").splitlines() if l]
    assert lines == ["Capio Maria"]
    assert "capio maria" in env.config.load_allowlist().terms


# -- calibration and stats ---------------------------------------------------------------

def test_calibration_endpoint_live(env):
    env.write_predictions([0.05, 0.05, 0.5, 0.5, 0.5, 0.95, 0.95, 0.95])
    client = env.client()
    assert client.get("/api/calibration").json() == {"rows": [], "n_scored": 0}

    labels = [0, 0, 1, 0, 1, 1, 1, 1]
    for doc_id, label in zip(env.ids, labels):
        post_label(client, doc_id, label=label)
    body = client.get("/api/calibration").json()
    assert body["n_scored"] == N_DOCS
    rows = body["rows"]
    assert [row["n"] for row in rows] == [2, 3, 3]
    top = rows[-1]
    assert top["observed_rate"] == pytest.approx(1.0)
    assert 0.0 <= top["ci_low"] <= top["observed_rate"] <= top["ci_high"] <= 1.0


def test_stats_endpoint(env):
    client = env.client()
    post_label(client, env.ids[0])
    body = client.get("/api/stats").json()
    assert body["corpus_size"] == N_DOCS
    assert body["summaries"] == N_DOCS
    assert body["labels"] == 1 and body["effective_labels"] == 1
    assert [m["stage"] for m in body["manifests"]] == ["summarize", "redact"]
    for section in ("summary_length", "original_length"):
        assert set(body[section]) == {"characters", "words"}
        assert body[section]["characters"]["mean"] > 0


# -- static frontend ------------------------------------------------------------------------

def test_frontend_mount_optional(env, tmp_path):
    assert env.client().get("/").status_code == 404

    site = tmp_path / "site"
    site.mkdir()
    (site / "index.html").write_text("<!doctype html><title>console</title>", encoding="utf-8")
    config = from_dict(
        {
            "embedding": {"endpoint_url": "mock://0", "dim": 16},
            "service": {"frontend_dir": str(site)},
        },
        env.config.corpus_path.parent,
    )
    client = TestClient(create_app(config))
    response = client.get("/")
    assert response.status_code == 200
    assert "console" in response.text
