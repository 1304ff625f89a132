"""Local HTTP API for the annotation console and for scripted review.

Read-mostly: only label writes and triage verdicts mutate state. Raw document
text is never served; every summary endpoint returns the redacted version.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotate import (
    CalibrationConfig,
    LabelRecord,
    LabelStore,
    calibration_report,
    emit_calibration_plot_data,
    load_predictions,
    now_timestamp,
)
from .config import PipelineConfig
from .corpus import StageStore, load_corpus
from .leakscan import load_report
from .metrics import length_stats
from .pipeline import load_manifests


class LabelIn(BaseModel):
    doc_id: str
    label: Literal[0, 1]
    annotator: str
    status: Literal["single", "consensus"] = "single"


class LeakVerdictIn(BaseModel):
    verdict: Literal["confirmed", "dismissed"]


class EntityVerdictIn(BaseModel):
    verdict: Literal["allow", "redact"]


class _Triage:
    """Leak and entity verdicts persisted as one JSON file, single writer."""

    def __init__(self, path: Path):
        self.path = path
        self.leaks: dict[str, str] = {}
        self.entities: dict[str, str] = {}
        if path.exists():
            raw = json.loads(path.read_text("utf-8"))
            self.leaks = dict(raw.get("leaks", {}))
            self.entities = dict(raw.get("entities", {}))

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps({"leaks": self.leaks, "entities": self.entities}, ensure_ascii=False, indent=1),
            encoding="utf-8",
        )


def create_app(config: PipelineConfig) -> FastAPI:
    app = FastAPI(title="textveil service")
    corpus = load_corpus(config.corpus_path)
    corpus_ids = [doc.doc_id for doc in corpus]
    originals = {doc.doc_id: doc.raw_text for doc in corpus}

    redacted_store = StageStore(config.stage_path("redacted"), "redacted")
    summaries = {rec.doc_id: rec.payload["redacted_text"] for rec in redacted_store.records()}
    candidates: dict[str, int] = {}
    for rec in redacted_store.records():
        for surface, count in rec.payload.get("candidates", []):
            candidates[surface] = candidates.get(surface, 0) + count

    label_store = LabelStore(config.effective_labels_path)
    predictions = (
        load_predictions(config.predictions_path) if config.predictions_path.exists() else []
    )
    prob_by_id = {rec.doc_id: rec.probability for rec in predictions}
    posthoc_ids: list[str] = []
    if config.posthoc_path.exists():
        posthoc_ids = json.loads(config.posthoc_path.read_text("utf-8"))
    scan_hits = []
    if config.scan_report_path.exists():
        report = load_report(config.scan_report_path)
        scan_hits = [
            {
                "id": f"hit-{i:05d}",
                "doc_id": hit.doc_id,
                "kind": hit.kind,
                "surface": hit.matched_surface,
                "start": hit.start,
                "end": hit.end,
                "similarity": hit.similarity,
            }
            for i, hit in enumerate(report.hits)
        ]
    triage = _Triage(config.triage_path)
    write_lock = threading.Lock()

    def _context(doc_id: str, start: int, end: int, radius: int = 120) -> str:
        text = summaries.get(doc_id, "")
        return text[max(0, start - radius) : min(len(text), end + radius)]

    @app.get("/api/health")
    def health():
        return {"status": "ok", "corpus_size": len(corpus)}

    @app.get("/api/queue")
    def queue(task: Literal["annotation", "posthoc", "leak_triage"] = "annotation", limit: int = 20):
        labeled = set(label_store.effective())
        if task == "annotation":
            pending = [
                d for d in corpus_ids if d in summaries and d not in labeled and d not in set(posthoc_ids)
            ]
            items = [
                {"doc_id": d, "summary_text": summaries[d], "task": task} for d in pending[:limit]
            ]
            return {"task": task, "items": items, "remaining": len(pending)}
        if task == "posthoc":
            pending = [d for d in posthoc_ids if d not in labeled]
            items = [
                {
                    "doc_id": d,
                    "summary_text": summaries.get(d, ""),
                    "task": task,
                    "probability": prob_by_id.get(d),
                }
                for d in pending[:limit]
            ]
            return {"task": task, "items": items, "remaining": len(pending)}
        pending_hits = [h for h in scan_hits if h["id"] not in triage.leaks]
        items = [
            {**h, "task": task, "context": _context(h["doc_id"], h["start"], h["end"])}
            for h in pending_hits[:limit]
        ]
        return {"task": task, "items": items, "remaining": len(pending_hits)}

    @app.get("/api/summary/{doc_id}")
    def summary(doc_id: str):
        if doc_id not in summaries:
            raise HTTPException(status_code=404, detail=f"no redacted summary for {doc_id}")
        return {"doc_id": doc_id, "summary_text": summaries[doc_id]}

    @app.post("/api/labels", status_code=201)
    def post_label(body: LabelIn):
        if body.doc_id not in originals:
            raise HTTPException(status_code=404, detail=f"unknown doc_id {body.doc_id}")
        record = LabelRecord(
            doc_id=body.doc_id,
            label=body.label,
            annotator=body.annotator,
            timestamp=now_timestamp(),
            status=body.status,
        )
        with write_lock:
            label_store.add(record)
        return dict(record.__dict__)

    @app.get("/api/labels/export", response_class=PlainTextResponse)
    def export_labels():
        lines = [json.dumps(rec.__dict__, ensure_ascii=False) for rec in label_store.records()]
        return "\n".join(lines) + ("\n" if lines else "")

    @app.get("/api/leaks")
    def leaks():
        return {
            "hits": [
                {**h, "verdict": triage.leaks.get(h["id"]), "context": _context(h["doc_id"], h["start"], h["end"])}
                for h in scan_hits
            ]
        }

    @app.post("/api/leaks/{hit_id}/verdict")
    def leak_verdict(hit_id: str, body: LeakVerdictIn):
        if hit_id not in {h["id"] for h in scan_hits}:
            raise HTTPException(status_code=404, detail=f"unknown hit {hit_id}")
        with write_lock:
            triage.leaks[hit_id] = body.verdict
            triage.save()
        return {"id": hit_id, "verdict": body.verdict}

    @app.get("/api/entities/candidates")
    def entity_candidates():
        pending = [
            {"surface": s, "frequency": n, "verdict": triage.entities.get(s)}
            for s, n in sorted(candidates.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        return {"candidates": pending}

    @app.post("/api/entities/{surface}/verdict")
    def entity_verdict(surface: str, body: EntityVerdictIn):
        existing = triage.entities.get(surface)
        if existing is not None and existing != body.verdict:
            return Response(
                content=json.dumps(
                    {
                        "error": f"conflicting verdict for {surface!r}",
                        "existing": existing,
                        "requested": body.verdict,
                    }
                ),
                status_code=409,
                media_type="application/json",
            )
        with write_lock:
            triage.entities[surface] = body.verdict
            triage.save()
            if body.verdict == "allow":
                overlay = config.allowlist_overlay_path
                overlay.parent.mkdir(parents=True, exist_ok=True)
                known = set()
                if overlay.exists():
                    known = {l.strip() for l in overlay.read_text("utf-8").splitlines()}
                if surface not in known:
                    with overlay.open("a", encoding="utf-8") as handle:
                        handle.write(surface + "\n")
        return {"surface": surface, "verdict": body.verdict}

    @app.get("/api/calibration")
    def calibration():
        labeled = label_store.effective()
        scored = [rec for rec in predictions if rec.doc_id in labeled]
        if not scored:
            return {"rows": [], "n_scored": 0}
        report = calibration_report(scored, labeled, config.calibration)
        return {"rows": emit_calibration_plot_data(report), "n_scored": report.n_scored}

    @app.get("/api/stats")
    def stats():
        payload = {
            "corpus_size": len(corpus),
            "summaries": len(summaries),
            "labels": len(label_store.records()),
            "effective_labels": len(label_store.effective()),
            "manifests": [dict(m.__dict__) for m in load_manifests(config)],
        }
        if summaries:
            texts = list(summaries.values())
            payload["summary_length"] = {
                "characters": dict(length_stats(texts, "characters").__dict__),
                "words": dict(length_stats(texts, "words").__dict__),
            }
        if corpus:
            texts = [doc.raw_text for doc in corpus]
            payload["original_length"] = {
                "characters": dict(length_stats(texts, "characters").__dict__),
                "words": dict(length_stats(texts, "words").__dict__),
            }
        return payload

    frontend = config.service.frontend_dir
    if frontend and Path(frontend).is_dir():
        app.mount("/", StaticFiles(directory=frontend, html=True), name="console")
    return app
