"""Resumable three-stage runs: summarize, redact, embed.

Each stage skips documents whose (doc_id, content hash) is already in its
store, isolates per-document failures, and reports a manifest. A whole run
halts when a stage's failure fraction exceeds the configured threshold.
"""

from __future__ import annotations

import json
import logging
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .config import PipelineConfig
from .corpus import Document, StageStore, content_hash, load_corpus
from .embed import VectorStore, make_embedding_backend
from .gateway import make_chat_backend, summarize
from .redact import redact_document

log = logging.getLogger(__name__)

STAGE_NAMES = ("summarize", "redact", "embed")


class PipelineError(RuntimeError):
    pass


class MissingStageError(PipelineError):
    pass


class PipelineHaltError(PipelineError):
    pass


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    config_hash: str
    stage: str
    total: int
    processed: int
    skipped: int
    flagged: int
    failed: int
    wall_time_s: float
    failures: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if self.processed + self.skipped + self.failed != self.total:
            raise PipelineError("manifest counts do not add up")


def _new_run_id(config_hash: str) -> str:
    return f"{config_hash[:12]}-{uuid.uuid4().hex[:8]}"


def _write_manifest(config: PipelineConfig, manifest: RunManifest) -> None:
    path = config.manifests_path
    path.parent.mkdir(parents=True, exist_ok=True)
    record = dict(manifest.__dict__)
    record["failures"] = [list(f) for f in manifest.failures]
    with path.open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_manifests(config: PipelineConfig) -> list[RunManifest]:
    path = config.manifests_path
    if not path.exists():
        return []
    out = []
    for line in path.read_text("utf-8").splitlines():
        if line.strip():
            raw = json.loads(line)
            raw["failures"] = tuple(tuple(f) for f in raw["failures"])
            out.append(RunManifest(**raw))
    return out


def _summarize_digest(config: PipelineConfig, template, doc: Document) -> str:
    return content_hash(
        doc.raw_text, template.preamble, config.chat.model_name, repr(config.chat.temperature)
    )


def _redact_digest(config: PipelineConfig, rules, allow, summary_text: str) -> str:
    return content_hash(
        summary_text, rules.fingerprint(), "|".join(sorted(allow.terms)), config.ner_endpoint
    )


def _embed_digest(config: PipelineConfig, text: str, source: str) -> str:
    return content_hash(
        text,
        config.embedding.model_name,
        str(config.embedding.dim),
        str(config.embedding.normalize),
        source,
    )


def run_stage(
    stage: str,
    config: PipelineConfig,
    source: str = "summary",
    progress=None,
) -> RunManifest:
    """Run one stage over the corpus, skipping cached documents.

    ``progress`` is called with the doc_id after each document completes
    (processed, skipped, or failed); exceptions it raises abort the run,
    which is how the crash-resume tests inject interruptions.
    """
    if stage not in STAGE_NAMES:
        raise PipelineError(f"unknown stage {stage!r}; expected one of {STAGE_NAMES}")
    corpus = load_corpus(config.corpus_path)
    started = time.monotonic()
    processed = skipped = flagged = 0
    failures: list[tuple[str, str]] = []

    if stage == "summarize":
        store = StageStore(config.stage_path("summarized"), "summarized")
        template = config.load_prompt_template()
        backend = make_chat_backend(config.chat)

        def work(doc: Document):
            digest = _summarize_digest(config, template, doc)
            if store.has(doc.doc_id, digest):
                return ("skipped", None)
            result = summarize(doc, template, config.chat, backend=backend)
            payload = {
                "summary_text": result.summary_text,
                "flagged": result.flagged,
                "attempts": result.attempts,
                "sections_found": list(result.sections_found),
            }
            store.put(doc.doc_id, digest, payload)
            return ("flagged" if result.flagged else "processed", None)

        jobs = corpus
        if config.chat.concurrency_limit > 1:
            outcomes = _run_pool(work, jobs, config.chat.concurrency_limit, progress)
        else:
            outcomes = _run_serial(work, jobs, progress)

    elif stage == "redact":
        summarized = StageStore(config.stage_path("summarized"), "summarized")
        if len(summarized) == 0:
            raise MissingStageError("redact requires summarize outputs; none found")
        store = StageStore(config.stage_path("redacted"), "redacted")
        rules = config.load_rules()
        allow = config.load_allowlist()
        detector = config.make_detector()

        def work(doc: Document):
            record = summarized.get(doc.doc_id)
            if record is None:
                raise MissingStageError(f"no summary for {doc.doc_id}")
            summary_text = record.payload["summary_text"]
            digest = _redact_digest(config, rules, allow, summary_text)
            if store.has(doc.doc_id, digest):
                return ("skipped", None)
            shim = SimpleNamespace(doc_id=doc.doc_id, summary_text=summary_text)
            redacted, report = redact_document(shim, detector, allow, rules)
            payload = {
                "redacted_text": redacted.text,
                "replacements": [
                    {
                        "kind": r.kind,
                        "surface": r.surface,
                        "start": r.start,
                        "end": r.end,
                        "rule": r.rule,
                        "replacement": r.replacement,
                    }
                    for r in report.replacements
                ],
                "candidates": [[s, n] for s, n in report.entity_candidates_for_review],
            }
            store.put(doc.doc_id, digest, payload)
            return ("processed", None)

        outcomes = _run_serial(work, corpus, progress)

    else:  # embed
        if source not in ("summary", "original"):
            raise PipelineError(f"embed source must be 'summary' or 'original', got {source!r}")
        texts: dict[str, str] = {}
        if source == "summary":
            redacted = StageStore(config.stage_path("redacted"), "redacted")
            if len(redacted) == 0:
                raise MissingStageError("embed requires redact outputs; none found")
            for rec in redacted.records():
                texts[rec.doc_id] = rec.payload["redacted_text"]
            store = StageStore(config.stage_path("embedded"), "embedded")
        else:
            for doc in corpus:
                texts[doc.doc_id] = doc.raw_text
            store = StageStore(config.stage_path("embedded_original"), "embedded")
        vectors = VectorStore(config.vectors_path(source), config.embedding.dim)
        backend = make_embedding_backend(config.embedding)

        def work(doc: Document):
            text = texts.get(doc.doc_id)
            if text is None:
                raise MissingStageError(f"no redacted text for {doc.doc_id}")
            digest = _embed_digest(config, text, source)
            if store.has(doc.doc_id, digest):
                return ("skipped", None)
            rows = backend.embed([text])
            values = np.asarray(rows[0], dtype=np.float64)
            if values.shape != (config.embedding.dim,):
                raise PipelineError(
                    f"dimension mismatch for {doc.doc_id}: got {values.shape}, expected ({config.embedding.dim},)"
                )
            if config.embedding.normalize:
                norm = float(np.linalg.norm(values))
                if norm == 0.0:
                    raise PipelineError(f"zero vector for {doc.doc_id}")
                values = values / norm
            vectors.append(doc.doc_id, values)
            store.put(
                doc.doc_id,
                digest,
                {"vector_path": str(config.vectors_path(source)), "dim": config.embedding.dim, "source": source},
            )
            return ("processed", None)

        outcomes = _run_serial(work, corpus, progress)

    for kind, error in outcomes:
        if kind == "processed":
            processed += 1
        elif kind == "flagged":
            processed += 1
            flagged += 1
        elif kind == "skipped":
            skipped += 1
        else:
            failures.append(error)

    manifest = RunManifest(
        run_id=_new_run_id(config.fingerprint()),
        config_hash=config.fingerprint(),
        stage=stage,
        total=len(corpus),
        processed=processed,
        skipped=skipped,
        flagged=flagged,
        failed=len(failures),
        wall_time_s=round(time.monotonic() - started, 6),
        failures=tuple(failures),
    )
    _write_manifest(config, manifest)
    return manifest


def _run_serial(work, docs, progress):
    outcomes = []
    for doc in docs:
        try:
            outcomes.append(work(doc))
        except Exception as exc:  # per-document isolation; interrupts propagate
            log.warning("document %s failed: %s", doc.doc_id, exc)
            outcomes.append(("failed", (doc.doc_id, str(exc))))
        if progress is not None:
            progress(doc.doc_id)
    return outcomes


def _run_pool(work, docs, limit, progress):
    def guarded(doc):
        try:
            return work(doc)
        except Exception as exc:
            log.warning("document %s failed: %s", doc.doc_id, exc)
            return ("failed", (doc.doc_id, str(exc)))

    outcomes = []
    with ThreadPoolExecutor(max_workers=limit) as pool:
        for doc, outcome in zip(docs, pool.map(guarded, docs)):
            outcomes.append(outcome)
            if progress is not None:
                progress(doc.doc_id)
    return outcomes


def check_halt(config: PipelineConfig, manifest: RunManifest) -> None:
    if manifest.total == 0:
        return
    fraction = manifest.failed / manifest.total
    if fraction > config.halt_fraction:
        raise PipelineHaltError(
            f"stage {manifest.stage} failed on {manifest.failed} of {manifest.total} documents "
            f"(fraction {fraction:.3f} > halt threshold {config.halt_fraction})"
        )


def run_all(config: PipelineConfig, progress=None) -> list[RunManifest]:
    """summarize → redact → embed, halting on excessive failure."""
    manifests = []
    for stage in STAGE_NAMES:
        manifest = run_stage(stage, config, progress=progress)
        manifests.append(manifest)
        check_halt(config, manifest)
    return manifests
