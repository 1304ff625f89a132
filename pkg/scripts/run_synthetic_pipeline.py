"""End-to-end dry run on a synthetic corpus with mock backends.

Generates documents with planted identifiers, pushes them through
summarize -> redact -> embed, then audits both the raw and the redacted
summaries so the before/after leak counts are visible side by side.
No network access is needed; everything runs against mock:// endpoints.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from textveil.config import from_dict
from textveil.corpus import StageStore, SyntheticCorpusSpec, generate_synthetic_corpus, save_corpus
from textveil.leakscan import ScanConfig, sample_for_manual_review, scan_corpus
from textveil.metrics import length_stats
from textveil.pipeline import run_all


@dataclass(frozen=True)
class RunSpec:
    workdir: Path
    n_docs: int = 200
    seed: int = 1
    embedding_dim: int = 256
    halt_fraction: float = 0.05
    fuzzy_threshold: float = 0.85


def build_config(spec: RunSpec):
    spec.workdir.mkdir(parents=True, exist_ok=True)
    docs, planted = generate_synthetic_corpus(
        SyntheticCorpusSpec(n_docs=spec.n_docs, seed=spec.seed)
    )
    save_corpus(docs, spec.workdir / "corpus.jsonl")
    raw = {
        "embedding": {"endpoint_url": "mock://0", "dim": spec.embedding_dim},
        "halt_fraction": spec.halt_fraction,
        "scan": {"fuzzy_threshold": spec.fuzzy_threshold},
    }
    return from_dict(raw, spec.workdir), docs, planted


def scan_stage(config, store_name: str, text_key: str, metadata) -> dict:
    store = StageStore(config.stage_path(store_name), store_name)
    texts = {rec.doc_id: rec.payload[text_key] for rec in store.records()}
    report = scan_corpus(texts, metadata, config.scan)
    return {"totals": report.totals, "offending": len(report.offending_doc_ids)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=Path("runs/synthetic"))
    parser.add_argument("--n-docs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--dim", type=int, default=256)
    args = parser.parse_args(argv)
    spec = RunSpec(workdir=args.workdir, n_docs=args.n_docs, seed=args.seed, embedding_dim=args.dim)

    config, docs, planted = build_config(spec)
    metadata = {doc.doc_id: doc.metadata for doc in docs}
    print(f"corpus: {len(docs)} documents, {len(planted)} planted identifiers")

    started = time.monotonic()
    manifests = run_all(config)
    for manifest in manifests:
        print(
            f"stage {manifest.stage}: processed={manifest.processed} "
            f"skipped={manifest.skipped} failed={manifest.failed}"
        )

    before = scan_stage(config, "summarized", "summary_text", metadata)
    after = scan_stage(config, "redacted", "redacted_text", metadata)
    print("scan before redaction:", json.dumps(before))
    print("scan after redaction: ", json.dumps(after))

    sample = sample_for_manual_review(sorted(metadata), config.scan)
    print(f"manual review sample: {len(sample)} of {len(metadata)} documents")

    summaries = StageStore(config.stage_path("redacted"), "redacted")
    lengths = length_stats([rec.payload["redacted_text"] for rec in summaries.records()], "characters")
    print(f"redacted summary length: mean={lengths.mean:.0f} chars, cv={lengths.cv:.3f}")
    print(f"wall time: {time.monotonic() - started:.1f}s")
    return 0 if after["offending"] == 0 else 2


if __name__ == "__main__":
    raise SystemExit(main())
