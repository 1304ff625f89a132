"""Command-line entry point wiring the stages, audits, and evaluation."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import annotate as ann
from . import config as cfg
from .corpus import (
    SyntheticCorpusSpec,
    generate_synthetic_corpus,
    load_corpus,
    save_corpus,
    save_planted,
)
from .embed import VectorStore
from .evaluate import build_labels, compare_sources, repeated_split_eval
from .leakscan import ScanConfig, sample_for_manual_review, save_report, scan_corpus
from .metrics import length_stats
from .pipeline import check_halt, run_stage
from .corpus import StageStore


def _load_config(args) -> cfg.PipelineConfig:
    require_corpus = args.command not in ("ingest",)
    if args.config:
        config = cfg.from_yaml(args.config, require_corpus=require_corpus)
    else:
        config = cfg.default_config(Path.cwd(), require_corpus=require_corpus)
    if args.seed is not None:
        config = dataclasses.replace(
            config,
            eval_protocol=dataclasses.replace(config.eval_protocol, seed=args.seed),
            scan=dataclasses.replace(config.scan, sample_seed=args.seed),
        )
    return config


def _print(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False, indent=1, default=str))


def cmd_ingest(args, config: cfg.PipelineConfig) -> int:
    if args.synthetic is None and args.source is None:
        print("ingest needs --synthetic N or --from PATH", file=sys.stderr)
        return 1
    if args.dry_run:
        print(f"would write corpus to {config.corpus_path}")
        return 0
    if args.synthetic is not None:
        spec = SyntheticCorpusSpec(
            n_docs=args.synthetic, seed=args.gen_seed, mark_for_passthrough=not args.unmarked
        )
        docs, planted = generate_synthetic_corpus(spec)
        save_corpus(docs, config.corpus_path)
        planted_path = config.planted_path or Path(str(config.corpus_path) + ".planted")
        save_planted(planted, planted_path)
        print(f"wrote {len(docs)} documents to {config.corpus_path}")
        print(f"wrote {len(planted)} planted identifiers to {planted_path}")
    else:
        docs = load_corpus(args.source)
        save_corpus(docs, config.corpus_path)
        print(f"validated and wrote {len(docs)} documents to {config.corpus_path}")
    return 0


def cmd_stage(args, config: cfg.PipelineConfig) -> int:
    source = getattr(args, "source", "summary")
    if args.dry_run:
        corpus = load_corpus(config.corpus_path)
        print(f"would run stage {args.command} over {len(corpus)} documents")
        return 0
    manifest = run_stage(args.command, config, source=source)
    check_halt(config, manifest)
    _print(dict(manifest.__dict__))
    return 0


def cmd_scan(args, config: cfg.PipelineConfig) -> int:
    corpus = load_corpus(config.corpus_path)
    store = StageStore(config.stage_path("redacted"), "redacted")
    summaries = {rec.doc_id: rec.payload["redacted_text"] for rec in store.records()}
    if not summaries:
        print("nothing to scan: no redacted summaries", file=sys.stderr)
        return 1
    scan_config = ScanConfig(
        fuzzy_threshold=args.threshold,
        sample_fraction_for_manual_review=args.sample_fraction,
        sample_seed=config.scan.sample_seed,
    )
    if args.dry_run:
        print(f"would scan {len(summaries)} summaries")
        return 0
    metadata = {doc.doc_id: doc.metadata for doc in corpus}
    report = scan_corpus(summaries, metadata, scan_config)
    save_report(report, config.scan_report_path)
    sample = sample_for_manual_review(sorted(summaries), scan_config)
    _print(
        {
            "scanned": report.scanned,
            "totals": report.totals,
            "offending_doc_ids": list(report.offending_doc_ids[:20]),
            "manual_review_sample_size": len(sample),
            "report_path": str(config.scan_report_path),
        }
    )
    return 0 if report.clean else 2


def cmd_stats(args, config: cfg.PipelineConfig) -> int:
    corpus = load_corpus(config.corpus_path)
    out = {"corpus_size": len(corpus)}
    originals = [doc.raw_text for doc in corpus]
    out["original"] = {
        unit: dict(length_stats(originals, unit).__dict__) for unit in ("characters", "words")
    }
    store = StageStore(config.stage_path("redacted"), "redacted")
    summaries = [rec.payload["redacted_text"] for rec in store.records()]
    if summaries:
        out["summary"] = {
            unit: dict(length_stats(summaries, unit).__dict__) for unit in ("characters", "words")
        }
    _print(out)
    return 0


def _load_vectors(config: cfg.PipelineConfig, source: str) -> tuple[list[str], np.ndarray]:
    path = config.vectors_path(source)
    if not path.exists():
        raise SystemExit(f"no vectors at {path}; run: textveil embed --source {source}")
    store = VectorStore(path, config.embedding.dim)
    return store.load_all()


def cmd_eval(args, config: cfg.PipelineConfig) -> int:
    corpus = load_corpus(config.corpus_path)
    tasks = {t.name: t for t in config.load_tasks()}
    if args.task not in tasks:
        print(f"unknown task {args.task!r}; available: {sorted(tasks)}", file=sys.stderr)
        return 1
    task = tasks[args.task]
    labels = build_labels(corpus, task)
    binary = task.kind == "binary"
    metrics = ("accuracy", "roc_auc", "pr_auc") if binary else ("accuracy", "macro_auc")
    if args.dry_run:
        print(f"would evaluate task {task.name} on source {args.source}")
        return 0
    if args.source == "both":
        original = _load_vectors(config, "original")
        summary = _load_vectors(config, "summary")
        reports = compare_sources(task.name, labels, original, summary, config.eval_protocol, metrics)
        _print({side: _report_dict(rep) for side, rep in reports.items()})
    else:
        ids, matrix = _load_vectors(config, args.source)
        id_order = {doc.doc_id: i for i, doc in enumerate(corpus)}
        aligned = [labels[id_order[d]] for d in ids]
        report = repeated_split_eval(
            matrix,
            aligned,
            config.eval_protocol,
            metrics,
            task=task.name,
            embedding_source=args.source,
        )
        _print(_report_dict(report))
    return 0


def _report_dict(report) -> dict:
    return {
        "task": report.task,
        "embedding_source": report.embedding_source,
        "chosen_c": report.chosen_c,
        "prevalence": report.prevalence,
        "metrics": {
            name: {"mean": s.mean, "ci_low": s.ci_low, "ci_high": s.ci_high}
            for name, s in report.metrics.items()
        },
        "config": report.config,
        "conventions": list(report.conventions),
    }


def cmd_annotate(args, config: cfg.PipelineConfig) -> int:
    store = ann.LabelStore(config.effective_labels_path)
    if args.action == "import":
        count = 0
        for line in Path(args.file).read_text("utf-8").splitlines():
            if line.strip():
                store.add(ann.LabelRecord(**json.loads(line)))
                count += 1
        print(f"imported {count} label records")
    else:
        lines = [json.dumps(rec.__dict__, ensure_ascii=False) for rec in store.records()]
        Path(args.file).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        print(f"exported {len(lines)} label records to {args.file}")
    return 0


def _save_annotator(annotator: ann.AnnotatorModel, config: cfg.PipelineConfig) -> None:
    model = annotator.model
    np.savez(
        config.model_path,
        weights=model.weights,
        intercepts=model.intercepts,
    )
    meta = {
        "classes": list(model.classes),
        "c_value": model.c_value,
        "objective": model.objective,
        "converged": model.converged,
        "model_version": annotator.model_version,
        "chosen_c": annotator.chosen_c,
        "cv_metric": annotator.cv_metric,
        "cv_mean": annotator.cv_mean,
        "n_labels": annotator.n_labels,
        "prevalence": annotator.prevalence,
    }
    Path(str(config.model_path) + ".json").write_text(json.dumps(meta, indent=1), encoding="utf-8")


def _load_annotator(config: cfg.PipelineConfig) -> ann.AnnotatorModel:
    from .evaluate import LogRegModel

    if not config.model_path.exists():
        raise SystemExit(f"no trained model at {config.model_path}; run: textveil train")
    arrays = np.load(config.model_path)
    meta = json.loads(Path(str(config.model_path) + ".json").read_text("utf-8"))
    model = LogRegModel(
        weights=arrays["weights"],
        intercepts=arrays["intercepts"],
        classes=tuple(meta["classes"]),
        c_value=meta["c_value"],
        objective=meta["objective"],
        converged=meta["converged"],
        n_iter=0,
        grad_norm=0.0,
    )
    return ann.AnnotatorModel(
        model=model,
        model_version=meta["model_version"],
        chosen_c=meta["chosen_c"],
        cv_metric=meta["cv_metric"],
        cv_mean=meta["cv_mean"],
        cv_table={},
        n_labels=meta["n_labels"],
        prevalence=meta["prevalence"],
    )


def cmd_train(args, config: cfg.PipelineConfig) -> int:
    store = ann.LabelStore(config.effective_labels_path)
    labels = store.effective()
    if not labels:
        print("no labels in store; annotate first", file=sys.stderr)
        return 1
    ids, matrix = _load_vectors(config, "summary")
    annotator = ann.train_on_labels(labels, ids, matrix, config.eval_protocol)
    _save_annotator(annotator, config)
    _print(
        {
            "n_labels": annotator.n_labels,
            "prevalence": annotator.prevalence,
            "chosen_c": annotator.chosen_c,
            "cv_metric": annotator.cv_metric,
            "cv_mean": annotator.cv_mean,
            "model_version": annotator.model_version,
            "model_path": str(config.model_path),
        }
    )
    return 0


def cmd_predict(args, config: cfg.PipelineConfig) -> int:
    annotator = _load_annotator(config)
    ids, matrix = _load_vectors(config, "summary")
    labeled = set(ann.LabelStore(config.effective_labels_path).effective())
    predictions = ann.predict_corpus(annotator, ids, matrix, exclude=labeled)
    ann.save_predictions(predictions, config.predictions_path)
    print(f"wrote {len(predictions)} predictions to {config.predictions_path}")
    return 0


def cmd_sample_posthoc(args, config: cfg.PipelineConfig) -> int:
    predictions = ann.load_predictions(config.predictions_path)
    sample = ann.select_posthoc_sample(
        predictions,
        n_low=args.n_low,
        n_high=args.n_high,
        threshold=args.threshold,
        seed=config.scan.sample_seed,
    )
    config.posthoc_path.parent.mkdir(parents=True, exist_ok=True)
    config.posthoc_path.write_text(json.dumps(sample, indent=0), encoding="utf-8")
    print(f"sampled {args.n_low}+{args.n_high} doc_ids to {config.posthoc_path}")
    return 0


def cmd_calibrate(args, config: cfg.PipelineConfig) -> int:
    predictions = ann.load_predictions(config.predictions_path)
    labeled = ann.LabelStore(config.effective_labels_path).effective()
    scored = [rec for rec in predictions if rec.doc_id in labeled]
    if not scored:
        print("no labeled predictions; label the post-hoc sample first", file=sys.stderr)
        return 1
    report = ann.calibration_report(scored, labeled, config.calibration)
    rows = ann.emit_calibration_plot_data(report)
    out_path = config.store_dir / "calibration.csv"
    out_path.write_text(ann.plot_data_to_csv(rows), encoding="utf-8")
    _print({"n_scored": report.n_scored, "rows": rows, "csv_path": str(out_path)})
    return 0


def cmd_serve(args, config: cfg.PipelineConfig) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(config)
    uvicorn.run(app, host=config.service.host, port=config.service.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textveil", description=__doc__)
    parser.add_argument("--config", help="path to the YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="override protocol seeds")
    parser.add_argument("--dry-run", action="store_true", help="describe actions without writing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="generate or validate a corpus")
    p.add_argument("--synthetic", type=int, default=None, metavar="N")
    p.add_argument("--gen-seed", type=int, default=1)
    p.add_argument("--unmarked", action="store_true", help="omit passthrough markers")
    p.add_argument("--from", dest="source", default=None, metavar="PATH")

    sub.add_parser("summarize", help="stage 1: summarize the corpus")
    sub.add_parser("redact", help="stage 2: redact the summaries")
    p = sub.add_parser("embed", help="stage 3: embed texts")
    p.add_argument("--source", choices=("summary", "original"), default="summary")

    p = sub.add_parser("scan", help="audit redacted summaries for leaks")
    p.add_argument("--threshold", type=float, default=0.85)
    p.add_argument("--sample-fraction", type=float, default=0.05)

    sub.add_parser("stats", help="length statistics for originals and summaries")

    p = sub.add_parser("eval", help="information-retention evaluation")
    p.add_argument("--task", required=True)
    p.add_argument("--source", choices=("original", "summary", "both"), default="summary")

    p = sub.add_parser("annotate", help="import or export label records")
    p.add_argument("action", choices=("import", "export"))
    p.add_argument("file")

    sub.add_parser("train", help="train the classifier on stored labels")
    sub.add_parser("predict", help="score all unlabeled documents")

    p = sub.add_parser("sample-posthoc", help="stratified validation sample")
    p.add_argument("--n-low", type=int, default=250)
    p.add_argument("--n-high", type=int, default=250)
    p.add_argument("--threshold", type=float, default=0.5)

    sub.add_parser("calibrate", help="nine-bin calibration report")
    sub.add_parser("serve", help="run the local HTTP service")
    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "summarize": cmd_stage,
    "redact": cmd_stage,
    "embed": cmd_stage,
    "scan": cmd_scan,
    "stats": cmd_stats,
    "eval": cmd_eval,
    "annotate": cmd_annotate,
    "train": cmd_train,
    "predict": cmd_predict,
    "sample-posthoc": cmd_sample_posthoc,
    "calibrate": cmd_calibrate,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _load_config(args)
    return _HANDLERS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
