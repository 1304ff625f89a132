"""Human labels, the small-sample classifier, and calibration reporting.

Labels live in an append-only line store; the effective label per document is
a pure view (consensus beats single, later timestamp beats earlier). Training
reuses the evaluation harness; corpus-wide predictions feed a stratified
post-hoc sample and a nine-bin calibration report with Wilson intervals.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .evaluate import (
    EvalError,
    EvalProtocolConfig,
    LogRegModel,
    grid_search_c,
    positive_probability,
    train_logreg,
)
from .metrics import wilson_interval

LABEL_STATUSES = ("single", "consensus")


class AnnotateError(ValueError):
    pass


@dataclass(frozen=True)
class LabelRecord:
    doc_id: str
    label: int
    annotator: str
    timestamp: str  # ISO-8601
    status: str = "single"

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise AnnotateError(f"label must be 0 or 1, got {self.label!r}")
        if self.status not in LABEL_STATUSES:
            raise AnnotateError(f"status must be one of {LABEL_STATUSES}, got {self.status!r}")
        datetime.fromisoformat(self.timestamp)  # validates shape


def now_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def effective_labels(records: list[LabelRecord]) -> dict[str, int]:
    """One label per doc_id: consensus wins over single, then the latest
    timestamp, then the later record in input order."""
    best: dict[str, tuple] = {}
    for index, rec in enumerate(records):
        key = (rec.status == "consensus", datetime.fromisoformat(rec.timestamp), index)
        if rec.doc_id not in best or key >= best[rec.doc_id][0]:
            best[rec.doc_id] = (key, rec.label)
    return {doc_id: label for doc_id, (_, label) in best.items()}


class LabelStore:
    """Append-only JSONL of LabelRecords; history is never rewritten."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: list[LabelRecord] = []
        if self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                if line.strip():
                    self._records.append(LabelRecord(**json.loads(line)))

    def __len__(self) -> int:
        return len(self._records)

    def add(self, record: LabelRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record.__dict__, ensure_ascii=False) + "\n")
            handle.flush()
        self._records.append(record)

    def records(self) -> list[LabelRecord]:
        return list(self._records)

    def effective(self) -> dict[str, int]:
        return effective_labels(self._records)


# ---------------------------------------------------------------------------
# Training and prediction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    doc_id: str
    probability: float
    model_version: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.probability <= 1.0) or not np.isfinite(self.probability):
            raise AnnotateError(f"probability {self.probability!r} outside [0, 1]")


@dataclass(frozen=True)
class AnnotatorModel:
    model: LogRegModel
    model_version: str
    chosen_c: float
    cv_metric: str
    cv_mean: float
    cv_table: dict
    n_labels: int
    prevalence: float


def _model_version(labels: dict[str, int], config: EvalProtocolConfig, dim: int) -> str:
    digest = hashlib.sha256()
    for doc_id in sorted(labels):
        digest.update(f"{doc_id}={labels[doc_id]}\x1f".encode("utf-8"))
    digest.update(
        json.dumps(
            {
                "c_grid": list(config.c_grid),
                "cv_folds": config.cv_folds,
                "seed": config.seed,
                "dim": dim,
            },
            sort_keys=True,
        ).encode("utf-8")
    )
    return digest.hexdigest()[:16]


def train_on_labels(
    labels: dict[str, int],
    vector_ids: list[str],
    X: np.ndarray,
    config: EvalProtocolConfig,
    metric: str = "pr_auc",
) -> AnnotatorModel:
    """Grid search plus final fit on the labeled subset of the vectors."""
    X = np.asarray(X, dtype=np.float64)
    lookup = {doc_id: i for i, doc_id in enumerate(vector_ids)}
    missing = sorted(d for d in labels if d not in lookup)
    if missing:
        shown = ", ".join(missing[:5])
        raise AnnotateError(f"no vectors for {len(missing)} labeled doc_ids: {shown}")
    ordered = sorted(labels)
    y = [labels[d] for d in ordered]
    for cls in (0, 1):
        if y.count(cls) < 2:
            raise EvalError(f"need at least 2 labels of class {cls}, got {y.count(cls)}")
    X_sub = X[[lookup[d] for d in ordered]]
    search = grid_search_c(X_sub, y, config, metric)
    model = train_logreg(X_sub, y, search.chosen_c)
    return AnnotatorModel(
        model=model,
        model_version=_model_version(labels, config, X.shape[1]),
        chosen_c=search.chosen_c,
        cv_metric=metric,
        cv_mean=float(np.mean(search.cv_table[search.chosen_c])),
        cv_table=search.cv_table,
        n_labels=len(y),
        prevalence=float(np.mean(y)),
    )


def predict_corpus(
    annotator: AnnotatorModel,
    vector_ids: list[str],
    X: np.ndarray,
    exclude=(),
) -> list[PredictionRecord]:
    """Positive-class probability for every vector not in the excluded set."""
    excluded = set(exclude)
    keep = [i for i, doc_id in enumerate(vector_ids) if doc_id not in excluded]
    if not keep:
        return []
    X = np.asarray(X, dtype=np.float64)
    probs = positive_probability(annotator.model, X[keep])
    return [
        PredictionRecord(vector_ids[i], float(p), annotator.model_version)
        for i, p in zip(keep, probs)
    ]


def save_predictions(predictions: list[PredictionRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for rec in predictions:
            handle.write(json.dumps(rec.__dict__, ensure_ascii=False) + "\n")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            out.append(PredictionRecord(**json.loads(line)))
    return out


def select_posthoc_sample(
    predictions: list[PredictionRecord],
    n_low: int = 250,
    n_high: int = 250,
    threshold: float = 0.5,
    seed: int = 0,
) -> list[str]:
    """n_low ids with probability below the threshold and n_high at or above
    it, drawn uniformly without replacement; boundary cases go high."""
    low = sorted(r.doc_id for r in predictions if r.probability < threshold)
    high = sorted(r.doc_id for r in predictions if r.probability >= threshold)
    if len(low) < n_low:
        raise AnnotateError(f"low side has {len(low)} cases, {n_low} requested")
    if len(high) < n_high:
        raise AnnotateError(f"high side has {len(high)} cases, {n_high} requested")
    rng = random.Random(seed)
    return rng.sample(low, n_low) + rng.sample(high, n_high)


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationConfig:
    n_bins: int = 9
    z: float = 1.96

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise AnnotateError("n_bins must be >= 2")


@dataclass(frozen=True)
class CalibrationBin:
    index: int
    low: float
    high: float
    center: float
    n: int
    successes: int
    observed_rate: float | None
    wilson_low: float | None
    wilson_high: float | None
    mean_predicted: float | None


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[CalibrationBin, ...]
    n_scored: int
    z: float


def calibration_report(
    predictions: list[PredictionRecord],
    human_labels: dict[str, int],
    config: CalibrationConfig = CalibrationConfig(),
) -> CalibrationReport:
    """Equal-width bins over [0, 1]; per bin the observed positive rate with
    its Wilson interval and the mean predicted probability. Empty bins are
    kept with n=0 and a null interval."""
    missing = sorted(r.doc_id for r in predictions if r.doc_id not in human_labels)
    if missing:
        shown = ", ".join(missing[:5])
        raise AnnotateError(f"{len(missing)} predictions lack a human label: {shown}")
    per_bin: dict[int, list[tuple[float, int]]] = {i: [] for i in range(config.n_bins)}
    for rec in predictions:
        index = min(int(rec.probability * config.n_bins), config.n_bins - 1)
        per_bin[index].append((rec.probability, human_labels[rec.doc_id]))
    bins = []
    for index in range(config.n_bins):
        low = index / config.n_bins
        high = (index + 1) / config.n_bins
        members = per_bin[index]
        if not members:
            bins.append(
                CalibrationBin(index, low, high, (low + high) / 2, 0, 0, None, None, None, None)
            )
            continue
        successes = sum(label for _, label in members)
        interval = wilson_interval(successes, len(members), config.z)
        bins.append(
            CalibrationBin(
                index=index,
                low=low,
                high=high,
                center=(low + high) / 2,
                n=len(members),
                successes=successes,
                observed_rate=successes / len(members),
                wilson_low=interval.lower,
                wilson_high=interval.upper,
                mean_predicted=float(np.mean([p for p, _ in members])),
            )
        )
    return CalibrationReport(bins=tuple(bins), n_scored=len(predictions), z=config.z)


PLOT_COLUMNS = ("bin_center", "observed_rate", "ci_low", "ci_high", "n")


def emit_calibration_plot_data(report: CalibrationReport) -> list[dict]:
    """Occupied bins only, ascending by center, ready for any plotting tool."""
    rows = []
    for b in report.bins:
        if b.n == 0:
            continue
        rows.append(
            {
                "bin_center": b.center,
                "observed_rate": b.observed_rate,
                "ci_low": b.wilson_low,
                "ci_high": b.wilson_high,
                "n": b.n,
            }
        )
    return rows


def plot_data_to_csv(rows: list[dict]) -> str:
    lines = [",".join(PLOT_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in PLOT_COLUMNS))
    return "\n".join(lines) + "\n"
