"""Label store semantics, annotator training, post-hoc sampling, calibration."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textveil.annotate import (
    PLOT_COLUMNS,
    AnnotateError,
    CalibrationConfig,
    LabelRecord,
    LabelStore,
    PredictionRecord,
    calibration_report,
    effective_labels,
    emit_calibration_plot_data,
    load_predictions,
    now_timestamp,
    plot_data_to_csv,
    predict_corpus,
    save_predictions,
    select_posthoc_sample,
    train_on_labels,
)
from textveil.evaluate import EvalError, EvalProtocolConfig
from textveil.metrics import wilson_interval

T0 = "2024-01-01T00:00:00+00:00"
T1 = "2024-01-02T00:00:00+00:00"
T2 = "2024-01-03T00:00:00+00:00"


def rec(doc_id="doc-0", label=1, annotator="ann-a", timestamp=T0, status="single"):
    return LabelRecord(doc_id=doc_id, label=label, annotator=annotator, timestamp=timestamp, status=status)


def training_vectors(n_pos=20, n_neg=20, n_extra=10, d=8, seed=0):
    rng = np.random.default_rng(seed)
    total = n_pos + n_neg + n_extra
    X = rng.standard_normal((total, d))
    X[:n_pos] += 2.0
    ids = [f"doc-{i}" for i in range(total)]
    labels = {ids[i]: 1 for i in range(n_pos)}
    labels.update({ids[n_pos + i]: 0 for i in range(n_neg)})
    return labels, ids, X


# -- label records and effective view ---------------------------------------

def test_label_record_validation():
    with pytest.raises(AnnotateError, match="0 or 1"):
        rec(label=2)
    with pytest.raises(AnnotateError, match="status"):
        rec(status="draft")
    with pytest.raises(ValueError):
        rec(timestamp="yesterday")


def test_now_timestamp_parses():
    LabelRecord(doc_id="d", label=0, annotator="a", timestamp=now_timestamp())


def test_consensus_beats_later_single():
    records = [
        rec(label=0, timestamp=T0, status="consensus"),
        rec(label=1, timestamp=T2, status="single"),
    ]
    assert effective_labels(records) == {"doc-0": 0}


def test_later_timestamp_wins_within_status():
    records = [rec(label=0, timestamp=T1), rec(label=1, timestamp=T0)]
    assert effective_labels(records) == {"doc-0": 0}


def test_input_order_breaks_exact_ties():
    records = [rec(label=0, timestamp=T0), rec(label=1, timestamp=T0)]
    assert effective_labels(records) == {"doc-0": 1}


def test_effective_labels_per_document():
    records = [
        rec(doc_id="a", label=1),
        rec(doc_id="b", label=0, timestamp=T1),
        rec(doc_id="a", label=0, timestamp=T2),
    ]
    assert effective_labels(records) == {"a": 0, "b": 0}


def test_label_store_appends_and_reloads(tmp_path):
    path = tmp_path / "labels.jsonl"
    store = LabelStore(path)
    assert len(store) == 0
    store.add(rec(doc_id="a", label=1))
    store.add(rec(doc_id="a", label=0, timestamp=T1))
    store.add(rec(doc_id="b", label=1, status="consensus"))

    reopened = LabelStore(path)
    assert len(reopened) == 3
    assert reopened.records() == store.records()
    assert reopened.effective() == {"a": 0, "b": 1}
    # the file keeps full history, one JSON object per line
    lines = path.read_text("utf-8").splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["doc_id"] == "a"


# -- training on labels -------------------------------------------------------

def test_train_on_labels_end_to_end():
    labels, ids, X = training_vectors()
    annotator = train_on_labels(labels, ids, X, EvalProtocolConfig())
    assert annotator.n_labels == 40
    assert annotator.prevalence == pytest.approx(0.5)
    assert annotator.cv_metric == "pr_auc"
    assert annotator.chosen_c in EvalProtocolConfig().c_grid
    assert annotator.cv_mean == pytest.approx(float(np.mean(annotator.cv_table[annotator.chosen_c])))
    assert len(annotator.model_version) == 16
    int(annotator.model_version, 16)


def test_model_version_tracks_inputs():
    labels, ids, X = training_vectors()
    base = train_on_labels(labels, ids, X, EvalProtocolConfig())
    again = train_on_labels(labels, ids, X, EvalProtocolConfig())
    assert base.model_version == again.model_version

    flipped = dict(labels)
    flipped["doc-0"] = 0
    assert train_on_labels(flipped, ids, X, EvalProtocolConfig()).model_version != base.model_version
    reseeded = train_on_labels(labels, ids, X, EvalProtocolConfig(seed=1))
    assert reseeded.model_version != base.model_version


def test_train_missing_vectors_lists_first_five():
    labels, ids, X = training_vectors()
    for i in range(6):
        labels[f"ghost-{i}"] = i % 2
    with pytest.raises(AnnotateError, match="6 labeled") as excinfo:
        train_on_labels(labels, ids, X, EvalProtocolConfig())
    message = str(excinfo.value)
    assert "ghost-0" in message and "ghost-4" in message and "ghost-5" not in message


def test_train_needs_two_of_each_class():
    labels, ids, X = training_vectors()
    lopsided = {d: 1 for d in labels}
    lopsided["doc-20"] = 0
    with pytest.raises(EvalError, match="class 0"):
        train_on_labels(lopsided, ids, X, EvalProtocolConfig())


# -- prediction ----------------------------------------------------------------

def test_predict_corpus_excludes_labeled():
    labels, ids, X = training_vectors(n_extra=10)
    annotator = train_on_labels(labels, ids, X, EvalProtocolConfig())
    predictions = predict_corpus(annotator, ids, X, exclude=labels)
    assert len(predictions) == 10
    predicted_ids = {p.doc_id for p in predictions}
    assert predicted_ids.isdisjoint(labels)
    assert all(0.0 <= p.probability <= 1.0 for p in predictions)
    assert all(p.model_version == annotator.model_version for p in predictions)
    assert predict_corpus(annotator, ids, X, exclude=ids) == []


def test_prediction_record_bounds():
    with pytest.raises(AnnotateError, match="outside"):
        PredictionRecord(doc_id="d", probability=1.5, model_version="v")
    with pytest.raises(AnnotateError, match="outside"):
        PredictionRecord(doc_id="d", probability=float("nan"), model_version="v")


def test_predictions_round_trip(tmp_path):
    predictions = [
        PredictionRecord("doc-1", 0.25, "abc"),
        PredictionRecord("doc-0", 0.7519384219, "abc"),
    ]
    path = tmp_path / "preds.jsonl"
    save_predictions(predictions, path)
    assert load_predictions(path) == predictions


# -- post-hoc sampling ----------------------------------------------------------

def preds(probabilities, version="v"):
    return [PredictionRecord(f"doc-{i}", p, version) for i, p in enumerate(probabilities)]


def test_posthoc_sample_sizes_and_sides():
    rng = np.random.default_rng(0)
    predictions = preds(list(rng.uniform(0.0, 0.49, 40)) + list(rng.uniform(0.5, 1.0, 40)))
    by_id = {p.doc_id: p.probability for p in predictions}
    sample = select_posthoc_sample(predictions, n_low=10, n_high=15, threshold=0.5, seed=1)
    assert len(sample) == 25
    assert len(set(sample)) == 25
    assert sum(1 for d in sample if by_id[d] < 0.5) == 10
    assert sum(1 for d in sample if by_id[d] >= 0.5) == 15


def test_posthoc_boundary_goes_high():
    predictions = preds([0.1, 0.2, 0.3, 0.5, 0.6, 0.9])
    sample = select_posthoc_sample(predictions, n_low=3, n_high=3, threshold=0.5, seed=0)
    assert set(sample) == {f"doc-{i}" for i in range(6)}
    with pytest.raises(AnnotateError, match="high side has 3 cases, 4 requested"):
        select_posthoc_sample(predictions, n_low=2, n_high=4, threshold=0.5, seed=0)
    with pytest.raises(AnnotateError, match="low side"):
        select_posthoc_sample(predictions, n_low=4, n_high=2, threshold=0.5, seed=0)


def test_posthoc_deterministic_and_order_free():
    rng = np.random.default_rng(2)
    predictions = preds(list(rng.uniform(0, 1, 200)))
    first = select_posthoc_sample(predictions, n_low=20, n_high=20, seed=7)
    second = select_posthoc_sample(predictions, n_low=20, n_high=20, seed=7)
    shuffled = list(predictions)
    rng.shuffle(shuffled)
    third = select_posthoc_sample(shuffled, n_low=20, n_high=20, seed=7)
    assert first == second == third
    other_seed = select_posthoc_sample(predictions, n_low=20, n_high=20, seed=8)
    assert first != other_seed


# -- calibration ------------------------------------------------------------------

def test_calibration_config_guard():
    with pytest.raises(AnnotateError, match="n_bins"):
        CalibrationConfig(n_bins=1)


def test_calibration_report_small_fixture():
    # bin 0 gets 0.05/0.08, bin 4 gets three around 0.5, bin 8 gets 1.0
    probabilities = [0.05, 0.08, 0.46, 0.50, 0.55, 1.0]
    labels_list = [0, 1, 0, 1, 1, 1]
    predictions = preds(probabilities)
    labels = {p.doc_id: label for p, label in zip(predictions, labels_list)}
    report = calibration_report(predictions, labels)

    assert report.n_scored == 6
    assert report.z == 1.96
    assert len(report.bins) == 9
    assert [b.index for b in report.bins] == list(range(9))

    first = report.bins[0]
    assert (first.n, first.successes) == (2, 1)
    assert first.observed_rate == pytest.approx(0.5)
    expected = wilson_interval(1, 2, 1.96)
    assert first.wilson_low == pytest.approx(expected.lower)
    assert first.wilson_high == pytest.approx(expected.upper)
    assert first.mean_predicted == pytest.approx(0.065)

    middle = report.bins[4]
    assert (middle.n, middle.successes) == (3, 2)
    assert middle.low == pytest.approx(4 / 9) and middle.high == pytest.approx(5 / 9)
    assert middle.center == pytest.approx(0.5)

    last = report.bins[8]
    assert (last.n, last.successes) == (1, 1)  # probability 1.0 lands in the top bin

    for index in (1, 2, 3, 5, 6, 7):
        b = report.bins[index]
        assert b.n == 0 and b.successes == 0
        assert b.observed_rate is None and b.wilson_low is None and b.mean_predicted is None


def test_calibration_single_bin_bar_digits():
    # 50 of 100 in one bin reproduces the published interval at four decimals
    probabilities = [0.5] * 100
    predictions = preds(probabilities)
    labels = {p.doc_id: (1 if i < 50 else 0) for i, p in enumerate(predictions)}
    report = calibration_report(predictions, labels)
    bar = report.bins[4]
    assert bar.n == 100 and bar.successes == 50
    assert round(bar.wilson_low, 4) == 0.4038
    assert round(bar.wilson_high, 4) == 0.5962


def test_calibration_missing_labels_error():
    predictions = preds([0.1] * 7)
    labels = {"doc-0": 1}
    with pytest.raises(AnnotateError, match="6 predictions") as excinfo:
        calibration_report(predictions, labels)
    message = str(excinfo.value)
    assert "doc-1" in message and "doc-5" in message and "doc-6" not in message


def test_plot_data_skips_empty_bins():
    predictions = preds([0.05, 0.95, 0.93])
    labels = {p.doc_id: 1 for p in predictions}
    rows = emit_calibration_plot_data(calibration_report(predictions, labels))
    assert len(rows) == 2
    assert [row["n"] for row in rows] == [1, 2]
    centers = [row["bin_center"] for row in rows]
    assert centers == sorted(centers)
    assert all(tuple(row) == PLOT_COLUMNS for row in rows)


def test_plot_csv_shape():
    predictions = preds([0.5] * 4)
    labels = {p.doc_id: 1 for p in predictions}
    rows = emit_calibration_plot_data(calibration_report(predictions, labels))
    text = plot_data_to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(PLOT_COLUMNS)
    assert len(lines) == 2
    assert text.endswith("\n")
    assert float(lines[1].split(",")[0]) == pytest.approx(0.5)


# -- properties ---------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 1), st.integers(0, 1_000_000), st.booleans()),
        min_size=1,
        max_size=12,
    )
)
def test_effective_label_matches_max_key_oracle(raw):
    records = []
    for label, offset, consensus in raw:
        # timestamps vary by whole seconds within one day
        stamp = f"2024-01-01T{offset // 3600 % 24:02d}:{offset // 60 % 60:02d}:{offset % 60:02d}+00:00"
        records.append(
            LabelRecord(
                doc_id="doc-0",
                label=label,
                annotator="ann",
                timestamp=stamp,
                status="consensus" if consensus else "single",
            )
        )
    winner = max(
        enumerate(records),
        key=lambda pair: (pair[1].status == "consensus", pair[1].timestamp, pair[0]),
    )[1]
    assert effective_labels(records) == {"doc-0": winner.label}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=60), st.integers(0, 5))
def test_calibration_bins_partition_predictions(probabilities, seed):
    rng = np.random.default_rng(seed)
    predictions = preds(probabilities)
    labels = {p.doc_id: int(rng.integers(0, 2)) for p in predictions}
    report = calibration_report(predictions, labels)
    assert sum(b.n for b in report.bins) == report.n_scored == len(predictions)
    for b in report.bins:
        if b.n:
            assert b.wilson_low is not None and 0.0 <= b.wilson_low <= b.wilson_high <= 1.0
            assert b.low <= b.mean_predicted <= b.high or b.index == 8
