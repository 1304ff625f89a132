"""Statistical kernel: length statistics, ranking metrics, Wilson intervals.

Everything here is written directly against the defining formulas so each
function has an exact brute-force oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class LengthStats:
    unit: str
    mean: float
    cv: float
    n: int


def length_stats(texts: list[str], unit: str) -> LengthStats:
    """Mean and coefficient of variation of text lengths.

    Characters count Unicode scalar values; words are maximal runs between
    whitespace. CV uses the sample standard deviation (n-1); a single text or
    an all-zero corpus has CV 0 by convention.
    """
    if not texts:
        raise MetricError("length_stats requires at least one text")
    if unit == "characters":
        lengths = np.array([len(t) for t in texts], dtype=np.float64)
    elif unit == "words":
        lengths = np.array([len(t.split()) for t in texts], dtype=np.float64)
    else:
        raise MetricError(f"unknown unit {unit!r}")
    mean = float(lengths.mean())
    if len(lengths) < 2 or mean == 0.0:
        cv = 0.0
    else:
        cv = float(lengths.std(ddof=1) / mean)
    return LengthStats(unit=unit, mean=mean, cv=cv, n=len(texts))


def _midranks(scores: np.ndarray) -> np.ndarray:
    """Average rank (1-based) per element, ties sharing their midrank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: concordant pairs plus half the ties, over all pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError("scores and labels must be equal-length vectors")
    positives = labels == 1
    n_pos = int(positives.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0:
        raise MetricError("roc_auc needs at least one positive label")
    if n_neg == 0:
        raise MetricError("roc_auc needs at least one negative label")
    ranks = _midranks(scores)
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def macro_auc(scores, labels, classes=None) -> float:
    """Unweighted mean of one-vs-rest AUC; score column i belongs to class i."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = list(labels)
    if classes is None:
        classes = sorted(set(labels))
    if len(classes) < 2:
        raise MetricError("macro_auc needs at least two classes")
    if scores.ndim != 2 or scores.shape != (len(labels), len(classes)):
        raise MetricError(f"score matrix must be ({len(labels)}, {len(classes)})")
    present = set(labels)
    aucs = []
    for i, cls in enumerate(classes):
        if cls not in present:
            raise MetricError(f"class {cls!r} absent from labels")
        binary = np.array([1 if y == cls else 0 for y in labels])
        aucs.append(roc_auc(scores[:, i], binary))
    return float(np.mean(aucs))


def pr_auc(scores, labels) -> float:
    """Average precision over the descending-score ranking.

    Ties keep their input order (stable sort); precision at each positive's
    rank is accumulated with exact float summation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError("scores and labels must be equal-length vectors")
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise MetricError("pr_auc needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    ordered = labels[order] == 1
    cumulative = np.cumsum(ordered)
    ranks = np.arange(1, len(labels) + 1)
    precisions = cumulative[ordered] / ranks[ordered]
    return math.fsum(precisions.tolist()) / n_pos


def accuracy(predicted, actual) -> float:
    predicted, actual = list(predicted), list(actual)
    if len(predicted) != len(actual):
        raise MetricError(f"length mismatch: {len(predicted)} predictions, {len(actual)} labels")
    if not actual:
        raise MetricError("accuracy requires at least one pair")
    return sum(p == a for p, a in zip(predicted, actual)) / len(actual)


@dataclass(frozen=True)
class BinomialInterval:
    successes: int
    trials: int
    z: float
    lower: float
    upper: float


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> BinomialInterval:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise MetricError("wilson_interval requires trials >= 1")
    if not (0 <= successes <= trials):
        raise MetricError("successes must lie in [0, trials]")
    p_hat = successes / trials
    n = trials
    denom = 1 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
    lower = max(0.0, center - half)
    upper = min(1.0, center + half)
    # at the boundaries the closed form is exactly p-hat +- z^2/2n scaled,
    # which collapses to 0 or 1; avoid losing that to rounding
    if successes == 0:
        lower = 0.0
    if successes == trials:
        upper = 1.0
    return BinomialInterval(successes, trials, z, lower, upper)
