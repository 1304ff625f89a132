"""Information-retention evaluation on embeddings.

Labels come from metadata fields or keyword presence in the original texts.
An L2-regularized logistic regression (binary or multinomial softmax) is
trained by minimizing 0.5·||w||² + C·Σ log-loss with an analytic gradient;
the regularization strength is chosen by stratified cross-validated grid
search, and final numbers are means with t-based 95% intervals over repeated
stratified 75/25 splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logsumexp, softmax
from scipy.stats import t as t_dist

from .corpus import Document
from .metrics import MetricError, accuracy, macro_auc, pr_auc, roc_auc

CONVENTIONS = (
    "objective 0.5*||w||^2 + C*sum(log-loss), intercept unpenalized",
    "multiclass objective is multinomial softmax",
    "pr_auc is average precision, stable tie order",
    "splits and folds are stratified by class",
    "confidence intervals are t-based over repeats",
)


class EvalError(ValueError):
    pass


class StratificationError(EvalError):
    pass


@dataclass(frozen=True)
class EvalProtocolConfig:
    c_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    cv_folds: int = 5
    repeats: int = 10
    train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise EvalError("c_grid must be non-empty positive values")
        if list(self.c_grid) != sorted(self.c_grid):
            raise EvalError("c_grid must be ascending")
        if not (0 < self.train_fraction < 1):
            raise EvalError("train_fraction must be in (0, 1)")
        if self.cv_folds < 2:
            raise EvalError("cv_folds must be >= 2")
        if self.repeats < 1:
            raise EvalError("repeats must be >= 1")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    label_source: str  # metadata_field | keyword_list
    kind: str  # binary | multiclass
    field_name: str | None = None
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.label_source == "keyword_list":
            if self.kind != "binary":
                raise EvalError(f"keyword task {self.name!r} must be binary")
            if not self.keywords:
                raise EvalError(f"keyword task {self.name!r} needs keywords")
        elif self.label_source == "metadata_field":
            if not self.field_name:
                raise EvalError(f"metadata task {self.name!r} needs field_name")
        else:
            raise EvalError(f"unknown label_source {self.label_source!r}")


def build_labels(corpus: list[Document], task: TaskSpec) -> list:
    """Metadata tasks copy the field; keyword tasks flag case-insensitive
    presence of any keyword in the original text."""
    if task.label_source == "metadata_field":
        labels = []
        for doc in corpus:
            if task.field_name == "decision_year":
                labels.append(doc.metadata.decision_date.year)
            elif hasattr(doc.metadata, task.field_name):
                labels.append(getattr(doc.metadata, task.field_name))
            else:
                raise EvalError(f"metadata field {task.field_name!r} does not exist")
        return labels
    keywords = [k.casefold() for k in task.keywords]
    return [
        1 if any(k in doc.raw_text.casefold() for k in keywords) else 0 for doc in corpus
    ]


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray  # (1, d) binary, (k, d) multinomial
    intercepts: np.ndarray
    classes: tuple
    c_value: float
    objective: str  # binary_logistic | multinomial
    converged: bool
    n_iter: int
    grad_norm: float
    loss_history: tuple[float, ...] | None = None


def binary_objective(theta: np.ndarray, X: np.ndarray, signs: np.ndarray, c_value: float):
    """Value and gradient of the penalized binary log-loss; signs are ±1."""
    w, b = theta[:-1], theta[-1]
    margins = -signs * (X @ w + b)
    value = 0.5 * float(w @ w) + c_value * float(np.logaddexp(0.0, margins).sum())
    coef = -signs * expit(margins)
    grad_w = w + c_value * (X.T @ coef)
    grad_b = c_value * float(coef.sum())
    return value, np.append(grad_w, grad_b)


def multinomial_objective(theta: np.ndarray, X: np.ndarray, y_idx: np.ndarray, c_value: float, k: int):
    """Value and gradient of the penalized multinomial log-loss."""
    n, d = X.shape
    W = theta[: k * d].reshape(k, d)
    b = theta[k * d :]
    Z = X @ W.T + b
    lse = logsumexp(Z, axis=1)
    value = 0.5 * float(np.sum(W * W)) + c_value * float((lse - Z[np.arange(n), y_idx]).sum())
    P = softmax(Z, axis=1)
    P[np.arange(n), y_idx] -= 1.0
    grad_W = W + c_value * (P.T @ X)
    grad_b = c_value * P.sum(axis=0)
    return value, np.concatenate([grad_W.ravel(), grad_b])


def train_logreg(
    X,
    y,
    c_value: float,
    objective: str | None = None,
    tol: float = 1e-6,
    max_iter: int = 1000,
    record_history: bool = False,
) -> LogRegModel:
    """Fit by L-BFGS-B on the analytic objective from a zero start."""
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    if c_value <= 0:
        raise EvalError("c_value must be positive")
    if X.ndim != 2 or X.shape[0] != len(y):
        raise EvalError("X rows must align with y")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise EvalError(f"training requires at least two classes, got {classes!r}")
    if objective is None:
        objective = "binary_logistic" if len(classes) == 2 else "multinomial"
    if objective == "binary_logistic" and len(classes) != 2:
        raise EvalError("binary objective requires exactly two classes")

    d = X.shape[1]
    if objective == "binary_logistic":
        signs = np.where(np.asarray(y, dtype=object) == classes[1], 1.0, -1.0).astype(np.float64)
        fun, args = binary_objective, (X, signs, c_value)
        theta0 = np.zeros(d + 1)
    else:
        index = {cls: i for i, cls in enumerate(classes)}
        y_idx = np.array([index[v] for v in y])
        fun, args = multinomial_objective, (X, y_idx, c_value, len(classes))
        theta0 = np.zeros(len(classes) * (d + 1))

    history: list[float] = []
    callback = None
    if record_history:
        history.append(fun(theta0, *args)[0])
        callback = lambda xk: history.append(fun(xk, *args)[0])

    result = minimize(
        fun,
        theta0,
        args=args,
        method="L-BFGS-B",
        jac=True,
        callback=callback,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-12},
    )
    grad_norm = float(np.max(np.abs(fun(result.x, *args)[1])))

    if objective == "binary_logistic":
        weights = result.x[:-1].reshape(1, d)
        intercepts = result.x[-1:].copy()
    else:
        k = len(classes)
        weights = result.x[: k * d].reshape(k, d).copy()
        intercepts = result.x[k * d :].copy()
    return LogRegModel(
        weights=weights,
        intercepts=intercepts,
        classes=classes,
        c_value=c_value,
        objective=objective,
        converged=bool(grad_norm <= tol or result.success),
        n_iter=int(result.nit),
        grad_norm=grad_norm,
        loss_history=tuple(history) if record_history else None,
    )


def predict_proba(model: LogRegModel, X) -> np.ndarray:
    """Class-probability matrix with one column per model class."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[1]:
        raise EvalError(
            f"dimension mismatch: X has {X.shape[1] if X.ndim == 2 else '?'} columns, "
            f"model expects {model.weights.shape[1]}"
        )
    if model.objective == "binary_logistic":
        positive = expit(X @ model.weights[0] + model.intercepts[0])
        return np.column_stack([1.0 - positive, positive])
    return softmax(X @ model.weights.T + model.intercepts, axis=1)


def positive_probability(model: LogRegModel, X) -> np.ndarray:
    if len(model.classes) != 2:
        raise EvalError("positive_probability requires a binary model")
    return predict_proba(model, X)[:, 1]


def predict_classes(model: LogRegModel, X) -> list:
    proba = predict_proba(model, X)
    return [model.classes[i] for i in np.argmax(proba, axis=1)]


# ---------------------------------------------------------------------------
# Protocol: folds, splits, grid search, repeated evaluation
# ---------------------------------------------------------------------------

def stratified_folds(y, n_folds: int, seed: int) -> list[np.ndarray]:
    """Validation-index arrays; every class appears in every fold."""
    y = list(y)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in sorted(set(y)):
        members = np.array([i for i, v in enumerate(y) if v == cls])
        if len(members) < n_folds:
            raise StratificationError(
                f"class {cls!r} has {len(members)} members, fewer than {n_folds} folds"
            )
        rng.shuffle(members)
        for pos, idx in enumerate(members):
            folds[pos % n_folds].append(int(idx))
    return [np.array(sorted(fold)) for fold in folds]


def stratified_split(y, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split keeping at least one member on each side."""
    y = list(y)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for cls in sorted(set(y)):
        members = np.array([i for i, v in enumerate(y) if v == cls])
        if len(members) < 2:
            raise StratificationError(f"class {cls!r} has a single member; cannot split")
        rng.shuffle(members)
        n_train = min(max(int(round(train_fraction * len(members))), 1), len(members) - 1)
        train.extend(int(i) for i in members[:n_train])
        test.extend(int(i) for i in members[n_train:])
    return np.array(sorted(train)), np.array(sorted(test))


def score_model(model: LogRegModel, X, y, metric: str) -> float:
    if metric == "accuracy":
        return accuracy(predict_classes(model, X), list(y))
    if metric == "macro_auc":
        return macro_auc(predict_proba(model, X), list(y), classes=list(model.classes))
    if metric in ("roc_auc", "pr_auc"):
        if len(model.classes) != 2:
            raise MetricError(f"{metric} requires a binary task")
        scores = positive_probability(model, X)
        binary = np.array([1 if v == model.classes[1] else 0 for v in y])
        return roc_auc(scores, binary) if metric == "roc_auc" else pr_auc(scores, binary)
    raise MetricError(f"unknown metric {metric!r}")


def default_selection_metric(y) -> str:
    return "pr_auc" if len(set(y)) == 2 else "macro_auc"


@dataclass(frozen=True)
class GridSearchResult:
    chosen_c: float
    metric: str
    cv_table: dict  # c_value -> tuple of fold scores


def grid_search_c(X, y, config: EvalProtocolConfig, metric: str | None = None) -> GridSearchResult:
    """Mean validation score per grid point on shared stratified folds;
    ties go to the smaller C."""
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    metric = metric or default_selection_metric(y)
    folds = stratified_folds(y, config.cv_folds, config.seed)
    all_idx = np.arange(len(y))
    table: dict[float, tuple[float, ...]] = {}
    best_c, best_mean = None, -np.inf
    for c_value in config.c_grid:
        scores = []
        for fold in folds:
            train_idx = np.setdiff1d(all_idx, fold)
            model = train_logreg(X[train_idx], [y[i] for i in train_idx], c_value)
            scores.append(score_model(model, X[fold], [y[i] for i in fold], metric))
        table[c_value] = tuple(scores)
        mean = float(np.mean(scores))
        if mean > best_mean:
            best_c, best_mean = c_value, mean
    return GridSearchResult(chosen_c=best_c, metric=metric, cv_table=table)


def t_multiplier(repeats: int, level: float = 0.95) -> float:
    if repeats < 2:
        return 0.0
    return float(t_dist.ppf((1 + level) / 2, repeats - 1))


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci_low: float
    ci_high: float
    per_repeat: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    task: str
    embedding_source: str
    chosen_c: float
    metrics: dict  # name -> MetricSummary
    prevalence: float | None
    config: dict
    conventions: tuple[str, ...] = CONVENTIONS


def repeated_split_eval(
    X,
    y,
    config: EvalProtocolConfig,
    metrics: tuple[str, ...] = ("accuracy", "roc_auc", "pr_auc"),
    c_value: float | None = None,
    task: str = "",
    embedding_source: str = "",
) -> EvalReport:
    """Train/evaluate over repeated stratified splits at a fixed C.

    When no C is supplied it is chosen first by grid search on the full data.
    Split i uses seed config.seed + i, so reports are reproducible bit for bit.
    """
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    if c_value is None:
        c_value = grid_search_c(X, y, config).chosen_c
    values: dict[str, list[float]] = {m: [] for m in metrics}
    for i in range(config.repeats):
        train_idx, test_idx = stratified_split(y, config.train_fraction, config.seed + i)
        model = train_logreg(X[train_idx], [y[j] for j in train_idx], c_value)
        for metric in metrics:
            values[metric].append(score_model(model, X[test_idx], [y[j] for j in test_idx], metric))
    multiplier = t_multiplier(config.repeats)
    summaries = {}
    for metric, vals in values.items():
        mean = float(np.mean(vals))
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        half = multiplier * sd / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        summaries[metric] = MetricSummary(mean, mean - half, mean + half, tuple(vals))
    binary = len(set(y)) == 2
    prevalence = float(np.mean([1 if v == sorted(set(y))[1] else 0 for v in y])) if binary else None
    return EvalReport(
        task=task,
        embedding_source=embedding_source,
        chosen_c=float(c_value),
        metrics=summaries,
        prevalence=prevalence,
        config={
            "c_grid": list(config.c_grid),
            "cv_folds": config.cv_folds,
            "repeats": config.repeats,
            "train_fraction": config.train_fraction,
            "seed": config.seed,
        },
    )


def compare_sources(
    task: str,
    y,
    original: tuple[list[str], np.ndarray],
    summary: tuple[list[str], np.ndarray],
    config: EvalProtocolConfig,
    metrics: tuple[str, ...] = ("accuracy", "roc_auc", "pr_auc"),
) -> dict:
    """Run the full protocol per embedding side; same seeds, so both sides
    see identical splits. Grid search runs independently per side."""
    orig_ids, orig_X = original
    summ_ids, summ_X = summary
    if set(orig_ids) != set(summ_ids):
        only_orig = sorted(set(orig_ids) - set(summ_ids))[:3]
        only_summ = sorted(set(summ_ids) - set(orig_ids))[:3]
        raise EvalError(
            f"doc_id sets differ between sources (only original: {only_orig}, only summary: {only_summ})"
        )
    order = sorted(orig_ids)
    y_list = list(y)
    if len(y_list) != len(order):
        raise EvalError("labels must align with doc_ids")
    orig_lookup = {doc_id: i for i, doc_id in enumerate(orig_ids)}
    summ_lookup = {doc_id: i for i, doc_id in enumerate(summ_ids)}
    orig_matrix = np.asarray(orig_X)[[orig_lookup[d] for d in order]]
    summ_matrix = np.asarray(summ_X)[[summ_lookup[d] for d in order]]
    return {
        "original": repeated_split_eval(
            orig_matrix, y_list, config, metrics, task=task, embedding_source="original_text"
        ),
        "summary": repeated_split_eval(
            summ_matrix, y_list, config, metrics, task=task, embedding_source="redacted_summary"
        ),
    }
