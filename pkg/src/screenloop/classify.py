"""Relevance classifiers: multinomial naive Bayes (default), logistic
regression, and a linear SVM, all scoring records in [0, 1].

Training is deliberately boring: full-batch deterministic optimization with
a fixed iteration order, so fitting the same rows with the same spec is
bit-reproducible.  The SVM's "probability" is a monotone sigmoid of the
margin, used only for ranking and uncertainty distance; it is not a
calibrated probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.special import expit

from .errors import DimensionMismatch, NonFiniteLoss, SingleClassTraining

CLASSIFIER_KINDS = ("naive_bayes", "logistic_regression", "linear_svm")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "naive_bayes"
    smoothing_alpha: float = 1.0
    l2_lambda: float = 1e-3
    max_iterations: int = 2000
    learning_rate: float = 0.5
    tolerance: float = 1e-6
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.smoothing_alpha <= 0:
            raise ValueError("smoothing_alpha must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class Model:
    """Learned parameters; model_version is stamped by the engine."""

    kind: str
    n_features: int
    n_train: int
    model_version: int = 0
    # naive Bayes: index 0 = irrelevant, 1 = relevant
    log_priors: np.ndarray | None = None
    log_theta: np.ndarray | None = None
    # linear models
    weights: np.ndarray | None = None
    bias: float = 0.0


def _as_csr(rows) -> sparse.csr_matrix:
    if sparse.issparse(rows):
        return rows.tocsr()
    return sparse.csr_matrix(np.asarray(rows, dtype=np.float64))


def fit(rows, labels, spec: ClassifierSpec) -> Model:
    """Train on the (balanced) training multiset.

    Both classes must be present and the row and label counts must match.
    """
    spec.validate()
    X = _as_csr(rows)
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("row count and label count differ")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    if len(np.unique(y)) < 2:
        raise SingleClassTraining("training labels contain a single class")

    if spec.kind == "naive_bayes":
        return _fit_naive_bayes(X, y, spec)
    return _fit_linear(X, y, spec)


def _fit_naive_bayes(X: sparse.csr_matrix, y: np.ndarray, spec) -> Model:
    n, V = X.shape
    alpha = spec.smoothing_alpha
    log_priors = np.empty(2)
    log_theta = np.empty((2, V))
    for c in (0, 1):
        members = X[np.flatnonzero(y == c)]
        counts = np.asarray(members.sum(axis=0)).ravel()
        total = counts.sum()
        log_priors[c] = math.log(members.shape[0] / n)
        log_theta[c] = np.log(alpha + counts) - math.log(alpha * V + total)
    return Model(
        kind="naive_bayes",
        n_features=V,
        n_train=n,
        log_priors=log_priors,
        log_theta=log_theta,
    )


def _linear_loss_grad(kind, X, z, w, b, lam):
    """Mean loss + L2 penalty and its gradient.

    kind "logistic_regression": log(1 + exp(-z f)); "linear_svm":
    max(0, 1 - z f).  z is the +-1 label vector, f = Xw + b.  The bias is
    not regularized.
    """
    n = X.shape[0]
    f = X @ w + b
    zf = z * f
    if kind == "logistic_regression":
        loss = float(np.mean(np.logaddexp(0.0, -zf)))
        coeff = -z * expit(-zf)  # d loss_i / d f_i
    else:
        margin = 1.0 - zf
        loss = float(np.mean(np.maximum(0.0, margin)))
        coeff = np.where(margin > 0.0, -z, 0.0)
    grad_w = (X.T @ coeff) / n + lam * w
    grad_b = float(np.mean(coeff))
    loss += 0.5 * lam * float(w @ w)
    return loss, np.asarray(grad_w).ravel(), grad_b


def _fit_linear(X: sparse.csr_matrix, y: np.ndarray, spec) -> Model:
    n, d = X.shape
    z = np.where(y == 1, 1.0, -1.0)
    w = np.zeros(d)
    b = 0.0
    for t in range(1, spec.max_iterations + 1):
        loss, grad_w, grad_b = _linear_loss_grad(spec.kind, X, z, w, b, spec.l2_lambda)
        if not math.isfinite(loss):
            raise NonFiniteLoss("training diverged; lower the learning rate")
        if max(np.max(np.abs(grad_w), initial=0.0), abs(grad_b)) < spec.tolerance:
            break
        step = spec.learning_rate / math.sqrt(t)
        w -= step * grad_w
        b -= step * grad_b
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise NonFiniteLoss("training diverged; lower the learning rate")
    return Model(kind=spec.kind, n_features=d, n_train=n, weights=w, bias=b)


def predict_relevance(model: Model, matrix) -> np.ndarray:
    """Score every row in [0, 1]; higher means more likely relevant.

    Naive Bayes computes the posterior through the log domain (an all-zero
    row therefore scores exactly the class prior); linear models squash
    w.x + b with a sigmoid.
    """
    X = matrix.matrix if hasattr(matrix, "matrix") else _as_csr(matrix)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"matrix has {X.shape[1]} columns, model expects {model.n_features}"
        )
    if model.kind == "naive_bayes":
        joint = X @ model.log_theta.T  # (n, 2)
        joint = np.asarray(joint) + model.log_priors
        return expit(joint[:, 1] - joint[:, 0])
    return expit(np.asarray(X @ model.weights).ravel() + model.bias)


def stamp_version(model: Model, version: int) -> Model:
    return replace(model, model_version=version)
