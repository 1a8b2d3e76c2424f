"""Regularized hinge-loss linear SVM: objective, subgradient and training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hinge_qp
from .dataset import Dataset
from .linear_model import LinearModel


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    max_epochs: int = 300
    tol: float = 1e-7
    seed: int = 0
    fit_intercept: bool = True
    solver: str = "qp"

    def __post_init__(self):
        if self.solver not in ("qp", "subgradient"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def _arrays(train: Dataset, dim: int):
    X = train.X
    if X.shape[1] < dim:
        X = np.hstack([X, np.zeros((len(X), dim - X.shape[1]))])
    return X, train.y


def hinge_objective(w, b, X, y, C) -> float:
    margins = 1.0 - y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.sum(np.maximum(margins, 0.0)))


def svm_objective(model: LinearModel, train: Dataset, C: float) -> float:
    """``0.5*||w||^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))``; b is not penalized."""
    if len(train) == 0:
        return 0.5 * float(model.w @ model.w)
    X, y = _arrays(train, model.dim)
    return hinge_objective(model.w, model.b, X, y, C)


def svm_subgradient(model: LinearModel, train: Dataset, C: float) -> np.ndarray:
    """A subgradient over ``(w, b)``; margins exactly at 1 count as loss-active."""
    g = np.append(model.w, 0.0)
    if len(train) == 0:
        return g
    X, y = _arrays(train, model.dim)
    active = 1.0 - y * (X @ model.w + model.b) >= 0.0
    g[:-1] -= C * (y[active] @ X[active])
    g[-1] -= C * float(np.sum(y[active]))
    return g


def train_svm(train: Dataset, config: SvmConfig = SvmConfig()) -> tuple[LinearModel, float]:
    """Minimize :func:`svm_objective`; returns ``(model, objective)``.

    ``solver="qp"`` solves the problem exactly (see :mod:`ttk.hinge_qp`).
    ``solver="subgradient"`` runs the seeded stochastic subgradient method,
    which is accurate for C around 1 but slow to settle for large C.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    X, y = _arrays(train, train.dim)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    if config.solver == "qp":
        n = len(y)
        res = hinge_qp.solve(X, y, np.ones(n), np.full(n, config.C), config.fit_intercept)
        model = LinearModel(res.w, res.b)
        return model, hinge_objective(model.w, model.b, X, y, config.C)
    return _subgradient_descent(X, y, config)


def _subgradient_descent(X, y, config: SvmConfig) -> tuple[LinearModel, float]:
    # One step per instance in a seeded order, step 1/(1 + t/n). After each
    # epoch the current iterate and the epoch average are scored and the best
    # point seen is kept; stop once the epoch-average objective settles.
    n, d = X.shape
    C = config.C
    rng = np.random.default_rng(config.seed)

    w = np.zeros(d)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = hinge_objective(w, b, X, y, C)
    prev_avg_obj = None
    t = 0
    rows = [X[i] for i in range(n)]
    for _ in range(config.max_epochs):
        sum_w = np.zeros(d)
        sum_b = 0.0
        for i in rng.permutation(n):
            eta = 1.0 / (1.0 + t / n)
            xi, yi = rows[i], y[i]
            w *= 1.0 - eta / n
            if 1.0 - yi * (float(xi @ w) + b) >= 0.0:
                w += (eta * C * yi) * xi
                if config.fit_intercept:
                    b += eta * C * yi
            sum_w += w
            sum_b += b
            t += 1
        avg_w, avg_b = sum_w / n, sum_b / n
        avg_obj = hinge_objective(avg_w, avg_b, X, y, C)
        cur_obj = hinge_objective(w, b, X, y, C)
        if avg_obj < best_obj:
            best_obj, best_w, best_b = avg_obj, avg_w.copy(), avg_b
        if cur_obj < best_obj:
            best_obj, best_w, best_b = cur_obj, w.copy(), b
        if prev_avg_obj is not None and abs(prev_avg_obj - avg_obj) <= config.tol * max(1.0, abs(avg_obj)):
            break
        prev_avg_obj = avg_obj
    return LinearModel(best_w, best_b), best_obj
