"""Benchmark protocol: repeated stratified splits, CV choice of C, precision@k and t-tests."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dataset import Dataset, TransductiveProblem, _round_half_up, load_libsvm, random_split
from .exact import CapacityError, ExactLimits, solve_exact
from .linear_model import LinearModel, precision_at_k, scores
from .solver import TtkOptions, is_feasible, solve_fd, threshold_start, ttk_objective

METHODS = ("svm_threshold", "ttk_fd", "ttk_exact")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str = ""
    methods: tuple = ("svm_threshold", "ttk_fd")
    k_fraction: float = 0.05
    n_splits: int = 10
    c_grid: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)
    cv_repeats: int = 5
    cv_folds: int = 2
    seed: int = 0
    test_fraction: float = 0.5
    max_test: int = 25

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "c_grid", tuple(float(c) for c in self.c_grid))
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if not 0.0 < self.k_fraction < 1.0:
            raise ValueError("k_fraction must lie in (0, 1)")
        if self.n_splits < 1 or self.cv_repeats < 1 or self.cv_folds < 2:
            raise ValueError("need n_splits >= 1, cv_repeats >= 1, cv_folds >= 2")
        if not self.c_grid or any(not c > 0 for c in self.c_grid):
            raise ValueError("c_grid must be a nonempty list of positive values")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        obj = json.loads(text)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def k_for(n_test: int, k_fraction: float) -> int:
    return max(1, _round_half_up(k_fraction * n_test))


# ---------------------------------------------------------------------------
# statistics


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c if abs(1.0 + aa / c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c if abs(1.0 + aa / c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    verdict: str  # a_better, b_better or tie
    degenerate: bool = False


def paired_t_test(a, b, alpha: float = 0.05) -> TTestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be equal-length sequences")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n - 1, "tie")
        t = math.copysign(math.inf, mean)
        return TTestResult(t, 0.0, n - 1, "a_better" if mean > 0 else "b_better", degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = t_two_sided_p(t, n - 1)
    if p >= alpha:
        verdict = "tie"
    else:
        verdict = "a_better" if t > 0 else "b_better"
    return TTestResult(t, p, n - 1, verdict)


@dataclass(frozen=True)
class BoundaryStats:
    at_boundary: int
    fraction_positive: float


def boundary_stats(model: LinearModel, data: Union[Dataset, np.ndarray], delta: float) -> BoundaryStats:
    if not delta > 0:
        raise ValueError("delta must be positive")
    s = scores(model, data)
    return BoundaryStats(int(np.sum(np.abs(s) <= delta)), float(np.sum(s > 0)) / len(s))


# ---------------------------------------------------------------------------
# training one method on one split


@dataclass
class MethodRun:
    model: Optional[LinearModel]
    train_objective: Optional[float]


def fit_method(method: str, train: Dataset, test: Dataset, k: int, C: float, max_test: int = 25) -> MethodRun:
    """Train ``method`` transductively against ``test`` (labels ignored).

    Returns a run with ``model = None`` when ``ttk_exact`` refuses the size.
    """
    problem = TransductiveProblem(train, test.unlabeled(), k, C)
    if method == "svm_threshold":
        model = threshold_start(problem)
    elif method == "ttk_fd":
        model, _ = solve_fd(problem, threshold_start(problem), TtkOptions())
    elif method == "ttk_exact":
        try:
            model, _ = solve_exact(problem, ExactLimits(max_test=max_test))
        except CapacityError:
            return MethodRun(None, None)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not is_feasible(model, problem):
        raise RuntimeError(f"{method} returned a model selecting the wrong number of test instances")
    return MethodRun(model, ttk_objective(model, problem))


# ---------------------------------------------------------------------------
# cross-validation


def _stratified_folds(y: np.ndarray, n_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    folds = [[] for _ in range(n_folds)]
    offset = 0
    for label in (1.0, -1.0):
        idx = rng.permutation(np.flatnonzero(y == label))
        for pos, i in enumerate(idx):
            folds[(offset + pos) % n_folds].append(int(i))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def _usable(y: np.ndarray, folds) -> bool:
    for f in folds:
        rest = np.setdiff1d(np.arange(len(y)), f)
        if len(np.unique(y[f])) < 2 or len(np.unique(y[rest])) < 2:
            return False
    return True


def cross_validate_C(train: Dataset, config: ExperimentConfig, method: str = "svm_threshold",
                     seed: Optional[int] = None) -> float:
    """C from ``config.c_grid`` with the best mean held-out precision@k; ties go to the smaller C."""
    grid = sorted(config.c_grid)
    if len(grid) == 1:
        return grid[0]
    y = train.y
    if min(np.sum(y == 1), np.sum(y == -1)) < 4:
        raise ValueError("cross-validation needs at least 4 instances of each class")
    base = config.seed if seed is None else seed
    splits = []
    attempt_seed = base
    for r in range(config.cv_repeats):
        for _ in range(10):
            folds = _stratified_folds(y, config.cv_folds, np.random.default_rng([attempt_seed, r]))
            attempt_seed += 1
            if _usable(y, folds):
                break
        else:
            raise RuntimeError("could not draw cross-validation folds with both classes present")
        splits.extend(folds)

    totals = np.zeros(len(grid))
    for held in splits:
        fit_idx = np.setdiff1d(np.arange(len(train)), held)
        fit, val = train.subset(fit_idx), train.subset(held)
        k = k_for(len(val), config.k_fraction)
        for ci, C in enumerate(grid):
            run = fit_method(method, fit, val, k, C, config.max_test)
            if run.model is None:
                raise CapacityError(f"{method} cannot run on a fold of {len(val)} instances")
            totals[ci] += precision_at_k(run.model, val, k)
    means = totals / len(splits)
    return grid[int(np.flatnonzero(means >= means.max() - 1e-12)[0])]


# ---------------------------------------------------------------------------
# experiment


@dataclass
class ResultTable:
    methods: tuple
    precision: dict = field(default_factory=dict)  # method -> list, or None when NA
    train_objective: dict = field(default_factory=dict)
    chosen_C: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)  # (a, b) -> TTestResult

    def mean(self, method: str) -> Optional[float]:
        vals = self.precision[method]
        return None if vals is None else float(np.mean(vals))

    def sd(self, method: str) -> Optional[float]:
        vals = self.precision[method]
        if vals is None:
            return None
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def objective_mean(self, method: str) -> Optional[float]:
        vals = self.train_objective[method]
        return None if vals is None else float(np.mean(vals))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "split", "C", "precision", "train_objective"])
        fmt = lambda v: "NA" if v is None else repr(float(v))  # noqa: E731
        for m in self.methods:
            vals = self.precision[m]
            if vals is None:
                writer.writerow([m, "all", "NA", "NA", "NA"])
                continue
            for i, (p, obj, C) in enumerate(zip(vals, self.train_objective[m], self.chosen_C[m])):
                writer.writerow([m, i, fmt(C), fmt(p), fmt(obj)])
            objs = self.train_objective[m]
            obj_sd = float(np.std(objs, ddof=1)) if len(objs) > 1 else 0.0
            writer.writerow([m, "mean", "", fmt(self.mean(m)), fmt(self.objective_mean(m))])
            writer.writerow([m, "sd", "", fmt(self.sd(m)), fmt(obj_sd)])
        return buf.getvalue()

    def verdicts_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["a", "b", "t", "p", "verdict", "degenerate"])
        for (a, b), r in self.verdicts.items():
            writer.writerow([a, b, repr(r.t), repr(r.p), r.verdict, str(r.degenerate).lower()])
        return buf.getvalue()


def run_experiment(config: ExperimentConfig, data: Optional[Dataset] = None) -> ResultTable:
    """Run every configured method on ``n_splits`` stratified splits.

    Split i uses seed ``config.seed + i`` for both the split and its
    cross-validation folds. A method that refuses a split's size is NA for
    the whole table.
    """
    if data is None:
        data = load_libsvm(config.dataset_path)
    if not data.is_labeled:
        raise ValueError("benchmark data must be fully labeled")
    table = ResultTable(config.methods)
    for m in config.methods:
        table.precision[m], table.train_objective[m], table.chosen_C[m] = [], [], []

    for split in range(config.n_splits):
        seed = config.seed + split
        train, test = random_split(data, config.test_fraction, stratified=True, seed=seed)
        k = k_for(len(test), config.k_fraction)
        for m in config.methods:
            if table.precision[m] is None:
                continue
            if m == "ttk_exact" and len(test) > config.max_test:
                table.precision[m] = table.train_objective[m] = table.chosen_C[m] = None
                continue
            C = cross_validate_C(train, config, m, seed)
            run = fit_method(m, train, test, k, C, config.max_test)
            if run.model is None:
                table.precision[m] = table.train_objective[m] = table.chosen_C[m] = None
                continue
            table.precision[m].append(precision_at_k(run.model, test, k))
            table.train_objective[m].append(run.train_objective)
            table.chosen_C[m].append(C)

    ready = [m for m in config.methods if table.precision[m] is not None]
    if config.n_splits >= 2:
        for i, a in enumerate(ready):
            for b in ready[i + 1:]:
                table.verdicts[(a, b)] = paired_t_test(table.precision[a], table.precision[b])
    return table


def write_results(table: ResultTable, out: Union[str, Path]) -> Path:
    """Write the per-split table to ``out`` and the t-test verdicts beside it."""
    out = Path(out)
    out.write_text(table.to_csv())
    side = out.with_name(out.stem + ".ttest.csv")
    side.write_text(table.verdicts_csv())
    return side
