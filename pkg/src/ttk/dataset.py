"""Sparse labeled datasets, LIBSVM text I/O, splitting and the synthetic figure scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np


class ParseError(ValueError):
    """Malformed LIBSVM input; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Instance:
    indices: tuple[int, ...]
    values: tuple[float, ...]
    label: Optional[int] = None

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        prev = 0
        for idx in self.indices:
            if idx <= prev:
                raise ValueError(f"feature indices must be strictly ascending and >= 1, got {self.indices}")
            prev = idx
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")
        if self.label not in (None, 1, -1):
            raise ValueError(f"label must be +1, -1 or None, got {self.label!r}")

    @classmethod
    def from_dict(cls, features: dict[int, float], label: Optional[int] = None) -> "Instance":
        items = sorted(features.items())
        return cls(tuple(int(i) for i, _ in items), tuple(float(v) for _, v in items), label)

    @classmethod
    def from_dense(cls, x: Sequence[float], label: Optional[int] = None) -> "Instance":
        """Dense vector to sparse instance; zeros are dropped."""
        pairs = [(i + 1, float(v)) for i, v in enumerate(x) if v != 0.0]
        return cls(tuple(i for i, _ in pairs), tuple(v for _, v in pairs), label)

    @property
    def features(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))

    @property
    def max_index(self) -> int:
        return self.indices[-1] if self.indices else 0

    def unlabeled(self) -> "Instance":
        return Instance(self.indices, self.values, None)


@dataclass(frozen=True)
class Dataset:
    instances: tuple[Instance, ...]
    dim: int = -1

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        seen = max((inst.max_index for inst in self.instances), default=0)
        if self.dim < 0:
            object.__setattr__(self, "dim", seen)
        elif self.dim < seen:
            raise ValueError(f"dim={self.dim} is smaller than max feature index {seen}")

    def __len__(self) -> int:
        return len(self.instances)

    @classmethod
    def from_arrays(cls, X, y=None, dim: Optional[int] = None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        labels = [None] * len(X) if y is None else [int(v) for v in y]
        insts = tuple(Instance.from_dense(row, lab) for row, lab in zip(X, labels))
        return cls(insts, X.shape[1] if dim is None else dim)

    @cached_property
    def X(self) -> np.ndarray:
        """Dense ``(n, dim)`` feature matrix."""
        out = np.zeros((len(self.instances), self.dim))
        for r, inst in enumerate(self.instances):
            if inst.indices:
                out[r, np.asarray(inst.indices) - 1] = inst.values
        out.setflags(write=False)
        return out

    @cached_property
    def y(self) -> np.ndarray:
        """Labels as floats; raises if any instance is unlabeled."""
        if not self.is_labeled:
            raise ValueError("dataset contains unlabeled instances")
        out = np.array([inst.label for inst in self.instances], dtype=float)
        out.setflags(write=False)
        return out

    @property
    def is_labeled(self) -> bool:
        return all(inst.label is not None for inst in self.instances)

    def subset(self, idx: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.instances[i] for i in idx), self.dim)

    def with_dim(self, dim: int) -> "Dataset":
        return Dataset(self.instances, dim)

    def unlabeled(self) -> "Dataset":
        return Dataset(tuple(inst.unlabeled() for inst in self.instances), self.dim)

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(self.instances + other.instances, max(self.dim, other.dim))


@dataclass(frozen=True)
class TransductiveProblem:
    """Labeled train set, test set whose labels solvers must not read, target count k and C."""

    train: Dataset
    test: Dataset
    k: int
    C: float = 1.0

    def __post_init__(self):
        dim = max(self.train.dim, self.test.dim)
        if self.train.dim != dim:
            object.__setattr__(self, "train", self.train.with_dim(dim))
        if self.test.dim != dim:
            object.__setattr__(self, "test", self.test.with_dim(dim))
        if not self.train.is_labeled:
            raise ValueError("all training instances must be labeled")
        if not 1 <= self.k <= len(self.test):
            raise ValueError(f"k={self.k} outside [1, {len(self.test)}]")
        if not self.C > 0:
            raise ValueError("C must be positive")

    @property
    def dim(self) -> int:
        return self.train.dim

    def with_C(self, C: float) -> "TransductiveProblem":
        return TransductiveProblem(self.train, self.test, self.k, C)


# ---------------------------------------------------------------------------
# LIBSVM text format


def _parse_label(tok: str, lineno: int) -> int:
    if tok in ("+1", "1"):
        return 1
    if tok == "-1":
        return -1
    raise ParseError(lineno, f"label must be +1, 1 or -1, got {tok!r}")


def parse_libsvm(source: Union[str, TextIO], dim: Optional[int] = None) -> Dataset:
    """Parse ``<label> <idx>:<val> ...`` lines into a :class:`Dataset`.

    ``source`` is either the text itself or an open text stream. Blank lines
    are skipped. Labels other than ``+1``/``1``/``-1`` are rejected, so 0/1
    files fail loudly instead of being remapped.
    """
    text = source if isinstance(source, str) else source.read()
    insts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        label = _parse_label(toks[0], lineno)
        indices, values = [], []
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise ParseError(lineno, f"feature index must be >= 1, got {idx}")
            if indices and idx <= indices[-1]:
                kind = "duplicate" if idx == indices[-1] else "non-ascending"
                raise ParseError(lineno, f"{kind} feature index {idx}")
            if not math.isfinite(val):
                raise ParseError(lineno, f"non-finite value in {tok!r}")
            indices.append(idx)
            values.append(val)
        insts.append(Instance(tuple(indices), tuple(values), label))
    ds = Dataset(tuple(insts))
    return ds if dim is None else ds.with_dim(dim)


def load_libsvm(path, dim: Optional[int] = None) -> Dataset:
    with open(path) as fh:
        return parse_libsvm(fh, dim)


def format_libsvm(data: Dataset) -> str:
    """Serialize to LIBSVM text; floats use shortest round-trip repr."""
    lines = []
    for inst in data.instances:
        if inst.label is None:
            raise ValueError("LIBSVM lines need a label; instance is unlabeled")
        feats = " ".join(f"{i}:{v!r}" for i, v in zip(inst.indices, inst.values))
        lines.append(f"{'+1' if inst.label == 1 else '-1'} {feats}".rstrip())
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# splitting


def random_split(data: Dataset, test_fraction: float, stratified: bool = False,
                 seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition with ``round(test_fraction * n)`` test instances.

    With ``stratified`` each class contributes its rounded share, and the
    remainder needed to hit the overall test size goes to the classes with
    the largest rounding deficit. Instance order inside each part follows
    the original order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(data)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_test = _round_half_up(test_fraction * n)
    rng = np.random.default_rng(seed)
    if not stratified:
        test_idx = rng.permutation(n)[:n_test]
    else:
        labels = np.array([inst.label for inst in data.instances], dtype=object)
        if any(lab is None for lab in labels):
            raise ValueError("stratified split needs labels")
        classes = [1, -1]
        groups = {c: np.flatnonzero(labels == c) for c in classes}
        if any(len(g) == 0 for g in groups.values()):
            raise ValueError("stratified split needs both classes present")
        quota = {c: test_fraction * len(groups[c]) for c in classes}
        take = {c: int(math.floor(quota[c])) for c in classes}
        short = n_test - sum(take.values())
        for c in sorted(classes, key=lambda c: (-(quota[c] - take[c]), -c))[:max(short, 0)]:
            take[c] += 1
        test_idx = np.concatenate([rng.permutation(groups[c])[:take[c]] for c in classes])
    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    return data.subset(np.flatnonzero(~mask)), data.subset(np.flatnonzero(mask))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# synthetic figure scenario

_N_POS, _N_NEG = 22, 18
_FIGURE_K = 4


def _sample_figure_half(rng: np.random.Generator) -> Dataset:
    # Both main clusters are narrow horizontally and tall vertically. A loose
    # pocket of positives sits to the right of the positive cluster and a
    # tight clump of negatives lies far below it, so the accuracy-driven
    # boundary, once pushed out to select k points, reaches the clump early.
    n_pocket = n_outlier = 3
    pos_main = rng.normal([0.64, 0.28], [0.15, 0.83], size=(_N_POS - n_pocket, 2))
    pocket = rng.normal([2.92, 0.79], 0.54, size=(n_pocket, 2))
    neg_main = rng.normal([-0.98, 1.17], [0.1, 1.19], size=(_N_NEG - n_outlier, 2))
    outliers = rng.normal([3.16, -3.67], 0.03, size=(n_outlier, 2))
    X = np.vstack([pos_main, pocket, neg_main, outliers])
    y = np.r_[np.ones(_N_POS), -np.ones(_N_NEG)]
    return Dataset.from_arrays(X, y, dim=2)


def _figure_gap_holds(problem: TransductiveProblem) -> bool:
    from .linear_model import TieError, adjust_intercept, precision_at_k
    from .solver import solve_fd
    from .svm import SvmConfig, train_svm

    svm, _ = train_svm(problem.train, SvmConfig(C=problem.C))
    try:
        init = adjust_intercept(svm, problem.test, problem.k)
    except TieError:
        return False
    if precision_at_k(init, problem.test, problem.k) != 0.5:
        return False
    model, _ = solve_fd(problem, init)
    return precision_at_k(model, problem.test, problem.k) == 1.0


def make_synthetic_figure(seed: int = 0, max_attempts: int = 200) -> TransductiveProblem:
    """Two-dimensional k=4 scenario where the thresholded SVM picks a mixed top set.

    Train and test each hold 22 positives and 18 negatives. Draws are
    rejected until the intercept-shifted SVM has precision@4 of exactly 0.5
    and the feasible-direction solver started there reaches 1.0. Test labels
    are kept on the returned problem for evaluation only.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        problem = TransductiveProblem(_sample_figure_half(rng), _sample_figure_half(rng), _FIGURE_K, 1.0)
        if _figure_gap_holds(problem):
            return problem
    raise RuntimeError(f"no qualifying figure scenario within {max_attempts} draws for seed {seed}")
