"""Linear scoring, top-k selection, intercept shifting and precision@k."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .dataset import Dataset, Instance


class TieError(ValueError):
    """The k-th and (k+1)-th test scores coincide, so no intercept selects exactly k."""

    def __init__(self, score: float, k: int):
        super().__init__(f"scores tie at {score!r} around position k={k}")
        self.score = score
        self.k = k


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("model parameters must be finite")

    @classmethod
    def zeros(cls, dim: int) -> "LinearModel":
        return cls(np.zeros(dim), 0.0)

    @classmethod
    def from_vector(cls, theta) -> "LinearModel":
        """Inverse of :attr:`vector`: ``theta = (w..., b)``."""
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], theta[-1])

    @property
    def dim(self) -> int:
        return len(self.w)

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.w, self.b)

    def with_intercept(self, b: float) -> "LinearModel":
        return LinearModel(self.w, b)

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return self.b == other.b and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash((self.b, self.w.tobytes()))

    def to_json(self) -> str:
        # repr() of a float is the shortest string that round-trips exactly
        w = "[" + ", ".join(repr(float(v)) for v in self.w) + "]"
        return f'{{"w": {w}, "b": {self.b!r}, "dim": {self.dim}}}'

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        obj = json.loads(text)
        w = obj["w"]
        if "dim" in obj and obj["dim"] != len(w):
            raise ValueError(f"dim={obj['dim']} does not match len(w)={len(w)}")
        return cls(np.array(w, dtype=float), obj["b"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def score(model: LinearModel, x: Instance) -> float:
    """``w.x + b`` for one sparse instance."""
    if x.max_index > model.dim:
        raise ValueError(f"instance index {x.max_index} exceeds model dim {model.dim}")
    s = model.b
    for i, v in zip(x.indices, x.values):
        s += model.w[i - 1] * v
    return float(s)


def scores(model: LinearModel, data: Union[Dataset, np.ndarray]) -> np.ndarray:
    """Vectorized scores of every instance in ``data`` (a Dataset or dense matrix)."""
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.shape[1] > model.dim:
        raise ValueError(f"data dim {X.shape[1]} exceeds model dim {model.dim}")
    return X @ model.w[:X.shape[1]] + model.b


def top_k_set(model: LinearModel, data: Dataset, k: int) -> list[int]:
    """Indices of the k largest scores, ties to the lower index, sorted ascending."""
    n = len(data)
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    if k == 0:
        return []
    s = scores(model, data)
    # stable sort on -s keeps lower indices first among equal scores
    order = np.argsort(-s, kind="stable")
    return sorted(int(i) for i in order[:k])


def adjust_intercept(model: LinearModel, test: Dataset, k: int) -> LinearModel:
    """Shift b so exactly k test scores are strictly positive.

    The new boundary sits midway between the k-th and (k+1)-th largest
    scores. For ``k == len(test)`` the smallest score is lifted to 1.
    """
    n = len(test)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    # work from w.x alone so the result does not depend on the old b
    t = np.sort(scores(model.with_intercept(0.0), test))[::-1]
    if k == n:
        return model.with_intercept(1.0 - t[n - 1])
    hi, lo = t[k - 1], t[k]
    if hi == lo:
        raise TieError(float(hi + model.b), k)
    shifted = model.with_intercept(-(hi + lo) / 2.0)
    if int(np.sum(scores(shifted, test) > 0)) != k:
        # midpoint collapsed onto a score in floating point
        raise TieError(float(hi + model.b), k)
    return shifted


def precision_at_k(model: LinearModel, labeled_test: Dataset, k: int) -> float:
    n = len(labeled_test)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if not labeled_test.is_labeled:
        raise ValueError("precision@k needs every test label")
    top = top_k_set(model, labeled_test, k)
    hits = sum(1 for i in top if labeled_test.instances[i].label == 1)
    return hits / k
