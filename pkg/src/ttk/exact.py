"""Exact TTK solutions for small test sets by branch-and-bound over sign patterns.

Every feasible model selects some k-subset of the test set, and for a fixed
subset the problem is convex. The search fixes test signs one at a time.
A node's bound is the minimum over the closed cell of its partial pattern
(unassigned instances free), which can only grow as more signs are fixed.
Leaves are turned into strictly feasible models with
:func:`ttk.cells.realize_cell`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cells import default_penalty, realize_cell, solve_cell
from .dataset import TransductiveProblem
from .linear_model import LinearModel, TieError, scores
from .solver import is_feasible, threshold_start, ttk_objective


class CapacityError(ValueError):
    """The test set is larger than the exact solver accepts."""


class InfeasibleAssignment(RuntimeError):
    """A sign assignment could not be met with the required margin."""


@dataclass(frozen=True)
class ExactLimits:
    max_test: int = 25
    max_nodes: int = 200_000
    margin_delta: float = 1e-4
    penalty_weight: Optional[float] = None  # default 1e3 * C * max(1, |train|)

    def __post_init__(self):
        if not self.margin_delta > 0:
            raise ValueError("margin_delta must be positive")
        if self.max_test < 1 or self.max_nodes < 1:
            raise ValueError("max_test and max_nodes must be >= 1")
        if self.penalty_weight is not None and not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")

    def penalty(self, problem: TransductiveProblem) -> float:
        if self.penalty_weight is None:
            return default_penalty(problem)
        if self.penalty_weight < 1e3 * problem.C:
            raise ValueError(f"penalty_weight must be at least 1e3 * C = {1e3 * problem.C!r}")
        return self.penalty_weight


@dataclass(frozen=True)
class Certificate:
    chosen_set: tuple[int, ...]
    objective: float
    nodes_explored: int
    bound_gap: float = 0.0

    def to_json(self) -> str:
        return json.dumps({"chosen_set": list(self.chosen_set), "objective": self.objective,
                           "nodes_explored": self.nodes_explored, "bound_gap": self.bound_gap})

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        obj = json.loads(text)
        return cls(tuple(obj["chosen_set"]), obj["objective"], obj["nodes_explored"], obj["bound_gap"])


def _mask(problem: TransductiveProblem, positive_set) -> np.ndarray:
    idx = sorted(set(int(j) for j in positive_set))
    n = len(problem.test)
    if len(idx) != problem.k:
        raise ValueError(f"positive_set has {len(idx)} elements, expected k={problem.k}")
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise ValueError("positive_set index out of range")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def solve_assigned(problem: TransductiveProblem, positive_set,
                   limits: ExactLimits = ExactLimits()) -> tuple[LinearModel, float]:
    """Minimize the objective with the given test signs enforced at margin ``margin_delta``.

    Returns the model and its penalty-free objective. Raises
    :class:`InfeasibleAssignment` unless every assigned sign holds with
    margin at least ``margin_delta / 2``.
    """
    mask = _mask(problem, positive_set)
    delta = limits.margin_delta
    res = solve_cell(problem, np.where(mask, 1, -1), delta, delta, limits.penalty(problem))
    model = LinearModel(res.w, res.b)
    s = scores(model, problem.test)
    if np.any(s[mask] < delta / 2) or np.any(s[~mask] > -delta / 2):
        raise InfeasibleAssignment(f"assignment {sorted(np.flatnonzero(mask).tolist())} violated")
    return model, ttk_objective(model, problem)


def _realize(problem, mask, limits, warm=None):
    ladder = ((1e-12, 0.0), (1e-12, 1e-12), (1e-9, 1e-9), (1e-6, 1e-6),
              (limits.margin_delta, limits.margin_delta))
    return realize_cell(problem, mask, ladder=ladder, penalty=limits.penalty(problem), warm=warm)


def _chosen(model, problem):
    return tuple(int(j) for j in np.flatnonzero(scores(model, problem.test) > 0))


def _check_capacity(problem, limits):
    if len(problem.test) > limits.max_test:
        raise CapacityError(f"|test| = {len(problem.test)} exceeds max_test = {limits.max_test}")


def solve_exhaustive(problem: TransductiveProblem,
                     limits: ExactLimits = ExactLimits()) -> tuple[LinearModel, Certificate]:
    """Reference mode: realize every k-subset and keep the best, with no pruning."""
    _check_capacity(problem, limits)
    n = len(problem.test)
    best, best_f, count = None, np.inf, 0
    for combo in itertools.combinations(range(n), problem.k):
        count += 1
        mask = np.zeros(n, dtype=bool)
        mask[list(combo)] = True
        model = _realize(problem, mask, limits)
        if model is None:
            continue
        f = ttk_objective(model, problem)
        if f < best_f:
            best, best_f = model, f
    if best is None:
        raise InfeasibleAssignment("no k-subset could be realized")
    return best, Certificate(_chosen(best, problem), best_f, count, 0.0)


def solve_exact(problem: TransductiveProblem, limits: ExactLimits = ExactLimits(), *,
                prune: bool = True, hint: Optional[LinearModel] = None,
                node_log: Optional[list] = None) -> tuple[LinearModel, Certificate]:
    """Global TTK minimizer by depth-first branch-and-bound.

    ``prune=False`` delegates to :func:`solve_exhaustive`. ``hint`` is an
    optional feasible model used as an extra starting incumbent. When
    ``node_log`` is a list, each evaluated node appends
    ``(depth, parent_bound, bound)`` with the child's own QP bound.
    """
    if not prune:
        return solve_exhaustive(problem, limits)
    _check_capacity(problem, limits)
    n, k = len(problem.test), problem.k
    pw = limits.penalty(problem)

    incumbents = []
    try:
        incumbents.append(threshold_start(problem))
    except TieError:
        pass
    if hint is not None and is_feasible(hint, problem):
        incumbents.append(hint)
    best, best_f = None, np.inf
    for cand in incumbents:
        f = ttk_objective(cand, problem)
        if f < best_f:
            best, best_f = cand, f

    root = solve_cell(problem, np.zeros(n, dtype=int), penalty=pw)
    ref = best if best is not None else LinearModel(root.w, root.b)
    # most ambiguous instances first
    order = np.argsort(np.abs(scores(ref, problem.test)), kind="stable")

    def prunable(bound):
        return bound >= best_f - 1e-12 * (1.0 + abs(best_f))

    nodes = 1
    # stack entries: (depth, assignment, bound)
    stack = [(0, np.zeros(n, dtype=int), root.objective)]
    if node_log is not None:
        node_log.append((0, -np.inf, root.objective))
    open_bound = None
    while stack:
        depth, assign, bound = stack.pop()
        if prunable(bound):
            continue
        npos = int(np.sum(assign > 0))
        nneg = int(np.sum(assign < 0))
        if npos == k or nneg == n - k:
            full = np.where(assign != 0, assign, -1 if npos == k else 1)
            model = _realize(problem, full > 0, limits)
            if model is not None:
                f = ttk_objective(model, problem)
                if f < best_f:
                    best, best_f = model, f
            continue
        if nodes >= limits.max_nodes:
            open_bound = min([bound] + [b for _, _, b in stack])
            break
        j = order[depth]
        children = []
        for sign in (1, -1):
            child = assign.copy()
            child[j] = sign
            res = solve_cell(problem, child, penalty=pw)
            nodes += 1
            # a child's constraint set contains its parent's
            cb = max(res.objective, bound)
            if node_log is not None:
                node_log.append((depth + 1, bound, res.objective))
            children.append((cb, sign, child))
        # depth first, lower bound explored first (pushed last)
        children.sort(key=lambda c: (c[0], -c[1]), reverse=True)
        for cb, _, child in children:
            stack.append((depth + 1, child, cb))

    if best is None:
        raise InfeasibleAssignment("no feasible model found")
    gap = 0.0 if open_bound is None else max(0.0, best_f - open_bound)
    return best, Certificate(_chosen(best, problem), best_f, nodes, gap)
