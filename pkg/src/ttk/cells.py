"""Convex subproblems for a fixed sign pattern on the test set.

A *cell* is the set of models whose test scores follow a given sign
pattern: assigned positives strictly above zero, assigned negatives at or
below zero. Inside a cell the TTK objective is the plain SVM objective plus
linear sign constraints, which we encode as heavily weighted hinge rows::

    positive j:  pw * max(0, margin_pos - s_j)
    negative j:  pw * max(0, s_j + margin_neg)

With both margins zero the penalized minimum is a lower bound on every
completion of a partial pattern (dropping or softening constraints never
raises a minimum).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import hinge_qp
from .dataset import TransductiveProblem
from .linear_model import LinearModel, scores

# margins tried in order when turning a cell infimum into a strictly feasible model
REALIZE_LADDER = ((1e-12, 0.0), (1e-12, 1e-12), (1e-9, 1e-9), (1e-6, 1e-6))

# cells with more assigned rows than this use constraint generation
_FULL_ROWS = 64


def default_penalty(problem: TransductiveProblem) -> float:
    return 1e3 * problem.C * max(1, len(problem.train))


def solve_cell(problem: TransductiveProblem, assign: np.ndarray, margin_pos: float = 0.0,
               margin_neg: float = 0.0, penalty: Optional[float] = None,
               warm: Optional[LinearModel] = None) -> hinge_qp.QPResult:
    """Penalized cell minimum. ``assign[j]`` is +1, -1 or 0 (unconstrained).

    Large patterns are solved by constraint generation: only rows violated at
    the current solution are added, until every assigned row holds. The
    result is exact for the full pattern because omitted rows carry zero
    penalty at the returned point.
    """
    pw = default_penalty(problem) if penalty is None else penalty
    Xtr, ytr = problem.train.X, problem.train.y
    Xte = problem.test.X
    assigned = np.flatnonzero(assign != 0)
    sign = assign[assigned].astype(float)
    offs = np.where(sign > 0, margin_pos, margin_neg)

    def run(rows):
        X = np.vstack([Xtr, Xte[rows]])
        y = np.r_[ytr, sign_of[rows]]
        a = np.r_[np.ones(len(ytr)), off_of[rows]]
        c = np.r_[np.full(len(ytr), problem.C), np.full(len(rows), pw)]
        return hinge_qp.solve(X, y, a, c)

    sign_of = np.zeros(len(assign))
    sign_of[assigned] = sign
    off_of = np.zeros(len(assign))
    off_of[assigned] = offs

    if len(assigned) <= _FULL_ROWS:
        return run(assigned)

    if warm is None:
        ref = run(np.zeros(0, dtype=int))
        w, b = ref.w, ref.b
    else:
        w, b = warm.w, warm.b
    s = Xte @ w + b
    working = assigned[sign_of[assigned] * s[assigned] < off_of[assigned] + 1e-3]
    while True:
        res = run(working)
        s = Xte @ res.w + res.b
        slack = sign_of[assigned] * s[assigned] - off_of[assigned]
        missing = np.setdiff1d(assigned[slack < -1e-12 * (1.0 + np.abs(s[assigned]))], working)
        if len(missing) == 0:
            return res
        working = np.union1d(working, missing)


def pattern_holds(model: LinearModel, problem: TransductiveProblem, assign: np.ndarray) -> bool:
    s = scores(model, problem.test)
    pos = assign > 0
    neg = assign < 0
    return bool(np.all(s[pos] > 0) and np.all(s[neg] <= 0))


def realize_cell(problem: TransductiveProblem, positive_mask: np.ndarray,
                 ladder: Sequence[tuple[float, float]] = REALIZE_LADDER,
                 penalty: Optional[float] = None,
                 warm: Optional[LinearModel] = None) -> Optional[LinearModel]:
    """Strictly feasible model near the cell infimum, or None if none verifies.

    Each ladder rung re-solves the cell with small sign margins; the first
    model whose actual scores reproduce the pattern under the ``> 0`` rule is
    returned.
    """
    assign = np.where(positive_mask, 1, -1)
    for mp, mn in ladder:
        res = solve_cell(problem, assign, mp, mn, penalty, warm)
        model = LinearModel(res.w, res.b)
        if pattern_holds(model, problem, assign):
            return model
    return None
