"""Feasible-direction descent for the transductive top-k (TTK) objective.

The objective is the regularized training hinge loss; the test set enters
only through the constraint that exactly k test scores are strictly
positive. Iterates move along directions from a small LP that keeps every
test instance near the boundary on its current side, with steps capped
before any other test score changes sign. When no descent direction is
left, a swap move exchanges one selected and one unselected boundary
instance and jumps to the optimum of the resulting sign pattern.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .cells import realize_cell
from .dataset import TransductiveProblem
from .linear_model import LinearModel, TieError, adjust_intercept, scores
from .svm import SvmConfig, hinge_objective, svm_objective, train_svm


class InfeasibleModelError(ValueError):
    """The model does not select exactly k test instances."""


@dataclass(frozen=True)
class TtkOptions:
    eps_active: Optional[float] = None  # default 1e-6 * (1 + |b|)
    max_iters: Optional[int] = None  # default 500 * (d + 1)
    step_tol: float = 1e-8
    swap_budget: int = 100
    swap_width: int = 3
    armijo: float = 1e-4

    def __post_init__(self):
        if self.eps_active is not None and not self.eps_active > 0:
            raise ValueError("eps_active must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def band(self, model: LinearModel) -> float:
        return self.eps_active if self.eps_active is not None else 1e-6 * (1.0 + abs(model.b))

    def iteration_limit(self, dim: int) -> int:
        return self.max_iters if self.max_iters is not None else 500 * (dim + 1)


@dataclass
class SolverTrace:
    objectives: list = field(default_factory=list)
    feasible_flags: list = field(default_factory=list)
    moves: list = field(default_factory=list)
    swaps_taken: int = 0
    terminated_by: str = ""

    def record(self, objective: float, feasible: bool, move: str) -> None:
        self.objectives.append(objective)
        self.feasible_flags.append(feasible)
        self.moves.append(move)

    def to_csv(self) -> str:
        """One row per accepted move; ``objectives[0]`` is the start and has no row."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "objective", "feasible", "move"])
        for it in range(1, len(self.objectives)):
            writer.writerow([it, repr(self.objectives[it]), str(self.feasible_flags[it]).lower(), self.moves[it]])
        return buf.getvalue()


def ttk_objective(model: LinearModel, problem: TransductiveProblem) -> float:
    return svm_objective(model, problem.train, problem.C)


def is_feasible(model: LinearModel, problem: TransductiveProblem) -> bool:
    return int(np.sum(scores(model, problem.test) > 0)) == problem.k


def _numerical_tie(model: LinearModel, problem: TransductiveProblem) -> bool:
    t = np.sort(scores(model.with_intercept(0.0), problem.test))[::-1]
    k = problem.k
    if k == len(t):
        return False
    return t[k - 1] - t[k] <= 1e-12 * (1.0 + float(np.abs(t).max()))


def threshold_start(problem: TransductiveProblem, model: Optional[LinearModel] = None) -> LinearModel:
    """Train the SVM (unless given) and shift its intercept to select k test instances.

    If the k-th and (k+1)-th test scores tie, or differ only at rounding
    level, w is nudged by ``1e-9 * j`` on coordinate j (scaled up tenfold
    per retry) until they separate.
    """
    if model is None:
        model, _ = train_svm(problem.train, SvmConfig(C=problem.C))
    nudge = 1e-9 * np.arange(1, model.dim + 1)
    for attempt in range(8):
        if not _numerical_tie(model, problem):
            try:
                return adjust_intercept(model, problem.test, problem.k)
            except TieError:
                pass
        model = LinearModel(model.w + nudge * 10.0 ** attempt, model.b)
    return adjust_intercept(model, problem.test, problem.k)


# ---------------------------------------------------------------------------
# direction subproblem


@dataclass
class _Local:
    """Scores and boundary classification at one iterate."""

    s_test: np.ndarray
    active_pos: np.ndarray
    active_neg: np.ndarray
    margin: np.ndarray  # 1 - y s on train
    kink: np.ndarray
    violated: np.ndarray
    eps: float


def _local(model: LinearModel, problem: TransductiveProblem, options: TtkOptions) -> _Local:
    eps = options.band(model)
    s = scores(model, problem.test)
    m = 1.0 - problem.train.y * scores(model, problem.train)
    kink = np.abs(m) <= eps
    return _Local(s, (s > 0) & (s <= eps), (s <= 0) & (s >= -eps), m, kink, (m > eps), eps)


def _augmented(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((len(X), 1))])


def _direction(model, problem, options, loc: _Local):
    """Solve the direction LP; returns ``(d, value)``.

    minimize  g.d + C * sum_kink max(0, -y_i a_i.d)
    s.t.      a_j.d >= 0 for active selected j, a_j.d <= 0 for active unselected j,
              ||d||_inf <= 1
    where g is the gradient of the smooth part (regularizer plus violated
    hinges) and a = (x, 1). A tiny l1 term makes zero-cost coordinates stay 0.
    """
    C = problem.C
    Atr = _augmented(problem.train.X)
    Ate = _augmented(problem.test.X)
    y = problem.train.y
    p = model.dim + 1
    g = np.append(model.w, 0.0) - C * (y[loc.violated] @ Atr[loc.violated])

    K = np.flatnonzero(loc.kink)
    nk = len(K)
    # variables: d+ (p), d- (p), t (nk)
    rho = 1e-9 * (1.0 + float(np.abs(g).max()))
    cost = np.r_[g + rho, -g + rho, np.full(nk, C)]
    rows, rhs = [], []
    for idx, i in enumerate(K):
        # -y_i a_i.d - t_i <= 0
        r = np.zeros(2 * p + nk)
        ya = y[i] * Atr[i]
        r[:p], r[p:2 * p] = -ya, ya
        r[2 * p + idx] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for j in np.flatnonzero(loc.active_pos):
        r = np.zeros(2 * p + nk)
        r[:p], r[p:2 * p] = -Ate[j], Ate[j]
        rows.append(r)
        rhs.append(0.0)
    for j in np.flatnonzero(loc.active_neg):
        r = np.zeros(2 * p + nk)
        r[:p], r[p:2 * p] = Ate[j], -Ate[j]
        rows.append(r)
        rhs.append(0.0)
    bounds = [(0.0, 1.0)] * (2 * p) + [(0.0, None)] * nk
    res = linprog(cost, A_ub=np.array(rows) if rows else None, b_ub=np.array(rhs) if rhs else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None, 0.0
    d = res.x[:p] - res.x[p:2 * p]
    d[np.abs(d) < 1e-12] = 0.0
    return d, _model_slope(d, g, Atr, y, loc, C)


def _model_slope(d, g, Atr, y, loc: _Local, C) -> float:
    kink_part = np.maximum(0.0, -y[loc.kink] * (Atr[loc.kink] @ d)).sum()
    return float(g @ d + C * kink_part)


def feasible_direction(model: LinearModel, problem: TransductiveProblem,
                       options: TtkOptions = TtkOptions()) -> Optional[np.ndarray]:
    """Descent direction over ``(w, b)`` that keeps boundary test signs, or None if stationary."""
    if not is_feasible(model, problem):
        raise InfeasibleModelError("feasible_direction needs a model selecting exactly k test instances")
    loc = _local(model, problem, options)
    d, value = _direction(model, problem, options, loc)
    if d is None or value >= -options.step_tol:
        return None
    return d


# ---------------------------------------------------------------------------
# step length


def step_bound(model: LinearModel, d: np.ndarray, problem: TransductiveProblem,
               options: TtkOptions = TtkOptions()) -> float:
    """Smallest positive step at which an off-boundary test score reaches zero (inf if none)."""
    loc = _local(model, problem, options)
    r = _augmented(problem.test.X) @ d
    s = loc.s_test
    inactive = ~(loc.active_pos | loc.active_neg)
    tiny = 1e-12 * (1.0 + float(np.abs(d).max()))
    leaving = (s > 0) & (r < -tiny) & (inactive | (r < -1e-9))
    entering = (s <= 0) & (r > tiny) & (inactive | (r > 1e-9))
    cands = np.r_[s[leaving] / -r[leaving], -s[entering] / r[entering]]
    cands = cands[cands > 0]
    return float(cands.min()) if len(cands) else float("inf")


def _ray_minimizer(w, dw, m, rho, C, cap) -> float:
    """Exact minimizer on [0, cap] of 0.5||w + a dw||^2 + C sum max(0, m_i - a rho_i)."""
    B = float(dw @ dw)
    A0 = float(w @ dw)
    nz = rho != 0
    br = m[nz] / rho[nz]
    br = np.unique(br[(br > 0) & (br < cap)])
    starts = np.r_[0.0, br]
    ends = np.r_[br, cap]
    for lo, hi in zip(starts, ends):
        mid = lo + 0.5 * (hi - lo) if np.isfinite(hi) else lo + 1.0
        active = m - mid * rho > 0
        lin = A0 - C * float(rho[active].sum())
        # derivative on this segment: lin + B * a
        if lin + B * lo >= 0:
            return float(lo)
        if B > 0:
            root = -lin / B
            if root <= hi:
                return float(root)
        elif not np.isfinite(hi):
            return float(lo)
    return float(cap)


def line_search(model: LinearModel, d: np.ndarray, problem: TransductiveProblem,
                options: TtkOptions = TtkOptions()) -> float:
    """Feasibility-preserving step along d; 0.0 means no acceptable progress.

    The step is capped just short of :func:`step_bound` and starts at the
    exact minimizer of the piecewise-quadratic objective along the ray. If
    rounding makes that point infeasible, bisection finds the largest
    feasible step below it. The step is then halved until the
    sufficient-decrease test holds.
    """
    loc = _local(model, problem, options)
    y = problem.train.y
    Atr = _augmented(problem.train.X)
    g = np.append(model.w, 0.0) - problem.C * (y[loc.violated] @ Atr[loc.violated])
    slope = _model_slope(d, g, Atr, y, loc, problem.C)
    if slope >= 0:
        return 0.0
    bound = step_bound(model, d, problem, options)
    cap = bound * (1.0 - 1e-9) if np.isfinite(bound) else np.inf
    rho = y * (Atr @ d)
    alpha = _ray_minimizer(model.w, d[:-1], loc.margin, rho, problem.C, cap)
    if not np.isfinite(alpha):
        return 0.0
    theta0 = model.vector
    feasible = lambda a: is_feasible(LinearModel.from_vector(theta0 + a * d), problem)  # noqa: E731
    if not feasible(alpha):
        lo, hi = 0.0, alpha
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        alpha = lo
    f0 = ttk_objective(model, problem)
    X, C = problem.train.X, problem.C
    for _ in range(60):
        if alpha <= 0:
            return 0.0
        theta = theta0 + alpha * d
        f = hinge_objective(theta[:-1], theta[-1], X, y, C)
        if f <= f0 - options.armijo * alpha * abs(slope) and feasible(alpha):
            return float(alpha)
        alpha *= 0.5
    return 0.0


# ---------------------------------------------------------------------------
# swap move


def swap_step(model: LinearModel, problem: TransductiveProblem,
              options: TtkOptions = TtkOptions()) -> Optional[LinearModel]:
    """Exchange one selected and one unselected boundary-near test instance.

    Candidates are the ``swap_width`` lowest-scoring selected and
    highest-scoring unselected test instances; nothing is tried unless at
    least one test score lies inside the activity band. Each exchange is
    evaluated at the optimum of its sign pattern and the best strict
    improvement is returned.
    """
    if options.swap_budget <= 0:
        return None
    loc = _local(model, problem, options)
    if not (loc.active_pos.any() or loc.active_neg.any()):
        return None
    s = loc.s_test
    pos = s > 0
    sel = np.flatnonzero(pos)
    uns = np.flatnonzero(~pos)
    if len(sel) == 0 or len(uns) == 0:
        return None
    outs = sel[np.argsort(s[sel], kind="stable")][:options.swap_width]
    ins = uns[np.argsort(-s[uns], kind="stable")][:options.swap_width]
    pairs = sorted(((o, i) for o in outs for i in ins), key=lambda oi: (s[oi[0]] - s[oi[1]], oi))

    f0 = ttk_objective(model, problem)
    best, best_f = None, f0 - 1e-12 * (1.0 + abs(f0))
    margin = 0.1 * loc.eps
    ladder = ((margin, 0.0), (margin, margin), (1e-6, 1e-6))
    for o, i in pairs:
        mask = pos.copy()
        mask[o], mask[i] = False, True
        cand = realize_cell(problem, mask, ladder=ladder, warm=model)
        if cand is None:
            continue
        f = ttk_objective(cand, problem)
        if f < best_f:
            best, best_f = cand, f
    return best


# ---------------------------------------------------------------------------
# driver


def solve_fd(problem: TransductiveProblem, init: Optional[LinearModel] = None,
             options: TtkOptions = TtkOptions()) -> tuple[LinearModel, SolverTrace]:
    """Run feasible-direction descent with swap fallback from ``init``.

    ``init`` defaults to :func:`threshold_start`. Returns the final model and
    the trace of accepted iterates.
    """
    model = threshold_start(problem) if init is None else init
    if not is_feasible(model, problem):
        raise InfeasibleModelError("initial model does not select exactly k test instances")
    trace = SolverTrace()
    f = ttk_objective(model, problem)
    trace.record(f, True, "start")
    budget = options.swap_budget

    def try_swap():
        nonlocal budget
        if budget <= 0:
            return None
        new = swap_step(model, problem, replace(options, swap_budget=budget))
        if new is not None:
            budget -= 1
            trace.swaps_taken += 1
        return new

    limit = options.iteration_limit(problem.dim)
    trace.terminated_by = "iter_limit"
    for _ in range(limit):
        d = feasible_direction(model, problem, options)
        alpha = 0.0 if d is None else line_search(model, d, problem, options)
        if alpha > 0:
            model = LinearModel.from_vector(model.vector + alpha * d)
            move = "descent"
        else:
            new = try_swap()
            if new is None:
                trace.terminated_by = "stationary" if d is None else "no_direction"
                break
            model, move = new, "swap"
        f_new = ttk_objective(model, problem)
        trace.record(f_new, is_feasible(model, problem), move)
        f = f_new
    return model, trace
