"""Exact minimizer for weighted, offset hinge objectives.

Solves::

    min_{w, b}  0.5 ||w||^2 + sum_i c_i * max(0, a_i - y_i (w.x_i + b))

An interior-point pass (Clarabel) locates the solution; the rows sitting on
their hinge kink then define an equality-constrained QP whose KKT system is
solved directly. The polished point is kept only if a multiplier vector in
the box ``[0, c]`` certifies stationarity, in which case the objective is
exact to rounding and ``bound`` equals it. Otherwise ``bound`` falls back to
the interior-point dual objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import clarabel
import numpy as np
from scipy import sparse
from scipy.optimize import lsq_linear


@dataclass
class QPResult:
    w: np.ndarray
    b: float
    alpha: np.ndarray
    objective: float
    bound: float
    certified: bool


def primal_value(w, b, X, y, a, c) -> float:
    s = X @ w + b
    return 0.5 * float(w @ w) + float(c @ np.maximum(a - y * s, 0.0))


def best_intercept(t: np.ndarray, y: np.ndarray, a: np.ndarray, c: np.ndarray) -> float:
    """Minimize ``sum c_i max(0, a_i - y_i (t_i + b))`` over b exactly.

    Returns the midpoint of the optimal interval when it is bounded, its
    finite end when it is a half-line, and 0 when every weight vanishes.
    """
    keep = c > 0
    t, y, a, c = t[keep], y[keep], a[keep], c[keep]
    if len(t) == 0:
        return 0.0
    kinks = y * a - t
    if not np.any(y < 0):
        return float(np.max(kinks))
    if not np.any(y > 0):
        return float(np.min(kinks))
    cand = np.unique(kinks)
    # convex piecewise linear, so the minimum is attained at a breakpoint
    vals = (c[None, :] * np.maximum(a[None, :] - y[None, :] * (t[None, :] + cand[:, None]), 0.0)).sum(axis=1)
    best = vals.min()
    opt = cand[vals <= best + 1e-13 * max(1.0, abs(best))]
    return float(0.5 * (opt[0] + opt[-1]))


_SETTINGS = dict(verbose=False, tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11,
                 tol_ktratio=1e-9, max_iter=200)


def _interior_point(X, y, a, c, fit_intercept):
    n, d = X.shape
    nb = 1 if fit_intercept else 0
    nv = d + nb + n
    P = sparse.diags(np.r_[np.ones(d), np.zeros(nb + n)], format="csc")
    q = np.r_[np.zeros(d + nb), c]
    blocks = [sparse.csc_matrix(-(y[:, None] * X))]
    if fit_intercept:
        blocks.append(sparse.csc_matrix(-y[:, None]))
    eye = sparse.identity(n, format="csc")
    A = sparse.vstack([sparse.hstack(blocks + [-eye]),
                       sparse.hstack([sparse.csc_matrix((n, d + nb)), -eye])], format="csc")
    rhs = np.r_[-a, np.zeros(n)]
    settings = clarabel.DefaultSettings()
    for key, val in _SETTINGS.items():
        setattr(settings, key, val)
    sol = clarabel.DefaultSolver(sparse.triu(P, format="csc"), q, A, rhs,
                                 [clarabel.NonnegativeConeT(2 * n)], settings).solve()
    x = np.asarray(sol.x)
    if x.shape != (nv,) or not np.all(np.isfinite(x)):
        raise RuntimeError(f"interior-point solve failed: {sol.status}")
    alpha = np.clip(np.asarray(sol.z)[:n], 0.0, c)
    return x[:d], (float(x[d]) if fit_intercept else 0.0), alpha, float(sol.obj_val_dual)


def solve(X, y, a, c, fit_intercept: bool = True) -> QPResult:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    n, d = X.shape
    if n == 0:
        return QPResult(np.zeros(d), 0.0, np.zeros(0), 0.0, 0.0, True)

    w0, b0, alpha0, dual0 = _interior_point(X, y, a, c, fit_intercept)
    if fit_intercept:
        b0 = best_intercept(X @ w0, y, a, c)
    obj0 = primal_value(w0, b0, X, y, a, c)

    for kink_tol in (1e-9, 1e-7, 1e-5):
        polished = _polish(w0, b0, alpha0, X, y, a, c, fit_intercept, kink_tol)
        if polished is not None and polished.objective <= obj0 + 1e-9 * max(1.0, abs(obj0)):
            return polished
    return QPResult(w0, b0, alpha0, obj0, min(dual0, obj0), False)


def _design(X, rows, fit_intercept):
    Z = X[rows]
    return np.hstack([Z, np.ones((len(rows), 1))]) if fit_intercept else Z


def _polish(w, b, alpha, X, y, a, c, fit_intercept, kink_tol):
    n, d = X.shape
    s = X @ w + b
    m = y * s - a
    scale = 1.0 + np.abs(a) + np.abs(s)
    frac = alpha / np.maximum(c, 1e-300)
    kink = np.abs(m) <= kink_tol * scale
    # strictly interior multipliers only occur at a kink
    kink |= (frac > 1e-6) & (frac < 1 - 1e-6) & (np.abs(m) <= 100 * kink_tol * scale)
    F = np.flatnonzero(kink)
    U = np.flatnonzero(~kink & (m < 0))
    L = np.flatnonzero(~kink & (m >= 0))

    p = d + (1 if fit_intercept else 0)
    A = y[F, None] * _design(X, F, fit_intercept)
    H = np.diag(np.r_[np.ones(d), np.zeros(p - d)])
    g = -(c[U] * y[U]) @ _design(X, U, fit_intercept)
    nf = len(F)
    K = np.zeros((p + nf, p + nf))
    K[:p, :p] = H
    K[:p, p:] = -A.T
    K[p:, :p] = A
    rhs = np.r_[-g, a[F]]
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    if np.linalg.norm(K @ sol - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        return None
    theta = sol[:p]
    w1 = theta[:d]
    b1 = float(theta[d]) if fit_intercept else 0.0
    s1 = X @ w1 + b1
    m1 = y * s1 - a
    tol_m = 1e-12 * (1.0 + np.abs(a) + np.abs(s1))
    if np.any(m1[U] > tol_m[U]) or np.any(m1[L] < -tol_m[L]):
        return None

    # multipliers: c on violated rows, boxed least squares on kink rows
    alpha1 = np.zeros(n)
    alpha1[U] = c[U]
    target = H @ theta + g
    if nf:
        fit = lsq_linear(A.T, target, bounds=(np.zeros(nf), c[F]), method="bvls", tol=1e-14)
        alpha1[F] = np.clip(fit.x, 0.0, c[F])
    resid = w1 - (alpha1 * y) @ X
    if fit_intercept:
        resid = np.append(resid, alpha1 @ y)
    xmax = float(np.abs(X).max()) if X.size else 1.0
    if np.linalg.norm(resid) > 1e-9 * (1.0 + np.linalg.norm(w1) + alpha1.sum() * max(xmax, 1.0)):
        return None
    obj = primal_value(w1, b1, X, y, a, c)
    return QPResult(w1, b1, alpha1, obj, obj, True)
