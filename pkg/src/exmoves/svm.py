"""Hinge-loss linear SVM with per-example costs.

Minimizes  ||w||^2 + sum_i cost_i * max(0, 1 - y_i (w.x_i + b))  with an
unregularized bias. The dual is solved by SMO (maximal-violating pair with
second-order working set selection); the bias is then re-fit exactly for the
final ``w`` because the primal is piecewise linear in ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSetError

TAU = 1e-12


@dataclass
class SVMSolution:
    weights: np.ndarray
    bias: float
    objective: float
    iterations: int
    alpha: np.ndarray


def primal_objective(X, y, cost, w, b) -> float:
    margins = y * (X @ w + b)
    return float(w @ w + np.sum(cost * np.maximum(0.0, 1.0 - margins)))


def best_bias(scores: np.ndarray, y: np.ndarray, cost: np.ndarray) -> float:
    """Exact minimizer over b of sum_i cost_i * hinge(y_i (s_i + b)).

    The loss is convex piecewise linear with kinks at b = y_i - s_i, so a
    weighted median over the kinks is optimal. Among an optimal plateau the
    midpoint is returned.
    """
    kinks = y - scores
    order = np.argsort(kinks, kind="stable")
    k = kinks[order]
    yo = y[order]
    c = cost[order]
    # slope just right of kink j: sum of -c over positives with kink > b, + c over negatives with kink <= b
    neg_after = np.cumsum(np.where(yo < 0, c, 0.0))
    pos_total = np.sum(c[yo > 0])
    pos_after = pos_total - np.cumsum(np.where(yo > 0, c, 0.0))
    slope_right = neg_after - pos_after
    j = int(np.searchsorted(slope_right, 0.0, side="left"))
    if j >= len(k):
        return float(k[-1])
    if slope_right[j] == 0.0 and j + 1 < len(k):
        return float(0.5 * (k[j] + k[j + 1]))
    return float(k[j])


def fit_hinge_svm(
    X: np.ndarray,
    y: np.ndarray,
    cost: np.ndarray,
    *,
    tol: float = 1e-6,
    max_iter: int | None = None,
) -> SVMSolution:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    cost = np.broadcast_to(np.asarray(cost, dtype=np.float64), y.shape).copy()
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DegenerateSetError("SVM training needs at least one positive and one negative example")
    if np.any(cost <= 0):
        raise ValueError("costs must be positive")
    n = len(y)
    # ||w||^2 + sum c_i xi_i is twice (1/2||w||^2 + sum (c_i/2) xi_i)
    upper = cost / 2.0
    K = X @ X.T
    Kdiag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a, Q = yy'K
    if max_iter is None:
        max_iter = max(100_000, 200 * n)
    pos = y > 0
    it = 0
    while it < max_iter:
        it += 1
        ygrad = -y * grad
        up = np.where(pos, alpha < upper, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < upper)
        cand = np.where(up, ygrad, -np.inf)
        i = int(np.argmax(cand))
        m_up = cand[i]
        m_low = np.min(np.where(low, ygrad, np.inf))
        if m_up - m_low < tol:
            break
        b_it = m_up - ygrad
        valid = low & (b_it > 0)
        a_it = Kdiag[i] + Kdiag - 2.0 * K[i]
        a_it = np.where(a_it > 0, a_it, TAU)
        gain = np.where(valid, -(b_it * b_it) / a_it, np.inf)
        j = int(np.argmin(gain))
        alpha_i, alpha_j = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        quad = max(a_it[j], TAU)
        # move along the feasible direction (yi * d_i = -yj * d_j) keeping y'a fixed
        step = b_it[j] / quad
        # d_i = yi * step, d_j = -yj * step; clip step to the box
        lim_i = (upper[i] - alpha_i) if yi > 0 else alpha_i
        lim_j = alpha_j if yj > 0 else (upper[j] - alpha_j)
        step = min(step, lim_i, lim_j)
        di = yi * step
        dj = -yj * step
        alpha[i] = min(max(alpha_i + di, 0.0), upper[i])
        alpha[j] = min(max(alpha_j + dj, 0.0), upper[j])
        di = alpha[i] - alpha_i
        dj = alpha[j] - alpha_j
        grad += y * (yi * di * K[i] + yj * dj * K[j])
    w = X.T @ (alpha * y)
    b = best_bias(X @ w, y, cost)
    return SVMSolution(w, b, primal_objective(X, y, cost, w, b), it, alpha)
