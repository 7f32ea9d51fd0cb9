"""Platt sigmoid fitting: p(y=1 | s) = 1 / (1 + exp(alpha * s + beta))."""

from __future__ import annotations

import numpy as np

from .errors import CalibrationError


def sigmoid_probability(scores, alpha: float, beta: float) -> np.ndarray:
    z = alpha * np.asarray(scores, dtype=np.float64) + beta
    # 1/(1+e^z) written to avoid overflow on either tail
    out = np.empty_like(z)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def _nll(scores, targets, alpha, beta) -> float:
    z = alpha * scores + beta
    # -[t log p + (1-t) log(1-p)] with p = 1/(1+e^z)
    return float(np.sum(np.where(z >= 0, targets * z + np.log1p(np.exp(-z)),
                                 (targets - 1.0) * z + np.log1p(np.exp(z)))))


def fit_platt(scores, labels, *, max_iter: int = 100, min_step: float = 1e-10,
              sigma: float = 1e-12, eps: float = 1e-5) -> tuple[float, float]:
    """Newton's method with backtracking on Platt's smoothed-target likelihood.

    ``labels`` are +1 / -1 (anything > 0 counts as positive). Targets are
    (N+ + 1)/(N+ + 2) for positives and 1/(N- + 2) for negatives, which keeps
    the optimum finite on separable scores.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    pos = np.asarray(labels).ravel() > 0
    if len(s) != len(pos):
        raise CalibrationError("scores and labels differ in length")
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("calibration needs both positive and negative examples")
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    alpha, beta = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = _nll(s, t, alpha, beta)
    for _ in range(max_iter):
        p = sigmoid_probability(s, alpha, beta)
        q = p * (1.0 - p)
        d1 = t - p
        g_a = float(np.dot(s, d1))
        g_b = float(np.sum(d1))
        if abs(g_a) < eps and abs(g_b) < eps:
            break
        h11 = float(np.dot(s * s, q)) + sigma
        h22 = float(np.sum(q)) + sigma
        h21 = float(np.dot(s, q))
        det = h11 * h22 - h21 * h21
        d_a = -(h22 * g_a - h21 * g_b) / det
        d_b = -(-h21 * g_a + h11 * g_b) / det
        gd = g_a * d_a + g_b * d_b
        step = 1.0
        while step >= min_step:
            na, nb = alpha + step * d_a, beta + step * d_b
            nf = _nll(s, t, na, nb)
            if nf < fval + 1e-4 * step * gd:
                alpha, beta, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return float(alpha), float(beta)
