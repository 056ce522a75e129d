"""Reference numpy implementations of the compiled kernels."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

STATUS_CONVERGED = 0
STATUS_MAX_ITERS = 1
STATUS_INCREASING = 2
STATUS_NONFINITE = 3


def cell_tallies(cell, weight, value, ncells):
    """Per-cell sums of ``weight`` and ``weight * value`` in index order."""
    W = np.bincount(cell, weights=weight, minlength=ncells).astype(float)
    S = np.bincount(cell, weights=weight * value, minlength=ncells).astype(float)
    return W, S


def prox_grad_logistic(X, y, lr, l1, max_iters, grad_tol, patience):
    """Full-batch proximal gradient on mean logistic loss (nats) + l1 * ||w||_1.

    Returns ``(w, b, iterations, status, objective_history)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    thr = lr * l1
    hist = []
    streak = 0
    status = STATUS_MAX_ITERS
    prev = 0.0
    it = 0
    with np.errstate(all="ignore"):
        while it < max_iters:
            z = X @ w + b
            r = expit(z) - y
            obj = float(np.mean(np.logaddexp(0.0, z) - y * z) + l1 * np.abs(w).sum())
            hist.append(obj)
            if not np.isfinite(obj):
                status = STATUS_NONFINITE
                break
            if it > 0 and obj > prev:
                streak += 1
                if streak >= patience:
                    status = STATUS_INCREASING
                    break
            else:
                streak = 0
            prev = obj
            step = w - lr * (X.T @ r) / n
            new_w = np.sign(step) * np.maximum(np.abs(step) - thr, 0.0) + 0.0
            new_b = b - lr * float(r.sum()) / n
            gmax = max(float(np.max(np.abs(new_w - w), initial=0.0)), abs(new_b - b))
            w, b = new_w, new_b
            it += 1
            if not np.isfinite(b):
                status = STATUS_NONFINITE
                break
            if gmax / lr < grad_tol:
                status = STATUS_CONVERGED
                break
    return w, b, it, status, np.asarray(hist)
