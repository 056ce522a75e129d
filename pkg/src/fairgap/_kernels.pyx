# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_kernels_py`` holds the reference numpy versions."""

import numpy as np
from libc.math cimport exp, log, log1p, fabs, isfinite

cdef enum:
    C_CONVERGED = 0
    C_MAX_ITERS = 1
    C_INCREASING = 2
    C_NONFINITE = 3

STATUS_CONVERGED = C_CONVERGED
STATUS_MAX_ITERS = C_MAX_ITERS
STATUS_INCREASING = C_INCREASING
STATUS_NONFINITE = C_NONFINITE


def cell_tallies(const long long[::1] cell, const double[::1] weight,
                 const double[::1] value, Py_ssize_t ncells):
    """Per-cell sums of ``weight`` and ``weight * value`` in index order."""
    cdef Py_ssize_t i, c, n = cell.shape[0]
    W = np.zeros(ncells)
    S = np.zeros(ncells)
    cdef double[::1] w = W
    cdef double[::1] s = S
    with nogil:
        for i in range(n):
            c = cell[i]
            w[c] += weight[i]
            s[c] += weight[i] * value[i]
    return W, S


cdef inline double softplus(double z) nogil:
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def prox_grad_logistic(const double[:, ::1] X, const double[::1] y, double lr, double l1,
                       long max_iters, double grad_tol, long patience):
    """Full-batch proximal gradient on mean logistic loss (nats) + l1 * ||w||_1.

    Returns ``(w, b, steps, status, objective_history)``.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, j
    cdef long steps = 0, nhist = 0, streak = 0, status = C_MAX_ITERS
    cdef double b = 0.0, gb, z, r, loss, obj, prev = 0.0, step, nb, gmax, thr = lr * l1
    W = np.zeros(d)
    G = np.zeros(d)
    H = np.zeros(max_iters)
    cdef double[::1] w = W
    cdef double[::1] g = G
    cdef double[::1] hist = H
    with nogil:
        while steps < max_iters:
            for j in range(d):
                g[j] = 0.0
            gb = 0.0
            loss = 0.0
            for i in range(n):
                z = b
                for j in range(d):
                    z += X[i, j] * w[j]
                r = sigmoid(z) - y[i]
                loss += softplus(z) - y[i] * z
                gb += r
                for j in range(d):
                    g[j] += r * X[i, j]
            obj = loss / n
            for j in range(d):
                obj += l1 * fabs(w[j])
            hist[nhist] = obj
            nhist += 1
            if not isfinite(obj):
                status = C_NONFINITE
                break
            if steps > 0 and obj > prev:
                streak += 1
                if streak >= patience:
                    status = C_INCREASING
                    break
            else:
                streak = 0
            prev = obj
            gmax = 0.0
            for j in range(d):
                step = w[j] - lr * g[j] / n
                if step > thr:
                    step = step - thr
                elif step < -thr:
                    step = step + thr
                else:
                    step = 0.0
                if fabs(step - w[j]) > gmax:
                    gmax = fabs(step - w[j])
                w[j] = step
            nb = b - lr * gb / n
            if fabs(nb - b) > gmax:
                gmax = fabs(nb - b)
            b = nb
            steps += 1
            if not isfinite(b):
                status = C_NONFINITE
                break
            if gmax / lr < grad_tol:
                status = C_CONVERGED
                break
    return W, b, int(steps), int(status), H[:nhist].copy()
