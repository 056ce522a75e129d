"""Backend selection for the hot loops.

The compiled extension is used when it imports cleanly; setting the
environment variable ``FAIRGAP_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FAIRGAP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

STATUS_CONVERGED = _kernels_py.STATUS_CONVERGED
STATUS_MAX_ITERS = _kernels_py.STATUS_MAX_ITERS
STATUS_INCREASING = _kernels_py.STATUS_INCREASING
STATUS_NONFINITE = _kernels_py.STATUS_NONFINITE

import numpy as np


def cell_tallies(cell, weight, value, ncells: int):
    """Sums of ``weight`` and ``weight * value`` per cell id."""
    return _impl.cell_tallies(
        np.ascontiguousarray(cell, dtype=np.int64),
        np.ascontiguousarray(weight, dtype=float),
        np.ascontiguousarray(value, dtype=float),
        int(ncells),
    )


def prox_grad_logistic(X, y, lr, l1, max_iters, grad_tol, patience=50):
    return _impl.prox_grad_logistic(
        np.ascontiguousarray(X, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        float(lr),
        float(l1),
        int(max_iters),
        float(grad_tol),
        int(patience),
    )


def available_backends() -> dict:
    """Every importable backend keyed by name (used by tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
