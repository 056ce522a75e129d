"""Unconstrained learners and the learning-curve harness.

Logistic regression is fitted by full-batch proximal gradient descent
starting from zero, with an L1 soft-threshold on the weights (never on the
bias). The optimisation objective uses natural logarithms; reported losses
go through :mod:`fairgap.losses`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from ._parallel import derived_rng, parallel_map
from .core import LabeledDataset, LinearCircle, Logistic, TabularInstance, check_finite, sample_tabular
from .errors import DivergenceDetected, EmptySample, InputError
from .gaps import BinningConfig, estimate_gaps
from .losses import empirical_risk, get_loss

__all__ = [
    "TrainConfig",
    "TrainResult",
    "CurveRow",
    "fit_logistic",
    "train_logistic",
    "fit_linear_circle",
    "learning_curve",
    "CURVE_HEADER",
]

CURVE_HEADER = ("n", "trial", "suf", "cal", "sep", "ind", "test_loss")
_TEST_STREAM = 0x7E57


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "logistic"
    learning_rate: float = 0.1
    max_iters: int = 5000
    grad_tol: float = 1e-7
    l1_lambda: float = 0.0
    feature_subset: tuple | None = None
    seed: int = 0
    patience: int = 50

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be positive")
        if not self.grad_tol > 0:
            raise InputError("grad_tol must be positive")
        if not self.l1_lambda >= 0:
            raise InputError("l1_lambda must be nonnegative")


@dataclass(frozen=True, eq=False)
class TrainResult:
    score: Logistic
    iterations: int
    converged: bool
    objective_history: np.ndarray


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # rows sorted by (features, label); equal rows are interchangeable, so any
    # permutation of the input yields the same summation order
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def fit_logistic(dataset: LabeledDataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Proximal gradient fit; weights outside ``feature_subset`` stay zero."""
    check_finite(dataset)
    X = dataset.features
    cols = np.arange(dataset.d) if config.feature_subset is None else np.asarray(config.feature_subset, dtype=int)
    if cols.size and (cols.min() < 0 or cols.max() >= dataset.d):
        raise InputError("feature_subset index out of range")
    Xs = X[:, cols]
    y = dataset.labels.astype(float)
    order = _canonical_order(Xs, y)
    w, b, steps, status, hist = kernels.prox_grad_logistic(
        Xs[order], y[order], config.learning_rate, config.l1_lambda, config.max_iters, config.grad_tol, config.patience
    )
    if status == kernels.STATUS_INCREASING:
        raise DivergenceDetected(steps, f"objective rose for {config.patience} consecutive steps")
    if status == kernels.STATUS_NONFINITE:
        raise DivergenceDetected(steps, "objective or parameters became non-finite")
    full = np.zeros(dataset.d)
    full[cols] = w
    return TrainResult(
        score=Logistic(full, b),
        iterations=steps,
        converged=status == kernels.STATUS_CONVERGED,
        objective_history=hist,
    )


def train_logistic(dataset: LabeledDataset, config: TrainConfig = TrainConfig()) -> Logistic:
    return fit_logistic(dataset, config).score


def fit_linear_circle(dataset_or_X, y=None) -> np.ndarray:
    """Least-squares theta for f_u(x) = 1/2 + <u, x>/4.

    Solves (1/16) G u = (1/4) sum x (y - 1/2) with G the Gram matrix, using
    the pseudo-inverse so a singular G yields the min-norm solution.
    """
    if y is None:
        X = np.asarray(dataset_or_X.features, dtype=float)
        y = dataset_or_X.labels
    else:
        X = np.asarray(dataset_or_X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptySample("no samples to fit")
    gram = X.T @ X
    rhs = X.T @ (y - 0.5)
    return 4.0 * (np.linalg.pinv(gram) @ rhs)


@dataclass(frozen=True)
class CurveRow:
    n: int
    trial: int
    suf: float
    cal: float
    sep: float
    ind: float
    test_loss: float


def _draw(source, n: int, rng: np.random.Generator, w):
    from .synth import CircleInstance, sample_circle_rng

    if isinstance(source, TabularInstance):
        return sample_tabular(source, n, rng)
    if isinstance(source, CircleInstance):
        return sample_circle_rng(source, w, n, rng)
    raise InputError(f"unsupported learning-curve source {type(source).__name__}")


def _fit(source, train: LabeledDataset, config: TrainConfig):
    from .synth import CircleInstance

    if config.loss == "square":
        if not isinstance(source, CircleInstance):
            raise InputError("square-loss training is available for circle data only")
        theta = fit_linear_circle(train)
        norm = float(np.linalg.norm(theta))
        if norm > 2.0:
            # keep the score inside [0,1]; rare at the sample sizes of interest
            theta = theta * (2.0 / norm)
        return LinearCircle(theta)
    return train_logistic(train, config)


def learning_curve(
    source,
    n_grid: Sequence[int],
    trials: int,
    config: TrainConfig = TrainConfig(),
    test_n: int = 20000,
    binning: BinningConfig = BinningConfig(),
    w=None,
) -> list[CurveRow]:
    """Train on growing samples and audit each fit on one shared test set.

    ``w`` is the attribute direction for circle sources (default: theta
    rotated by 90 degrees). Trial seeds derive from ``(config.seed, n, trial)``.
    """
    grid = [int(n) for n in n_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise InputError("n_grid must be strictly ascending positive integers")
    if trials < 1:
        raise InputError("trials must be at least 1")
    if w is None and not isinstance(source, TabularInstance):
        th = np.asarray(source.theta, dtype=float)
        w = np.array([-th[1], th[0]])
    loss = get_loss(config.loss)
    test = _draw(source, test_n, derived_rng(config.seed, _TEST_STREAM, test_n), w)

    def run(job):
        n, t = job
        train = _draw(source, n, derived_rng(config.seed, n, t), w)
        score = _fit(source, train, config)
        rep = estimate_gaps(test, score, binning, loss_name=loss.name)
        return CurveRow(n, t, rep.suf, rep.cal, rep.sep, rep.ind, empirical_risk(loss, score, test))

    return parallel_map(run, [(n, t) for n in grid for t in range(trials)])
