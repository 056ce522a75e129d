"""Bregman losses, population and empirical risks, and numeric certificates.

The logistic loss is measured in bits by default. With that unit the
strong-convexity constant 2/log 2 is exactly Pinsker's inequality; in nats
the matching constant is 2 (available as ``LOGISTIC_NATS``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .core import BayesOfInstance, LabeledDataset, TabularInstance, score_values, tabular_score_values
from .errors import FairGapError, InputError

__all__ = [
    "BregmanLoss",
    "SQUARE",
    "LOGISTIC",
    "LOGISTIC_NATS",
    "get_loss",
    "loss_eval",
    "potential",
    "potential_grad",
    "empirical_risk",
    "tabular_risk",
    "excess_risk",
    "strong_convexity_margin",
    "NegativeExcessRisk",
]

LN2 = math.log(2.0)


class NegativeExcessRisk(FairGapError):
    """Risk below the Bayes risk by more than rounding: the inputs disagree."""


@dataclass(frozen=True)
class BregmanLoss:
    kind: str
    kappa: float
    clamp_eps: float = 1e-12
    log_unit: float = LN2  # divisor turning natural logs into the reporting unit

    def __post_init__(self):
        if self.kind not in ("square", "logistic"):
            raise InputError(f"unknown loss kind {self.kind!r}")
        if not self.kappa > 0:
            raise InputError("kappa must be positive")

    @property
    def name(self) -> str:
        if self.kind == "logistic" and self.log_unit == 1.0:
            return "logistic_nats"
        return self.kind


SQUARE = BregmanLoss("square", 1.0)
LOGISTIC = BregmanLoss("logistic", 2.0 / LN2)
LOGISTIC_NATS = BregmanLoss("logistic", 2.0, log_unit=1.0)


def get_loss(name: str) -> BregmanLoss:
    try:
        return {"square": SQUARE, "logistic": LOGISTIC, "logistic_nats": LOGISTIC_NATS}[name]
    except KeyError:
        raise InputError(f"unknown loss {name!r}; expected 'square' or 'logistic'") from None


def loss_eval(loss: BregmanLoss, z, y):
    """l(z, y) for z, y in [0,1].

    For the logistic loss this is the binary relative entropy of y from z,
    which coincides with the usual cross-entropy whenever y is 0 or 1 and
    vanishes exactly when z = y.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if loss.kind == "square":
        out = (z - y) ** 2
    else:
        zc = np.clip(z, loss.clamp_eps, 1.0 - loss.clamp_eps)
        out = (rel_entr(y, zc) + rel_entr(1.0 - y, 1.0 - zc)) / loss.log_unit
    return out if out.ndim else float(out)


def potential(loss: BregmanLoss, z):
    """Convex generator g whose Bregman divergence is the loss."""
    z = np.asarray(z, dtype=float)
    if loss.kind == "square":
        return z * z
    return (_xlogx(z) + _xlogx(1.0 - z)) / loss.log_unit


def _xlogx(z):
    z = np.asarray(z, dtype=float)
    return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)


def potential_grad(loss: BregmanLoss, z):
    z = np.asarray(z, dtype=float)
    if loss.kind == "square":
        return 2.0 * z
    return np.log(z / (1.0 - z)) / loss.log_unit


def empirical_risk(loss: BregmanLoss, score, dataset: LabeledDataset) -> float:
    """Mean loss over the dataset; ``score`` may also be a precomputed vector."""
    f = score_values(score, dataset)
    return math.fsum(loss_eval(loss, f, dataset.labels)) / dataset.n


def tabular_risk(loss: BregmanLoss, score, instance: TabularInstance) -> float:
    f = tabular_score_values(instance, score)
    p = instance.p_y1
    per_cell = p * loss_eval(loss, f, np.ones_like(f)) + (1.0 - p) * loss_eval(loss, f, np.zeros_like(f))
    return math.fsum(instance.mass * per_cell)


def excess_risk(loss: BregmanLoss, score, instance: TabularInstance) -> float:
    ex = tabular_risk(loss, score, instance) - tabular_risk(loss, BayesOfInstance(instance), instance)
    if ex < -1e-10:
        raise NegativeExcessRisk(f"excess risk {ex!r} is below zero beyond rounding")
    return max(ex, 0.0)


def strong_convexity_margin(
    loss: BregmanLoss, grid_resolution: int, kappa: float | None = None, clamp_eps: float = 1e-4
) -> float:
    """min over a grid of l(z, y') - kappa (z - y')^2; nonnegative certifies strong convexity."""
    if grid_resolution < 16:
        raise InputError("grid_resolution must be at least 16")
    k = loss.kappa if kappa is None else float(kappa)
    g = np.linspace(clamp_eps, 1.0 - clamp_eps, grid_resolution)
    z, yp = np.meshgrid(g, g, indexing="ij")
    return float(np.min(loss_eval(loss, z, yp) - k * (z - yp) ** 2))
