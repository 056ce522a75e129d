"""Gap estimators.

Two evaluators share one output type:

* :func:`estimate_gaps` is the plug-in binning estimator for finite samples;
  E[Y | f] and E[Y | f, A] are replaced by positive rates within score buckets.
* :func:`exact_gaps_tabular` conditions exactly on the finitely many score
  levels of a tabular instance and serves as the oracle for the estimator.

All reductions go through ``math.fsum`` so results do not depend on sample
order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from . import kernels
from .core import (
    GapReport,
    LabeledDataset,
    TabularInstance,
    score_values,
    tabular_group_stats,
    tabular_score_values,
)
from .errors import EmptyBucketAll, InputError, ValueOutOfRange

__all__ = [
    "BinningConfig",
    "PlotRow",
    "assign_buckets",
    "estimate_gaps",
    "exact_gaps_tabular",
    "calibration_plot_data",
    "write_plot_csv",
    "PLOT_HEADER",
]

EQUAL_WIDTH = "equal_width"
QUANTILE = "quantile"
PLOT_HEADER = ("bucket", "group", "count", "positives", "rate", "ci_low", "ci_high")


@dataclass(frozen=True)
class BinningConfig:
    num_buckets: int = 10
    mode: str = EQUAL_WIDTH
    min_cell: int = 2

    def __post_init__(self):
        if self.num_buckets < 2:
            raise InputError("num_buckets must be at least 2")
        if self.mode not in (EQUAL_WIDTH, QUANTILE):
            raise InputError(f"binning mode must be {EQUAL_WIDTH!r} or {QUANTILE!r}")
        if self.min_cell < 1:
            raise InputError("min_cell must be positive")

    def as_dict(self) -> dict:
        return {"B": self.num_buckets, "mode": self.mode}


@dataclass(frozen=True)
class PlotRow:
    bucket: int
    group: int
    count: int
    positives: int
    rate: float
    ci_low: float
    ci_high: float


def _check_range(values: np.ndarray) -> None:
    bad = ~((values >= 0.0) & (values <= 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueOutOfRange(f"score value {values[i]!r} at index {i} outside [0,1]")


def assign_buckets(values, config: BinningConfig = BinningConfig()) -> np.ndarray:
    """Bucket id per score value.

    Equal width uses B half-open intervals with the last one closed. Quantile
    mode places interior boundaries at the empirical i/B quantiles (linear
    interpolation); a value equal to a boundary falls into the lower bucket.
    """
    v = np.asarray(values, dtype=float)
    _check_range(v)
    B = config.num_buckets
    if config.mode == EQUAL_WIDTH:
        return np.minimum(np.floor(v * B).astype(np.int64), B - 1)
    if v.size == 0:
        raise EmptyBucketAll("quantile buckets need at least one value")
    edges = np.quantile(v, np.arange(1, B) / B)
    return np.searchsorted(edges, v, side="left").astype(np.int64)


def _rate(num: np.ndarray, den: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, num / safe, fallback)


def _group_means(v, a, counts, empty=0.0):
    """Per-group averages; a group without samples reports ``empty``."""
    return np.array([math.fsum(v[a == g]) / c if c else empty for g, c in enumerate(counts)])


def _label_group_means(f, y, a, K):
    """Counts of each (y, a) cell, E[f | y, a] and E[f | y] on a sample."""
    count = np.zeros((2, K))
    mean_ya = np.zeros((2, K))
    mean_y = np.zeros(2)
    for yv in (0, 1):
        sel_y = y == yv
        tot = int(sel_y.sum())
        mean_y[yv] = math.fsum(f[sel_y]) / tot if tot else 0.0
        for g in range(K):
            sel = sel_y & (a == g)
            count[yv, g] = sel.sum()
            mean_ya[yv, g] = math.fsum(f[sel]) / count[yv, g] if count[yv, g] else mean_y[yv]
    return count, mean_ya, mean_y


def estimate_gaps(
    dataset: LabeledDataset,
    score,
    config: BinningConfig = BinningConfig(),
    excess_risk: float | None = None,
    loss_name: str | None = None,
) -> GapReport:
    """Binned plug-in estimates of every gap on a sample.

    ``score`` is a :class:`~fairgap.core.Score`, a ``BayesOfInstance`` or a
    precomputed vector of values. Separation and independence use group
    means directly and involve no binning.
    """
    f = score_values(score, dataset)
    _check_range(f)
    n, K, B = dataset.n, dataset.K, config.num_buckets
    y = dataset.labels.astype(float)
    a = dataset.attributes
    b = assign_buckets(f, config)

    cnt, pos = kernels.cell_tallies(b * K + a, np.ones(n), y, B * K)
    cnt, pos = cnt.reshape(B, K), pos.reshape(B, K)
    g_b = _rate(pos.sum(axis=1), cnt.sum(axis=1), np.zeros(B))
    # an empty (bucket, group) cell borrows the bucket rate, i.e. zero local gap
    g_ba = _rate(pos, cnt, g_b[:, None])

    dev_suf = np.abs(g_ba[b, a] - g_b[b])
    dev_cal = np.abs(f - g_ba[b, a])
    counts_a = np.bincount(a, minlength=K)
    pg_suf = _group_means(dev_suf, a, counts_a)
    pg_cal = _group_means(dev_cal, a, counts_a)

    count, mean_ya, mean_y = _label_group_means(f, y, a, K)
    sep = math.fsum((count * np.abs(mean_ya - mean_y[:, None])).ravel()) / n
    mean_all = math.fsum(f) / n
    mean_a = _group_means(f, a, counts_a, empty=mean_all)
    ind = math.fsum(counts_a * np.abs(mean_a - mean_all)) / n

    return GapReport(
        suf=_unit(math.fsum(dev_suf) / n),
        cal=_unit(math.fsum(dev_cal) / n),
        sep=_unit(sep),
        ind=_unit(ind),
        per_group_suf=np.clip(pg_suf, 0.0, 1.0),
        per_group_cal=np.clip(pg_cal, 0.0, 1.0),
        single_group_cal=np.clip(pg_suf, 0.0, 1.0),
        excess_risk=excess_risk,
        metadata={"binning": config.as_dict(), "min_cell": config.min_cell, "loss": loss_name, "n": n},
    )


def _unit(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def exact_gaps_tabular(instance: TabularInstance, score) -> GapReport:
    """Exact gaps of a Table, Constant or Bayes score on a tabular instance.

    Conditioning on f is done level by level over the score's distinct
    values, so cells sharing a value are pooled exactly.
    """
    v = tabular_score_values(instance, score)
    _check_range(v)
    stats = tabular_group_stats(instance)  # raises on an empty group
    K = instance.K
    m, p, a = instance.mass, instance.p_y1, instance.a_ids
    levels, lev = np.unique(v, return_inverse=True)
    L = levels.shape[0]
    W, S = kernels.cell_tallies(lev * K + a, m, p, L * K)
    W, S = W.reshape(L, K), S.reshape(L, K)
    ey_l = _rate(S.sum(axis=1), W.sum(axis=1), levels)
    ey_la = _rate(S, W, ey_l[:, None])
    t_suf = W * np.abs(ey_la - ey_l[:, None])
    t_cal = W * np.abs(levels[:, None] - ey_la)
    pg_suf = np.array([math.fsum(t_suf[:, g]) for g in range(K)]) / stats.p_a
    pg_cal = np.array([math.fsum(t_cal[:, g]) for g in range(K)]) / stats.p_a

    # (Y, A) cells carry mass m p for Y=1 and m (1 - p) for Y=0
    wy = np.vstack([m * (1.0 - p), m * p])
    mass_ya = np.zeros((2, K))
    mean_ya = np.zeros((2, K))
    mean_y = np.zeros(2)
    for yv in (0, 1):
        tot = math.fsum(wy[yv])
        mean_y[yv] = math.fsum(wy[yv] * v) / tot if tot > 0 else 0.0
        for g in range(K):
            sel = wy[yv] * (a == g)
            mass_ya[yv, g] = math.fsum(sel)
            mean_ya[yv, g] = math.fsum(sel * v) / mass_ya[yv, g] if mass_ya[yv, g] > 0 else mean_y[yv]
    sep = math.fsum((mass_ya * np.abs(mean_ya - mean_y[:, None])).ravel())
    ef = math.fsum(m * v)
    ef_a = np.array([math.fsum(m[a == g] * v[a == g]) for g in range(K)]) / stats.p_a
    ind = math.fsum(stats.p_a * np.abs(ef_a - ef))

    return GapReport(
        suf=_unit(math.fsum(t_suf.ravel())),
        cal=_unit(math.fsum(t_cal.ravel())),
        sep=_unit(sep),
        ind=_unit(ind),
        per_group_suf=np.clip(pg_suf, 0.0, 1.0),
        per_group_cal=np.clip(pg_cal, 0.0, 1.0),
        single_group_cal=np.clip(pg_suf, 0.0, 1.0),
        metadata={"binning": None, "loss": None, "n": None, "mode": "exact"},
    )


def calibration_plot_data(dataset: LabeledDataset, score, config: BinningConfig = BinningConfig()) -> list[PlotRow]:
    """Positive rate per (bucket, group) with 95% Wald intervals.

    Cells with fewer than ``min_cell`` samples are omitted. A rate of 0 or 1
    gives a zero-width interval, which is the formula's behaviour.
    """
    f = score_values(score, dataset)
    b = assign_buckets(f, config)
    K, B = dataset.K, config.num_buckets
    cnt, pos = kernels.cell_tallies(b * K + dataset.attributes, np.ones(dataset.n), dataset.labels, B * K)
    rows = []
    for bucket in range(B):
        for g in range(K):
            c = int(round(cnt[bucket * K + g]))
            if c < config.min_cell:
                continue
            k = int(round(pos[bucket * K + g]))
            rate = k / c
            half = 1.96 * math.sqrt(rate * (1.0 - rate) / c)
            rows.append(PlotRow(bucket, g, c, k, rate, max(0.0, rate - half), min(1.0, rate + half)))
    return rows


def write_plot_csv(rows: Iterable[PlotRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for r in rows:
        w.writerow([r.bucket, r.group, r.count, r.positives, repr(r.rate), repr(r.ci_low), repr(r.ci_high)])
