"""Domain types: labeled datasets, exact tabular worlds, scores and reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    GroupWithZeroMass,
    InvalidInstance,
    MissingGroup,
    NonBinaryLabel,
    NonFiniteFeature,
    UnknownSupportPoint,
    UnsupportedScoreVariant,
    ValueOutOfRange,
)

__all__ = [
    "LabeledDataset",
    "TabularInstance",
    "Score",
    "Constant",
    "LinearCircle",
    "Logistic",
    "Table",
    "BayesOfInstance",
    "GroupStats",
    "BoundVerdict",
    "GapReport",
    "validate_dataset",
    "dataset_from_arrays",
    "group_stats",
    "tabular_group_stats",
    "uncalibrated_bayes",
    "tabular_score_values",
    "score_values",
    "sample_tabular",
    "one_hot_ids",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Features, binary labels and dense group ids.

    ``group_labels[k]`` is the original attribute value that received id ``k``.
    """

    features: np.ndarray
    labels: np.ndarray
    attributes: np.ndarray
    group_labels: tuple

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def K(self) -> int:
        return len(self.group_labels)


def _check_label(row: int, value) -> int:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise NonBinaryLabel(row, value) from None
    if v == 0.0:
        return 0
    if v == 1.0:
        return 1
    raise NonBinaryLabel(row, value)


def validate_dataset(rows: Iterable[tuple[Sequence[float], Any, Hashable]]) -> LabeledDataset:
    """Build a dataset from ``(features, label, attribute)`` rows.

    Attribute values are densified in order of first appearance.
    """
    rows = list(rows)
    if not rows:
        raise EmptyDataset("dataset has no rows")
    d = None
    feats, labels, attrs = [], [], []
    index: dict[Hashable, int] = {}
    for i, (x, y, a) in enumerate(rows):
        x = np.asarray(x, dtype=float).ravel()
        if d is None:
            d = x.shape[0]
            if d < 1:
                raise DimensionMismatch(i, 1, 0)
        elif x.shape[0] != d:
            raise DimensionMismatch(i, d, x.shape[0])
        feats.append(x)
        labels.append(_check_label(i, y))
        attrs.append(index.setdefault(a, len(index)))
    return LabeledDataset(
        features=_frozen(np.vstack(feats)),
        labels=_frozen(np.asarray(labels, dtype=np.int64)),
        attributes=_frozen(np.asarray(attrs, dtype=np.int64)),
        group_labels=tuple(index),
    )


def dataset_from_arrays(
    features, labels, attributes, group_order: Sequence | None = None, allow_empty_groups: bool = False
) -> LabeledDataset:
    """Vectorized constructor.

    Without ``group_order`` attribute values are densified by first appearance.
    With it, value ``group_order[k]`` becomes id ``k`` and every listed group
    must occur at least once unless ``allow_empty_groups`` is set (synthetic
    generators use this so that ids keep their meaning at tiny n).
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    a = np.asarray(attributes)
    n = y.shape[0]
    if n == 0:
        raise EmptyDataset("dataset has no rows")
    if X.shape[0] != n or a.shape[0] != n:
        raise DimensionMismatch(min(X.shape[0], a.shape[0], n), n, min(X.shape[0], a.shape[0]))
    if X.shape[1] < 1:
        raise DimensionMismatch(0, 1, 0)
    yf = y.astype(float) if y.dtype != object else np.array([float(v) for v in y])
    bad = np.flatnonzero((yf != 0.0) & (yf != 1.0))
    if bad.size:
        raise NonBinaryLabel(int(bad[0]), y[bad[0]])
    if group_order is None:
        _, first, inv = np.unique(a, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        ids = rank[inv.ravel()]
        labels_out = tuple(a[first[order]].tolist())
    else:
        lookup = {g: k for k, g in enumerate(group_order)}
        try:
            ids = np.array([lookup[v] for v in a.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise InvalidInstance(f"attribute value {exc.args[0]!r} not in group order") from None
        counts = np.bincount(ids, minlength=len(lookup))
        empty = np.flatnonzero(counts == 0)
        if empty.size and not allow_empty_groups:
            raise MissingGroup(group_order[int(empty[0])])
        labels_out = tuple(group_order)
    return LabeledDataset(
        features=_frozen(X.astype(float, copy=True)),
        labels=_frozen(yf.astype(np.int64)),
        attributes=_frozen(np.asarray(ids, dtype=np.int64)),
        group_labels=labels_out,
    )


def check_finite(dataset: LabeledDataset) -> None:
    bad = np.flatnonzero(~np.isfinite(dataset.features).all(axis=1))
    if bad.size:
        raise NonFiniteFeature(int(bad[0]))


# --------------------------------------------------------------------------
# exact tabular worlds


@dataclass(frozen=True, eq=False)
class TabularInstance:
    """A finite joint law of (X, A) together with P(Y=1 | x, a).

    ``x_values`` lists the distinct x ids in sorted order; one-hot features
    produced by :func:`sample_tabular` follow that order.
    """

    x_ids: np.ndarray
    a_ids: np.ndarray
    mass: np.ndarray
    p_y1: np.ndarray
    K: int
    x_values: tuple = field(repr=False)

    @classmethod
    def from_support(cls, support: Iterable, num_groups: int | None = None) -> "TabularInstance":
        """``support`` holds ``(x_id, a_id, mass, p_y1)`` tuples or dicts with those keys."""
        xs, as_, ms, ps = [], [], [], []
        for item in support:
            if isinstance(item, Mapping):
                x, a, m, p = item["x"], item["a"], item["mass"], item["p_y1"]
            else:
                x, a, m, p = item
            xs.append(x)
            as_.append(a)
            ms.append(float(m))
            ps.append(float(p))
        if not xs:
            raise InvalidInstance("empty support")
        a_arr = np.asarray(as_)
        if not np.issubdtype(a_arr.dtype, np.integer) or a_arr.min() < 0:
            raise InvalidInstance("group ids must be nonnegative integers")
        K = int(a_arr.max()) + 1 if num_groups is None else int(num_groups)
        if a_arr.max() >= K:
            raise InvalidInstance("group id exceeds num_groups")
        m = np.asarray(ms)
        p = np.asarray(ps)
        if not (np.all(np.isfinite(m)) and np.all(m >= 0)):
            raise InvalidInstance("masses must be finite and nonnegative")
        if abs(math.fsum(ms) - 1.0) > 1e-12:
            raise InvalidInstance(f"masses sum to {math.fsum(ms)!r}, not 1")
        if not (np.all(p >= 0) and np.all(p <= 1)):
            raise InvalidInstance("p_y1 must lie in [0, 1]")
        pairs = set(zip(xs, a_arr.tolist()))
        if len(pairs) != len(xs):
            raise InvalidInstance("duplicate (x, a) pair in support")
        x_values = tuple(sorted(set(xs)))
        return cls(
            x_ids=_frozen(np.asarray(xs)),
            a_ids=_frozen(a_arr.astype(np.int64)),
            mass=_frozen(m),
            p_y1=_frozen(p),
            K=K,
            x_values=x_values,
        )

    def x_index(self) -> np.ndarray:
        """Position of each support cell's x id within ``x_values``."""
        lookup = {x: i for i, x in enumerate(self.x_values)}
        return np.array([lookup[x] for x in self.x_ids.tolist()], dtype=np.int64)

    def to_support(self) -> list[dict]:
        return [
            {"x": x, "a": int(a), "mass": float(m), "p_y1": float(p)}
            for x, a, m, p in zip(self.x_ids.tolist(), self.a_ids, self.mass, self.p_y1)
        ]


# --------------------------------------------------------------------------
# scores


class Score:
    """Attribute-blind score: maps an ``(n, d)`` feature array into [0,1]."""

    def __call__(self, features: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Score):
    c: float

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ValueOutOfRange(f"constant score {self.c} outside [0,1]")

    def __call__(self, features):
        return np.full(np.asarray(features).shape[0], float(self.c))


@dataclass(frozen=True, eq=False)
class LinearCircle(Score):
    """f(x) = 1/2 + <theta, x>/4 on unit-norm 2-vectors."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float).reshape(2)
        if np.linalg.norm(t) > 2.0 + 1e-12:
            raise ValueOutOfRange("LinearCircle needs ||theta|| <= 2")
        object.__setattr__(self, "theta", _frozen(t.copy()))

    def __call__(self, features):
        x = np.asarray(features, dtype=float)
        return np.clip(0.5 + (x @ self.theta) / 4.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Logistic(Score):
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=float).ravel().copy()))
        object.__setattr__(self, "bias", float(self.bias))

    def logits(self, features):
        return np.asarray(features, dtype=float) @ self.weights + self.bias

    def __call__(self, features):
        from scipy.special import expit

        return expit(self.logits(features))


@dataclass(frozen=True, eq=False)
class Table(Score):
    """Score defined on a finite set of x ids.

    Applied to a feature array, rows are read as one-hot codes over the
    sorted keys (the encoding produced by :func:`sample_tabular`).
    """

    values: Mapping

    def __post_init__(self):
        vals = dict(self.values)
        for k, v in vals.items():
            if not 0.0 <= float(v) <= 1.0:
                raise ValueOutOfRange(f"table value {v} for x={k!r} outside [0,1]")
        object.__setattr__(self, "values", {k: float(v) for k, v in vals.items()})

    @property
    def keys(self) -> tuple:
        return tuple(sorted(self.values))

    def lookup(self, x_ids) -> np.ndarray:
        out = np.empty(len(x_ids))
        for i, x in enumerate(x_ids):
            try:
                out[i] = self.values[x]
            except KeyError:
                raise UnknownSupportPoint(x) from None
        return out

    def __call__(self, features):
        keys = self.keys
        X = np.asarray(features, dtype=float)
        if X.shape[1] != len(keys):
            raise DimensionMismatch(0, len(keys), X.shape[1])
        idx = np.argmax(X, axis=1)
        table = np.array([self.values[k] for k in keys])
        return table[idx]


@dataclass(frozen=True, eq=False)
class BayesOfInstance:
    """Calibrated Bayes score E[Y | X=x, A=a] of a tabular instance.

    This is the only score that sees the attribute, hence its two-argument
    signature; it deliberately does not subclass :class:`Score`.
    """

    instance: TabularInstance

    def evaluate(self, x_ids, a_ids) -> np.ndarray:
        inst = self.instance
        lookup = {(x, int(a)): p for x, a, p in zip(inst.x_ids.tolist(), inst.a_ids, inst.p_y1)}
        out = np.empty(len(x_ids))
        for i, (x, a) in enumerate(zip(x_ids, a_ids)):
            try:
                out[i] = lookup[(x, int(a))]
            except KeyError:
                raise UnknownSupportPoint(x) from None
        return out

    def on_dataset(self, dataset: LabeledDataset) -> np.ndarray:
        """Evaluate on a dataset whose features one-hot encode ``x_values``."""
        xv = self.instance.x_values
        idx = np.argmax(dataset.features, axis=1)
        return self.evaluate([xv[i] for i in idx], dataset.attributes)


def score_values(score, dataset: LabeledDataset) -> np.ndarray:
    """Evaluate ``score`` on a dataset; a precomputed vector passes through."""
    if isinstance(score, BayesOfInstance):
        return score.on_dataset(dataset)
    if isinstance(score, Score):
        return np.asarray(score(dataset.features), dtype=float)
    vals = np.asarray(score, dtype=float)
    if vals.shape != (dataset.n,):
        raise DimensionMismatch(0, dataset.n, vals.shape[0] if vals.ndim else 0)
    return vals


def uncalibrated_bayes(instance: TabularInstance) -> Table:
    """f^U(x) = E[Y | X=x] as a table over the instance's x ids."""
    xi = instance.x_index()
    nx = len(instance.x_values)
    w = np.bincount(xi, weights=instance.mass, minlength=nx)
    s = np.bincount(xi, weights=instance.mass * instance.p_y1, minlength=nx)
    # zero-mass x values still need an entry; use the unweighted mean there
    plain = np.bincount(xi, weights=instance.p_y1, minlength=nx) / np.bincount(xi, minlength=nx)
    vals = np.where(w > 0, s / np.where(w > 0, w, 1.0), plain)
    return Table({x: float(np.clip(v, 0.0, 1.0)) for x, v in zip(instance.x_values, vals)})


def tabular_score_values(instance: TabularInstance, score) -> np.ndarray:
    """Score value on every support cell of ``instance``."""
    n = instance.mass.shape[0]
    if isinstance(score, BayesOfInstance):
        if score.instance is not instance:
            return score.evaluate(instance.x_ids.tolist(), instance.a_ids)
        return np.array(instance.p_y1, dtype=float)
    if isinstance(score, Constant):
        return np.full(n, float(score.c))
    if isinstance(score, Table):
        return score.lookup(instance.x_ids.tolist())
    raise UnsupportedScoreVariant(f"{type(score).__name__} cannot be evaluated on a tabular instance")


def one_hot_ids(idx: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((idx.shape[0], width))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out


def sample_tabular(instance: TabularInstance, n: int, rng: np.random.Generator) -> LabeledDataset:
    """Draw ``n`` i.i.d. samples; features one-hot encode ``x_values``.

    Group ids equal the instance's ``a_ids`` (no first-appearance remap).
    """
    cells = rng.choice(instance.mass.shape[0], size=n, p=instance.mass / instance.mass.sum())
    y = (rng.random(n) < instance.p_y1[cells]).astype(np.int64)
    X = one_hot_ids(instance.x_index()[cells], len(instance.x_values))
    return dataset_from_arrays(
        X, y, instance.a_ids[cells], group_order=list(range(instance.K)), allow_empty_groups=True
    )


# --------------------------------------------------------------------------
# group statistics


@dataclass(frozen=True, eq=False)
class GroupStats:
    p_a: np.ndarray
    q_a: np.ndarray
    q_bar: float


def group_stats(dataset: LabeledDataset) -> GroupStats:
    K, n = dataset.K, dataset.n
    counts = np.bincount(dataset.attributes, minlength=K).astype(float)
    pos = np.bincount(dataset.attributes, weights=dataset.labels, minlength=K)
    return GroupStats(
        p_a=_frozen(counts / n),
        q_a=_frozen(np.where(counts > 0, pos / np.where(counts > 0, counts, 1.0), 0.0)),
        q_bar=float(dataset.labels.sum()) / n,
    )


def tabular_group_stats(instance: TabularInstance) -> GroupStats:
    K = instance.K
    p_a = np.array([math.fsum(instance.mass[instance.a_ids == a]) for a in range(K)])
    for a in range(K):
        if p_a[a] <= 0.0:
            raise GroupWithZeroMass(a)
    mp = instance.mass * instance.p_y1
    s_a = np.array([math.fsum(mp[instance.a_ids == a]) for a in range(K)])
    return GroupStats(p_a=_frozen(p_a), q_a=_frozen(s_a / p_a), q_bar=math.fsum(mp))


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class BoundVerdict:
    value: float
    satisfied: bool
    slack: float


@dataclass(frozen=True, eq=False)
class GapReport:
    suf: float
    cal: float
    sep: float
    ind: float
    per_group_suf: np.ndarray
    per_group_cal: np.ndarray
    single_group_cal: np.ndarray
    excess_risk: float | None = None
    bounds: Mapping[str, BoundVerdict] = field(default_factory=dict)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def gap_dict(self) -> dict:
        return {
            "suf": self.suf,
            "cal": self.cal,
            "sep": self.sep,
            "ind": self.ind,
            "per_group_suf": [float(v) for v in self.per_group_suf],
            "per_group_cal": [float(v) for v in self.per_group_cal],
            "single_group_cal": [float(v) for v in self.single_group_cal],
            "excess_risk": self.excess_risk,
        }
