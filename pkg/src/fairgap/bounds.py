"""Bound constants, the bound catalog, and verdicts against measured gaps."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import (
    BayesOfInstance,
    BoundVerdict,
    GapReport,
    TabularInstance,
    Table,
    tabular_group_stats,
    uncalibrated_bayes,
)
from .errors import (
    DegenerateGroupLabel,
    DegenerateLabel,
    InputError,
    MissingExcessRisk,
    NonpositiveKappa,
    NotSquareLoss,
    ZeroGroupMass,
)
from .losses import SQUARE, BregmanLoss, excess_risk, tabular_risk

__all__ = [
    "suf_cal_upper",
    "SeparationConstants",
    "separation_constants",
    "conditional_mutual_information",
    "tao_suf_upper",
    "decomposition",
    "bayes_conditional_means",
    "BoundEntry",
    "BoundCatalog",
    "build_catalog",
    "instance_catalog",
    "attach_verdicts",
    "random_instance",
    "random_table_score",
]


def suf_cal_upper(excess: float, kappa: float, p_a=None) -> dict:
    """Upper bounds on the gaps implied by an excess risk.

    ``average`` bounds max(suf, cal). With group masses, ``per_group`` bounds
    the per-group gaps and ``single_group`` uses the constant 4/sqrt(kappa)
    obtained from p_a * Delta^a <= suf.
    """
    if not kappa > 0:
        raise NonpositiveKappa(f"kappa must be positive, got {kappa!r}")
    if not excess >= 0:
        raise InputError(f"excess risk must be nonnegative, got {excess!r}")
    out: dict[str, Any] = {"average": 4.0 * math.sqrt(excess / kappa)}
    if p_a is not None:
        p = np.atleast_1d(np.asarray(p_a, dtype=float))
        if np.any(p <= 0) or np.any(p > 1):
            raise ZeroGroupMass("group masses must lie in (0, 1]")
        out["per_group"] = 2.0 * np.sqrt(excess / (p * kappa))
        out["single_group"] = (4.0 / math.sqrt(kappa)) * math.sqrt(excess) / p
    return out


@dataclass(frozen=True)
class SeparationConstants:
    """Base-rate spread Q_A and normalised noise C_fB of an instance."""

    Q_A: float
    C_fB: float

    def sep_lower_at(self, excess: float, kappa: float) -> float:
        return self.C_fB * self.Q_A - 2.0 * math.sqrt(excess / kappa)

    def ind_lower_at(self, excess: float, kappa: float) -> float:
        return self.Q_A - 2.0 * math.sqrt(excess / kappa)


def separation_constants(instance: TabularInstance) -> SeparationConstants:
    st = tabular_group_stats(instance)
    var_y = st.q_bar * (1.0 - st.q_bar)
    if var_y <= 0.0:
        raise DegenerateLabel("Var[Y] = 0")
    q_spread = math.fsum(st.p_a * np.abs(st.q_bar - st.q_a))
    noise = math.fsum(instance.mass * instance.p_y1 * (1.0 - instance.p_y1))
    return SeparationConstants(Q_A=q_spread, C_fB=noise / var_y)


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        u = np.where(p < 1, -(1 - p) * np.log(np.where(p < 1, 1 - p, 1.0)), 0.0)
    return t + u


def conditional_mutual_information(instance: TabularInstance, unit: str = "nats") -> float:
    """I(Y; A | X) = sum_x P(x) [H(Y|x) - sum_a P(a|x) H(Y|x,a)]."""
    xi = instance.x_index()
    nx = len(instance.x_values)
    m = instance.mass
    px = np.array([math.fsum(m[xi == j]) for j in range(nx)])
    fu = np.array([math.fsum(m[xi == j] * instance.p_y1[xi == j]) for j in range(nx)])
    fu = np.where(px > 0, fu / np.where(px > 0, px, 1.0), 0.0)
    h_x = math.fsum(px * _binary_entropy(fu))
    h_xa = math.fsum(m * _binary_entropy(instance.p_y1))
    info = max(h_x - h_xa, 0.0)
    if unit == "nats":
        return info
    if unit == "bits":
        return info / math.log(2.0)
    raise InputError(f"unit must be 'nats' or 'bits', got {unit!r}")


def tao_suf_upper(instance: TabularInstance, unit: str = "nats") -> float:
    """sqrt(2 log 2 * I(Y;A|X)), bounding the sufficiency gap of f^U."""
    return math.sqrt(2.0 * math.log(2.0) * conditional_mutual_information(instance, unit))


def decomposition(
    instance: TabularInstance, score, class_min_risk: float, loss: BregmanLoss = SQUARE
) -> dict:
    """Split the square-loss excess risk into estimation, approximation and attribute terms."""
    if loss.kind != "square":
        raise NotSquareLoss("the decomposition holds for the square loss only")
    fu = uncalibrated_bayes(instance)
    risk = tabular_risk(loss, score, instance)
    risk_u = tabular_risk(loss, fu, instance)
    # E_X Var_A[f^B | X]: mass-weighted squared deviation of f^B from f^U at the same x
    dev = instance.p_y1 - fu.lookup(instance.x_ids.tolist())
    term_iii = math.fsum(instance.mass * dev * dev)
    term_i = risk - class_min_risk
    term_ii = class_min_risk - risk_u
    ex = excess_risk(loss, score, instance)
    return {
        "term_i": term_i,
        "term_ii": term_ii,
        "term_iii": term_iii,
        "excess": ex,
        "sum_check": abs(term_i + term_ii + term_iii - ex),
    }


def bayes_conditional_means(instance: TabularInstance) -> dict:
    """E[f^B | Y, A] and E[f^B | Y] through Z_A = E[(f^B)^2 | A]."""
    st = tabular_group_stats(instance)
    K = instance.K
    for g in range(K):
        if st.q_a[g] <= 0.0 or st.q_a[g] >= 1.0:
            raise DegenerateGroupLabel(g)
    sq = instance.mass * instance.p_y1**2
    Z_a = np.array([math.fsum(sq[instance.a_ids == g]) for g in range(K)]) / st.p_a
    Z_bar = math.fsum(sq)
    q, qb = st.q_a, st.q_bar
    return {
        "Z_a": Z_a,
        "Z_bar": Z_bar,
        "y1_a": Z_a / q,
        "y0_a": (q - Z_a) / (1.0 - q),
        "y1": Z_bar / qb,
        "y0": (qb - Z_bar) / (1.0 - qb),
    }


# --------------------------------------------------------------------------
# catalog and verdicts

UPPER, LOWER, IDENTITY = "upper", "lower", "identity"


@dataclass(frozen=True)
class BoundEntry:
    value: float
    kind: str
    inputs: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BoundCatalog:
    entries: Mapping[str, BoundEntry]

    def __getitem__(self, name: str) -> BoundEntry:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def to_dict(self) -> dict:
        return {
            k: {"value": e.value, "kind": e.kind, "inputs": dict(e.inputs)}
            for k, e in sorted(self.entries.items())
        }


def build_catalog(
    kappa: float,
    excess: float | None,
    p_a=None,
    constants: SeparationConstants | None = None,
    Q_A: float | None = None,
    tao: float | None = None,
    decomp: Mapping | None = None,
) -> BoundCatalog:
    """Assemble bound values from their ingredients.

    Upper bounds and the risk-driven lower bounds need ``excess``. The base-rate
    spread may be supplied alone through ``Q_A`` when the noise constant is
    unknown (empirical audits), which yields only the independence bound.
    """
    if excess is None:
        raise MissingExcessRisk("bounds driven by excess risk need an excess value")
    e: dict[str, BoundEntry] = {}
    ub = suf_cal_upper(excess, kappa, p_a)
    base = {"excess": excess, "kappa": kappa}
    e["suf_cal_upper"] = BoundEntry(ub["average"], UPPER, base)
    if p_a is not None:
        for g, p in enumerate(np.atleast_1d(p_a)):
            e[f"per_group_upper[{g}]"] = BoundEntry(float(ub["per_group"][g]), UPPER, {**base, "p_a": float(p)})
            e[f"single_group_upper[{g}]"] = BoundEntry(float(ub["single_group"][g]), UPPER, {**base, "p_a": float(p)})
    if constants is not None:
        inp = {**base, "Q_A": constants.Q_A, "C_fB": constants.C_fB}
        e["sep_lower"] = BoundEntry(constants.sep_lower_at(excess, kappa), LOWER, inp)
        e["ind_lower"] = BoundEntry(constants.ind_lower_at(excess, kappa), LOWER, inp)
    elif Q_A is not None:
        e["ind_lower"] = BoundEntry(Q_A - 2.0 * math.sqrt(excess / kappa), LOWER, {**base, "Q_A": Q_A})
    if tao is not None:
        e["tao_suf_upper"] = BoundEntry(tao, UPPER, {})
    if decomp is not None:
        e["decomposition"] = BoundEntry(float(decomp["sum_check"]), IDENTITY, {k: float(v) for k, v in decomp.items()})
    return BoundCatalog(e)


def instance_catalog(
    instance: TabularInstance, score, loss: BregmanLoss, with_tao: bool = False
) -> BoundCatalog:
    """Catalog with every quantity computed exactly on a tabular instance."""
    ex = excess_risk(loss, score, instance)
    st = tabular_group_stats(instance)
    try:
        consts = separation_constants(instance)
    except DegenerateLabel:
        consts = None
    decomp = None
    if loss.kind == "square":
        decomp = decomposition(instance, score, tabular_risk(loss, uncalibrated_bayes(instance), instance), loss)
    return build_catalog(
        loss.kappa,
        ex,
        p_a=st.p_a,
        constants=consts,
        tao=tao_suf_upper(instance) if with_tao else None,
        decomp=decomp,
    )


def _measured(report: GapReport, name: str) -> float:
    if name == "suf_cal_upper":
        return max(report.suf, report.cal)
    if name.startswith("per_group_upper["):
        g = int(name[len("per_group_upper[") : -1])
        return max(float(report.per_group_suf[g]), float(report.per_group_cal[g]))
    if name.startswith("single_group_upper["):
        g = int(name[len("single_group_upper[") : -1])
        return float(report.single_group_cal[g])
    if name == "sep_lower":
        return report.sep
    if name == "ind_lower":
        return report.ind
    if name == "tao_suf_upper":
        return report.suf
    raise KeyError(name)


def attach_verdicts(report: GapReport, catalog: BoundCatalog, tolerance: float = 1e-9) -> GapReport:
    """Compare each bound with the matching gap; identity entries are skipped."""
    needs_excess = any(
        e.kind == UPPER and n != "tao_suf_upper" for n, e in catalog.entries.items()
    )
    if needs_excess and report.excess_risk is None:
        raise MissingExcessRisk("report carries no excess risk for its upper bounds")
    out = {}
    for name, entry in sorted(catalog.entries.items()):
        if entry.kind == IDENTITY:
            continue
        gap = _measured(report, name)
        slack = entry.value - gap if entry.kind == UPPER else gap - entry.value
        out[name] = BoundVerdict(value=float(entry.value), satisfied=bool(slack >= -tolerance), slack=float(slack))
    meta = {**dict(report.metadata), "tolerance": tolerance}
    return dataclasses.replace(report, bounds=out, metadata=meta)


# --------------------------------------------------------------------------
# random worlds for soundness sweeps


def random_instance(
    rng: np.random.Generator,
    x_sizes=(2, 6),
    groups=(2, 3),
    p_range=(0.05, 0.95),
) -> TabularInstance:
    """|X| and K uniform on the given inclusive ranges; Dirichlet(1) masses."""
    nx = int(rng.integers(x_sizes[0], x_sizes[1] + 1))
    K = int(rng.integers(groups[0], groups[1] + 1))
    mass = rng.dirichlet(np.ones(nx * K))
    mass = mass / math.fsum(mass)
    p = rng.uniform(p_range[0], p_range[1], size=nx * K)
    support = [(x, a, mass[x * K + a], p[x * K + a]) for x in range(nx) for a in range(K)]
    return TabularInstance.from_support(support, num_groups=K)


def random_table_score(instance: TabularInstance, rng: np.random.Generator) -> Table:
    """Half the time values come from a coarse grid so several x share a level."""
    xs = instance.x_values
    if rng.random() < 0.5:
        vals = rng.choice(np.linspace(0.1, 0.9, 5), size=len(xs))
    else:
        vals = rng.uniform(0.0, 1.0, size=len(xs))
    return Table({x: float(v) for x, v in zip(xs, vals)})

