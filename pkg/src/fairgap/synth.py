"""Lower-bound constructions on the unit circle and their exact oracles.

Circle world: X is uniform on S^1, Y | X ~ Bernoulli(1/2 + <theta, X>/4), and
the attribute is A = 1{<w, X> >= 0}. A linear score f_u(x) = 1/2 + <u, x>/4
has level sets {x, reflection of x across u}, so every conditional
expectation given (f, A) is a one- or two-point average and the gaps admit
closed forms.

Closed forms (rotate so that theta_hat = r e1, theta = (a, b), and let s be
|<w, e2>|, alpha = arcsin s):

* a level pair is split between the groups exactly when |cos t| < s;
* suf = |b| s / (2 pi) = sqrt(Phi) |<w, n>| / (2 pi) with n normal to theta_hat;
* cal = (1/2 pi) [ (R/2) (G(pi/2+beta+alpha) - G(pi/2+beta-alpha)) + |r-a| cos alpha ]
  where R = ||theta_hat - theta||, beta = atan2(b, r - a) and G(u) is the
  integral of |cos| over [0, u];
* theta_hat = 0 gives suf = cal = |<theta, w>| / (2 pi).

With w orthogonal to theta_hat these reduce to sqrt(Phi)/(2 pi) and
||theta_hat - theta||/(2 pi); that orientation is the default when no w is
given (and w = theta when theta_hat = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import derived_rng, parallel_map
from .core import LabeledDataset, TabularInstance, dataset_from_arrays
from .errors import InputError, NonUnitTheta, PreconditionViolation, SpanViolation
from .erm import fit_linear_circle

__all__ = [
    "CircleInstance",
    "ProductInstance",
    "CircleQuantities",
    "sample_circle",
    "sample_circle_rng",
    "phi",
    "exact_circle_quantities",
    "quadrature_circle_gaps",
    "LbSummary",
    "lb_experiment",
    "sample_product",
    "ImbalanceRow",
    "imbalance_experiment",
    "kl_bound_check",
    "two_group_tabular_source",
    "unit",
]

TWO_PI = 2.0 * math.pi
_ZERO = 1e-14


def unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _check_unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(2)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
        raise NonUnitTheta(f"{name} must have unit norm, got {np.linalg.norm(v)!r}")
    return v


@dataclass(frozen=True, eq=False)
class CircleInstance:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _check_unit(self.theta, "theta"))


@dataclass(frozen=True, eq=False)
class ProductInstance:
    theta_alpha: np.ndarray
    theta_beta: np.ndarray
    p: float

    def __post_init__(self):
        object.__setattr__(self, "theta_alpha", _check_unit(self.theta_alpha, "theta_alpha"))
        object.__setattr__(self, "theta_beta", _check_unit(self.theta_beta, "theta_beta"))
        if not 0.0 < self.p < 0.5:
            raise PreconditionViolation(f"p must lie in (0, 1/2), got {self.p!r}")


# --------------------------------------------------------------------------
# sampling


def _circle_draw(theta: np.ndarray, n: int, rng: np.random.Generator):
    t = rng.uniform(0.0, TWO_PI, size=n)
    X = np.column_stack([np.cos(t), np.sin(t)])
    y = (rng.random(n) < 0.5 + (X @ theta) / 4.0).astype(np.int64)
    return X, y


def _side(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    # sign zero goes to group 1
    return (X @ w >= 0.0).astype(np.int64)


def sample_circle_rng(instance: CircleInstance, w, n: int, rng: np.random.Generator) -> LabeledDataset:
    w = _check_unit(w, "w")
    X, y = _circle_draw(instance.theta, n, rng)
    return dataset_from_arrays(X, y, _side(X, w), group_order=[0, 1], allow_empty_groups=True)


def sample_circle(instance: CircleInstance, w, n: int, seed: int) -> LabeledDataset:
    """n draws with attribute (1 + sign<w, X>)/2; reproducible per seed."""
    if n < 1:
        raise InputError("n must be positive")
    return sample_circle_rng(instance, w, n, np.random.default_rng(seed))


def sample_product(instance: ProductInstance, w_pair, n: int, seed: int) -> LabeledDataset:
    """Product world in R^4 with group id side + 2 (1 - Z), ids 0..3.

    Groups 0 and 1 (Z = 1) are the minority, each with mass p/2.
    """
    if n < 1:
        raise InputError("n must be positive")
    wa = _check_unit(w_pair[0], "w_alpha")
    wb = _check_unit(w_pair[1], "w_beta")
    rng = np.random.default_rng(seed)
    z = (rng.random(n) < instance.p).astype(np.int64)
    t = rng.uniform(0.0, TWO_PI, size=n)
    C = np.column_stack([np.cos(t), np.sin(t)])
    theta = np.where(z[:, None] == 1, instance.theta_alpha, instance.theta_beta)
    y = (rng.random(n) < 0.5 + np.einsum("ij,ij->i", C, theta) / 4.0).astype(np.int64)
    X = np.zeros((n, 4))
    X[z == 1, :2] = C[z == 1]
    X[z == 0, 2:] = C[z == 0]
    w = np.where(z[:, None] == 1, wa, wb)
    side = (np.einsum("ij,ij->i", C, w) >= 0.0).astype(np.int64)
    ids = side + 2 * (1 - z)
    return dataset_from_arrays(X, y, ids, group_order=[0, 1, 2, 3], allow_empty_groups=True)


# --------------------------------------------------------------------------
# closed forms


def phi(theta_hat, theta) -> float:
    """1 - <theta, theta_hat/|theta_hat|>^2, and 1 when theta_hat vanishes."""
    th = np.asarray(theta_hat, dtype=float).reshape(2)
    t = np.asarray(theta, dtype=float).reshape(2)
    nrm = float(np.linalg.norm(th))
    if nrm < _ZERO:
        return 1.0
    c = float(t @ th) / nrm
    return min(max(1.0 - c * c, 0.0), 1.0)


def _G(u: float) -> float:
    """Integral of |cos| over [0, u] (signed for negative u)."""
    sgn = 1.0 if u >= 0 else -1.0
    u = abs(u)
    k = math.floor(u / math.pi)
    r = u - k * math.pi
    g = math.sin(r) if r <= math.pi / 2 else 2.0 - math.sin(r)
    return sgn * (2.0 * k + g)


@dataclass(frozen=True, eq=False)
class CircleQuantities:
    suf: float
    cal: float
    excess: float
    per_group_suf: np.ndarray = field(repr=False)
    per_group_cal: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)


def _rotated_frame(theta_hat: np.ndarray, theta: np.ndarray, w: np.ndarray):
    r = float(np.linalg.norm(theta_hat))
    c, s = theta_hat / r
    rot = np.array([[c, s], [-s, c]])  # maps theta_hat onto r e1
    a, b = rot @ theta
    wc, ws = rot @ w
    return r, float(a), float(b), math.atan2(ws, wc)


def _segment_integrals(r, a, b, psi):
    """Exact per-group integrals of the local suf/cal deviations over the circle.

    Breakpoints split [0, 2 pi) where pair-splitting or group membership
    changes; each piece integrates |sin|, |cos| or |cos(. + beta)| through G.
    """
    s = abs(math.sin(psi))
    alpha = math.asin(min(s, 1.0))
    R = math.hypot(r - a, b)
    beta = math.atan2(b, r - a)
    pts = [0.0, TWO_PI]
    for p in (math.pi / 2 - alpha, math.pi / 2 + alpha, 1.5 * math.pi - alpha, 1.5 * math.pi + alpha,
              psi + math.pi / 2, psi - math.pi / 2):
        pts.append(p % TWO_PI)
    pts = sorted(set(pts))
    suf = np.zeros(2)
    cal = np.zeros(2)
    for lo, hi in zip(pts, pts[1:]):
        if hi - lo <= 0.0:
            continue
        mid = 0.5 * (lo + hi)
        g = 1 if math.cos(mid - psi) >= 0.0 else 0
        if abs(math.cos(mid)) < s:
            suf[g] += abs(b) * (_G(hi - math.pi / 2) - _G(lo - math.pi / 2)) / 4.0
            cal[g] += R * (_G(hi + beta) - _G(lo + beta)) / 4.0
        else:
            cal[g] += abs(r - a) * (_G(hi) - _G(lo)) / 4.0
    # each group has probability 1/2
    return suf / math.pi, cal / math.pi


def exact_circle_quantities(theta_hat, theta, w=None) -> CircleQuantities:
    """Closed-form sufficiency/calibration gaps and square-loss excess of f_theta_hat.

    Without ``w`` the attribute direction is orthogonal to theta_hat (or equal
    to theta when theta_hat = 0), the orientation that maximises suf.
    """
    t = _check_unit(theta, "theta")
    th = np.asarray(theta_hat, dtype=float).reshape(2)
    nrm = float(np.linalg.norm(th))
    excess = float((th - t) @ (th - t)) / 32.0  # (1/16) E[XX^T] = I/32
    if w is None:
        w = t.copy() if nrm < _ZERO else np.array([-th[1], th[0]]) / nrm
    w = _check_unit(w, "w")
    if nrm < _ZERO:
        v = abs(float(t @ w)) / TWO_PI
        return CircleQuantities(v, v, excess, np.array([v, v]), np.array([v, v]), w)
    r, a, b, psi = _rotated_frame(th, t, w)
    s = abs(math.sin(psi))
    alpha = math.asin(min(s, 1.0))
    R = math.hypot(r - a, b)
    beta = math.atan2(b, r - a)
    suf = abs(b) * s / TWO_PI
    cal = (0.5 * R * (_G(math.pi / 2 + beta + alpha) - _G(math.pi / 2 + beta - alpha))
           + abs(r - a) * math.cos(alpha)) / TWO_PI
    pg_suf, pg_cal = _segment_integrals(r, a, b, psi)
    return CircleQuantities(suf, cal, excess, pg_suf, pg_cal, w)


def quadrature_circle_gaps(theta_hat, theta, w, resolution: int) -> dict:
    """Independent numeric oracle on a grid of ``resolution`` angles.

    For theta_hat != 0 the grid is symmetric about theta_hat, so index k and
    resolution-1-k form the two-point level set of the score; conditioning
    on (f, A) is then exact on the grid.
    """
    if resolution < 10_000:
        raise InputError("resolution must be at least 1e4")
    t = np.asarray(theta, dtype=float).reshape(2)
    w = np.asarray(w, dtype=float).reshape(2)
    th = np.asarray(theta_hat, dtype=float).reshape(2)
    nrm = float(np.linalg.norm(th))
    N = int(resolution)
    base = 0.0 if nrm < _ZERO else math.atan2(th[1], th[0])
    ang = base + TWO_PI * (np.arange(N) + 0.5) / N
    X = np.column_stack([np.cos(ang), np.sin(ang)])
    p = 0.5 + X @ t / 4.0
    f = 0.5 + X @ th / 4.0
    grp = X @ w >= 0.0
    if nrm < _ZERO:
        ey_f = np.full(N, p.mean())
        m1 = p[grp].mean() if grp.any() else 0.0
        m0 = p[~grp].mean() if (~grp).any() else 0.0
        ey_fa = np.where(grp, m1, m0)
    else:
        normal = np.array([-th[1], th[0]]) / nrm
        if abs(float(normal @ w)) < 1e-12:
            raise SpanViolation("w is parallel to theta_hat; level sets never split")
        partner = p[::-1]
        ey_f = 0.5 * (p + partner)
        split = grp != grp[::-1]
        ey_fa = np.where(split, p, ey_f)
    return {
        "suf": float(np.mean(np.abs(ey_f - ey_fa))),
        "cal": float(np.mean(np.abs(f - ey_fa))),
    }


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class LbSummary:
    rows: list  # (n, trial, suf, cal, excess)
    n_grid: tuple
    mean: dict  # metric -> array over n_grid
    sd: dict
    slopes: dict  # suf_slope, cal_slope, excess_slope


def _loglog_slope(ns, vals) -> float:
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(vals, dtype=float)), 1)[0])


def lb_experiment(
    n_grid: Sequence[int], trials: int, seed: int, w_policy: str = "uniform", theta=None
) -> LbSummary:
    """Least-squares fits on circle samples and the resulting exact gaps.

    theta (unless fixed) and w are redrawn uniformly per trial from seeds
    derived from ``(seed, n, trial)``; ``w_policy="orthogonal"`` instead
    aligns w with the least favourable direction for each fit.
    """
    grid = tuple(int(n) for n in n_grid)
    if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("n_grid needs at least 4 strictly ascending sizes")
    if trials < 50:
        raise InputError("trials must be at least 50")
    if w_policy not in ("uniform", "orthogonal"):
        raise InputError("w_policy must be 'uniform' or 'orthogonal'")
    fixed = None if theta is None else _check_unit(theta, "theta")

    def run(job):
        n, k = job
        rng = derived_rng(seed, n, k)
        th = fixed if fixed is not None else unit(rng.uniform(0.0, TWO_PI))
        w = unit(rng.uniform(0.0, TWO_PI))
        X, y = _circle_draw(th, n, rng)
        est = fit_linear_circle(X, y)
        q = exact_circle_quantities(est, th, None if w_policy == "orthogonal" else w)
        return (n, k, q.suf, q.cal, q.excess)

    rows = parallel_map(run, [(n, k) for n in grid for k in range(trials)])
    arr = np.array([r[2:] for r in rows]).reshape(len(grid), trials, 3)
    names = ("suf", "cal", "excess")
    mean = {m: arr[:, :, i].mean(axis=1) for i, m in enumerate(names)}
    sd = {m: arr[:, :, i].std(axis=1, ddof=1) for i, m in enumerate(names)}
    slopes = {f"{m}_slope": _loglog_slope(grid, mean[m]) for m in names}
    return LbSummary(rows=rows, n_grid=grid, mean=mean, sd=sd, slopes=slopes)


@dataclass(frozen=True)
class ImbalanceRow:
    p: float
    mean_suf: float
    mean_cal: float
    mean_excess: float
    mean_minority_n: float


def imbalance_experiment(p_grid: Sequence[float], n: int, trials: int, seed: int) -> list[ImbalanceRow]:
    """Minority-group gaps of the least-squares fit in the product world.

    The 4-dimensional fit is block diagonal, so its first two coordinates are
    the circle fit on the Z = 1 samples; the reported gaps are the worst of
    the two minority groups, evaluated exactly on that component.
    """
    ps = [float(p) for p in p_grid]
    if any(not 0.0 < p < 0.5 for p in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
        raise InputError("p_grid must be strictly descending inside (0, 1/2)")
    if n < 1 or trials < 1:
        raise InputError("n and trials must be positive")

    def run(job):
        i, k = job
        p = ps[i]
        rng = derived_rng(seed, i, k)
        ang = rng.uniform(0.0, TWO_PI, size=4)
        inst = ProductInstance(unit(ang[0]), unit(ang[1]), p)
        wa, wb = unit(ang[2]), unit(ang[3])
        ds = sample_product(inst, (wa, wb), n, int(rng.integers(2**63)))
        u = 4.0 * (np.linalg.pinv(ds.features.T @ ds.features) @ (ds.features.T @ (ds.labels - 0.5)))
        q = exact_circle_quantities(u[:2], inst.theta_alpha, wa)
        minority = int(np.sum(ds.attributes < 2))
        return (float(q.per_group_suf.max()), float(q.per_group_cal.max()), q.excess, minority)

    res = parallel_map(run, [(i, k) for i in range(len(ps)) for k in range(trials)])
    arr = np.array(res, dtype=float).reshape(len(ps), trials, 4)
    return [
        ImbalanceRow(p, *(float(v) for v in arr[i].mean(axis=0)))
        for i, p in enumerate(ps)
    ]


def kl_bound_check(theta1, theta2, resolution: int) -> dict:
    """Mean Bernoulli KL between the two label laws against |theta1 - theta2|^2 / 12."""
    t1 = _check_unit(theta1, "theta1")
    t2 = _check_unit(theta2, "theta2")
    if resolution < 10_000:
        raise InputError("resolution must be at least 1e4")
    ang = TWO_PI * (np.arange(resolution) + 0.5) / resolution
    X = np.column_stack([np.cos(ang), np.sin(ang)])
    p = 0.5 + X @ t1 / 4.0
    q = 0.5 + X @ t2 / 4.0
    kl = float(np.mean(p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))))
    bound = float((t1 - t2) @ (t1 - t2)) / 12.0
    return {"kl_per_sample": kl, "bound": bound, "satisfied": kl <= bound + 1e-9}


def two_group_tabular_source() -> TabularInstance:
    """Eight equally likely x values, the first four in group 0.

    Positive rates sit in distinct tenths, so a well-fitted score separates
    the groups by bucket while the base rates (0.35 vs 0.475) differ.
    """
    p0 = [0.05, 0.25, 0.45, 0.65]
    p1 = [0.15, 0.35, 0.55, 0.85]
    support = [(x, 0, 0.125, p) for x, p in enumerate(p0)] + [(4 + x, 1, 0.125, p) for x, p in enumerate(p1)]
    return TabularInstance.from_support(support)
