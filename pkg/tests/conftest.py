import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fairgap.bounds import random_instance, random_table_score
from fairgap.core import BayesOfInstance, Constant, TabularInstance

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def cell_scores(instance, score):
    """Score on each support cell, computed without the library's helpers."""
    out = []
    for x, a, p in zip(instance.x_ids.tolist(), instance.a_ids.tolist(), instance.p_y1.tolist()):
        if isinstance(score, BayesOfInstance):
            out.append(p)
        elif isinstance(score, Constant):
            out.append(score.c)
        else:
            out.append(score.values[x])
    return out


def brute_force_gaps(instance, score):
    """Exact gaps by enumerating (level, group, label) cells with plain floats."""
    f = cell_scores(instance, score)
    cells = list(zip(f, instance.a_ids.tolist(), instance.mass.tolist(), instance.p_y1.tolist()))
    K = instance.K
    lvl_w, lvl_s = defaultdict(float), defaultdict(float)
    la_w, la_s = defaultdict(float), defaultdict(float)
    for v, a, m, p in cells:
        lvl_w[v] += m
        lvl_s[v] += m * p
        la_w[v, a] += m
        la_s[v, a] += m * p
    suf = cal = 0.0
    for (v, a), w in la_w.items():
        if w == 0:
            continue
        ey_fa = la_s[v, a] / w
        ey_f = lvl_s[v] / lvl_w[v]
        suf += w * abs(ey_f - ey_fa)
        cal += w * abs(v - ey_fa)

    # joint law over (y, a) with score moments
    ya_w, ya_f = defaultdict(float), defaultdict(float)
    for v, a, m, p in cells:
        for y, wy in ((1, m * p), (0, m * (1 - p))):
            ya_w[y, a] += wy
            ya_f[y, a] += wy * v
    sep = 0.0
    for y in (0, 1):
        tot = sum(ya_w[y, a] for a in range(K))
        if tot == 0:
            continue
        ef_y = sum(ya_f[y, a] for a in range(K)) / tot
        for a in range(K):
            if ya_w[y, a] > 0:
                sep += ya_w[y, a] * abs(ya_f[y, a] / ya_w[y, a] - ef_y)
    pa = [sum(m for v, b, m, p in cells if b == a) for a in range(K)]
    ef = sum(m * v for v, a, m, p in cells)
    ind = sum(pa[a] * abs(sum(m * v for v, b, m, p in cells if b == a) / pa[a] - ef) for a in range(K))
    return {"suf": suf, "cal": cal, "sep": sep, "ind": ind}


def brute_force_risk(instance, score, loss_fn):
    f = cell_scores(instance, score)
    return sum(m * (p * loss_fn(v, 1) + (1 - p) * loss_fn(v, 0)) for v, m, p in zip(f, instance.mass, instance.p_y1))


@pytest.fixture
def two_cell():
    return TabularInstance.from_support([(0, 0, 0.5, 0.3), (0, 1, 0.5, 0.7)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_world(seed):
    r = np.random.default_rng(seed)
    inst = random_instance(r)
    return inst, random_table_score(inst, r)


def nats(z, y):
    z = min(max(z, 1e-12), 1 - 1e-12)
    return -(y * math.log(z) + (1 - y) * math.log(1 - z))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "LINES", []), key=lambda l: int(l.split("criterion")[1].split(":")[0]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
