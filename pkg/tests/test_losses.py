import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brute_force_risk, cell_scores, nats, random_world
from fairgap.core import BayesOfInstance, Constant, Table, TabularInstance, dataset_from_arrays
from fairgap.errors import InputError
from fairgap.losses import (
    LOGISTIC,
    LOGISTIC_NATS,
    SQUARE,
    empirical_risk,
    excess_risk,
    get_loss,
    loss_eval,
    potential,
    potential_grad,
    strong_convexity_margin,
    tabular_risk,
)

unit_open = st.floats(1e-3, 1 - 1e-3)


def test_square_value():
    assert loss_eval(SQUARE, 0.3, 1) == pytest.approx(0.49, abs=1e-15)


def test_logistic_half():
    assert loss_eval(LOGISTIC_NATS, 0.5, 1) == pytest.approx(math.log(2), abs=1e-15)
    # the default logistic loss is measured in bits
    assert loss_eval(LOGISTIC, 0.5, 1) == pytest.approx(1.0, abs=1e-15)


def test_logistic_clamped_at_one():
    assert 0.0 <= loss_eval(LOGISTIC_NATS, 1.0, 1) <= 2e-12


def test_kappas():
    assert SQUARE.kappa == 1.0
    assert LOGISTIC.kappa == pytest.approx(2 / math.log(2), rel=1e-15)
    assert get_loss("logistic") is LOGISTIC
    with pytest.raises(InputError):
        get_loss("hinge")


@given(unit_open, unit_open)
def test_bregman_form(z, y):
    for loss in (SQUARE, LOGISTIC, LOGISTIC_NATS):
        d = potential(loss, y) - potential(loss, z) - potential_grad(loss, z) * (y - z)
        assert loss_eval(loss, z, y) == pytest.approx(float(d), abs=1e-9)


@given(unit_open, st.sampled_from([0.0, 1.0]))
def test_logistic_is_cross_entropy_on_labels(z, y):
    assert loss_eval(LOGISTIC_NATS, z, y) == pytest.approx(nats(z, y), rel=1e-12)


class TestRisk:
    def test_constant_half(self):
        ds = dataset_from_arrays(np.zeros((4, 1)), [0, 1, 0, 1], [0, 0, 1, 1])
        assert empirical_risk(SQUARE, Constant(0.5), ds) == 0.25

    def test_perfect_table(self):
        ds = dataset_from_arrays(np.eye(2), [1, 0], [0, 1])
        assert empirical_risk(SQUARE, Table({0: 1.0, 1: 0.0}), ds) == 0.0

    def test_four_samples(self):
        ds = dataset_from_arrays(np.zeros((4, 1)), [0, 1, 1, 1], [0, 1, 0, 1])
        assert empirical_risk(SQUARE, np.array([0.2, 0.2, 0.8, 0.8]), ds) == pytest.approx(0.19, abs=1e-15)

    def test_bayes_square_risk_is_noise(self, two_cell):
        want = 0.5 * 0.3 * 0.7 + 0.5 * 0.7 * 0.3
        assert tabular_risk(SQUARE, BayesOfInstance(two_cell), two_cell) == pytest.approx(want, abs=1e-15)

    def test_two_cell_constant(self, two_cell):
        assert tabular_risk(SQUARE, Constant(0.5), two_cell) == pytest.approx(0.25, abs=1e-15)

    def test_deterministic_world_has_zero_bayes_risk(self):
        inst = TabularInstance.from_support([(0, 0, 0.5, 1.0), (1, 1, 0.5, 0.0)])
        for loss in (SQUARE, LOGISTIC):
            assert tabular_risk(loss, BayesOfInstance(inst), inst) <= 1e-11

    @pytest.mark.parametrize("seed", range(40))
    def test_risk_matches_enumeration(self, seed):
        inst, score = random_world(seed)
        assert tabular_risk(LOGISTIC_NATS, score, inst) == pytest.approx(brute_force_risk(inst, score, nats), rel=1e-12)
        sq = brute_force_risk(inst, score, lambda z, y: (z - y) ** 2)
        assert tabular_risk(SQUARE, score, inst) == pytest.approx(sq, rel=1e-12, abs=1e-15)


class TestExcess:
    def test_bayes_zero(self, two_cell):
        assert excess_risk(LOGISTIC, BayesOfInstance(two_cell), two_cell) == 0.0

    @pytest.mark.parametrize("seed", range(100))
    def test_square_equals_mean_squared_distance(self, seed):
        inst, score = random_world(seed)
        f = np.array(cell_scores(inst, score))
        direct = float(np.sum(inst.mass * (f - inst.p_y1) ** 2))
        assert excess_risk(SQUARE, score, inst) == pytest.approx(direct, abs=1e-12)

    @pytest.mark.parametrize("seed", range(100))
    def test_logistic_dominates_kappa_distance(self, seed):
        inst, score = random_world(seed)
        f = np.array(cell_scores(inst, score))
        dist = float(np.sum(inst.mass * (f - inst.p_y1) ** 2))
        assert excess_risk(LOGISTIC, score, inst) >= LOGISTIC.kappa * dist - 1e-12


class TestStrongConvexity:
    def test_square_exact(self):
        assert strong_convexity_margin(SQUARE, 64) == pytest.approx(0.0, abs=1e-15)

    def test_logistic_holds(self):
        assert strong_convexity_margin(LOGISTIC, 512) >= -1e-12
        assert strong_convexity_margin(LOGISTIC_NATS, 512) >= -1e-12

    def test_wrong_kappa_is_caught(self):
        assert strong_convexity_margin(LOGISTIC, 512, kappa=3.0) < 0

    def test_grid_too_coarse(self):
        with pytest.raises(InputError):
            strong_convexity_margin(SQUARE, 4)
