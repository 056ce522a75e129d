import math

import numpy as np
import pytest

from fairgap.errors import InputError, NonUnitTheta, PreconditionViolation, SpanViolation
from fairgap.synth import (
    CircleInstance,
    ProductInstance,
    exact_circle_quantities,
    imbalance_experiment,
    kl_bound_check,
    lb_experiment,
    phi,
    quadrature_circle_gaps,
    sample_circle,
    sample_product,
    unit,
)

TWO_PI = 2 * math.pi
E1 = np.array([1.0, 0.0])


class TestSampling:
    def test_unit_norm(self):
        ds = sample_circle(CircleInstance(E1), unit(1.0), 2000, seed=3)
        assert np.allclose(np.linalg.norm(ds.features, axis=1), 1.0, atol=1e-12)

    def test_label_mean(self):
        ds = sample_circle(CircleInstance(unit(0.4)), unit(2.0), 100_000, seed=11)
        assert abs(ds.labels.mean() - 0.5) < 0.01

    def test_deterministic(self):
        a = sample_circle(CircleInstance(E1), unit(1.0), 50, seed=9)
        b = sample_circle(CircleInstance(E1), unit(1.0), 50, seed=9)
        assert a.features.tobytes() == b.features.tobytes() and a.labels.tobytes() == b.labels.tobytes()

    def test_theta_must_be_unit(self):
        with pytest.raises(NonUnitTheta):
            CircleInstance(np.array([0.5, 0.0]))


class TestProduct:
    def test_block_structure(self):
        ds = sample_product(ProductInstance(E1, unit(1.0), 0.2), (unit(0.3), unit(2.0)), 5000, seed=1)
        X = ds.features
        assert np.all((np.abs(X[:, :2]).sum(axis=1) == 0) ^ (np.abs(X[:, 2:]).sum(axis=1) == 0))
        counts = np.bincount(ds.attributes, minlength=4) / ds.n
        assert counts[0] == pytest.approx(0.1, abs=0.015) and counts[1] == pytest.approx(0.1, abs=0.015)

    def test_half_rejected(self):
        with pytest.raises(PreconditionViolation):
            ProductInstance(E1, E1, 0.5)


class TestClosedForms:
    def test_phi(self):
        assert phi(E1, E1) == 0.0
        assert phi(np.zeros(2), E1) == 1.0
        assert phi(np.array([1.0, 1.0]) / math.sqrt(2), E1) == pytest.approx(0.5, abs=1e-15)

    def test_exact_fit(self):
        q = exact_circle_quantities(E1, E1)
        assert (q.suf, q.cal, q.excess) == (0.0, 0.0, 0.0)

    def test_zero_estimate(self):
        q = exact_circle_quantities(np.zeros(2), E1)
        assert q.suf == pytest.approx(1 / TWO_PI, abs=1e-15)
        assert q.excess == pytest.approx(1 / 32, abs=1e-15)

    def test_quarter_turn(self):
        q = exact_circle_quantities(unit(math.pi / 2), E1)
        assert q.suf == pytest.approx(1 / TWO_PI, abs=1e-12)
        assert q.cal == pytest.approx(math.sqrt(2) / TWO_PI, abs=1e-12)

    def test_parallel_attribute_has_no_split(self):
        with pytest.raises(SpanViolation):
            quadrature_circle_gaps(0.5 * E1, unit(1.0), E1, 10_000)

    @pytest.mark.parametrize("seed", range(8))
    def test_against_quadrature(self, seed):
        r = np.random.default_rng(seed)
        th_hat = unit(r.uniform(0, TWO_PI)) * r.uniform(0.1, 1.5)
        th, w = unit(r.uniform(0, TWO_PI)), unit(r.uniform(0, TWO_PI))
        q = exact_circle_quantities(th_hat, th, w)
        num = quadrature_circle_gaps(th_hat, th, w, 200_000)
        assert q.suf == pytest.approx(num["suf"], abs=1e-4)
        assert q.cal == pytest.approx(num["cal"], abs=1e-4)

    def test_rotation_equivariance(self):
        r = np.random.default_rng(4)
        th_hat, th, w = unit(0.3) * 0.7, unit(1.9), unit(4.0)
        base = exact_circle_quantities(th_hat, th, w)
        for ang in r.uniform(0, TWO_PI, 5):
            c, s = math.cos(ang), math.sin(ang)
            R = np.array([[c, -s], [s, c]])
            rot = exact_circle_quantities(R @ th_hat, R @ th, R @ w)
            assert rot.suf == pytest.approx(base.suf, abs=1e-12)
            assert rot.cal == pytest.approx(base.cal, abs=1e-12)

    def test_per_group_averages_to_total(self):
        q = exact_circle_quantities(unit(0.4) * 0.8, unit(2.2), unit(1.1))
        assert q.per_group_suf.mean() == pytest.approx(q.suf, abs=1e-12)
        assert q.per_group_cal.mean() == pytest.approx(q.cal, abs=1e-12)


class TestKL:
    def test_equal(self):
        res = kl_bound_check(E1, E1, 10_000)
        assert res["kl_per_sample"] == 0.0 and res["satisfied"]

    def test_antipodal(self):
        res = kl_bound_check(E1, -E1, 100_000)
        assert res["bound"] == pytest.approx(1 / 3, abs=1e-15)
        # the mean KL integrates in closed form to 2 - sqrt(3)
        assert res["kl_per_sample"] == pytest.approx(0.2679491924311228, abs=1e-9)
        assert res["satisfied"]

    def test_resolution_floor(self):
        with pytest.raises(InputError):
            kl_bound_check(E1, E1, 100)


class TestExperiments:
    def test_lb_validation(self):
        with pytest.raises(InputError):
            lb_experiment([64, 128, 256], 50, 0)
        with pytest.raises(InputError):
            lb_experiment([64, 128, 256, 512], 10, 0)

    def test_lb_deterministic(self):
        a = lb_experiment([32, 64, 128, 256], 50, seed=5)
        b = lb_experiment([32, 64, 128, 256], 50, seed=5)
        assert a.rows == b.rows and a.slopes == b.slopes
        assert set(a.slopes) == {"suf_slope", "cal_slope", "excess_slope"}

    def test_imbalance_validation(self):
        with pytest.raises(InputError):
            imbalance_experiment([0.25, 0.45], 100, 2, 0)

    def test_near_balanced_matches_circle(self):
        rows = imbalance_experiment([0.45], 4096, 200, seed=7)
        ref = lb_experiment([1843, 1844, 1845, 1846], 200, seed=11)
        circle = float(np.mean(ref.mean["suf"]))
        assert abs(rows[0].mean_suf - circle) / circle < 0.2
