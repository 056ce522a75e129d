import math

import numpy as np
import pytest

from fairgap.core import dataset_from_arrays
from fairgap.errors import DivergenceDetected, EmptySample, InputError, NonFiniteFeature
from fairgap.erm import CURVE_HEADER, TrainConfig, fit_linear_circle, fit_logistic, learning_curve
from fairgap.synth import CircleInstance, two_group_tabular_source, unit


def _blob(rng, n=400, d=3):
    X = rng.normal(size=(n, d))
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ np.array([1.5, -1.0, 0.0][:d]) + 0.3)))).astype(int)
    return dataset_from_arrays(X, y, rng.integers(0, 2, n))


class TestLogistic:
    def test_huge_l1_zeroes_weights(self, rng):
        ds = _blob(rng)
        res = fit_logistic(ds, TrainConfig(l1_lambda=1e9, max_iters=20000, learning_rate=1.0))
        assert np.all(res.score.weights == 0.0)
        q = ds.labels.mean()
        assert res.score.bias == pytest.approx(math.log(q / (1 - q)), abs=1e-5)

    def test_monotone_descent(self):
        X = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
        ds = dataset_from_arrays(X, [0, 0, 0, 1, 1, 1], [0, 1, 0, 1, 0, 1])
        h = fit_logistic(ds, TrainConfig(learning_rate=0.5, max_iters=300)).objective_history
        assert np.all(np.diff(h) < 0)

    def test_bit_identical_reruns(self, rng):
        ds = _blob(rng)
        a = fit_logistic(ds, TrainConfig(l1_lambda=0.01))
        b = fit_logistic(ds, TrainConfig(l1_lambda=0.01))
        assert a.score.weights.tobytes() == b.score.weights.tobytes()
        assert a.score.bias == b.score.bias

    def test_row_order_irrelevant(self, rng):
        ds = _blob(rng)
        perm = rng.permutation(ds.n)
        shuffled = dataset_from_arrays(ds.features[perm], ds.labels[perm], ds.attributes[perm])
        a, b = fit_logistic(ds), fit_logistic(shuffled)
        assert a.score.weights.tobytes() == b.score.weights.tobytes()

    def test_feature_subset(self, rng):
        ds = _blob(rng)
        w = fit_logistic(ds, TrainConfig(feature_subset=(1,))).score.weights
        assert w.shape == (3,) and w[0] == 0.0 and w[2] == 0.0 and w[1] != 0.0

    def test_divergence(self):
        X = np.array([[1e300], [-1e300], [2e300], [-2e300]])
        ds = dataset_from_arrays(X, [1, 0, 0, 1], [0, 1, 0, 1])
        with pytest.raises(DivergenceDetected):
            fit_logistic(ds, TrainConfig(learning_rate=1e10))

    def test_nonfinite_input(self):
        ds = dataset_from_arrays(np.array([[np.inf], [0.0]]), [0, 1], [0, 1])
        with pytest.raises(NonFiniteFeature):
            fit_logistic(ds)

    def test_config_checks(self):
        with pytest.raises(InputError):
            TrainConfig(learning_rate=0)
        with pytest.raises(InputError):
            TrainConfig(l1_lambda=-1)


class TestLeastSquares:
    def test_identity_gram(self):
        assert fit_linear_circle(np.array([[1.0, 0.0], [0.0, 1.0]]), [1, 0]).tolist() == pytest.approx([2.0, -2.0])

    def test_singular_gram_min_norm(self):
        th = fit_linear_circle(np.tile([1.0, 0.0], (5, 1)), np.ones(5))
        assert th == pytest.approx([2.0, 0.0], abs=1e-12)

    def test_balanced_rhs(self):
        X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        assert fit_linear_circle(X, [1, 0, 0, 1]) == pytest.approx([0.0, 0.0], abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptySample):
            fit_linear_circle(np.zeros((0, 2)), [])


class TestCurve:
    def test_rejects_unsorted_grid(self):
        with pytest.raises(InputError):
            learning_curve(CircleInstance(unit(0.0)), [100, 50], 1)

    def test_deterministic(self):
        src = two_group_tabular_source()
        cfg = TrainConfig(learning_rate=2.0, seed=5)
        a = learning_curve(src, [64], 1, cfg, test_n=2000)
        b = learning_curve(src, [64], 1, cfg, test_n=2000)
        assert a == b

    def test_circle_rows_and_decrease(self):
        rows = learning_curve(CircleInstance(unit(0.0)), [64, 4096], 20, TrainConfig(loss="square", seed=1), test_n=20000)
        assert len(rows) == 40
        mean = lambda n, k: np.mean([getattr(r, k) for r in rows if r.n == n])  # noqa: E731
        assert mean(4096, "suf") < mean(64, "suf")
        assert mean(4096, "test_loss") < mean(64, "test_loss")

    def test_header(self):
        assert CURVE_HEADER == ("n", "trial", "suf", "cal", "sep", "ind", "test_loss")
