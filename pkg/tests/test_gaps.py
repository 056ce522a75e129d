import io
import math

import numpy as np
import pytest

from conftest import brute_force_gaps, random_world
from fairgap.core import BayesOfInstance, Constant, Table, dataset_from_arrays, uncalibrated_bayes
from fairgap.errors import EmptyBucketAll, GroupWithZeroMass, InputError, ValueOutOfRange
from fairgap.gaps import (
    PLOT_HEADER,
    BinningConfig,
    assign_buckets,
    calibration_plot_data,
    estimate_gaps,
    exact_gaps_tabular,
    write_plot_csv,
)
from fairgap.core import TabularInstance


class TestBuckets:
    def test_equal_width(self):
        assert assign_buckets([0.05, 0.15, 0.95]).tolist() == [0, 1, 9]

    def test_right_edge_closed(self):
        assert assign_buckets([1.0, 0.0]).tolist() == [9, 0]

    def test_quantile_median(self):
        cfg = BinningConfig(2, "quantile")
        assert assign_buckets([0.1, 0.2, 0.3, 0.4], cfg).tolist() == [0, 0, 1, 1]

    def test_quantile_boundary_goes_low(self):
        cfg = BinningConfig(2, "quantile")
        assert assign_buckets([0.1, 0.2, 0.3], cfg).tolist() == [0, 0, 1]

    def test_quantile_empty(self):
        with pytest.raises(EmptyBucketAll):
            assign_buckets([], BinningConfig(4, "quantile"))

    def test_out_of_range(self):
        with pytest.raises(ValueOutOfRange):
            assign_buckets([0.5, 1.01])
        with pytest.raises(ValueOutOfRange):
            assign_buckets([np.nan])

    def test_config_validation(self):
        with pytest.raises(InputError):
            BinningConfig(1)
        with pytest.raises(InputError):
            BinningConfig(4, "kmeans")


def _four():
    return dataset_from_arrays(np.zeros((4, 1)), [0, 1, 1, 1], [0, 1, 0, 1])


class TestEstimator:
    def test_hand_example(self):
        rep = estimate_gaps(_four(), np.array([0.2, 0.2, 0.8, 0.8]), BinningConfig(2))
        assert rep.suf == pytest.approx(0.25, abs=1e-15)
        assert rep.cal == pytest.approx(0.35, abs=1e-15)
        assert rep.per_group_suf.tolist() == pytest.approx([0.25, 0.25], abs=1e-15)

    def test_constant_on_equal_rates(self):
        ds = dataset_from_arrays(np.zeros((8, 1)), [0, 1, 1, 0, 0, 1, 1, 0], [0, 0, 0, 0, 1, 1, 1, 1])
        rep = estimate_gaps(ds, Constant(0.5))
        assert rep.suf == 0.0 and rep.ind == 0.0

    def test_perfect_predictor_separation(self):
        y = [0, 1, 1, 0, 1, 0]
        ds = dataset_from_arrays(np.zeros((6, 1)), y, [0, 0, 1, 1, 2, 2])
        assert estimate_gaps(ds, np.array(y, dtype=float)).sep == 0.0

    def test_metadata_echo(self):
        rep = estimate_gaps(_four(), np.full(4, 0.5), BinningConfig(10), loss_name="square")
        assert rep.metadata["binning"] == {"B": 10, "mode": "equal_width"}
        assert rep.metadata["n"] == 4

    def test_gaps_in_unit_interval(self, rng):
        ds = dataset_from_arrays(rng.random((300, 2)), rng.integers(0, 2, 300), rng.integers(0, 4, 300))
        rep = estimate_gaps(ds, rng.random(300), BinningConfig(7, "quantile"))
        for v in (rep.suf, rep.cal, rep.sep, rep.ind):
            assert 0.0 <= v <= 1.0


class TestExact:
    def test_bayes_is_sufficient_and_calibrated(self, two_cell):
        rep = exact_gaps_tabular(two_cell, BayesOfInstance(two_cell))
        assert rep.suf == 0.0 and rep.cal == 0.0

    def test_constant_suf_equals_base_rate_spread(self, two_cell):
        assert exact_gaps_tabular(two_cell, Constant(0.5)).suf == pytest.approx(0.2, abs=1e-15)

    def test_bayes_ind_equals_spread(self, two_cell):
        assert exact_gaps_tabular(two_cell, BayesOfInstance(two_cell)).ind == pytest.approx(0.2, abs=1e-15)

    def test_bayes_sep_value(self, two_cell):
        assert exact_gaps_tabular(two_cell, BayesOfInstance(two_cell)).sep == pytest.approx(0.168, abs=1e-12)

    def test_empty_group_rejected(self):
        inst = TabularInstance.from_support([(0, 0, 1.0, 0.5), (1, 1, 0.0, 0.5)])
        with pytest.raises(GroupWithZeroMass):
            exact_gaps_tabular(inst, Constant(0.5))

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_enumeration(self, seed):
        inst, score = random_world(seed)
        for s in (score, BayesOfInstance(inst), uncalibrated_bayes(inst), Constant(0.4)):
            got = exact_gaps_tabular(inst, s)
            want = brute_force_gaps(inst, s)
            for k, v in want.items():
                assert getattr(got, k) == pytest.approx(v, abs=1e-12), k

    def test_pools_cells_sharing_a_level(self):
        inst = TabularInstance.from_support([(0, 0, 0.25, 0.2), (1, 0, 0.25, 0.6), (0, 1, 0.25, 0.4), (1, 1, 0.25, 0.9)])
        t = Table({0: 0.5, 1: 0.5})
        assert exact_gaps_tabular(inst, t).suf == pytest.approx(exact_gaps_tabular(inst, Constant(0.5)).suf, abs=1e-15)


class TestPlotData:
    def _cell(self, k, m, min_cell=2):
        f = np.full(m, 0.35)
        ds = dataset_from_arrays(np.zeros((m, 1)), [1] * k + [0] * (m - k), [0] * m)
        return calibration_plot_data(ds, f, BinningConfig(10, min_cell=min_cell))

    def test_wald_interval(self):
        (row,) = self._cell(3, 10)
        assert row.rate == pytest.approx(0.3)
        assert row.ci_low == pytest.approx(0.3 - 1.96 * math.sqrt(0.021), abs=1e-12)
        assert (round(row.ci_low, 3), round(row.ci_high, 3)) == (0.016, 0.584)

    def test_degenerate_rate(self):
        (row,) = self._cell(0, 5)
        assert (row.rate, row.ci_low, row.ci_high) == (0.0, 0.0, 0.0)

    def test_small_cell_dropped(self):
        assert self._cell(1, 1) == []

    def test_csv_header(self):
        buf = io.StringIO()
        write_plot_csv(self._cell(3, 10), buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ",".join(PLOT_HEADER)
        assert lines[1].startswith("3,0,10,3,0.3,")
