import numpy as np
import pytest

from logitblend import (
    ConfigError,
    DataError,
    Dataset,
    ImputePolicy,
    Schema,
    SplitSpec,
    SynthConfig,
    apply_fills,
    filter_prior_defaulters,
    generate_synthetic,
    impute_missing,
    load_csv,
    save_csv,
    split,
)

from conftest import make_dataset


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_missing_cell_flagged(self, tmp_path):
        p = write(
            tmp_path,
            "record_id,period,label,a,b\n"
            "r1,0,1,1.5,2.0\n"
            "r2,0,0,,3.0\n"
            "r3,1,1,0.5,1.0\n"
            "r4,1,0,2.5,4.0\n",
        )
        d = load_csv(p)
        assert d.n_rows == 4 and d.feature_names == ("a", "b")
        assert d.missing_mask[1, 0] and d.missing_mask.sum() == 1
        assert np.isnan(d.X[1, 0])

    def test_non_binary_label_names_row(self, tmp_path):
        p = write(tmp_path, "record_id,period,label,a\nr1,0,1,1\nr2,0,2,2\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(p)

    def test_header_only_gives_empty_dataset(self, tmp_path):
        p = write(tmp_path, "record_id,period,label,a\n")
        d = load_csv(p)
        assert d.n_rows == 0
        with pytest.raises(DataError):
            split(d, SplitSpec(0.5, rng_seed=1))

    def test_malformed_row_names_line(self, tmp_path):
        p = write(tmp_path, "record_id,period,label,a\nr1,0,1\n")
        with pytest.raises(DataError, match="line 2"):
            load_csv(p)

    def test_schema_column_not_in_file(self, tmp_path):
        p = write(tmp_path, "record_id,period,y,a\nr1,0,1,1\n")
        with pytest.raises(DataError, match="label"):
            load_csv(p, Schema(label="label"))

    def test_unparseable_feature_names_column(self, tmp_path):
        p = write(tmp_path, "record_id,period,label,a\nr1,0,1,oops\n")
        with pytest.raises(DataError, match="'a'"):
            load_csv(p)

    def test_configured_sentinel_and_inf_are_missing(self, tmp_path):
        p = write(tmp_path, "record_id,period,label,a\nr1,0,1,NA\nr2,0,0,inf\n")
        d = load_csv(p)
        assert d.missing_mask[:, 0].all()

    def test_round_trip_is_exact(self, tmp_path):
        ds, _ = generate_synthetic(
            SynthConfig(n_rows=60, n_features=4, n_periods=3, rng_seed=5, missing_rate=0.1)
        )
        save_csv(ds, tmp_path / "x.csv")
        back = load_csv(tmp_path / "x.csv")
        assert back.feature_names == ds.feature_names
        assert np.array_equal(back.missing_mask, ds.missing_mask)
        assert np.array_equal(back.X[~back.missing_mask], ds.X[~ds.missing_mask])
        assert np.array_equal(back.y, ds.y)
        assert back.record_ids == ds.record_ids


class TestImpute:
    def test_median_fill(self):
        X = np.array([[1.0], [3.0], [np.nan]])
        d = Dataset(("x0",), X, np.array([1, 0, 1], np.int8), np.zeros(3, int),
                    ("a", "b", "c"), np.isnan(X))
        out, fills = impute_missing(d)
        assert out.X[2, 0] == 2.0 and fills == {"x0": 2.0}
        assert not out.has_missing()

    def test_no_missing_is_identity(self):
        d = make_dataset(np.array([[1.0], [3.0]]), [1, 0])
        out, _ = impute_missing(d)
        assert np.array_equal(out.X, d.X)

    def test_median_of_two_observed(self):
        # column [5, missing, missing, 9] -> median of {5, 9} = 7
        X = np.array([[5.0], [np.nan], [np.nan], [9.0]])
        mask = np.isnan(X)
        d = Dataset(("x0",), X, np.array([1, 0, 1, 0], np.int8), np.zeros(4, int),
                    ("a", "b", "c", "d"), mask)
        out, fills = impute_missing(d)
        assert fills["x0"] == 7.0
        assert out.X[:, 0].tolist() == [5.0, 7.0, 7.0, 9.0]

    def test_idempotent(self):
        X = np.array([[5.0], [np.nan], [9.0]])
        d = Dataset(("x0",), X, np.array([1, 0, 1], np.int8), np.zeros(3, int),
                    ("a", "b", "c"), np.isnan(X))
        once, _ = impute_missing(d)
        twice, _ = impute_missing(once)
        assert np.array_equal(once.X, twice.X)

    def test_entirely_missing_feature_errors(self):
        X = np.array([[np.nan], [np.nan]])
        d = Dataset(("x0",), X, np.array([1, 0], np.int8), np.zeros(2, int),
                    ("a", "b"), np.isnan(X))
        with pytest.raises(DataError, match="x0"):
            impute_missing(d)

    def test_constant_policy(self):
        X = np.array([[np.nan], [2.0]])
        d = Dataset(("x0",), X, np.array([1, 0], np.int8), np.zeros(2, int),
                    ("a", "b"), np.isnan(X))
        out, fills = impute_missing(d, ImputePolicy("constant", constant=-1.0))
        assert out.X[0, 0] == -1.0 and fills["x0"] == -1.0

    def test_apply_fills_requires_statistic(self):
        X = np.array([[np.nan], [2.0]])
        d = Dataset(("x0",), X, np.array([1, 0], np.int8), np.zeros(2, int),
                    ("a", "b"), np.isnan(X))
        assert apply_fills(d, {"x0": 4.0}).X[0, 0] == 4.0
        with pytest.raises(DataError, match="x0"):
            apply_fills(d, {})


class TestPriorFilter:
    def test_removes_flagged_rows(self):
        X = np.column_stack([np.arange(10.0), np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0.0])])
        d = make_dataset(X, [1] * 5 + [0] * 5, names=("v", "prior"))
        out, removed = filter_prior_defaulters(d, "prior")
        assert removed == 3 and out.n_rows == 7
        # surviving rows keep their values untouched
        assert np.array_equal(out.column("v"), np.arange(3.0, 10.0))

    def test_no_flags_is_identity(self):
        d = make_dataset(np.zeros((4, 2)), [1, 0, 1, 0], names=("v", "prior"))
        out, removed = filter_prior_defaulters(d, "prior")
        assert removed == 0 and out.record_ids == d.record_ids

    def test_all_flagged_warns_and_empties(self):
        X = np.column_stack([np.zeros(3), np.ones(3)])
        d = make_dataset(X, [1, 0, 1], names=("v", "prior"))
        with pytest.warns(UserWarning):
            out, removed = filter_prior_defaulters(d, "prior")
        assert removed == 3 and out.n_rows == 0

    def test_non_binary_flag_errors(self):
        d = make_dataset(np.array([[0.5], [0.0]]), [1, 0], names=("prior",))
        with pytest.raises(DataError):
            filter_prior_defaulters(d, "prior")


class TestSplit:
    def test_seventy_thirty_repeatable(self):
        d = make_dataset(np.random.default_rng(0).normal(size=(100, 2)), [0, 1] * 50)
        a_train, a_valid = split(d, SplitSpec(0.7, rng_seed=42, stratify_by_label=False))
        b_train, b_valid = split(d, SplitSpec(0.7, rng_seed=42, stratify_by_label=False))
        assert a_train.n_rows == 70 and a_valid.n_rows == 30
        assert a_train.record_ids == b_train.record_ids

    def test_partition_is_exact(self):
        d = make_dataset(np.random.default_rng(1).normal(size=(37, 2)), [0, 1] * 18 + [1])
        train, valid = split(d, SplitSpec(0.6, rng_seed=3))
        assert train.n_rows + valid.n_rows == 37
        assert not set(train.record_ids) & set(valid.record_ids)

    def test_stratified_counts(self):
        labels = [1] * 50 + [0] * 50
        d = make_dataset(np.random.default_rng(2).normal(size=(100, 1)), labels)
        train, valid = split(d, SplitSpec(0.5, rng_seed=9, stratify_by_label=True))
        assert int(train.y.sum()) == 25 and int(valid.y.sum()) == 25

    def test_different_seeds_differ(self):
        d = make_dataset(np.random.default_rng(3).normal(size=(100, 1)), [0, 1] * 50)
        t1, _ = split(d, SplitSpec(0.7, rng_seed=1))
        t2, _ = split(d, SplitSpec(0.7, rng_seed=2))
        assert set(t1.record_ids) != set(t2.record_ids)

    def test_empty_side_errors(self):
        d = make_dataset(np.zeros((3, 1)), [0, 1, 0])
        with pytest.raises(DataError):
            split(d, SplitSpec(0.01, rng_seed=1, stratify_by_label=False))

    def test_bad_fraction_rejected(self):
        with pytest.raises(ConfigError):
            SplitSpec(1.0, rng_seed=1)


class TestSynthetic:
    def test_same_seed_is_byte_identical(self):
        cfg = SynthConfig(n_rows=500, n_features=8, n_periods=3, rng_seed=7, drift=0.1,
                          missing_rate=0.05, prior_default_rate=0.1)
        a, truth_a = generate_synthetic(cfg)
        b, truth_b = generate_synthetic(cfg)
        assert a.X.tobytes() == b.X.tobytes()
        assert np.array_equal(a.y, b.y) and np.array_equal(a.period, b.period)
        assert truth_a == truth_b

    def test_zero_drift_keeps_coefficients_constant(self):
        _, truth = generate_synthetic(SynthConfig(300, 5, 4, rng_seed=1, drift=0.0))
        per_period = list(truth["coefficients"].values())
        assert all(p == per_period[0] for p in per_period)

    def test_drift_moves_coefficients(self):
        _, truth = generate_synthetic(SynthConfig(300, 5, 4, rng_seed=1, drift=0.2))
        per_period = list(truth["coefficients"].values())
        assert per_period[0] != per_period[-1]

    def test_event_rate_near_target(self):
        # Monte-Carlo on the generator's own logistic link.
        ds, _ = generate_synthetic(SynthConfig(20_000, 40, 4, rng_seed=7, drift=0.05))
        assert abs(float(ds.y.mean()) - 0.15) < 0.05

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ConfigError):
            SynthConfig(n_rows=0, n_features=3, n_periods=1, rng_seed=1)
        with pytest.raises(ConfigError):
            SynthConfig(n_rows=10, n_features=3, n_periods=0, rng_seed=1)


class TestDatasetInvariants:
    def test_arrays_are_read_only(self):
        d = make_dataset(np.zeros((2, 1)), [0, 1])
        with pytest.raises(ValueError):
            d.X[0, 0] = 5.0

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError):
            Dataset(("a",), np.zeros((2, 1)), np.array([0, 1], np.int8),
                    np.zeros(2, int), ("x", "x"), np.zeros((2, 1), bool))

    def test_bad_labels_rejected(self):
        with pytest.raises(DataError):
            make_dataset(np.zeros((2, 1)), [0, 2])

    def test_partition_by_period(self):
        d = make_dataset(np.zeros((6, 1)), [0, 1] * 3, period=np.array([0, 0, 1, 1, 2, 2]))
        parts = d.partition_by_period()
        assert sorted(parts) == [0, 1, 2]
        assert sum(p.n_rows for p in parts.values()) == 6
