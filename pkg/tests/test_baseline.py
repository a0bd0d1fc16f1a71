import math

import numpy as np
import pytest

from logitblend import (
    BaselinePipeline,
    BinEncoding,
    ConfigError,
    DataError,
    SplitSpec,
    SynthConfig,
    backward_eliminate,
    bin_equal_frequency,
    collapse_adjacent_bins,
    encode_log_odds,
    explicit_cutpoints,
    generate_synthetic,
    ks_statistic,
    split,
    train_base_model,
)
from logitblend.baseline import assign_bins

from conftest import make_dataset


def two_prop_p_oracle(e1, n1, e2, n2):
    """Independent two-proportion z-test used to sanity-check merges."""
    pooled = (e1 + e2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    z = (e1 / n1 - e2 / n2) / se
    return math.erfc(abs(z) / math.sqrt(2))


def column_dataset(values, labels):
    return make_dataset(np.asarray(values, float).reshape(-1, 1), labels, names=("v",))


class TestEqualFrequencyBinning:
    def test_one_to_ten_five_bins(self):
        d = column_dataset(range(1, 11), [0, 1] * 5)
        spec = bin_equal_frequency(d, "v", 5)
        assert spec.bin_edges == (2.0, 4.0, 6.0, 8.0)
        bins = assign_bins(d.column("v"), spec.bin_edges)
        assert np.bincount(bins).tolist() == [2, 2, 2, 2, 2]

    def test_all_identical_collapses_to_one_bin(self):
        d = column_dataset([3.0] * 12, [0, 1] * 6)
        with pytest.warns(UserWarning):
            spec = bin_equal_frequency(d, "v", 5)
        assert spec.n_bins == 1

    def test_heavy_ties_never_split_a_block(self):
        values = [0.0] * 50 + list(np.linspace(1, 5, 50))
        d = column_dataset(values, [0, 1] * 50)
        spec = bin_equal_frequency(d, "v", 4)
        bins = assign_bins(d.column("v"), spec.bin_edges)
        # enumerate the tied block: all zeros must share one bin
        zero_bins = set(bins[np.asarray(values) == 0.0])
        assert len(zero_bins) == 1

    def test_monotone_transform_preserves_memberships(self):
        rng = np.random.default_rng(8)
        values = rng.normal(size=200)
        d1 = column_dataset(values, [0, 1] * 100)
        d2 = column_dataset(np.exp(values), [0, 1] * 100)
        b1 = assign_bins(d1.column("v"), bin_equal_frequency(d1, "v", 5).bin_edges)
        b2 = assign_bins(d2.column("v"), bin_equal_frequency(d2, "v", 5).bin_edges)
        assert np.array_equal(b1, b2)

    def test_k_below_two_rejected(self):
        d = column_dataset(range(10), [0, 1] * 5)
        with pytest.raises(ConfigError):
            bin_equal_frequency(d, "v", 1)

    def test_every_real_value_maps_to_exactly_one_bin(self):
        spec = explicit_cutpoints("v", [-1.0, 0.5, 2.0])
        probes = np.array([-1e300, -1.0, -0.999, 0.5, 0.500001, 2.0, 1e300])
        bins = assign_bins(probes, spec.bin_edges)
        assert bins.tolist() == [0, 0, 1, 1, 2, 2, 3]

    def test_cutpoints_must_ascend(self):
        with pytest.raises(ConfigError):
            explicit_cutpoints("v", [1.0, 1.0])


class TestLogOddsEncoding:
    def test_unsmoothed_count_ratio(self):
        # one bin: 3 events, 1 non-event, s=0 -> ln 3
        d = column_dataset([0.0, 0.0, 0.0, 0.0], [1, 1, 1, 0])
        spec = explicit_cutpoints("v", [])
        enc = encode_log_odds(d, spec, smoothing=0.0)
        assert enc.log_odds[0] == pytest.approx(math.log(3), abs=1e-12)

    def test_balanced_bin_is_zero(self):
        d = column_dataset([0.0, 0.0], [1, 0])
        enc = encode_log_odds(d, explicit_cutpoints("v", []), smoothing=0.0)
        assert enc.log_odds[0] == 0.0

    def test_zero_nonevents_with_smoothing(self):
        # 4 events, 0 non-events, s=0.5 -> ln(4.5/0.5) = ln 9
        d = column_dataset([0.0] * 4 + [1.0], [1, 1, 1, 1, 0])
        enc = encode_log_odds(d, explicit_cutpoints("v", [0.5]), smoothing=0.5)
        assert enc.log_odds[0] == pytest.approx(math.log(9), abs=1e-12)

    def test_zero_count_without_smoothing_rejected(self):
        d = column_dataset([0.0] * 4 + [1.0], [1, 1, 1, 1, 0])
        with pytest.raises(DataError):
            encode_log_odds(d, explicit_cutpoints("v", [0.5]), smoothing=0.0)

    def test_empty_bin_rejected(self):
        d = column_dataset([0.0, 10.0], [1, 0])
        with pytest.raises(DataError, match="empty bin"):
            encode_log_odds(d, explicit_cutpoints("v", [3.0, 5.0]))

    def test_log_odds_equals_ln_odds_everywhere(self):
        d = column_dataset(np.arange(20.0), [0, 1] * 10)
        enc = encode_log_odds(d, bin_equal_frequency(d, "v", 4))
        assert np.allclose(enc.log_odds, np.log(enc.odds), atol=0, rtol=0)


class TestCollapse:
    def test_similar_rates_merge(self):
        # 0.30 vs 0.31 at n=50 each: oracle says clearly not distinguishable
        assert two_prop_p_oracle(15, 50, 15, 50) > 0.05  # 0.30 vs 0.30 sanity
        enc = BinEncoding("v", (0.0,), (15, 16), (35, 34), smoothing=0.5)
        p = two_prop_p_oracle(15, 50, 16, 50)
        assert p > 0.05
        merged = collapse_adjacent_bins(enc, alpha=0.05)
        assert merged.n_bins == 1
        assert merged.count_events == (31,) and merged.count_nonevents == (69,)

    def test_distinct_rates_do_not_merge(self):
        # 0.05 vs 0.60 at n=200 each
        assert two_prop_p_oracle(10, 200, 120, 200) < 1e-6
        enc = BinEncoding("v", (0.0,), (10, 120), (190, 80), smoothing=0.5)
        merged = collapse_adjacent_bins(enc, alpha=0.05)
        assert merged.n_bins == 2

    def test_single_bin_unchanged(self):
        enc = BinEncoding("v", (), (5,), (10,), smoothing=0.5)
        assert collapse_adjacent_bins(enc) == enc

    def test_collapse_never_increases_bins_and_reencodes_exactly(self):
        rng = np.random.default_rng(4)
        values = rng.normal(size=400)
        labels = (rng.random(400) < 0.3).astype(int)
        d = column_dataset(values, labels)
        enc = encode_log_odds(d, bin_equal_frequency(d, "v", 10))
        merged = collapse_adjacent_bins(enc, alpha=0.05)
        assert merged.n_bins <= enc.n_bins
        assert sum(merged.count_events) == sum(enc.count_events)
        assert sum(merged.count_nonevents) == sum(enc.count_nonevents)
        expected = np.log(
            (np.array(merged.count_events) + 0.5) / (np.array(merged.count_nonevents) + 0.5)
        )
        assert np.array_equal(merged.log_odds, expected)


class TestTrainBaseModel:
    def test_binned_model_beats_raw_linear_on_curved_truth(self):
        ds, _ = generate_synthetic(
            SynthConfig(n_rows=8000, n_features=6, n_periods=2, rng_seed=7,
                        n_informative=4, squared_weight=1.0)
        )
        train, valid = split(ds, SplitSpec(0.7, rng_seed=17))
        bm = train_base_model(train, BaselinePipeline(binned={f: 10 for f in train.feature_names}))
        raw = backward_eliminate(train, train.feature_names, 0.05)
        ks_binned = ks_statistic(bm.predict_dataset(valid), valid.y)
        ks_raw = ks_statistic(raw.predict_dataset(valid), valid.y)
        assert ks_binned > ks_raw

    def test_zero_binned_features_reduces_to_elimination(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(600, 3))
        eta = 1.2 * X[:, 0] - 0.9 * X[:, 1]
        y = (rng.random(600) < 1 / (1 + np.exp(-eta))).astype(int)
        d = make_dataset(X, y)
        bm = train_base_model(d, BaselinePipeline(binned={}, passthrough=d.feature_names))
        direct = backward_eliminate(d, d.feature_names, 0.05)
        assert bm.model.feature_subset == direct.feature_subset
        assert bm.model.intercept == direct.intercept
        assert bm.model.coefficients == direct.coefficients

    def test_scoring_uses_frozen_training_edges(self):
        rng = np.random.default_rng(23)
        values = rng.normal(size=1000)
        eta = 1.5 * np.sign(values)
        labels = (rng.random(1000) < 1 / (1 + np.exp(-eta))).astype(int)
        train = column_dataset(values, labels)
        bm = train_base_model(train, BaselinePipeline(binned={"v": 4}, collapse=False))
        shifted = column_dataset(values + 5.0, labels)
        got = bm.predict_dataset(shifted)
        # expected: push the shifted values through the frozen encoding by hand
        enc = bm.encodings[0]
        hand = np.array([
            bm.model.predict_row({"v" + "__logodds": lo})
            for lo in enc.apply(shifted.column("v"))
        ])
        assert np.allclose(got, hand, atol=0, rtol=0)
        # with edges recomputed on the shifted data the scores would differ;
        # frozen edges instead push everything into the top bin
        recomputed = bin_equal_frequency(shifted, "v", 4)
        assert recomputed.bin_edges != enc.bin_edges
        top_bin = assign_bins(shifted.column("v"), enc.bin_edges)
        assert (top_bin == enc.n_bins - 1).all()

    def test_include_odds_offers_both_encodings(self):
        rng = np.random.default_rng(29)
        values = rng.normal(size=500)
        labels = (rng.random(500) < 1 / (1 + np.exp(-2.0 * values))).astype(int)
        d = column_dataset(values, labels)
        bm = train_base_model(
            d, BaselinePipeline(binned={"v": 5}, include_odds=True, collapse=False)
        )
        design = bm.transform(d)
        assert set(design.feature_names) == {"v__logodds", "v__odds"}
