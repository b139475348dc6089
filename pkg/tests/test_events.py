"""Tests for bucket aggregation, log-returns, jump detection, and overlap."""

import math

import numpy as np
import pytest

from excitenet.errors import InputError, NumericError
from excitenet.events import (BucketGrid, BucketSeries, EventStream, ProcessSet,
                              bucketize_counts, bucketize_prices, detect_jumps,
                              log_returns, overlap_fraction, read_event_csv,
                              read_grid_json, write_event_csv, write_grid_json)
from excitenet.ingest import TickRecord


def tick(sec, price, amount=1.0):
    return TickRecord(timestamp_ms=sec * 1000, price=price, amount=amount)


def oracle_jump_count(returns, percentile, direction):
    """Independent rank oracle: sort, take the floor(p*n)-th smallest as the
    threshold, count values strictly above it (and strictly positive)."""
    x = [-r for r in returns] if direction == "down" else list(returns)
    ordered = sorted(x)
    threshold = ordered[max(1, math.floor(percentile * len(x))) - 1]
    return sum(1 for v in x if v > threshold and v > 0)


class TestBucketGrid:
    def test_one_day_is_96_buckets(self):
        grid = BucketGrid.covering(0, 86_399, bucket_width=900)
        assert grid.n_buckets == 96

    def test_start_must_be_aligned(self):
        with pytest.raises(ValueError):
            BucketGrid(start=450, bucket_width=900, n_buckets=4)

    def test_boundary_timestamp_goes_to_later_bucket(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=4)
        assert grid.bucket_of(899) == 0
        assert grid.bucket_of(900) == 1

    def test_out_of_range_error_names_timestamp(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=2)
        with pytest.raises(InputError, match="1800"):
            grid.bucket_of(1800)


class TestBucketizeCounts:
    def test_counts_per_bucket(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=3)
        series = bucketize_counts([0, 10, 950, 2699], grid)
        assert series.values.tolist() == [2, 1, 1]
        assert series.kind == "count"

    def test_conservation(self):
        rng = np.random.default_rng(5)
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=50)
        stamps = rng.integers(0, 50 * 900, size=1000)
        series = bucketize_counts(stamps.tolist(), grid)
        assert series.values.sum() == 1000


class TestBucketizePrices:
    def test_last_price_per_bucket(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=2)
        series = bucketize_prices([tick(10, 100.0), tick(1000, 110.0)], grid)
        assert series.values.tolist() == [100.0, 110.0]
        assert series.kind == "price"

    def test_forward_fill_empty_bucket(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=3)
        series = bucketize_prices([tick(10, 100.0), tick(2000, 120.0)], grid)
        assert series.values.tolist() == [100.0, 100.0, 120.0]

    def test_tick_before_grid_seeds_first_bucket(self):
        grid = BucketGrid(start=900, bucket_width=900, n_buckets=2)
        series = bucketize_prices([tick(100, 95.0), tick(1900, 99.0)], grid)
        assert series.values.tolist() == [95.0, 99.0]

    def test_error_without_tick_before_first_bucket_end(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=2)
        with pytest.raises(InputError, match="first bucket"):
            bucketize_prices([tick(1000, 100.0)], grid)

    def test_ticks_after_grid_ignored(self):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=2)
        series = bucketize_prices([tick(10, 100.0), tick(5000, 1.0)], grid)
        assert series.values.tolist() == [100.0, 100.0]

    @pytest.mark.parametrize("seed", range(3))
    def test_dense_fixture_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n_buckets = 40
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=n_buckets)
        ticks = [tick(int(s), float(p)) for s, p in zip(
            rng.integers(0, n_buckets * 900, size=500),
            rng.uniform(50, 150, size=500))]
        series = bucketize_prices(ticks, grid)
        expected_last = None
        ordered = sorted(ticks, key=lambda t: t.timestamp_ms)
        for b in range(n_buckets):
            in_bucket = [t for t in ordered
                         if b * 900 <= t.timestamp_ms // 1000 < (b + 1) * 900]
            if in_bucket:
                expected_last = max(in_bucket, key=lambda t: ordered.index(t)).price
            assert series.values[b] == expected_last


class TestLogReturns:
    def _price_series(self, prices):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=len(prices))
        return BucketSeries(grid=grid, values=np.array(prices, float), kind="price")

    def _count_series(self, counts):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=len(counts))
        return BucketSeries(grid=grid, values=np.array(counts, float), kind="count")

    def test_constant_prices(self):
        assert log_returns(self._price_series([100, 100, 100])).returns.tolist() == [0, 0]

    def test_zero_counts_smoothed(self):
        assert log_returns(self._count_series([0, 0]), 1.0).returns.tolist() == [0]

    def test_definition(self):
        r = log_returns(self._price_series([100, 110])).returns
        assert r[0] == pytest.approx(math.log(1.1), abs=1e-12)

    def test_price_series_rejects_nonpositive_values(self):
        with pytest.raises(ValueError):
            self._price_series([100, 0, 100])

    def test_count_series_without_smoothing_errors_on_zero(self):
        with pytest.raises(NumericError):
            log_returns(self._count_series([0, 3]), count_smoothing=0.0)

    def test_increasing_prices_give_positive_returns(self):
        rng = np.random.default_rng(2)
        prices = np.cumsum(rng.uniform(0.1, 5.0, size=30)) + 10
        r = log_returns(self._price_series(prices.tolist())).returns
        assert np.all(r > 0)


class TestDetectJumps:
    def _returns(self, values):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=len(values) + 1)
        prices = 100 * np.exp(np.concatenate([[0], np.cumsum(values)]))
        series = BucketSeries(grid=grid, values=prices, kind="price")
        out = log_returns(series)
        np.testing.assert_allclose(out.returns, values, atol=1e-9)
        return out

    def test_exact_count_on_distinct_returns(self):
        rng = np.random.default_rng(13)
        values = rng.normal(0, 0.01, size=10_000)
        assert len(np.unique(values)) == 10_000
        stream = detect_jumps(self._returns(values), 0.99, "up")
        assert len(stream) == 100
        assert len(stream) == oracle_jump_count(values, 0.99, "up")

    def test_all_zero_returns_empty(self):
        stream = detect_jumps(self._returns(np.zeros(50)), 0.99, "up")
        assert stream.event_buckets == ()

    def test_all_equal_returns_empty(self):
        stream = detect_jumps(self._returns(np.full(50, 0.01)), 0.99, "up")
        assert stream.event_buckets == ()

    def test_single_down_extreme_at_destination_bucket(self):
        values = np.zeros(100)
        values[0] = -5.0
        stream = detect_jumps(self._returns(values), 0.99, "down")
        assert stream.event_buckets == (1,)

    def test_up_requires_strict_positivity(self):
        # every return negative: the percentile is negative, but no r > 0
        values = -np.linspace(0.01, 0.5, 60)
        stream = detect_jumps(self._returns(values), 0.9, "up")
        assert stream.event_buckets == ()

    @pytest.mark.parametrize("seed", range(6))
    def test_up_down_disjoint_and_counts_bounded(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.standard_t(3, size=487) * 0.02
        ret = self._returns(values)
        up = detect_jumps(ret, 0.99, "up")
        down = detect_jumps(ret, 0.99, "down")
        assert not set(up.event_buckets) & set(down.event_buckets)
        bound = math.ceil(0.01 * len(values)) + 1
        assert len(up) <= bound and len(down) <= bound
        assert len(up) == oracle_jump_count(values, 0.99, "up")
        assert len(down) == oracle_jump_count(values, 0.99, "down")

    def test_explicit_threshold_overrides_percentile(self):
        values = np.concatenate([np.full(50, 0.001), [0.5, 0.7]])
        ret = self._returns(values)
        assert len(detect_jumps(ret, 0.99, "up")) == 1  # per-series tail
        wide = detect_jumps(ret, 0.99, "up", threshold=0.1)
        assert wide.event_buckets == (51, 52)
        none = detect_jumps(ret, 0.99, "up", threshold=1.0)
        assert none.event_buckets == ()

    def test_too_few_returns(self):
        with pytest.raises(InputError):
            detect_jumps(self._returns(np.ones(5)), 0.99, "up")

    def test_bad_arguments(self):
        ret = self._returns(np.zeros(20))
        with pytest.raises(ValueError):
            detect_jumps(ret, 0.99, "sideways")
        with pytest.raises(ValueError):
            detect_jumps(ret, 1.0, "up")


class TestOverlapFraction:
    def _pset(self, streams):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=100)
        return ProcessSet(grid=grid, streams=[
            EventStream(label=f"s{i}", event_buckets=tuple(b))
            for i, b in enumerate(streams)])

    def test_disjoint_is_one(self):
        assert overlap_fraction(self._pset([(1, 3), (5, 7)])) == 1.0

    def test_identical_single_bucket_is_zero(self):
        assert overlap_fraction(self._pset([(4,), (4,)])) == 0.0

    def test_enumerated_third(self):
        assert overlap_fraction(self._pset([(1, 2), (2,)])) == pytest.approx(1 / 3)

    def test_permutation_invariant(self):
        streams = [(1, 2, 9), (2, 5), (5, 9, 11)]
        base = overlap_fraction(self._pset(streams))
        assert overlap_fraction(self._pset(streams[::-1])) == base

    def test_zero_events_error(self):
        with pytest.raises(InputError):
            overlap_fraction(self._pset([(), ()]))


class TestEventCsv:
    def test_round_trip_and_format(self, tmp_path):
        grid = BucketGrid(start=1800, bucket_width=900, n_buckets=50)
        pset = ProcessSet(grid=grid, streams=[
            EventStream(label="b_1", event_buckets=(4, 9)),
            EventStream(label="BTC_pos", event_buckets=(2,)),
        ])
        path = tmp_path / "events.csv"
        write_event_csv(path, pset)
        lines = path.read_text().splitlines()
        assert lines[0] == "label,bucket_index,bucket_start_unix"
        assert lines[1:] == ["BTC_pos,2,3600", "b_1,4,5400", "b_1,9,9900"]
        back = read_event_csv(path, grid, labels=["b_1", "BTC_pos", "empty"])
        assert back.labels == ["b_1", "BTC_pos", "empty"]
        assert back.streams[0].event_buckets == (4, 9)
        assert back.streams[2].event_buckets == ()

    def test_unknown_label_rejected(self, tmp_path):
        grid = BucketGrid(start=0, bucket_width=900, n_buckets=10)
        pset = ProcessSet(grid=grid, streams=[EventStream(label="x", event_buckets=(1,))])
        path = tmp_path / "events.csv"
        write_event_csv(path, pset)
        with pytest.raises(InputError, match="unconfigured"):
            read_event_csv(path, grid, labels=["y"])

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text("a,b,c\n", encoding="utf-8")
        with pytest.raises(InputError, match="header"):
            read_event_csv(path, BucketGrid(0, 900, 10))

    def test_grid_json_round_trip(self, tmp_path):
        grid = BucketGrid(start=900, bucket_width=900, n_buckets=123)
        path = tmp_path / "grid.json"
        write_grid_json(path, grid)
        assert read_grid_json(path) == grid
