"""Aggregation onto a shared fixed-width bucket grid, log-returns, and
percentile jump detection producing event streams.

Buckets are half-open intervals ``[start + b*width, start + (b+1)*width)`` on
an aligned grid (``start`` is a multiple of the width). Jump events are
indexed at the destination bucket of the triggering return.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, NumericError
from .ingest import TickRecord

DEFAULT_BUCKET_WIDTH = 900

EVENT_CSV_HEADER = ["label", "bucket_index", "bucket_start_unix"]


@dataclass(frozen=True)
class BucketGrid:
    """Aligned fixed-width time grid shared by all processes."""

    start: int
    bucket_width: int = DEFAULT_BUCKET_WIDTH
    n_buckets: int = 2

    def __post_init__(self):
        if self.bucket_width <= 0:
            raise ValueError("bucket_width must be positive")
        if self.start % self.bucket_width != 0:
            raise ValueError("grid start must be a multiple of bucket_width")
        if self.n_buckets < 2:
            raise ValueError("grid needs at least 2 buckets")

    @property
    def end(self) -> int:
        return self.start + self.n_buckets * self.bucket_width

    def bucket_of(self, timestamp: int) -> int:
        """Bucket index of a Unix-second timestamp; raises if outside the grid."""
        if not (self.start <= timestamp < self.end):
            raise InputError(f"timestamp {timestamp} outside grid [{self.start}, {self.end})")
        return (timestamp - self.start) // self.bucket_width

    @classmethod
    def covering(cls, t_min: int, t_max: int,
                 bucket_width: int = DEFAULT_BUCKET_WIDTH) -> "BucketGrid":
        """Smallest aligned grid (>= 2 buckets) containing [t_min, t_max]."""
        if t_max < t_min:
            raise ValueError("t_max must be >= t_min")
        start = (t_min // bucket_width) * bucket_width
        n = (t_max - start) // bucket_width + 1
        return cls(start=start, bucket_width=bucket_width, n_buckets=max(2, int(n)))


@dataclass
class BucketSeries:
    """Per-bucket values; ``kind`` is "count" or "price" (prices must be > 0)."""

    grid: BucketGrid
    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_buckets,):
            raise ValueError("values length must equal n_buckets")
        if self.kind not in ("count", "price"):
            raise ValueError(f"unknown series kind '{self.kind}'")
        if self.kind == "price" and not np.all(self.values > 0):
            raise ValueError("price series must be strictly positive")


@dataclass
class ReturnSeries:
    """Log-returns between consecutive buckets (length n_buckets - 1)."""

    grid: BucketGrid
    returns: np.ndarray

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.shape != (self.grid.n_buckets - 1,):
            raise ValueError("returns length must equal n_buckets - 1")


@dataclass(frozen=True)
class EventStream:
    """Strictly increasing event bucket indices for one labeled process."""

    label: str
    event_buckets: tuple[int, ...]

    def __post_init__(self):
        buckets = tuple(int(b) for b in self.event_buckets)
        object.__setattr__(self, "event_buckets", buckets)
        if any(b2 <= b1 for b1, b2 in zip(buckets, buckets[1:])):
            raise ValueError(f"stream '{self.label}': bucket indices not strictly increasing")
        if buckets and buckets[0] < 0:
            raise ValueError(f"stream '{self.label}': negative bucket index")

    def __len__(self) -> int:
        return len(self.event_buckets)


@dataclass
class ProcessSet:
    """Event streams with unique labels on one shared grid."""

    grid: BucketGrid
    streams: list[EventStream] = field(default_factory=list)

    def __post_init__(self):
        labels = [s.label for s in self.streams]
        if len(set(labels)) != len(labels):
            raise ValueError("stream labels must be unique")
        for s in self.streams:
            if s.event_buckets and s.event_buckets[-1] >= self.grid.n_buckets:
                raise ValueError(f"stream '{s.label}' has events beyond the grid")

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.streams]

    @property
    def n_events(self) -> int:
        return sum(len(s) for s in self.streams)


def bucketize_counts(timestamps: Iterable[int], grid: BucketGrid) -> BucketSeries:
    """Count timestamps per bucket. Boundary timestamps go to the later bucket."""
    values = np.zeros(grid.n_buckets)
    for ts in timestamps:
        values[grid.bucket_of(int(ts))] += 1
    return BucketSeries(grid=grid, values=values, kind="count")


def bucketize_prices(ticks: Sequence[TickRecord], grid: BucketGrid) -> BucketSeries:
    """Last tick price per bucket, forward-filling empty buckets.

    Ticks before the grid start seed the fill value for an empty first
    bucket; ticks at or after the grid end are ignored. Raises if no tick
    arrives before the end of bucket 0.
    """
    last_in_bucket = np.full(grid.n_buckets, np.nan)
    seed = math.nan
    for tick in sorted(ticks, key=lambda t: t.timestamp_ms):
        sec = tick.timestamp_ms // 1000
        if sec < grid.start:
            seed = tick.price
            continue
        if sec >= grid.end:
            continue
        last_in_bucket[(sec - grid.start) // grid.bucket_width] = tick.price
    if math.isnan(last_in_bucket[0]):
        if math.isnan(seed):
            raise InputError("no tick at or before the end of the first bucket")
        last_in_bucket[0] = seed
    for b in range(1, grid.n_buckets):
        if math.isnan(last_in_bucket[b]):
            last_in_bucket[b] = last_in_bucket[b - 1]
    return BucketSeries(grid=grid, values=last_in_bucket, kind="price")


def log_returns(series: BucketSeries, count_smoothing: float = 1.0) -> ReturnSeries:
    """Log-returns between consecutive buckets.

    Price series use ``ln(v[i+1]/v[i])``; count series are smoothed to
    ``ln((v[i+1]+s)/(v[i]+s))`` so zero-count transitions stay defined (and a
    zero-to-zero transition has return 0).
    """
    v = series.values
    if series.kind == "price":
        if not np.all(v > 0):
            raise NumericError("log-returns need strictly positive prices")
        shifted = v
    else:
        if count_smoothing < 0:
            raise ValueError("count_smoothing must be nonnegative")
        shifted = v + count_smoothing
        if not np.all(shifted > 0):
            raise NumericError("count series has empty buckets; use positive smoothing")
    return ReturnSeries(grid=series.grid, returns=np.log(shifted[1:] / shifted[:-1]))


def nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    """Rank-based percentile of an ascending-sorted sample.

    Uses rank ``floor(percentile * n)`` (1-based, clamped to 1), so that on a
    sample of n distinct values exactly ``ceil((1 - percentile) * n)`` of them
    lie strictly above the returned threshold.
    """
    n = len(sorted_values)
    rank = max(1, math.floor(percentile * n))
    return float(sorted_values[rank - 1])


def detect_jumps(returns: ReturnSeries, percentile: float = 0.99,
                 direction: str = "up", label: str = "jumps",
                 threshold: float | None = None) -> EventStream:
    """Tail events beyond the empirical rank percentile of the series.

    ``up`` flags returns strictly above the percentile of the returns
    themselves (and strictly positive); ``down`` applies the same rule to the
    negated returns. Each event is indexed at the destination bucket of its
    return. Requires at least 10 returns.

    An explicit ``threshold`` (on the already-negated scale for ``down``)
    overrides the per-series percentile; the pipeline uses this to share one
    pooled threshold across streams.
    """
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got '{direction}'")
    if not 0 < percentile < 1:
        raise ValueError("percentile must be in (0, 1)")
    r = returns.returns
    if len(r) < 10:
        raise InputError(f"need at least 10 returns to set a threshold, got {len(r)}")
    x = r if direction == "up" else -r
    if threshold is None:
        threshold = nearest_rank(np.sort(x), percentile)
    hit = (x > threshold) & (x > 0)
    return EventStream(label=label, event_buckets=tuple(int(i) + 1 for i in np.flatnonzero(hit)))


def overlap_fraction(process_set: ProcessSet) -> float:
    """Fraction of events that are the sole event in their bucket, across all streams."""
    occupancy: dict[int, int] = {}
    for stream in process_set.streams:
        for b in stream.event_buckets:
            occupancy[b] = occupancy.get(b, 0) + 1
    total = sum(occupancy.values())
    if total == 0:
        raise InputError("overlap fraction is undefined with zero events")
    sole = sum(n for n in occupancy.values() if n == 1)
    return sole / total


def write_event_csv(path: str | Path, process_set: ProcessSet) -> None:
    """Emit `label,bucket_index,bucket_start_unix` rows sorted by (label, bucket)."""
    grid = process_set.grid
    rows = sorted(
        (s.label, b, grid.start + b * grid.bucket_width)
        for s in process_set.streams
        for b in s.event_buckets
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_CSV_HEADER)
        writer.writerows(rows)


def read_event_csv(path: str | Path, grid: BucketGrid,
                   labels: Sequence[str] | None = None) -> ProcessSet:
    """Rebuild a ProcessSet from an event CSV.

    ``labels`` fixes the stream order and admits empty streams (labels with
    no rows); by default streams appear in file order with no empty streams.
    """
    by_label: dict[str, list[int]] = {}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != EVENT_CSV_HEADER:
                raise InputError(f"unexpected event CSV header: {header}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise InputError(f"line {lineno}: expected 3 columns")
                label, bucket = row[0], int(row[1])
                by_label.setdefault(label, []).append(bucket)
    except OSError as exc:
        raise InputError(f"cannot read event CSV {path}: {exc}") from exc
    if labels is None:
        labels = list(by_label)
    else:
        unknown = set(by_label) - set(labels)
        if unknown:
            raise InputError(f"event CSV has unconfigured labels: {sorted(unknown)}")
    streams = [
        EventStream(label=lb, event_buckets=tuple(sorted(set(by_label.get(lb, ())))))
        for lb in labels
    ]
    return ProcessSet(grid=grid, streams=streams)


def write_grid_json(path: str | Path, grid: BucketGrid) -> None:
    payload = {"start": grid.start, "bucket_width": grid.bucket_width,
               "n_buckets": grid.n_buckets}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def read_grid_json(path: str | Path) -> BucketGrid:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return BucketGrid(start=int(payload["start"]),
                          bucket_width=int(payload["bucket_width"]),
                          n_buckets=int(payload["n_buckets"]))
    except OSError as exc:
        raise InputError(f"cannot read grid file {path}: {exc}") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed grid file {path}: {exc}") from exc
