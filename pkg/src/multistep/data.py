"""Traffic-flow data pipeline: ingest, aggregate, normalize, window, split.

Raw PeMS-style CSVs carry one flow count per fixed interval. Everything
here is a pure transformation; series and datasets are treated as
immutable once built.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError, IngestError, ShapeError


@dataclass(frozen=True)
class TimeSeries:
    timestamps: tuple  # of datetime, strictly increasing, evenly spaced
    values: np.ndarray  # float64, finite, >= 0
    resolution: timedelta

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.timestamps) != len(self.values):
            raise IngestError("timestamp/value length mismatch")
        if len(self.timestamps) == 0:
            raise IngestError("no data rows")
        if not np.all(np.isfinite(self.values)):
            raise IngestError("non-finite values")
        if np.any(self.values < 0):
            raise IngestError("negative flow values")
        for i in range(1, len(self.timestamps)):
            delta = self.timestamps[i] - self.timestamps[i - 1]
            if delta != self.resolution:
                raise IngestError(
                    f"row {i}: spacing {delta} != resolution {self.resolution}"
                )

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Normalizer:
    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise ConfigError(f"max ({self.max}) must exceed min ({self.min})")

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.min) / (self.max - self.min)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * (self.max - self.min) + self.min


@dataclass(frozen=True)
class WindowedDataset:
    histories: np.ndarray  # [num_samples, p]
    futures: np.ndarray  # [num_samples, q]
    p: int
    q: int

    def __post_init__(self):
        object.__setattr__(self, "histories", np.asarray(self.histories, dtype=float))
        object.__setattr__(self, "futures", np.asarray(self.futures, dtype=float))
        h, f = self.histories, self.futures
        if h.ndim != 2 or f.ndim != 2 or h.shape[0] != f.shape[0]:
            raise ShapeError(f"bad window shapes {h.shape}, {f.shape}")
        if self.p < 1 or self.q < 1:
            raise ConfigError("p and q must be >= 1")
        if h.shape[1] != self.p or f.shape[1] != self.q:
            raise ShapeError(
                f"window widths ({h.shape[1]}, {f.shape[1]}) != (p={self.p}, q={self.q})"
            )

    def __len__(self) -> int:
        return self.histories.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    train_end: datetime
    val_end: datetime

    def __post_init__(self):
        if not self.train_end < self.val_end:
            raise ConfigError("train_end must precede val_end")


def ingest_csv(
    path, expected_resolution: timedelta, gap_policy: str = "reject"
) -> TimeSeries:
    """Read a `timestamp,flow` CSV into a validated TimeSeries.

    Rows are sorted by timestamp; duplicates and negative values are
    rejected with the offending row number. Gaps are rejected by default
    or linearly interpolated under gap_policy='linear'.
    """
    if gap_policy not in ("reject", "linear"):
        raise ConfigError(f"unknown gap_policy {gap_policy!r}")
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and row and row[0].strip().lower() == "timestamp":
                continue  # header
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise IngestError(f"row {lineno}: expected 2 columns, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise IngestError(f"row {lineno}: bad timestamp {row[0]!r}") from exc
            try:
                value = float(row[1])
            except ValueError as exc:
                raise IngestError(f"row {lineno}: bad value {row[1]!r}") from exc
            if not np.isfinite(value):
                raise IngestError(f"row {lineno}: non-finite value")
            if value < 0:
                raise IngestError(f"row {lineno}: negative value {value}")
            rows.append((ts, value, lineno))
    if not rows:
        raise IngestError("no data rows")
    rows.sort(key=lambda r: r[0])
    for (t0, _, _), (t1, _, ln) in zip(rows, rows[1:]):
        if t1 == t0:
            raise IngestError(f"row {ln}: duplicate timestamp {t1.isoformat()}")

    timestamps = [rows[0][0]]
    values = [rows[0][1]]
    for ts, value, lineno in rows[1:]:
        delta = ts - timestamps[-1]
        steps, rem = divmod(delta, expected_resolution)
        if rem != timedelta(0):
            raise IngestError(
                f"row {lineno}: spacing {delta} is not a multiple of "
                f"{expected_resolution}"
            )
        if steps > 1:
            if gap_policy == "reject":
                raise IngestError(f"row {lineno}: gap of {steps - 1} missing intervals")
            prev = values[-1]
            for k in range(1, steps):
                timestamps.append(timestamps[-1] + expected_resolution)
                values.append(prev + (value - prev) * k / steps)
        timestamps.append(ts)
        values.append(value)
    return TimeSeries(tuple(timestamps), np.array(values), expected_resolution)


def write_series_csv(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamp", "flow"])
        for ts, value in zip(series.timestamps, series.values):
            writer.writerow([ts.isoformat(), repr(float(value))])


def aggregate(series: TimeSeries, factor: int, how: str = "sum") -> TimeSeries:
    """Coarsen resolution by `factor` consecutive points (flow counts sum;
    `how='mean'` for rate-like data). A trailing remainder shorter than
    `factor` is dropped."""
    if factor < 1:
        raise ConfigError(f"factor must be >= 1, got {factor}")
    if how not in ("sum", "mean"):
        raise ConfigError(f"unknown aggregation {how!r}")
    if factor == 1:
        return series
    n = len(series) // factor
    if n == 0:
        raise ConfigError(f"series length {len(series)} < factor {factor}")
    blocks = series.values[: n * factor].reshape(n, factor)
    values = blocks.sum(axis=1) if how == "sum" else blocks.mean(axis=1)
    timestamps = tuple(series.timestamps[i * factor] for i in range(n))
    return TimeSeries(timestamps, values, series.resolution * factor)


def fit_normalizer(series) -> Normalizer:
    """Min-max statistics from a series (fit on the training split only)."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if values.size < 2:
        raise ConfigError("need at least 2 values to fit a normalizer")
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        raise ConfigError("constant series cannot be min-max normalized")
    return Normalizer(lo, hi)


def make_windows(series, p: int, q: int, stride: int = 1) -> WindowedDataset:
    """Slice a series into (history, future) pairs: sample i covers
    values[i*stride : i*stride+p] and the q points after it."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if p < 1 or q < 1:
        raise ConfigError("p and q must be >= 1")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    n = len(values)
    if n < p + q:
        raise ConfigError(f"series length {n} < p + q = {p + q}")
    num = (n - p - q) // stride + 1
    histories = np.empty((num, p))
    futures = np.empty((num, q))
    for i in range(num):
        s = i * stride
        histories[i] = values[s : s + p]
        futures[i] = values[s + p : s + p + q]
    return WindowedDataset(histories, futures, p, q)


def split_by_date(
    series: TimeSeries, spec: SplitSpec
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Chronological split: train = (-inf, train_end], val = (train_end,
    val_end], test = (val_end, inf). All three segments must be non-empty."""
    ts = series.timestamps
    n_train = sum(1 for t in ts if t <= spec.train_end)
    n_val = sum(1 for t in ts if spec.train_end < t <= spec.val_end)
    n_test = len(ts) - n_train - n_val
    if n_train == 0:
        raise ConfigError("empty training split")
    if n_val == 0:
        raise ConfigError("empty validation split")
    if n_test == 0:
        raise ConfigError("empty test split (boundaries beyond series range?)")

    def segment(lo, hi):
        return TimeSeries(ts[lo:hi], series.values[lo:hi], series.resolution)

    return (
        segment(0, n_train),
        segment(n_train, n_train + n_val),
        segment(n_train + n_val, len(ts)),
    )


def write_sidecar(path, p: int, q: int, stride: int, normalizer: Normalizer | None) -> None:
    doc = {"p": p, "q": q, "stride": stride}
    if normalizer is not None:
        doc["normalization"] = {"min": normalizer.min, "max": normalizer.max}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
