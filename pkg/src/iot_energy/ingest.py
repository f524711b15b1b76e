"""Parsing, gap filling and resampling of the household power dataset.

The raw file is the semicolon-separated minute log distributed with the
"Individual household electric power consumption" dataset::

    Date;Time;Global_active_power;...;Sub_metering_3
    16/4/2007;02:10:00;0.218;0.000;242.300;1.000;0.000;0.000;0.000

Rows whose measurements are all ``?`` are kept as missing records so the
caller can decide how to treat them (see :func:`fill_missing`).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from typing import IO, Iterable, Sequence, Union

import numpy as np

HEADER = (
    "Date;Time;Global_active_power;Global_reactive_power;Voltage;"
    "Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3"
)
MEASURED_FIELDS = (
    "global_active_power",
    "global_reactive_power",
    "voltage",
    "global_intensity",
    "sub_metering_1",
    "sub_metering_2",
    "sub_metering_3",
)
MISSING = "?"
N_FIELDS = 9

Source = Union[bytes, str, os.PathLike, IO]


class DatasetError(ValueError):
    """Raised for unreadable or malformed dataset input."""


@dataclass(frozen=True)
class PowerRecord:
    """One minute of household measurements.

    A measured field set to ``None`` is flagged missing. The source marks
    whole rows missing, so either every measured field is present or none is.
    """

    timestamp: datetime
    global_active_power: float | None = None
    global_reactive_power: float | None = None
    voltage: float | None = None
    global_intensity: float | None = None
    sub_metering_1: float | None = None
    sub_metering_2: float | None = None
    sub_metering_3: float | None = None

    def __post_init__(self):
        if self.timestamp.second or self.timestamp.microsecond:
            raise ValueError(f"timestamp {self.timestamp} is not minute-aligned")
        present = [getattr(self, name) is not None for name in MEASURED_FIELDS]
        if any(present) and not all(present):
            raise ValueError("record must be fully present or fully missing")
        if all(present):
            for name in MEASURED_FIELDS:
                value = getattr(self, name)
                if name == "voltage":
                    if not value > 0:
                        raise ValueError(f"voltage must be > 0, got {value}")
                elif not value >= 0:
                    raise ValueError(f"{name} must be >= 0, got {value}")

    @property
    def is_missing(self) -> bool:
        return self.global_active_power is None

    def present(self, name: str) -> bool:
        return getattr(self, name) is not None

    @classmethod
    def missing(cls, timestamp: datetime) -> "PowerRecord":
        return cls(timestamp)


@dataclass(frozen=True)
class UnivariateSeries:
    """Uniformly sampled series; ``step`` is in seconds."""

    start_timestamp: datetime
    step: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("series values must be a non-empty 1-D sequence")
        if not self.step > 0:
            raise ValueError("series step must be positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains missing or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def timestamps(self) -> np.ndarray:
        """Timestamps of every value as ``datetime64[s]``."""
        start = np.datetime64(self.start_timestamp, "s")
        offsets = (np.arange(len(self)) * self.step).astype("timedelta64[s]")
        return start + offsets

    def with_values(self, values) -> "UnivariateSeries":
        return replace(self, values=np.asarray(values, dtype=float))


def _parse_number(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetError(f"line {lineno}: non-numeric field {text!r}") from None


def _parse_timestamp(date_text: str, time_text: str, lineno: int) -> datetime:
    try:
        day, month, year = (int(p) for p in date_text.split("/"))
        hour, minute, second = (int(p) for p in time_text.split(":"))
        return datetime(year, month, day, hour, minute, second)
    except ValueError:
        raise DatasetError(
            f"line {lineno}: unparseable date/time {date_text!r} {time_text!r}"
        ) from None


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_dataset(
    source: Source,
    start: date | None = None,
    end: date | None = None,
) -> list[PowerRecord]:
    """Parse the semicolon-delimited dataset into records, in file order.

    ``source`` may be raw bytes, a path or an open file. ``start``/``end``
    optionally restrict the result to an inclusive calendar-date range;
    rows outside it are still validated.
    """
    lines = _read_text(source).splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError("empty input")
    if len(lines[0].split(";")) != N_FIELDS:
        raise DatasetError(f"line 1: expected {N_FIELDS} fields in header")

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(";")
        if len(parts) != N_FIELDS:
            raise DatasetError(f"line {lineno}: expected {N_FIELDS} fields, got {len(parts)}")
        ts = _parse_timestamp(parts[0], parts[1], lineno)
        if (start is not None and ts.date() < start) or (end is not None and ts.date() > end):
            continue
        measured = parts[2:]
        if all(p == MISSING for p in measured):
            records.append(PowerRecord(ts))
            continue
        if any(p == MISSING for p in measured):
            raise DatasetError(f"line {lineno}: partially missing row")
        values = [_parse_number(p, lineno) for p in measured]
        try:
            records.append(PowerRecord(ts, *values))
        except ValueError as exc:
            raise DatasetError(f"line {lineno}: {exc}") from None
    return records


def serialize_records(records: Iterable[PowerRecord]) -> str:
    """Write records back in the dataset's text format (header included)."""
    out = io.StringIO()
    out.write(HEADER + "\n")
    for rec in records:
        ts = rec.timestamp
        head = f"{ts.day}/{ts.month}/{ts.year};{ts:%H:%M:%S}"
        if rec.is_missing:
            body = ";".join(MISSING for _ in MEASURED_FIELDS)
        else:
            body = ";".join(repr(float(getattr(rec, n))) for n in MEASURED_FIELDS)
        out.write(f"{head};{body}\n")
    return out.getvalue()


def fill_missing(records: Sequence[PowerRecord], policy: str = "forward_fill") -> list[PowerRecord]:
    """Resolve missing records.

    ``forward_fill`` copies the most recent present record's measurements
    (leading missing rows are dropped); ``drop`` removes missing rows.
    """
    if policy not in ("forward_fill", "drop"):
        raise ValueError(f"unknown fill policy {policy!r}")
    if not records or all(r.is_missing for r in records):
        raise DatasetError("all records are missing")

    out = []
    last = None
    for rec in records:
        if not rec.is_missing:
            last = rec
            out.append(rec)
        elif policy == "forward_fill" and last is not None:
            out.append(replace(last, timestamp=rec.timestamp))
    return out


def _as_seconds(interval) -> float:
    if isinstance(interval, timedelta):
        return interval.total_seconds()
    return float(interval)


def resample(
    records: Sequence[PowerRecord],
    feature: str = "global_active_power",
    interval: timedelta | float = timedelta(minutes=1),
) -> UnivariateSeries:
    """Bucket-mean ``feature`` over consecutive ``interval`` windows.

    Buckets are aligned to the first timestamp and a trailing partial
    bucket is dropped. ``interval`` is a timedelta or a number of seconds.
    """
    if feature not in MEASURED_FIELDS:
        raise ValueError(f"unknown feature {feature!r}")
    if not records:
        raise DatasetError("no records to resample")
    if any(r.is_missing for r in records):
        raise DatasetError("records contain missing values; call fill_missing first")

    times = np.array([r.timestamp for r in records], dtype="datetime64[s]")
    if len(records) > 1:
        diffs = np.diff(times).astype(np.int64)
        step = int(diffs[0])
        bad = np.flatnonzero(diffs != step)
        if step <= 0 or bad.size:
            at = records[int(bad[0]) + 1].timestamp if bad.size else records[1].timestamp
            raise DatasetError(f"records are not uniformly spaced (gap at {at})")
    else:
        step = 60

    seconds = _as_seconds(interval)
    ratio = seconds / step
    if seconds <= 0 or ratio != int(ratio):
        raise ValueError(f"interval of {seconds:g}s is not a multiple of the record step {step}s")
    ratio = int(ratio)

    column = np.array([getattr(r, feature) for r in records], dtype=float)
    n_buckets = column.size // ratio
    if n_buckets == 0:
        raise DatasetError("fewer records than one resampling interval")
    values = column[: n_buckets * ratio].reshape(n_buckets, ratio).mean(axis=1)
    return UnivariateSeries(records[0].timestamp, float(seconds), values)


def write_series(series: UnivariateSeries, path) -> None:
    """Store a series as ``timestamp,value`` CSV."""
    stamps = series.timestamps().astype(str)
    with open(path, "w", newline="\n") as fh:
        fh.write("timestamp,value\n")
        for ts, value in zip(stamps, series.values):
            fh.write(f"{ts},{float(value)!r}\n")


def read_series(path) -> UnivariateSeries:
    """Load a series written by :func:`write_series`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "timestamp,value":
            raise DatasetError(f"{path}: not a series file")
        stamps, values = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            ts, _, value = line.partition(",")
            stamps.append(np.datetime64(ts, "s"))
            values.append(_parse_number(value, lineno))
    if not values:
        raise DatasetError(f"{path}: empty series")
    if len(stamps) > 1:
        step = float((stamps[1] - stamps[0]).astype(np.int64))
    else:
        step = 60.0
    start = stamps[0].astype(datetime)
    return UnivariateSeries(start, step, np.array(values))
