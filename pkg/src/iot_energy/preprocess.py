"""Min-max scaling, lookback windowing and chronological splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import UnivariateSeries


@dataclass(frozen=True)
class ScalerParams:
    min_value: float
    max_value: float

    def __post_init__(self):
        if not self.max_value >= self.min_value:
            raise ValueError("max_value must be >= min_value")

    @property
    def span(self) -> float:
        return self.max_value - self.min_value

    def transform(self, x):
        # Degenerate range maps everything to 0 rather than failing.
        x = np.asarray(x, dtype=float)
        if self.span == 0:
            return np.zeros_like(x) if x.ndim else 0.0
        out = (x - self.min_value) / self.span
        return out if out.ndim else float(out)

    def inverse_transform(self, y):
        y = np.asarray(y, dtype=float)
        out = y * self.span + self.min_value
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"min_value": self.min_value, "max_value": self.max_value}

    @classmethod
    def from_dict(cls, data: dict) -> "ScalerParams":
        return cls(float(data["min_value"]), float(data["max_value"]))


def fit_scaler(values) -> ScalerParams:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot fit a scaler on empty input")
    return ScalerParams(float(values.min()), float(values.max()))


def transform(params: ScalerParams, x):
    return params.transform(x)


def inverse_transform(params: ScalerParams, y):
    return params.inverse_transform(y)


@dataclass(frozen=True)
class WindowedDataset:
    """Lookback windows and their next-step targets.

    Row ``i`` of ``inputs`` holds series values ``[i, i + lookback)`` and
    ``targets[i]`` is value ``i + lookback``; ``origin_timestamps[i]`` is the
    timestamp of that target.
    """

    lookback: int
    inputs: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    origin_timestamps: np.ndarray = field(repr=False)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float).reshape(-1, self.lookback)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.shape[0] != targets.size or targets.size != len(self.origin_timestamps):
            raise ValueError("inputs, targets and timestamps disagree in length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.targets.size

    def rows(self, start: int, stop: int) -> "WindowedDataset":
        return WindowedDataset(
            self.lookback,
            self.inputs[start:stop],
            self.targets[start:stop],
            self.origin_timestamps[start:stop],
        )


def make_windows(series: UnivariateSeries, lookback: int) -> WindowedDataset:
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    if lookback >= len(series):
        raise ValueError(
            f"insufficient data: lookback {lookback} needs more than {len(series)} values"
        )
    values = series.values
    inputs = np.lib.stride_tricks.sliding_window_view(values[:-1], lookback).copy()
    targets = values[lookback:].copy()
    stamps = series.timestamps()[lookback:]
    return WindowedDataset(lookback, inputs, targets, stamps)


def train_size(n: int, train_fraction: float) -> int:
    return math.floor(n * train_fraction)


def split_train_test(dataset: WindowedDataset, train_fraction: float = 0.8):
    """Chronological split: the first ``floor(n * fraction)`` rows train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    n_train = train_size(n, train_fraction)
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} rows at {train_fraction} leaves an empty side")
    return dataset.rows(0, n_train), dataset.rows(n_train, n)


@dataclass(frozen=True)
class PreparedData:
    scaler: ScalerParams
    train: WindowedDataset
    test: WindowedDataset


def prepare(
    series: UnivariateSeries,
    lookback: int,
    train_fraction: float = 0.8,
    fit_on: str = "train",
) -> PreparedData:
    """Scale, window and split a raw series.

    With ``fit_on="train"`` the scaler sees only the leading
    ``train_fraction`` of the raw series. That span lies inside the
    training windows for every lookback, so models with different
    lookbacks share one scaler and the test span never leaks in.
    """
    if fit_on not in ("train", "all"):
        raise ValueError(f"fit_on must be 'train' or 'all', got {fit_on!r}")
    if lookback >= len(series):
        raise ValueError(
            f"insufficient data: lookback {lookback} needs more than {len(series)} values"
        )
    if fit_on == "train":
        scaler = fit_scaler(series.values[: max(1, train_size(len(series), train_fraction))])
    else:
        scaler = fit_scaler(series.values)
    scaled = series.with_values(scaler.transform(series.values))
    train, test = split_train_test(make_windows(scaled, lookback), train_fraction)
    return PreparedData(scaler, train, test)
