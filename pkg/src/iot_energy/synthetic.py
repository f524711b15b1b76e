"""Synthetic stand-ins for the household dataset and test signals.

Nothing here claims to match the real household; it produces data with
the same schema and a plausible daily/weekly rhythm so every stage of the
pipeline can be exercised offline.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from .ingest import PowerRecord, UnivariateSeries


def household_records(
    start: datetime = datetime(2007, 1, 1),
    days: int = 28,
    seed: int = 0,
    missing_runs: int = 3,
) -> list[PowerRecord]:
    """Minute records with base load, daily peaks, appliance bursts and gaps."""
    rng = np.random.default_rng(seed)
    n = days * 1440
    minute = np.arange(n)
    hour = (minute % 1440) / 60.0
    weekday = ((minute // 1440) + start.weekday()) % 7

    daily = (0.9 * np.exp(-0.5 * ((hour - 7.5) / 1.0) ** 2)
             + 1.4 * np.exp(-0.5 * ((hour - 20.0) / 1.8) ** 2))
    weekend = np.where(weekday >= 5, 1.3, 1.0)
    base = 0.25 + 0.05 * rng.standard_normal(n)
    kitchen = np.zeros(n)
    laundry = np.zeros(n)
    heater = np.zeros(n)
    for day in range(days):
        offset = day * 1440
        for _ in range(rng.poisson(3)):
            t = offset + int(rng.normal(19 * 60, 90)) % 1440
            kitchen[t:t + int(rng.integers(5, 40))] += rng.uniform(1.0, 2.5)
        if rng.uniform() < 0.4:
            t = offset + int(rng.uniform(9 * 60, 16 * 60))
            laundry[t:t + int(rng.integers(60, 120))] += rng.uniform(0.4, 2.2)
        for centre in (6.5, 21.0):
            t = offset + int(rng.normal(centre * 60, 30)) % 1440
            heater[t:t + int(rng.integers(30, 90))] += rng.uniform(0.8, 1.2)

    other = np.clip(base + daily * weekend * (0.7 + 0.3 * rng.random(n)), 0.08, None)
    active = other + kitchen + laundry + heater
    reactive = np.clip(0.1 + 0.05 * rng.standard_normal(n) + 0.04 * (kitchen > 0), 0.0, None)
    voltage = 240.0 - 1.5 * active + 1.2 * rng.standard_normal(n)
    intensity = active * 1000.0 / voltage

    def wh(kw):
        return np.round(kw * 1000.0 / 60.0)

    rows = np.column_stack([
        np.round(active, 3), np.round(reactive, 3), np.round(voltage, 2),
        np.round(intensity, 1), wh(kitchen), wh(laundry), wh(heater),
    ])
    missing = np.zeros(n, dtype=bool)
    for _ in range(missing_runs):
        t = int(rng.integers(1, n - 200))
        missing[t:t + int(rng.integers(1, 120))] = True

    out = []
    for k in range(n):
        ts = start + timedelta(minutes=k)
        out.append(PowerRecord(ts) if missing[k] else PowerRecord(ts, *rows[k].tolist()))
    return out


def sine_series(n: int, period: float = 24.0, noise: float = 0.0, seed: int = 0,
                start: datetime = datetime(2007, 1, 1), step: float = 3600.0) -> UnivariateSeries:
    rng = np.random.default_rng(seed)
    values = np.sin(2 * np.pi * np.arange(n) / period) + noise * rng.standard_normal(n)
    return UnivariateSeries(start, step, values)


def inject_spikes(series: UnivariateSeries, count: int, window_length: int,
                  magnitude: float = 10.0, seed: int = 0):
    """Add ``count`` single-sample spikes in distinct non-overlapping windows.

    Spike height is ``magnitude`` times the series amplitude (max - min).
    Returns the new series and the indices of the spikes.
    """
    rng = np.random.default_rng(seed)
    values = series.values.copy()
    amplitude = float(values.max() - values.min())
    n_windows = values.size // window_length
    chosen = np.sort(rng.choice(n_windows, size=count, replace=False))
    idx = chosen * window_length + rng.integers(0, window_length, size=count)
    values[idx] += magnitude * amplitude
    return series.with_values(values), idx
