"""Sectioned-window k-NN distance scoring with a percentile threshold."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .ingest import UnivariateSeries


@dataclass(frozen=True)
class AnomalyConfig:
    window_length: int = 60
    stride: int | None = None  # None: same as window_length (non-overlapping)
    k: int = 5
    percentile: float = 99.9
    exclusion_radius: int = 0

    def __post_init__(self):
        if self.window_length < 1 or self.k < 1:
            raise ValueError("window_length and k must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0 < self.percentile < 100:
            raise ValueError("percentile must lie strictly between 0 and 100")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion_radius must be >= 0")

    @property
    def step(self) -> int:
        return self.stride if self.stride is not None else self.window_length


@dataclass
class AnomalyReport:
    start_index: np.ndarray
    start_timestamp: np.ndarray
    score: np.ndarray
    rank: np.ndarray
    flagged: np.ndarray
    threshold: float
    config: AnomalyConfig = field(default_factory=AnomalyConfig)

    @property
    def flagged_count(self) -> int:
        return int(self.flagged.sum())

    def __len__(self) -> int:
        return self.score.size


def section_windows(series, window_length: int, stride: int):
    """Return ``(starts, windows)``; ``windows`` is a (count, window_length) array."""
    values = series.values if isinstance(series, UnivariateSeries) else np.asarray(series, float)
    if window_length < 1 or stride < 1:
        raise ValueError("window_length and stride must be >= 1")
    if window_length > values.size:
        raise ValueError(f"window length {window_length} exceeds series length {values.size}")
    count = (values.size - window_length) // stride + 1
    starts = np.arange(count) * stride
    windows = np.lib.stride_tricks.sliding_window_view(values, window_length)[::stride]
    return starts, windows[:count].copy()


def knn_scores(windows, k: int, exclusion_radius: int = 0, block: int = 64) -> np.ndarray:
    """Distance from each window to its k-th nearest admissible window.

    Windows whose index differs by at most ``exclusion_radius`` (including
    the window itself) are not admissible. Search is exact.
    """
    x = np.asarray(windows, dtype=float)
    if x.ndim != 2:
        raise ValueError("windows must be a 2-D array")
    n = x.shape[0]
    required = k + 2 * exclusion_radius + 1
    if n < required:
        raise ValueError(
            f"too few windows: k={k} with exclusion_radius={exclusion_radius} "
            f"needs at least {required}, got {n}"
        )
    idx = np.arange(n)
    block = max(1, min(block, max(1, 2**22 // max(n * x.shape[1], 1))))
    scores = np.empty(n)
    for start in range(0, n, block):
        rows = idx[start:start + block]
        diff = x[rows, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        dist[np.abs(rows[:, None] - idx[None, :]) <= exclusion_radius] = np.inf
        scores[rows] = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return scores


def percentile_for_count(window_count: int, flag_count: int) -> float:
    """Percentile at which linear interpolation leaves ``flag_count`` distinct scores above."""
    if not 0 < flag_count < window_count:
        raise ValueError("flag_count must lie strictly between 0 and window_count")
    return 100.0 * (window_count - flag_count - 0.5) / (window_count - 1)


def _ranks(scores: np.ndarray) -> np.ndarray:
    # 1 = most anomalous; ties broken by earlier window first.
    order = np.lexsort((np.arange(scores.size), -scores))
    ranks = np.empty(scores.size, dtype=int)
    ranks[order] = np.arange(1, scores.size + 1)
    return ranks


def flag_scores(scores, percentile: float):
    """Threshold at the linear-interpolated percentile; flag strictly above it."""
    scores = np.asarray(scores, dtype=float)
    threshold = float(np.percentile(scores, percentile))
    return threshold, scores > threshold


def detect(series: UnivariateSeries, config: AnomalyConfig) -> AnomalyReport:
    """Score every sectioned window and flag those strictly above the percentile."""
    starts, windows = section_windows(series, config.window_length, config.step)
    scores = knn_scores(windows, config.k, config.exclusion_radius)
    threshold, flagged = flag_scores(scores, config.percentile)
    stamps = series.timestamps()[starts]
    return AnomalyReport(starts, stamps, scores, _ranks(scores), flagged, threshold, config)


def write_report(report: AnomalyReport, csv_path, meta_path) -> None:
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("start_index,start_timestamp,score,rank,flagged\n")
        for i, ts, s, r, f in zip(report.start_index, report.start_timestamp.astype(str),
                                  report.score, report.rank, report.flagged):
            fh.write(f"{int(i)},{ts},{float(s)!r},{int(r)},{str(bool(f)).lower()}\n")
    meta = {
        "threshold": report.threshold,
        "percentile": report.config.percentile,
        "flagged_count": report.flagged_count,
        "window_count": len(report),
        "config": asdict(report.config),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
