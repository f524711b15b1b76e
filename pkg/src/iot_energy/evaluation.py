"""Forecast error metrics, residuals and report files."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .preprocess import ScalerParams


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float).reshape(-1)
    p = np.asarray(predicted, dtype=float).reshape(-1)
    if a.size != p.size:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    return a, p


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return float(np.sqrt(np.mean((a - p) ** 2)))


def residuals(actual, predicted) -> np.ndarray:
    """``actual - predicted``; positive means the model under-predicted."""
    a, p = _pair(actual, predicted)
    return a - p


@dataclass
class SplitMetrics:
    split: str
    n_samples: int
    mae_normalized: float
    rmse_normalized: float
    mae_kw: float
    rmse_kw: float
    mean_residual: float


@dataclass
class EvalReport:
    model: str
    splits: dict[str, SplitMetrics] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __getattr__(self, name):
        # train_mae, test_rmse, ... shortcuts over the normalized metrics
        split, _, metric = name.partition("_")
        splits = self.__dict__.get("splits", {})
        if metric in ("mae", "rmse") and split in splits:
            return getattr(splits[split], f"{metric}_normalized")
        raise AttributeError(name)

    def rows(self) -> list[dict]:
        return [{"model": self.model, **asdict(m)} for m in self.splits.values()]

    def to_dict(self) -> dict:
        return {"model": self.model, "config": self.config, "metrics": self.rows()}


def _split_metrics(name: str, actual, predicted, scaler: ScalerParams | None) -> SplitMetrics:
    m, r = mae(actual, predicted), rmse(actual, predicted)
    # rmse >= mae holds exactly; guard against last-ulp rounding
    r = max(r, m)
    span = scaler.span if scaler is not None else math.nan
    return SplitMetrics(name, len(np.atleast_1d(actual)), m, r, m * span, r * span,
                        float(np.mean(residuals(actual, predicted))))


def evaluate(model: str, test, scaler: ScalerParams | None = None, train=None,
             config: dict | None = None) -> EvalReport:
    """Build a report from ``(actual, predicted)`` pairs in normalized units.

    kW metrics are the normalized ones times the scaler span (min-max
    scaling is affine, so absolute errors scale by the span).
    """
    report = EvalReport(model, config=dict(config or {}))
    if train is not None:
        report.splits["train"] = _split_metrics("train", *train, scaler)
    report.splits["test"] = _split_metrics("test", *test, scaler)
    return report


def write_metrics(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_forecast(path, timestamps, actual, predicted) -> None:
    """``timestamp,actual,predicted,residual`` CSV in normalized units."""
    a, p = _pair(actual, predicted)
    res = a - p
    with open(path, "w", newline="\n") as fh:
        fh.write("timestamp,actual,predicted,residual\n")
        for ts, x, y, r in zip(np.asarray(timestamps).astype("datetime64[s]").astype(str),
                               a, p, res):
            fh.write(f"{ts},{float(x)!r},{float(y)!r},{float(r)!r}\n")


def read_forecast(path):
    """Load a forecast CSV as (timestamps, actual, predicted)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "timestamp,actual,predicted,residual":
            raise ValueError(f"{path}: not a forecast file")
        stamps, actual, predicted = [], [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ts, a, p, _ = line.split(",")
            stamps.append(np.datetime64(ts, "s"))
            actual.append(float(a))
            predicted.append(float(p))
    return np.array(stamps, dtype="datetime64[s]"), np.array(actual), np.array(predicted)


def compare(lstm_forecast, svr_forecast) -> dict:
    """Side-by-side test metrics over the timestamps both forecasts cover."""
    ts_l, a_l, p_l = lstm_forecast
    ts_s, a_s, p_s = svr_forecast
    common, il, is_ = np.intersect1d(ts_l, ts_s, return_indices=True)
    if common.size == 0:
        raise ValueError("forecast spans do not overlap")
    if not np.allclose(a_l[il], a_s[is_], rtol=0, atol=1e-12):
        raise ValueError("forecasts disagree on actual values at shared timestamps")
    lstm_mae, svr_mae = mae(a_l[il], p_l[il]), mae(a_s[is_], p_s[is_])
    return {
        "n_shared": int(common.size),
        "span": [str(common[0]), str(common[-1])],
        "lstm_test_mae": lstm_mae,
        "lstm_test_rmse": max(rmse(a_l[il], p_l[il]), lstm_mae),
        "svr_test_mae": svr_mae,
        "svr_test_rmse": max(rmse(a_s[is_], p_s[is_]), svr_mae),
        "svr_test_mae < lstm_test_mae": bool(svr_mae < lstm_mae),
    }
