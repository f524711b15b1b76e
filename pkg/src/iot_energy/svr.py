"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved in the usual 2n-variable form: for training rows
``t < n`` the variable is alpha_t with label +1, for ``t >= n`` it is
alpha*_{t-n} with label -1, and the problem is

    min 1/2 a^T Q a + p^T a,   0 <= a <= C,   sum_t y_t a_t = 0

with ``Q_st = y_s y_t K(x_s, x_t)`` and ``p = (eps - z, eps + z)``. Pairs
are picked with second-order working-set selection.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .preprocess import ScalerParams, WindowedDataset

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SvrConfig:
    lookback: int = 30
    c: float = 10.0
    epsilon: float = 0.01
    gamma: float | None = None  # None means 1 / lookback
    tolerance: float = 1e-3
    max_passes: int = 50
    max_train_rows: int = 20_000
    cache_mb: float = 256.0

    def __post_init__(self):
        if self.lookback < 1 or self.max_passes < 1 or self.max_train_rows < 1:
            raise ValueError("lookback, max_passes and max_train_rows must be >= 1")
        for name in ("c", "epsilon", "tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.epsilon < 1:
            raise ValueError("epsilon must be < 1 on normalized data")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    @property
    def kernel_gamma(self) -> float:
        return self.gamma if self.gamma is not None else 1.0 / self.lookback


@dataclass
class SvrModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    scaler: ScalerParams | None = None
    converged: bool = True
    iterations: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.dual_coefficients = np.asarray(self.dual_coefficients, dtype=float).reshape(-1)
        sv = np.asarray(self.support_vectors, dtype=float)
        self.support_vectors = sv.reshape(self.dual_coefficients.size, -1) if sv.size else sv
        self.bias = float(self.bias)

    @property
    def lookback(self) -> int | None:
        return self.metadata.get("lookback")

    def __len__(self) -> int:
        return self.dual_coefficients.size


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"kernel arguments differ in length: {x.shape} vs {y.shape}")
    d = x - y
    return math.exp(-gamma * float(d @ d))


def rbf_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel matrix between the rows of ``a`` and ``b``."""
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _KernelRows:
    """LRU cache of kernel-matrix rows over the training inputs."""

    def __init__(self, x: np.ndarray, gamma: float, cache_mb: float):
        self.x = x
        self.gamma = gamma
        self.sq = (x * x).sum(1)
        self.capacity = max(2, int(cache_mb * 2**20 / (8 * max(len(x), 1))))
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def __call__(self, i: int) -> np.ndarray:
        row = self.rows.get(i)
        if row is not None:
            self.rows.move_to_end(i)
            return row
        sq = self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i])
        np.maximum(sq, 0.0, out=sq)
        row = np.exp(-self.gamma * sq)
        row[i] = 1.0
        self.rows[i] = row
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return row


def _select_pair(alpha, grad, y, diag, c, q_row, tolerance):
    """Second-order working-set selection. Returns (i, j) or None when optimal."""
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    yg = -y * grad
    if not up.any() or not low.any():
        return None
    cand = np.where(up, yg, -np.inf)
    i = int(np.argmax(cand))
    g_max = cand[i]
    g_min = np.min(np.where(low, yg, np.inf))
    if g_max - g_min < tolerance:
        return None

    qi = q_row(i)
    b = g_max - yg
    mask = low & (b > 0)
    if not mask.any():
        return None
    a = diag[i] + diag - 2.0 * y[i] * y * qi
    a = np.where(a > 0, a, TAU)
    obj = np.where(mask, -(b * b) / a, np.inf)
    j = int(np.argmin(obj))
    return i, j


def _solve(kernel_row, targets, config: SvrConfig):
    n = targets.size
    c = config.c
    y = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([config.epsilon - targets, config.epsilon + targets])
    alpha = np.zeros(2 * n)
    grad = p.copy()
    diag = np.ones(2 * n)  # K(x, x) = 1 for RBF

    def q_row(t):
        k = kernel_row(t % n)
        row = np.concatenate([k, -k])
        return row if y[t] > 0 else -row

    max_iter = config.max_passes * 2 * n
    iterations = 0
    converged = False
    while iterations < max_iter:
        pair = _select_pair(alpha, grad, y, diag, c, q_row, config.tolerance)
        if pair is None:
            converged = True
            break
        i, j = pair
        qi, qj = q_row(i), q_row(j)
        old_i, old_j = alpha[i], alpha[j]

        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * qi[j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            elif alpha[j] > c:
                alpha[j] = c
                alpha[i] = c + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * qi[j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > c:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        grad += qi * (alpha[i] - old_i) + qj * (alpha[j] - old_j)
        iterations += 1

    return alpha, grad, y, converged, iterations


def _offset(alpha, grad, y, c) -> float:
    """Bias term b (decision value is sum coef*K + b)."""
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= c
        at_lower = alpha <= 0
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yg[ub_mask].min() if ub_mask.any() else math.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -math.inf
        rho = float((ub + lb) / 2)
    return -rho


def train_svr(config: SvrConfig, train_set: WindowedDataset,
              scaler: ScalerParams | None = None) -> SvrModel:
    """Fit the SVR dual; rows with zero coefficient are pruned from the model.

    Only the most recent ``config.max_train_rows`` rows are used. If the
    solver hits ``max_passes`` the model is returned with ``converged=False``
    and a :class:`ConvergenceWarning` is issued.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if train_set.lookback != config.lookback:
        raise ValueError("training windows were built with a different lookback")
    x = train_set.inputs[-config.max_train_rows:]
    z = train_set.targets[-config.max_train_rows:]
    gamma = config.kernel_gamma

    kernel_row = _KernelRows(x, gamma, config.cache_mb)
    alpha, grad, y, converged, iterations = _solve(kernel_row, z, config)
    n = z.size
    coef = alpha[:n] - alpha[n:]
    bias = _offset(alpha, grad, y, config.c)
    keep = coef != 0
    if not converged:
        warnings.warn(f"SMO stopped after {iterations} iterations without meeting tolerance "
                      f"{config.tolerance}", ConvergenceWarning, stacklevel=2)
    log.info("svr: %d support vectors of %d rows, %d iterations", keep.sum(), n, iterations)
    return SvrModel(x[keep].copy(), coef[keep], bias, gamma, scaler, converged, iterations,
                    {"lookback": config.lookback, "train_rows": int(n)})


def predict_svr(model: SvrModel, window) -> float:
    window = np.asarray(window, dtype=float).reshape(-1)
    return float(predict_many(model, window[None, :])[0])


def predict_many(model: SvrModel, windows) -> np.ndarray:
    """Decision values for each row of a WindowedDataset or 2-D array."""
    inputs = windows.inputs if isinstance(windows, WindowedDataset) else np.asarray(windows, float)
    if inputs.size == 0:
        return np.zeros(0)
    inputs = np.atleast_2d(inputs)
    width = model.lookback if model.lookback is not None else (
        model.support_vectors.shape[1] if len(model) else inputs.shape[1])
    if inputs.shape[1] != width:
        raise ValueError(f"window length {inputs.shape[1]} does not match lookback {width}")
    if len(model) == 0:
        return np.full(inputs.shape[0], model.bias)
    out = np.empty(inputs.shape[0])
    chunk = 4096
    for start in range(0, inputs.shape[0], chunk):
        k = rbf_matrix(inputs[start:start + chunk], model.support_vectors, model.gamma)
        out[start:start + chunk] = k @ model.dual_coefficients + model.bias
    return out


def kkt_violations(model: SvrModel, config: SvrConfig, train_set: WindowedDataset) -> np.ndarray:
    """Per-row KKT violation of a trained model against its training rows.

    Rows that were pruned count as zero coefficients. The violation is how
    far the residual y - f(x) sits outside the interval its coefficient
    allows (e.g. |r| <= eps for a zero coefficient, r = eps when strictly
    between 0 and C).
    """
    x = train_set.inputs[-config.max_train_rows:]
    z = train_set.targets[-config.max_train_rows:]
    coef = np.zeros(z.size)
    if len(model):
        lookup = {row.tobytes(): k for k, row in enumerate(model.support_vectors)}
        for idx, row in enumerate(x):
            k = lookup.get(row.tobytes())
            if k is not None:
                coef[idx] = model.dual_coefficients[k]
    r = z - predict_many(model, x)
    eps, c = config.epsilon, config.c
    lo = np.where(coef > 0, eps, np.where(coef < 0, -math.inf, -eps))
    hi = np.where(coef < 0, -eps, np.where(coef > 0, math.inf, eps))
    lo = np.where((coef < 0) & (coef > -c), -eps, lo)
    hi = np.where((coef > 0) & (coef < c), eps, hi)
    lo = np.where(coef <= -c, -math.inf, lo)
    hi = np.where(coef >= c, math.inf, hi)
    return np.maximum(lo - r, 0.0) + np.maximum(r - hi, 0.0)


def save_model(model: SvrModel, config: SvrConfig, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": "svr",
        "encoding": "decimal: row-major nested lists, shortest round-trip float repr",
        "config": asdict(config),
        "scaler": model.scaler.to_dict() if model.scaler else None,
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefficients": model.dual_coefficients.tolist(),
        "bias": model.bias,
        "gamma": model.gamma,
        "converged": model.converged,
        "iterations": model.iterations,
        "metadata": model.metadata,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[SvrModel, SvrConfig]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("model") != "svr":
        raise ValueError(f"{path} is not an SVR model file")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')}")
    config = SvrConfig(**doc["config"])
    scaler = ScalerParams.from_dict(doc["scaler"]) if doc["scaler"] else None
    model = SvrModel(np.array(doc["support_vectors"]), np.array(doc["dual_coefficients"]),
                     doc["bias"], doc["gamma"], scaler, doc["converged"], doc["iterations"],
                     doc["metadata"])
    return model, config
