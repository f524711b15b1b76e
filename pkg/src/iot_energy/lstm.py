"""Single-layer LSTM with a linear read-out, trained by full BPTT.

Gates are stacked in the order input, forget, output, candidate::

    i = sigmoid(Wx_i x_t + Wh_i h + b_i)      f, o likewise
    g = tanh(Wx_g x_t + Wh_g h + b_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)
    y = head . h_T + head_bias

Everything is batched in numpy; inputs are scalar per step.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .preprocess import ScalerParams, WindowedDataset

log = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")
FORGET = GATES.index("forget")
PARAM_NAMES = ("w_input", "w_recurrent", "bias", "head_weight", "head_bias")
SCHEMA_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LstmConfig:
    lookback: int = 100
    hidden_size: int = 32
    epochs: int = 20
    batch_size: int = 1024
    learning_rate: float = 0.01
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    min_improvement: float = 1e-6
    patience: int = 3

    def __post_init__(self):
        for name in ("lookback", "hidden_size", "epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class LstmParams:
    """Weights of the cell (stacked per gate) and the output head.

    ``w_input`` is (4, H), ``w_recurrent`` is (4, H, H) and acts as
    ``W @ h``, ``bias`` is (4, H).
    """

    lookback: int
    w_input: np.ndarray
    w_recurrent: np.ndarray
    bias: np.ndarray
    head_weight: np.ndarray
    head_bias: float = 0.0
    scaler: ScalerParams | None = None

    def __post_init__(self):
        h = self.hidden_size
        shapes = {
            "w_input": (4, h),
            "w_recurrent": (4, h, h),
            "bias": (4, h),
            "head_weight": (h,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        self.head_bias = float(self.head_bias)

    @property
    def hidden_size(self) -> int:
        return np.shape(self.w_input)[-1]

    def arrays(self) -> list[np.ndarray]:
        """Views of every trainable array; ``head_bias`` is wrapped in a 1-element array."""
        return [self.w_input, self.w_recurrent, self.bias, self.head_weight,
                np.array([self.head_bias])]

    def copy(self) -> "LstmParams":
        return LstmParams(self.lookback, self.w_input.copy(), self.w_recurrent.copy(),
                          self.bias.copy(), self.head_weight.copy(), self.head_bias,
                          self.scaler)

    def gate(self, name: str) -> dict[str, np.ndarray]:
        g = GATES.index(name)
        return {"input": self.w_input[g], "recurrent": self.w_recurrent[g], "bias": self.bias[g]}


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    train_mae: float = math.nan
    train_rmse: float = math.nan
    test_mae: float = math.nan
    test_rmse: float = math.nan
    stopped_early: bool = False


def init_params(config: LstmConfig) -> LstmParams:
    """Glorot-uniform weights per matrix, forget bias 1, other biases 0."""
    rng = np.random.default_rng(config.seed)
    h = config.hidden_size

    def uniform(shape, fan_in, fan_out):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=shape)

    w_input = np.stack([uniform(h, 1, h) for _ in GATES])
    w_recurrent = np.stack([uniform((h, h), h, h) for _ in GATES])
    bias = np.zeros((4, h))
    bias[FORGET] = 1.0
    head = uniform(h, h, 1)
    return LstmParams(config.lookback, w_input, w_recurrent, bias, head, 0.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _run(params: LstmParams, x: np.ndarray, keep: bool):
    """Unroll over a (batch, T) input. Returns predictions and, if asked, the tape."""
    h_size = params.hidden_size
    wx = params.w_input.reshape(-1)
    wh = params.w_recurrent.reshape(4 * h_size, h_size)
    b = params.bias.reshape(-1)
    batch, steps = x.shape
    h = np.zeros((batch, h_size))
    c = np.zeros((batch, h_size))
    tape = []
    for t in range(steps):
        z = x[:, t, None] * wx + h @ wh.T + b
        i = _sigmoid(z[:, :h_size])
        f = _sigmoid(z[:, h_size:2 * h_size])
        o = _sigmoid(z[:, 2 * h_size:3 * h_size])
        g = np.tanh(z[:, 3 * h_size:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        if keep:
            tape.append((h_prev, c_prev, i, f, o, g, tc))
    y = h @ params.head_weight + params.head_bias
    return y, h, tape


def _check_width(params: LstmParams, width: int):
    if width != params.lookback:
        raise ValueError(f"window length {width} does not match lookback {params.lookback}")


def forward(params: LstmParams, window) -> float:
    window = np.asarray(window, dtype=float).reshape(-1)
    _check_width(params, window.size)
    y, _, _ = _run(params, window[None, :], keep=False)
    return float(y[0])


def predict(params: LstmParams, windows) -> np.ndarray:
    """Predict every row of a WindowedDataset or a (rows, lookback) array."""
    inputs = windows.inputs if isinstance(windows, WindowedDataset) else np.asarray(windows, float)
    if inputs.size == 0:
        return np.zeros(0)
    inputs = np.atleast_2d(inputs)
    _check_width(params, inputs.shape[1])
    out = np.empty(inputs.shape[0])
    chunk = 8192
    for start in range(0, inputs.shape[0], chunk):
        out[start:start + chunk] = _run(params, inputs[start:start + chunk], keep=False)[0]
    return out


def loss_and_grads(params: LstmParams, x, targets):
    """Mean squared error over the batch and its gradient for every array.

    Gradients come back in the order of :meth:`LstmParams.arrays`.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(-1)
    _check_width(params, x.shape[1])
    batch = x.shape[0]
    h_size = params.hidden_size
    wh = params.w_recurrent.reshape(4 * h_size, h_size)

    y, h_last, tape = _run(params, x, keep=True)
    err = y - targets
    loss = float(np.mean(err ** 2))

    dy = 2.0 * err / batch
    g_head = h_last.T @ dy
    g_head_bias = dy.sum()
    g_wx = np.zeros(4 * h_size)
    g_wh = np.zeros((4 * h_size, h_size))
    g_b = np.zeros(4 * h_size)

    dh = dy[:, None] * params.head_weight
    dc = np.zeros_like(dh)
    dz = np.empty((batch, 4 * h_size))
    for t in range(x.shape[1] - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc = tape[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :h_size] = dc * g * i * (1.0 - i)
        dz[:, h_size:2 * h_size] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * h_size:3 * h_size] = dh * tc * o * (1.0 - o)
        dz[:, 3 * h_size:] = dc * i * (1.0 - g * g)
        g_wx += x[:, t] @ dz
        g_wh += dz.T @ h_prev
        g_b += dz.sum(axis=0)
        dh = dz @ wh
        dc = dc * f

    grads = [
        g_wx.reshape(4, h_size),
        g_wh.reshape(4, h_size, h_size),
        g_b.reshape(4, h_size),
        g_head,
        np.array([g_head_bias]),
    ]
    return loss, grads


def _metrics(params: LstmParams, data: WindowedDataset) -> tuple[float, float]:
    if len(data) == 0:
        return math.nan, math.nan
    err = predict(params, data) - data.targets
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err ** 2)))


def train(
    config: LstmConfig,
    train_set: WindowedDataset,
    test_set: WindowedDataset | None = None,
    scaler: ScalerParams | None = None,
) -> tuple[LstmParams, TrainReport]:
    """Fit by mini-batch Adam on MSE.

    Batches are consecutive chronological slices (no shuffling). Training
    stops early once the epoch loss fails to improve by
    ``config.min_improvement`` for ``config.patience`` epochs.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if train_set.lookback != config.lookback:
        raise ValueError("training windows were built with a different lookback")
    if test_set is not None and len(test_set) and test_set.lookback != config.lookback:
        raise ValueError("test windows were built with a different lookback")

    params = init_params(config)
    params.scaler = scaler
    m = [np.zeros_like(a) for a in params.arrays()]
    v = [np.zeros_like(a) for a in params.arrays()]
    report = TrainReport()
    n = len(train_set)
    step = 0
    best = math.inf
    stale = 0

    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for start in range(0, n, config.batch_size):
            stop = min(start + config.batch_size, n)
            loss, grads = loss_and_grads(
                params, train_set.inputs[start:stop], train_set.targets[start:stop]
            )
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
            total += loss * (stop - start)
            step += 1
            _adam_step(params, grads, m, v, step, config)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
        report.epoch_losses.append(epoch_loss)
        log.debug("epoch %d loss %.6g", epoch, epoch_loss)

        if epoch_loss < best - config.min_improvement:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                report.stopped_early = epoch < config.epochs
                break

    report.train_mae, report.train_rmse = _metrics(params, train_set)
    if test_set is not None:
        report.test_mae, report.test_rmse = _metrics(params, test_set)
    log.info("lstm train MAE %.4f, test MAE %.4f (gap %.4f)",
             report.train_mae, report.test_mae, report.test_mae - report.train_mae)
    return params, report


def _adam_step(params: LstmParams, grads, m, v, step: int, config: LstmConfig):
    b1, b2 = config.beta1, config.beta2
    lr = config.learning_rate * math.sqrt(1 - b2 ** step) / (1 - b1 ** step)
    updates = []
    for k, g in enumerate(grads):
        m[k] = b1 * m[k] + (1 - b1) * g
        v[k] = b2 * v[k] + (1 - b2) * g * g
        updates.append(lr * m[k] / (np.sqrt(v[k]) + config.adam_eps))
    params.w_input -= updates[0]
    params.w_recurrent -= updates[1]
    params.bias -= updates[2]
    params.head_weight -= updates[3]
    params.head_bias -= float(updates[4][0])


def gradient_check(
    params: LstmParams,
    window,
    target: float,
    n_samples: int = 200,
    step: float = 1e-5,
    seed: int = 0,
    grad_fn=None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``n_samples`` parameters are drawn without replacement (all of them if
    there are fewer). ``grad_fn`` swaps in another gradient routine with the
    signature of :func:`loss_and_grads`; used to confirm the check can fail.
    """
    grad_fn = grad_fn or loss_and_grads
    x = np.asarray(window, dtype=float).reshape(1, -1)
    y = np.array([target], dtype=float)
    _, grads = grad_fn(params, x, y)
    flat_grad = np.concatenate([g.ravel() for g in grads])

    probe = params.copy()
    arrays = probe.arrays()
    sizes = [a.size for a in arrays]
    offsets = np.cumsum([0] + sizes)
    total = int(offsets[-1])
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_samples, total), replace=False)

    def loss_at(k, value):
        block = int(np.searchsorted(offsets, k, side="right") - 1)
        local = k - offsets[block]
        if block == len(arrays) - 1:
            old = probe.head_bias
            probe.head_bias = value
            out = loss_and_grads(probe, x, y)[0]
            probe.head_bias = old
            return out
        arr = arrays[block].reshape(-1)
        old = arr[local]
        arr[local] = value
        out = loss_and_grads(probe, x, y)[0]
        arr[local] = old
        return out

    flat_values = np.concatenate([a.ravel() for a in arrays])
    worst = 0.0
    for k in picks:
        base = flat_values[k]
        numeric = (loss_at(k, base + step) - loss_at(k, base - step)) / (2 * step)
        analytic = flat_grad[k]
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_model(params: LstmParams, config: LstmConfig, report: TrainReport | None, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": "lstm",
        "encoding": "decimal: row-major nested lists, shortest round-trip float repr",
        "config": asdict(config),
        "scaler": params.scaler.to_dict() if params.scaler else None,
        "weights": {
            "gate_order": list(GATES),
            "w_input": params.w_input.tolist(),
            "w_recurrent": params.w_recurrent.tolist(),
            "bias": params.bias.tolist(),
            "head_weight": params.head_weight.tolist(),
            "head_bias": params.head_bias,
        },
        "report": asdict(report) if report else None,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[LstmParams, LstmConfig, TrainReport | None]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("model") != "lstm":
        raise ValueError(f"{path} is not an LSTM model file")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')}")
    config = LstmConfig(**doc["config"])
    w = doc["weights"]
    scaler = ScalerParams.from_dict(doc["scaler"]) if doc["scaler"] else None
    params = LstmParams(config.lookback, np.array(w["w_input"]), np.array(w["w_recurrent"]),
                        np.array(w["bias"]), np.array(w["head_weight"]), w["head_bias"], scaler)
    report = TrainReport(**doc["report"]) if doc.get("report") else None
    return params, config, report
