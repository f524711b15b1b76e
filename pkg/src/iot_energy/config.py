"""Run configuration: flat ``key = value`` files with dotted keys.

Example::

    # desk-scale profile
    data.interval_minutes = 60
    lstm.lookback = 24
    svr.c = 10

Later sources override earlier ones (file, then ``--set`` flags).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .anomaly import AnomalyConfig
from .lstm import LstmConfig
from .svr import SvrConfig

STAGES = ("lstm", "svr", "anomaly", "tree")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    path: str = ""
    start: str = ""
    end: str = ""
    feature: str = "global_active_power"
    interval_minutes: int = 60
    fill_policy: str = "forward_fill"


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 6
    min_samples_leaf: int = 5


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    train_fraction: float = 0.8
    scaler_fit_on: str = "train"
    lstm: LstmConfig = field(default_factory=lambda: LstmConfig(lookback=24))
    svr: SvrConfig = field(default_factory=SvrConfig)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    svr_train_metrics: bool = False
    out_dir: str = "out"
    seed: int = 0

    def start_date(self) -> date | None:
        return date.fromisoformat(self.data.start) if self.data.start else None

    def end_date(self) -> date | None:
        return date.fromisoformat(self.data.end) if self.data.end else None


# flat key -> (section attribute or None, field name)
_ALIASES = {
    "split.train_fraction": (None, "train_fraction"),
    "scaler.fit_on": (None, "scaler_fit_on"),
    "evaluation.svr_train_metrics": (None, "svr_train_metrics"),
    "output.dir": (None, "out_dir"),
    "seed": (None, "seed"),
}
_SECTIONS = ("data", "lstm", "svr", "anomaly", "tree")


def _coerce(text: str, current, name: str):
    text = text.strip()
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    try:
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    if current is None:
        if text.lower() in ("", "none", "auto"):
            return None
        try:
            return int(text)
        except ValueError:
            try:
                return float(text)
            except ValueError:
                raise ConfigError(f"{name}: cannot parse {text!r}") from None
    return text


def parse_assignments(lines) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def apply(config: RunConfig, assignments: dict[str, str]) -> RunConfig:
    """Return ``config`` with dotted-key assignments applied and validated."""
    top: dict = {}
    sections: dict[str, dict] = {s: {} for s in _SECTIONS}
    for key, value in assignments.items():
        if key in _ALIASES:
            _, name = _ALIASES[key]
            top[name] = _coerce(value, getattr(config, name), key)
            continue
        section, _, name = key.partition(".")
        if section not in sections or not name:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(config, section)
        if name not in {f.name for f in dataclasses.fields(current)}:
            raise ConfigError(f"unknown config key {key!r}")
        sections[section][name] = _coerce(value, getattr(current, name), key)
    try:
        for section, changes in sections.items():
            if changes:
                top[section] = dataclasses.replace(getattr(config, section), **changes)
        result = dataclasses.replace(config, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not 0 < result.train_fraction < 1:
        raise ConfigError("split.train_fraction must lie strictly between 0 and 1")
    if result.scaler_fit_on not in ("train", "all"):
        raise ConfigError("scaler.fit_on must be 'train' or 'all'")
    if result.data.fill_policy not in ("forward_fill", "drop"):
        raise ConfigError("data.fill_policy must be 'forward_fill' or 'drop'")
    if result.data.interval_minutes < 1:
        raise ConfigError("data.interval_minutes must be >= 1")
    return result


def load(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides``.

    Unless ``lstm.seed`` is set explicitly, the LSTM seed is derived from
    the global ``seed``.
    """
    config = RunConfig()
    keys: set[str] = set()
    if path is not None:
        assignments = parse_assignments(Path(path).read_text().splitlines())
        keys |= assignments.keys()
        config = apply(config, assignments)
    if overrides:
        keys |= overrides.keys()
        config = apply(config, overrides)
    if "lstm.seed" not in keys:
        lstm = dataclasses.replace(config.lstm, seed=stage_seed(config.seed, "lstm"))
        config = dataclasses.replace(config, lstm=lstm)
    return config


def stage_seed(global_seed: int, stage: str) -> int:
    """Independent, reproducible seed for one pipeline stage."""
    seq = np.random.SeedSequence([global_seed, STAGES.index(stage)])
    return int(seq.generate_state(1)[0])
