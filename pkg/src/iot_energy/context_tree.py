"""Two-class CART labelling deviations as ``anomaly`` or ``adaptation``.

Features, by id:

    0 hour_of_day            numeric
    1 day_of_week            numeric (0 = Monday)
    2 is_holiday             numeric (0/1)
    3 temperature            numeric, may be missing
    4 weather_code           categorical
    5 neighbor_mean_deviation numeric
    6 consumption_deviation  numeric

Numeric splits send ``value <= threshold`` left and ``value > threshold``
right. Categorical splits send codes in the node's subset right.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, replace
from datetime import date, datetime
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1
CLASSES = ("adaptation", "anomaly")
FEATURES = (
    "hour_of_day",
    "day_of_week",
    "is_holiday",
    "temperature",
    "weather_code",
    "neighbor_mean_deviation",
    "consumption_deviation",
)
CATEGORICAL = frozenset({FEATURES.index("weather_code")})
TEMPERATURE = FEATURES.index("temperature")

WEATHER_CODES = {"clear": 0, "rain": 1, "snow": 2, "extreme": 3, "unknown": -1}
UNKNOWN_WEATHER = WEATHER_CODES["unknown"]
GAIN_EPS = 1e-12

CSV_HEADER = ("timestamp", "temperature", "weather_code", "is_holiday",
              "own_deviation", "peer_deviations", "label")


@dataclass(frozen=True)
class ContextSample:
    hour_of_day: int
    day_of_week: int
    is_holiday: bool
    temperature: float | None
    weather_code: int
    neighbor_mean_deviation: float
    consumption_deviation: float
    label: str | None = None

    def __post_init__(self):
        if not 0 <= self.hour_of_day <= 23:
            raise ValueError(f"hour_of_day out of range: {self.hour_of_day}")
        if not 0 <= self.day_of_week <= 6:
            raise ValueError(f"day_of_week out of range: {self.day_of_week}")
        if self.weather_code not in WEATHER_CODES.values():
            raise ValueError(f"unknown weather_code {self.weather_code}")
        if not self.neighbor_mean_deviation >= 0 or not self.consumption_deviation >= 0:
            raise ValueError("deviations must be non-negative")
        if self.label is not None and self.label not in CLASSES:
            raise ValueError(f"label must be one of {CLASSES}, got {self.label!r}")

    def features(self) -> tuple:
        temp = math.nan if self.temperature is None else float(self.temperature)
        return (self.hour_of_day, self.day_of_week, float(self.is_holiday), temp,
                self.weather_code, self.neighbor_mean_deviation, self.consumption_deviation)


def build_context_features(
    timestamp,
    temperature: float | None,
    weather_code: int | str,
    own_deviation: float,
    peer_deviations: Sequence[float] = (),
    holidays: Iterable[date] = (),
    label: str | None = None,
) -> ContextSample:
    """Derive a ContextSample from raw context inputs."""
    if isinstance(timestamp, str):
        try:
            timestamp = datetime.fromisoformat(timestamp)
        except ValueError:
            raise ValueError(f"invalid timestamp {timestamp!r}") from None
    if not isinstance(timestamp, datetime):
        raise ValueError(f"invalid timestamp {timestamp!r}")
    if isinstance(weather_code, str):
        weather_code = WEATHER_CODES[weather_code] if weather_code in WEATHER_CODES \
            else int(weather_code)
    peers = list(peer_deviations)
    neighbor = float(np.mean(peers)) if peers else 0.0
    return ContextSample(
        hour_of_day=timestamp.hour,
        day_of_week=timestamp.weekday(),
        is_holiday=timestamp.date() in set(holidays),
        temperature=temperature,
        weather_code=int(weather_code),
        neighbor_mean_deviation=neighbor,
        consumption_deviation=float(own_deviation),
        label=label,
    )


@dataclass
class TreeNode:
    """Leaf when ``feature`` is None; otherwise an internal split."""

    counts: tuple[int, int]
    feature: int | None = None
    threshold: float | None = None
    categories: frozenset[int] | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def probabilities(self) -> tuple[float, float]:
        total = sum(self.counts)
        return tuple(c / total for c in self.counts)

    @property
    def label(self) -> str:
        # ties go to the first class
        return CLASSES[int(self.counts[1] > self.counts[0])]

    def goes_right(self, value) -> bool:
        if self.categories is not None:
            return value in self.categories
        return value > self.threshold

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": True, "counts": list(self.counts), "label": self.label,
                    "probabilities": list(self.probabilities)}
        node = {"leaf": False, "counts": list(self.counts), "feature": self.feature,
                "feature_name": FEATURES[self.feature]}
        if self.categories is not None:
            node["categories"] = sorted(self.categories)
        else:
            node["threshold"] = self.threshold
        node["left"] = self.left.to_dict()
        node["right"] = self.right.to_dict()
        return node

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        counts = tuple(int(c) for c in d["counts"])
        if d["leaf"]:
            return cls(counts)
        cats = frozenset(d["categories"]) if "categories" in d else None
        return cls(counts, int(d["feature"]), d.get("threshold"), cats,
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total == 0:
        raise ValueError("gini of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _weighted_gini(left, right) -> np.ndarray:
    """Vectorized weighted two-class Gini for (k, 2) left/right count arrays."""
    nl = left.sum(1)
    nr = right.sum(1)
    gl = 1.0 - ((left / nl[:, None]) ** 2).sum(1)
    gr = 1.0 - ((right / nr[:, None]) ** 2).sum(1)
    return (nl * gl + nr * gr) / (nl + nr)


def _best_split(x, y, features, min_leaf):
    """Return (gain, feature, threshold, categories) of the best split or None."""
    n = y.size
    counts = np.bincount(y, minlength=2)
    parent = gini(counts)
    best = None
    onehot = np.eye(2, dtype=float)[y]
    for f in features:
        col = x[:, f]
        if f in CATEGORICAL:
            cats = np.unique(col).astype(int).tolist()
            if len(cats) < 2:
                continue
            options = []
            for r in range(1, len(cats)):
                for subset in itertools.combinations(cats, r):
                    mask = np.isin(col, subset)
                    options.append((subset, mask))
            for subset, mask in sorted(options, key=lambda o: o[0]):
                n_right = int(mask.sum())
                if n_right < min_leaf or n - n_right < min_leaf:
                    continue
                right = onehot[mask].sum(0)[None, :]
                left = counts[None, :] - right
                gain = parent - _weighted_gini(left, right)[0]
                if gain > GAIN_EPS and (best is None or gain > best[0] + GAIN_EPS):
                    best = (gain, f, None, frozenset(subset))
            continue

        order = np.argsort(col, kind="stable")
        sc = col[order]
        cum = np.cumsum(onehot[order], axis=0)
        # candidate cut after position k (left = first k+1 rows)
        k = np.flatnonzero(sc[:-1] < sc[1:])
        k = k[(k + 1 >= min_leaf) & (n - k - 1 >= min_leaf)]
        if k.size == 0:
            continue
        left = cum[k]
        right = counts[None, :] - left
        gains = parent - _weighted_gini(left, right)
        thresholds = (sc[k] + sc[k + 1]) / 2.0
        # first near-maximum is the lowest threshold
        j = int(np.flatnonzero(gains >= gains.max() - GAIN_EPS)[0])
        if gains[j] > GAIN_EPS and (best is None or gains[j] > best[0] + GAIN_EPS):
            best = (float(gains[j]), f, float(thresholds[j]), None)
    return best


def _grow(x, y, features, depth, max_depth, min_leaf) -> TreeNode:
    counts = np.bincount(y, minlength=2)
    node = TreeNode((int(counts[0]), int(counts[1])))
    if depth >= max_depth or counts.min() == 0 or y.size < 2 * min_leaf:
        return node
    split = _best_split(x, y, features, min_leaf)
    if split is None:
        return node
    _, f, threshold, cats = split
    col = x[:, f]
    right = np.isin(col, list(cats)) if cats is not None else col > threshold
    node.feature, node.threshold, node.categories = f, threshold, cats
    node.left = _grow(x[~right], y[~right], features, depth + 1, max_depth, min_leaf)
    node.right = _grow(x[right], y[right], features, depth + 1, max_depth, min_leaf)
    return node


def train_tree(samples: Sequence[ContextSample], max_depth: int = 6,
               min_samples_leaf: int = 5) -> TreeNode:
    """Greedy Gini CART.

    Equal-gain splits resolve to the lower feature id, then the lower
    threshold (or lexicographically smaller category subset). If any sample
    lacks a temperature, temperature is excluded from splitting.
    """
    if not samples:
        raise ValueError("no training samples")
    if max_depth < 0 or min_samples_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_samples_leaf >= 1")
    if any(s.label is None for s in samples):
        raise ValueError("every training sample needs a label")
    x = np.array([s.features() for s in samples], dtype=float)
    y = np.array([CLASSES.index(s.label) for s in samples])
    features = [f for f in range(len(FEATURES))
                if not (f == TEMPERATURE and np.isnan(x[:, f]).any())]
    return _grow(x, y, features, 0, max_depth, min_samples_leaf)


def classify(tree: TreeNode, sample: ContextSample) -> tuple[str, float]:
    """Return the leaf's majority label and that label's probability."""
    values = sample.features()
    node = tree
    while not node.is_leaf:
        node = node.right if node.goes_right(values[node.feature]) else node.left
    label = node.label
    return label, node.probabilities[CLASSES.index(label)]


def accuracy(tree: TreeNode, samples: Sequence[ContextSample]) -> float:
    hits = sum(classify(tree, s)[0] == s.label for s in samples)
    return hits / len(samples)


def make_rule_dataset(n: int, seed: int = 0, noise: float = 0.0,
                      cutoff: float = 0.3) -> list[ContextSample]:
    """Synthetic samples labelled ``anomaly`` iff consumption_deviation > cutoff.

    A fraction ``noise`` of labels is flipped at random.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        dev = float(rng.uniform(0, 1))
        label = "anomaly" if dev > cutoff else "adaptation"
        if rng.uniform() < noise:
            label = "adaptation" if label == "anomaly" else "anomaly"
        out.append(ContextSample(
            hour_of_day=int(rng.integers(0, 24)),
            day_of_week=int(rng.integers(0, 7)),
            is_holiday=bool(rng.uniform() < 0.05),
            temperature=float(np.round(rng.normal(12, 8), 1)),
            weather_code=int(rng.integers(0, 4)),
            neighbor_mean_deviation=float(rng.uniform(0, 0.5)),
            consumption_deviation=dev,
            label=label,
        ))
    return out


def flip_labels(samples: Sequence[ContextSample], fraction: float,
                seed: int = 0) -> list[ContextSample]:
    """Copy of ``samples`` with ``round(fraction * n)`` labels flipped at random rows."""
    rng = np.random.default_rng(seed)
    flip = set(rng.choice(len(samples), size=round(fraction * len(samples)),
                          replace=False).tolist())
    other = {CLASSES[0]: CLASSES[1], CLASSES[1]: CLASSES[0]}
    return [replace(s, label=other[s.label]) if i in flip else s
            for i, s in enumerate(samples)]


def save_tree(tree: TreeNode, path, max_depth: int, min_samples_leaf: int) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "model": "context_tree",
           "classes": list(CLASSES), "features": list(FEATURES),
           "max_depth": max_depth, "min_samples_leaf": min_samples_leaf,
           "root": tree.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_tree(path) -> TreeNode:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("model") != "context_tree" or doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path} is not a supported tree file")
    return TreeNode.from_dict(doc["root"])


def read_samples(text: str, holidays: Iterable[date] = (),
                 require_label: bool = False) -> list[ContextSample]:
    """Parse the labelled-sample CSV. ``is_holiday`` in the file OR-s with ``holidays``."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValueError("empty sample file")
    missing = [c for c in CSV_HEADER[:-1] if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"sample file lacks columns: {', '.join(missing)}")
    if require_label and "label" not in reader.fieldnames:
        raise ValueError("sample file has no label column")
    holidays = set(holidays)
    out = []
    for row in reader:
        ts = datetime.fromisoformat(row["timestamp"])
        temp = row["temperature"].strip()
        peers = [float(p) for p in row["peer_deviations"].split("|") if p.strip()]
        label = (row.get("label") or "").strip() or None
        if require_label and label is None:
            raise ValueError(f"row for {row['timestamp']} has no label")
        flag = row["is_holiday"].strip().lower() in ("1", "true", "yes")
        sample = build_context_features(
            ts, float(temp) if temp and temp.lower() != "unknown" else None,
            row["weather_code"].strip() or "unknown", float(row["own_deviation"]), peers,
            holidays | ({ts.date()} if flag else set()), label)
        out.append(sample)
    return out


def format_samples(rows: Sequence[tuple[datetime, ContextSample, Sequence[float]]]) -> str:
    """Inverse of :func:`read_samples` for (timestamp, sample, peers) rows."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for ts, s, peers in rows:
        w.writerow([ts.isoformat(), "" if s.temperature is None else repr(s.temperature),
                    s.weather_code, int(s.is_holiday), repr(s.consumption_deviation),
                    "|".join(repr(float(p)) for p in peers), s.label or ""])
    return out.getvalue()
