import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iot_energy.anomaly import (
    AnomalyConfig,
    detect,
    flag_scores,
    knn_scores,
    percentile_for_count,
    section_windows,
    write_report,
)
from iot_energy.synthetic import inject_spikes, sine_series


def brute_knn(windows, k, radius):
    rows = [list(map(float, w)) for w in windows]
    out = []
    for i, a in enumerate(rows):
        d = sorted(math.dist(a, b) for j, b in enumerate(rows) if abs(i - j) > radius)
        out.append(d[k - 1])
    return np.array(out)


@pytest.mark.parametrize("length, window, stride, starts", [
    (5, 2, 1, [0, 1, 2, 3]), (5, 2, 2, [0, 2]), (4, 4, 3, [0])])
def test_section_windows(make_series, length, window, stride, starts):
    s, w = section_windows(make_series(np.arange(float(length))), window, stride)
    assert s.tolist() == starts
    assert w.shape == (len(starts), window)
    np.testing.assert_array_equal(w[:, 0], starts)


def test_section_windows_too_long(make_series):
    with pytest.raises(ValueError):
        section_windows(make_series([1.0, 2.0]), 3, 1)


def test_knn_examples():
    np.testing.assert_array_equal(knn_scores(np.ones((3, 2)), 1), [0, 0, 0])
    np.testing.assert_array_equal(knn_scores([[0.0], [0.0], [10.0]], 1), [0, 0, 10])


def test_knn_too_few_neighbors():
    with pytest.raises(ValueError, match="at least 6"):
        knn_scores(np.zeros((5, 2)), 3, exclusion_radius=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 5), st.integers(1, 4), st.integers(0, 3),
       st.integers(0, 2**32 - 1))
def test_knn_matches_brute_force(n, width, k, radius, seed):
    if n < k + 2 * radius + 1:
        return
    w = np.random.default_rng(seed).normal(size=(n, width))
    np.testing.assert_allclose(knn_scores(w, k, radius), brute_knn(w, k, radius),
                               rtol=0, atol=1e-12)


def test_knn_order_independent():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(80, 4))
    perm = rng.permutation(80)
    np.testing.assert_allclose(knn_scores(w[perm], 3), knn_scores(w, 3)[perm], atol=1e-12)


def test_exclusion_never_self_neighbor():
    # with radius 0 a window's own distance is also excluded, so duplicates far
    # apart are found but the window itself is not
    w = np.array([[0.0], [5.0], [0.0]])
    np.testing.assert_array_equal(knn_scores(w, 1, 0), [0, 5, 0])
    np.testing.assert_array_equal(knn_scores(np.arange(10.0)[:, None], 1, 2), [3] * 10)


def random_series(n, seed=0):
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.normal(size=n))


def test_flag_one_in_a_thousand():
    scores = np.random.default_rng(0).permutation(np.arange(1000.0))
    threshold, flagged = flag_scores(scores, 99.9)
    assert threshold == pytest.approx(998.001, abs=1e-9)
    assert flagged.sum() == 1 and scores[flagged][0] == 999.0
    threshold, flagged = flag_scores(np.full(1000, 2.5), 99.9)
    assert threshold == 2.5 and not flagged.any()


@pytest.mark.parametrize("n, count", [(100, 10), (1000, 1), (10000, 10), (37, 3)])
def test_percentile_for_count(n, count):
    _, flagged = flag_scores(np.arange(float(n)), percentile_for_count(n, count))
    assert flagged.sum() == count


def test_detect_ranks(make_series):
    r = detect(make_series(random_series(2000)), AnomalyConfig(window_length=4, k=3,
                                                                 percentile=99))
    assert r.rank.min() == 1 and r.score[r.rank == 1][0] == r.score.max()
    assert np.all(np.diff(r.score[np.argsort(r.rank)]) <= 0)


def test_detect_constant_flags_nothing(make_series):
    r = detect(make_series(np.ones(200)), AnomalyConfig(window_length=10, percentile=50))
    assert r.flagged_count == 0 and np.all(r.score == 0)


def test_detect_invariants(make_series):
    s = make_series(random_series(3000, 1))
    counts = []
    for p in (50, 90, 99, 99.9):
        r = detect(s, AnomalyConfig(window_length=6, stride=3, k=2, percentile=p,
                                    exclusion_radius=1))
        assert np.array_equal(r.flagged, r.score > r.threshold)
        assert r.flagged_count == r.flagged.sum()
        assert r.threshold == pytest.approx(np.percentile(r.score, p))
        counts.append(r.flagged_count)
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == pytest.approx(len(r) / 2, abs=1)


def test_scale_equivariance(make_series):
    v = random_series(1200, 2)
    cfg = AnomalyConfig(window_length=12, k=3, percentile=95)
    a = detect(make_series(v), cfg)
    b = detect(make_series(3.5 * v), cfg)
    np.testing.assert_allclose(b.score, 3.5 * a.score, rtol=1e-12)
    np.testing.assert_array_equal(a.flagged, b.flagged)


def test_injected_spikes_recovered():
    base = sine_series(2400, period=48, noise=0.05, seed=7)
    spiked, idx = inject_spikes(base, 10, window_length=24, seed=7)
    n_windows = 100
    cfg = AnomalyConfig(window_length=24, k=5, percentile=percentile_for_count(n_windows, 10))
    r = detect(spiked, cfg)
    assert r.flagged_count == 10
    spike_windows = set((idx // 24).tolist())
    assert len(spike_windows & set((r.start_index[r.flagged] // 24).tolist())) >= 9


def test_write_report(tmp_path, make_series):
    r = detect(make_series(random_series(500)), AnomalyConfig(window_length=5, percentile=90))
    write_report(r, tmp_path / "a.csv", tmp_path / "a.json")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "start_index,start_timestamp,score,rank,flagged"
    assert len(lines) == len(r) + 1
    assert sum(line.endswith(",true") for line in lines) == r.flagged_count
    meta = json.loads((tmp_path / "a.json").read_text())
    assert meta["threshold"] == r.threshold and meta["percentile"] == 90
