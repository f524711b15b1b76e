import json
from datetime import datetime

import numpy as np
import pytest

from iot_energy.cli import main
from iot_energy.context_tree import format_samples, make_rule_dataset
from iot_energy.ingest import UnivariateSeries, serialize_records, write_series

FAST = ["--set", "lstm.epochs=2", "--set", "lstm.hidden_size=4", "--set", "svr.max_train_rows=200"]


@pytest.fixture(scope="module")
def raw_file(tmp_path_factory, synthetic_records):
    path = tmp_path_factory.mktemp("raw") / "power.txt"
    path.write_text(serialize_records(synthetic_records))
    return path


@pytest.fixture(scope="module")
def sample_file(tmp_path_factory):
    data = make_rule_dataset(60, seed=5)
    rows = [(datetime(2007, 1, 1 + s.day_of_week, s.hour_of_day), s,
             [s.neighbor_mean_deviation]) for s in data]
    path = tmp_path_factory.mktemp("samples") / "samples.csv"
    path.write_text(format_samples(rows))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_ingest(capsys, tmp_path, raw_file, synthetic_records):
    code, out, _ = run(capsys, "ingest", "--data", raw_file, "--out", tmp_path)
    assert code == 0
    assert f"raw records: {len(synthetic_records)}" in out
    summary = json.loads((tmp_path / "ingest_summary.json").read_text())
    assert summary["series_length"] == 14 * 24
    assert summary["missing_records"] == sum(r.is_missing for r in synthetic_records)


def test_ingest_errors(capsys, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, _, err = run(capsys, "ingest", "--data", empty, "--out", tmp_path)
    assert code == 2 and "empty input" in err
    assert run(capsys, "ingest", "--data", tmp_path / "absent.txt", "--out", tmp_path)[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("Date;Time;a;b;c;d;e;f;g\n1/1/2007;00:00:00;1;2\n")
    code, _, err = run(capsys, "ingest", "--data", bad, "--out", tmp_path)
    assert code == 2 and "line 2" in err


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_bad_config_is_usage_error(capsys, tmp_path):
    assert run(capsys, "detect", "--set", "lstm.nope=1", "--out", tmp_path)[0] == 2
    assert run(capsys, "detect", "--profile", "nope", "--out", tmp_path)[0] == 2


def pipeline(capsys, out, raw_file, sample_file):
    steps = [
        ["ingest", "--data", raw_file],
        ["train", "--model", "lstm", *FAST],
        ["train", "--model", "svr", *FAST],
        ["forecast", "--model-file", out / "lstm_model.json"],
        ["forecast", "--model-file", out / "svr_model.json"],
        ["detect", "--window", 12, "--percentile", 95],
        ["classify", "--train", sample_file],
        ["eval"],
    ]
    for step in steps:
        code, _, err = run(capsys, *step, "--out", out, "--seed", 7)
        assert code == 0, (step, err)


def test_pipeline_is_byte_identical(capsys, tmp_path, raw_file, sample_file):
    a, b = tmp_path / "a", tmp_path / "b"
    pipeline(capsys, a, raw_file, sample_file)
    pipeline(capsys, b, raw_file, sample_file)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert {"lstm_metrics.json", "svr_metrics.json", "anomalies.csv", "comparison.json",
            "tree.json", "predictions.csv", "lstm_forecast_all.csv"} <= set(names)
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name

    svr_metrics = json.loads((a / "svr_metrics.json").read_text())
    assert [m["split"] for m in svr_metrics["metrics"]] == ["test"]
    lstm_metrics = json.loads((a / "lstm_metrics.json").read_text())
    assert [m["split"] for m in lstm_metrics["metrics"]] == ["train", "test"]
    comparison = json.loads((a / "comparison.json").read_text())
    assert isinstance(comparison["svr_test_mae < lstm_test_mae"], bool)


def test_train_insufficient_data(capsys, tmp_path, hourly_series):
    write_series(hourly_series, tmp_path / "series.csv")
    code, _, err = run(capsys, "train", "--model", "lstm", "--out", tmp_path,
                       "--set", f"lstm.lookback={len(hourly_series)}")
    assert code == 1 and "insufficient data" in err and "preprocess" in err
    code, _, err = run(capsys, "train", "--model", "svr", "--out", tmp_path / "none")
    assert code == 2 and "series file not found" in err


def write_squares(path, n):
    # 1-D windows of i**2: each k=1 score is 2i - 1, so the top scores are distinct
    series = UnivariateSeries(datetime(2007, 1, 1), 60.0, np.arange(n, dtype=float) ** 2)
    write_series(series, path)


def test_detect_counts(capsys, tmp_path):
    write_squares(tmp_path / "series.csv", 10_000)
    common = ["--out", tmp_path, "--window", 1, "--stride", 1, "--k", 1]
    code, out, _ = run(capsys, "detect", *common, "--percentile", 99.9)
    assert code == 0 and "flagged_count: 10" in out
    meta = json.loads((tmp_path / "anomalies_meta.json").read_text())
    assert meta["flagged_count"] == 10 and meta["window_count"] == 10_000
    code, out, _ = run(capsys, "detect", *common, "--percentile", 50)
    half = json.loads((tmp_path / "anomalies_meta.json").read_text())["flagged_count"]
    assert abs(half - 5000) <= 1


def test_detect_window_too_long(capsys, tmp_path):
    write_squares(tmp_path / "series.csv", 50)
    code, _, err = run(capsys, "detect", "--out", tmp_path, "--window", 60)
    assert code == 1 and "detect" in err


def test_classify(capsys, tmp_path, sample_file):
    code, out, _ = run(capsys, "classify", "--train", sample_file, "--out", tmp_path)
    assert code == 0 and "agreement with labels: 1.0000" in out
    lines = (tmp_path / "predictions.csv").read_text().splitlines()
    assert lines[0].endswith(",label,predicted_label,probability")
    assert len(lines) == 61

    one = tmp_path / "one.csv"
    one.write_text("\n".join(sample_file.read_text().splitlines()[:2]) + "\n")
    code, _, _ = run(capsys, "classify", "--tree", tmp_path / "tree.json", "--input", one,
                     "--output", tmp_path / "one_out.csv", "--out", tmp_path)
    assert code == 0
    assert len((tmp_path / "one_out.csv").read_text().splitlines()) == 2


def test_classify_errors(capsys, tmp_path, sample_file):
    code, _, err = run(capsys, "classify", "--input", sample_file, "--out", tmp_path)
    assert code == 2 and "no model" in err
    code, _, err = run(capsys, "classify", "--tree", tmp_path / "x.json", "--out", tmp_path)
    assert code == 2 and "no model" in err
    unlabeled = tmp_path / "unlabeled.csv"
    lines = sample_file.read_text().splitlines()
    unlabeled.write_text("\n".join(line.rsplit(",", 1)[0] + "," for line in lines) + "\n")
    code, _, err = run(capsys, "classify", "--train", unlabeled, "--out", tmp_path)
    assert code == 2


def test_eval(capsys, tmp_path):
    from iot_energy.evaluation import write_forecast
    ts = np.arange("2007-06-01T00", "2007-06-02T00", dtype="datetime64[h]")
    actual = np.linspace(0, 1, ts.size)
    write_forecast(tmp_path / "f.csv", ts, actual, actual + 0.1)
    code, out, _ = run(capsys, "eval", "--lstm-forecast", tmp_path / "f.csv",
                       "--svr-forecast", tmp_path / "f.csv", "--out", tmp_path)
    assert code == 0 and "svr_test_mae < lstm_test_mae: false" in out
    result = json.loads((tmp_path / "comparison.json").read_text())
    assert result["lstm_test_mae"] == result["svr_test_mae"]
    code, _, _ = run(capsys, "eval", "--lstm-forecast", tmp_path / "f.csv",
                     "--svr-forecast", tmp_path / "missing.csv", "--out", tmp_path)
    assert code == 2


def test_inputs_not_mutated(capsys, tmp_path, raw_file):
    before = raw_file.read_bytes()
    run(capsys, "ingest", "--data", raw_file, "--out", tmp_path)
    assert raw_file.read_bytes() == before
