"""Command-line driver: ingest, train, forecast, detect, classify, eval.

Exit codes: 0 success, 1 runtime or model failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict
from datetime import timedelta
from importlib import resources
from pathlib import Path

from . import anomaly, context_tree, evaluation, ingest, lstm, svr
from . import config as cfg
from .preprocess import fit_scaler, make_windows, prepare

log = logging.getLogger("iot_energy")


class UsageError(Exception):
    """Bad flags or unusable input; exit code 2."""


class StageError(Exception):
    """A pipeline stage failed; exit code 1."""


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (lstm.TrainingDiverged, ValueError, RuntimeError) as exc:
        raise StageError(f"{name}: {exc}") from exc


def _out_dir(config: cfg.RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _series_path(args, config) -> Path:
    path = Path(args.series) if args.series else Path(config.out_dir) / "series.csv"
    if not path.exists():
        raise UsageError(f"series file not found: {path} (run 'ingest' first)")
    return path


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_ingest(args, config: cfg.RunConfig) -> int:
    path = args.data or config.data.path
    if not path:
        raise UsageError("no input file: pass --data or set data.path")
    try:
        records = ingest.parse_dataset(Path(path), config.start_date(), config.end_date())
    except FileNotFoundError:
        raise UsageError(f"cannot read {path}") from None
    if not records:
        raise UsageError("no records in the selected date range")
    n_missing = sum(r.is_missing for r in records)
    filled = ingest.fill_missing(records, config.data.fill_policy)
    series = _stage("resample", ingest.resample, filled, config.data.feature,
                    timedelta(minutes=config.data.interval_minutes))
    out = _out_dir(config)
    ingest.write_series(series, out / "series.csv")
    summary = {
        "raw_records": len(records),
        "missing_records": n_missing,
        "records_after_fill": len(filled),
        "first_timestamp": records[0].timestamp.isoformat(),
        "last_timestamp": records[-1].timestamp.isoformat(),
        "feature": config.data.feature,
        "interval_minutes": config.data.interval_minutes,
        "series_length": len(series),
    }
    _write_json(out / "ingest_summary.json", summary)
    print(f"raw records: {len(records)}")
    print(f"missing records: {n_missing} ({config.data.fill_policy})")
    print(f"span: {summary['first_timestamp']} .. {summary['last_timestamp']}")
    print(f"series length: {len(series)} at {config.data.interval_minutes} min")
    return 0


def _train_lstm(series, config, out: Path):
    lc = config.lstm
    data = _stage("preprocess", prepare, series, lc.lookback, config.train_fraction,
                  config.scaler_fit_on)
    params, report = _stage("train lstm", lstm.train, lc, data.train, data.test, data.scaler)
    lstm.save_model(params, lc, report, out / "lstm_model.json")
    pred_train = lstm.predict(params, data.train)
    pred_test = lstm.predict(params, data.test)
    ev = evaluation.evaluate("lstm", (data.test.targets, pred_test), data.scaler,
                             train=(data.train.targets, pred_train), config=asdict(lc))
    ev.config["epochs_run"] = len(report.epoch_losses)
    return data, pred_test, ev


def _train_svr(series, config, out: Path):
    sc = config.svr
    data = _stage("preprocess", prepare, series, sc.lookback, config.train_fraction,
                  config.scaler_fit_on)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", svr.ConvergenceWarning)
        model = _stage("train svr", svr.train_svr, sc, data.train, data.scaler)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    svr.save_model(model, sc, out / "svr_model.json")
    pred_test = svr.predict_many(model, data.test)
    train = None
    if config.svr_train_metrics:
        train = (data.train.targets, svr.predict_many(model, data.train))
    ev = evaluation.evaluate("svr", (data.test.targets, pred_test), data.scaler, train=train,
                             config=asdict(sc))
    ev.config.update(converged=model.converged, support_vectors=len(model))
    return data, pred_test, ev


def cmd_train(args, config: cfg.RunConfig) -> int:
    series = ingest.read_series(_series_path(args, config))
    out = _out_dir(config)
    trainer = _train_lstm if args.model == "lstm" else _train_svr
    data, pred_test, ev = trainer(series, config, out)
    evaluation.write_metrics(ev, out / f"{args.model}_metrics.json")
    evaluation.write_forecast(out / f"{args.model}_forecast.csv",
                              data.test.origin_timestamps, data.test.targets, pred_test)
    for m in ev.splits.values():
        print(f"{args.model} {m.split}: MAE {m.mae_normalized:.6f} RMSE {m.rmse_normalized:.6f} "
              f"(normalized, n={m.n_samples}); mean residual {m.mean_residual:+.6f}")
    return 0


def cmd_forecast(args, config: cfg.RunConfig) -> int:
    if not args.model_file or not Path(args.model_file).exists():
        raise UsageError("no model: pass --model-file pointing at a trained model")
    series = ingest.read_series(_series_path(args, config))
    with open(args.model_file) as fh:
        kind = json.load(fh).get("model")
    if kind == "lstm":
        params, lc, _ = lstm.load_model(args.model_file)
        scaler, lookback = params.scaler, lc.lookback
        predict = lambda w: lstm.predict(params, w)  # noqa: E731
    elif kind == "svr":
        model, sc = svr.load_model(args.model_file)
        scaler, lookback = model.scaler, sc.lookback
        predict = lambda w: svr.predict_many(model, w)  # noqa: E731
    else:
        raise UsageError(f"{args.model_file} is not a model file")
    if scaler is None:
        scaler = fit_scaler(series.values)
    scaled = series.with_values(scaler.transform(series.values))
    windows = _stage("preprocess", make_windows, scaled, lookback)
    out = _out_dir(config)
    path = Path(args.output) if args.output else out / f"{kind}_forecast_all.csv"
    evaluation.write_forecast(path, windows.origin_timestamps, windows.targets, predict(windows))
    print(f"wrote {len(windows)} forecasts to {path}")
    return 0


def cmd_detect(args, config: cfg.RunConfig) -> int:
    series = ingest.read_series(_series_path(args, config))
    scaler = fit_scaler(series.values)
    scaled = series.with_values(scaler.transform(series.values))
    report = _stage("detect", anomaly.detect, scaled, config.anomaly)
    out = _out_dir(config)
    anomaly.write_report(report, out / "anomalies.csv", out / "anomalies_meta.json")
    print(f"windows: {len(report)}")
    print(f"threshold: {report.threshold:.6g} (percentile {config.anomaly.percentile})")
    print(f"flagged_count: {report.flagged_count}")
    return 0


def cmd_classify(args, config: cfg.RunConfig) -> int:
    out = _out_dir(config)
    tc = config.tree
    if args.train:
        text = Path(args.train).read_text()
        try:
            samples = context_tree.read_samples(text, require_label=True)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{args.train}: {exc}") from None
        tree = _stage("train tree", context_tree.train_tree, samples, tc.max_depth,
                      tc.min_samples_leaf)
        context_tree.save_tree(tree, out / "tree.json", tc.max_depth, tc.min_samples_leaf)
        print(f"trained tree of depth {tree.depth()} on {len(samples)} samples")
        source = args.input or args.train
    elif args.tree:
        if not Path(args.tree).exists():
            raise UsageError(f"no model: tree file {args.tree} not found")
        tree = context_tree.load_tree(args.tree)
        source = args.input
    else:
        raise UsageError("no model: pass --tree FILE, or --train FILE to fit one")
    if not source:
        return 0
    text_in = Path(source).read_text()
    try:
        samples = context_tree.read_samples(text_in)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{source}: {exc}") from None
    lines = text_in.splitlines()
    path = Path(args.output) if args.output else out / "predictions.csv"
    hits = 0
    with open(path, "w", newline="\n") as fh:
        fh.write(lines[0] + ",predicted_label,probability\n")
        for line, sample in zip(lines[1:], samples):
            label, prob = context_tree.classify(tree, sample)
            hits += label == sample.label
            fh.write(f"{line},{label},{prob!r}\n")
    print(f"classified {len(samples)} samples -> {path}")
    if samples and all(s.label for s in samples):
        print(f"agreement with labels: {hits / len(samples):.4f}")
    return 0


def cmd_eval(args, config: cfg.RunConfig) -> int:
    out = Path(config.out_dir)
    paths = [Path(args.lstm_forecast or out / "lstm_forecast.csv"),
             Path(args.svr_forecast or out / "svr_forecast.csv")]
    for p in paths:
        if not p.exists():
            raise UsageError(f"forecast file not found: {p}")
    try:
        result = evaluation.compare(evaluation.read_forecast(paths[0]),
                                    evaluation.read_forecast(paths[1]))
    except ValueError as exc:
        raise UsageError(f"eval: {exc}") from None
    _out_dir(config)
    _write_json(out / "comparison.json", result)
    for key, value in result.items():
        print(f"{key}: {str(value).lower() if isinstance(value, bool) else value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--profile", help="bundled profile name (desk, minute)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="iot-energy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse, fill and resample the raw log")
    p.add_argument("--data", help="semicolon-delimited dataset file")
    p.add_argument("--start", help="first date kept (YYYY-MM-DD)")
    p.add_argument("--end", help="last date kept (YYYY-MM-DD)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train a forecaster")
    p.add_argument("--model", choices=("lstm", "svr"), required=True)
    p.add_argument("--series", help="series CSV (default OUT/series.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", parents=[common], help="forecast every window of a series")
    p.add_argument("--model-file", required=True)
    p.add_argument("--series")
    p.add_argument("--output")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("detect", parents=[common], help="k-NN window anomaly detection")
    p.add_argument("--series")
    p.add_argument("--percentile", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify", parents=[common], help="train or apply the context tree")
    p.add_argument("--train", help="labelled sample CSV to fit a tree on")
    p.add_argument("--tree", help="existing tree file")
    p.add_argument("--input", help="samples to classify")
    p.add_argument("--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", parents=[common], help="compare LSTM and SVR test forecasts")
    p.add_argument("--lstm-forecast")
    p.add_argument("--svr-forecast")
    p.set_defaults(func=cmd_eval)
    return parser


def _overrides(args) -> dict[str, str]:
    pairs = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        pairs[key.strip()] = value.strip()
    flag_keys = {
        "out": "output.dir", "seed": "seed", "start": "data.start", "end": "data.end",
        "percentile": "anomaly.percentile", "window": "anomaly.window_length",
        "stride": "anomaly.stride", "k": "anomaly.k",
    }
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            pairs[key] = str(value)
    return pairs


def _load_config(args) -> cfg.RunConfig:
    if args.profile and args.config:
        raise UsageError("use either --profile or --config, not both")
    path = args.config
    if args.profile:
        res = resources.files("iot_energy") / "profiles" / f"{args.profile}.conf"
        if not res.is_file():
            raise UsageError(f"unknown profile {args.profile!r}")
        path = str(res)
    if path and not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    return cfg.load(path, _overrides(args))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args)
        return args.func(args, config)
    except (UsageError, cfg.ConfigError, ingest.DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
