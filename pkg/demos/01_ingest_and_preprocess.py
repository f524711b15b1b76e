"""
Ingesting the minute log and framing it for forecasting
========================================================

A synthetic household stands in for the real file; it has the same
semicolon layout, the same ``?`` markers for missing rows and a daily rhythm.
"""

from datetime import timedelta

import numpy as np

from iot_energy import ingest
from iot_energy.preprocess import prepare
from iot_energy.synthetic import household_records

# Write four weeks of minute records in the raw text format, then read them back.
text = ingest.serialize_records(household_records(days=28, seed=0)).encode()
print(text.decode().splitlines()[1])
records = ingest.parse_dataset(text)
missing = sum(r.is_missing for r in records)
print(f"{len(records)} records, {missing} missing")

# Missing rows carry the last good reading forward, then minutes become hourly means.
filled = ingest.fill_missing(records, "forward_fill")
hourly = ingest.resample(filled, "global_active_power", timedelta(hours=1))
print(f"hourly series: {len(hourly)} points starting {hourly.start_timestamp}")
print("first day (kW):", np.round(hourly.values[:24], 2))

# Min-max scale with statistics from the training span only, cut 24-step
# windows and split chronologically 80/20.
data = prepare(hourly, lookback=24, train_fraction=0.8)
print(f"scaler range {data.scaler.min_value:.3f}..{data.scaler.max_value:.3f} kW")
print(f"{len(data.train)} training windows, {len(data.test)} test windows")
print("first test target is forecast for", data.test.origin_timestamps[0])
