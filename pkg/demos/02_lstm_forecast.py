"""
Hour-ahead forecasting with a from-scratch LSTM
===============================================

The network reads 24 hourly values and predicts the next one. Training runs
full backpropagation through time with Adam on mean squared error.
"""

from datetime import timedelta

import numpy as np

from iot_energy import ingest, lstm
from iot_energy.evaluation import evaluate
from iot_energy.preprocess import prepare
from iot_energy.synthetic import household_records

series = ingest.resample(ingest.fill_missing(household_records(days=60, seed=2)),
                         interval=timedelta(hours=1))
data = prepare(series, lookback=24)

# Before training, confirm the analytic gradients against finite differences.
config = lstm.LstmConfig(lookback=24, hidden_size=16, epochs=15, batch_size=256, seed=0)
params = lstm.init_params(config)
err = lstm.gradient_check(params, data.train.inputs[0], data.train.targets[0])
print(f"gradient check: max relative error {err:.2e}")

params, report = lstm.train(config, data.train, data.test, data.scaler)
print("epoch losses:", np.round(report.epoch_losses, 5))

pred = lstm.predict(params, data.test)
metrics = evaluate("lstm", (data.test.targets, pred), data.scaler)
test = metrics.splits["test"]
print(f"test MAE {test.mae_normalized:.4f} normalized = {test.mae_kw:.3f} kW")

# Show a few hours side by side, back in kilowatts.
actual_kw = data.scaler.inverse_transform(data.test.targets[:6])
pred_kw = data.scaler.inverse_transform(pred[:6])
for ts, a, p in zip(data.test.origin_timestamps[:6], actual_kw, pred_kw):
    print(f"{ts}  actual {a:5.2f}  predicted {p:5.2f}")
