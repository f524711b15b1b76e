"""
Short-lookback forecasting with epsilon-SVR
===========================================

An RBF support vector regressor trained by sequential minimal optimisation
on 30-step windows, compared with the LSTM on the same hours.
"""

from datetime import timedelta

import numpy as np

from iot_energy import ingest, lstm, svr
from iot_energy.evaluation import mae
from iot_energy.preprocess import prepare
from iot_energy.synthetic import household_records

series = ingest.resample(ingest.fill_missing(household_records(days=60, seed=2)),
                         interval=timedelta(hours=1))

svr_data = prepare(series, lookback=30)
model = svr.train_svr(svr.SvrConfig(lookback=30, c=10, epsilon=0.01), svr_data.train,
                      svr_data.scaler)
print(f"converged={model.converged} after {model.iterations} iterations, "
      f"{len(model)} support vectors of {len(svr_data.train)} rows")
violations = svr.kkt_violations(model, svr.SvrConfig(lookback=30), svr_data.train)
print(f"largest KKT violation on the training set: {violations.max():.2e}")
svr_pred = svr.predict_many(model, svr_data.test)

lstm_data = prepare(series, lookback=24)
params, _ = lstm.train(lstm.LstmConfig(lookback=24, hidden_size=16, epochs=15,
                                       batch_size=256), lstm_data.train)
lstm_pred = lstm.predict(params, lstm_data.test)

# Both test sets end at the same hour; compare over the hours they share.
shared, i_svr, i_lstm = np.intersect1d(svr_data.test.origin_timestamps,
                                       lstm_data.test.origin_timestamps, return_indices=True)
print(f"on {shared.size} shared test hours:")
print(f"  SVR  MAE {mae(svr_data.test.targets[i_svr], svr_pred[i_svr]):.4f}")
print(f"  LSTM MAE {mae(lstm_data.test.targets[i_lstm], lstm_pred[i_lstm]):.4f}")
