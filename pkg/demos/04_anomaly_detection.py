"""
Finding unusual days with k-nearest-neighbour distances
=======================================================

Each day becomes one 24-hour window. A window that is far from its k-th
nearest neighbour is unusual; the top fraction of scores is flagged.
"""

from datetime import timedelta

import numpy as np

from iot_energy import ingest
from iot_energy.anomaly import AnomalyConfig, detect, percentile_for_count
from iot_energy.preprocess import fit_scaler
from iot_energy.synthetic import household_records, inject_spikes

series = ingest.resample(ingest.fill_missing(household_records(days=120, seed=4)),
                         interval=timedelta(hours=1))
scaled = series.with_values(fit_scaler(series.values).transform(series.values))

# Plant three sharp surges on random days.
spiked, spikes = inject_spikes(scaled, count=3, window_length=24, magnitude=3.0, seed=4)
print("surges planted on days", sorted((spikes // 24).tolist()))

# Flag exactly the three most isolated days.
config = AnomalyConfig(window_length=24, k=5, percentile=percentile_for_count(120, 3))
report = detect(spiked, config)
print(f"threshold {report.threshold:.3f}, flagged {report.flagged_count} of {len(report)} days")
order = np.argsort(report.rank)[:6]
for i in order:
    mark = "*" if report.flagged[i] else " "
    print(f"{mark} day {report.start_index[i] // 24:3d}  {report.start_timestamp[i]}  "
          f"score {report.score[i]:.3f}  rank {report.rank[i]}")
