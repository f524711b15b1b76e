"""
The whole pipeline from the command line
========================================

Runs every subcommand against a synthetic raw file in a temporary
directory, the same way a shell session would.
"""

import json
import tempfile
from pathlib import Path

from iot_energy.cli import main
from iot_energy.ingest import serialize_records
from iot_energy.synthetic import household_records

work = Path(tempfile.mkdtemp(prefix="iot_energy_"))
raw = work / "household_power_consumption.txt"
raw.write_text(serialize_records(household_records(days=60, seed=6)))
out = str(work / "out")

common = ["--out", out, "--seed", "7"]
steps = [
    ["ingest", "--data", str(raw)],
    ["train", "--model", "lstm", "--set", "lstm.epochs=10"],
    ["train", "--model", "svr"],
    ["detect", "--window", "24", "--percentile", "95"],
    ["eval"],
]
for step in steps:
    print("$ iot-energy", " ".join(step + common[:2]))
    assert main(step + common) == 0

print(json.dumps(json.loads((Path(out) / "comparison.json").read_text()), indent=1))
print("outputs:", sorted(p.name for p in Path(out).iterdir()))
