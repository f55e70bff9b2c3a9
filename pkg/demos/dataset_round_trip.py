"""
Writing, validating and reloading a dataset
===========================================

The on-disk format is a JSON manifest plus one little-endian float64 file per
channel. This is what ``wearcast generate`` writes and ``wearcast run``
reads.
"""

import json
import tempfile
from pathlib import Path

from wearcast.dataset import LabeledCut, load_dataset, validate_dataset, write_dataset
from wearcast.synth import SynthConfig, cut_label, generate_dataset

cfg = SynthConfig(tools_per_fpt=(1, 1, 1, 1, 1), max_cuts_per_tool=2, phase_seconds=0.05, window_length=256)
cuts = [LabeledCut(rec, cut_label(m), tuple(m)) for rec, m in generate_dataset(cfg)]

root = Path(tempfile.mkdtemp()) / "synthetic"
write_dataset(root, cuts, meta={"seed": cfg.seed})
entry = json.loads((root / "manifest.json").read_text())["cuts"][0]
print(json.dumps({k: entry[k] for k in ("tool_id", "cut_index", "conditions", "channels")}, indent=2))

###############################################################################
# A clean dataset has no diagnostics. Breaking a label is caught.

print("diagnostics:", validate_dataset(root))
doc = json.loads((root / "manifest.json").read_text())
doc["cuts"][0]["label"][8] = 500.0
(root / "manifest.json").write_text(json.dumps(doc))
for d in validate_dataset(root):
    print(d)

###############################################################################
# Loading returns records and labels ready for preprocessing.

loaded = load_dataset(root)
print(len(loaded), "cuts,", len(loaded[0].record), "samples in the first")
