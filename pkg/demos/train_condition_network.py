"""
Training the condition-aware network and its blind twin
=======================================================

Both networks share every layer except the first convolution; the
condition-aware one gets one extra input row holding the scaled feed per
tooth. Here they are trained on four feeds and asked about the fifth.

Short windows and 30 epochs keep this under a minute; the full setting is
2000-sample windows and 100 epochs.
"""

import numpy as np

from wearcast.nn import Network, default_reference_config, default_test_config, init_parameters
from wearcast.signals import PreprocessOptions, fit_normalizer, preprocess
from wearcast.synth import SynthConfig, cut_label, generate_dataset
from wearcast.train import TrainConfig, predict, train
from wearcast.transfer import ScenarioSpec, rmse, split

WINDOW = 256
cfg = SynthConfig(window_length=WINDOW, phase_seconds=0.05, seed=0)
opts = PreprocessOptions(entry_margin=0.05, exit_margin=0.05, window_length=WINDOW)
samples = [preprocess(rec, cut_label(m), opts) for rec, m in generate_dataset(cfg)]
print(f"{len(samples)} cuts")

###############################################################################
# Architecture and parameter counts.

test_cfg, ref_cfg = default_test_config(WINDOW), default_reference_config(WINDOW)
for name, c in (("condition-aware", test_cfg), ("reference", ref_cfg)):
    print(f"{name:16s} input {c.input_shape}, {init_parameters(c, 0).count} parameters")

###############################################################################
# Hold out the 0.045 mm tools, fit normalization on the rest, and train.

train_set, test_set = split(samples, ScenarioSpec("A", (0.045,)))
norm = fit_normalizer(train_set)
tc = TrainConfig(epochs=30)
actual = np.array([s.label.vb_e for s in test_set])
for name, c in (("condition-aware", test_cfg), ("reference", ref_cfg)):
    result = train(Network.create(c, seed=0), [norm.apply(s) for s in train_set], tc)
    pred = predict(result.network, [norm.apply(s) for s in test_set])[:, 8]
    print(f"{name:16s} final train MSE {result.losses[-1]:.4f}, unseen-feed RMSE {rmse(pred, actual):.1f} µm")
