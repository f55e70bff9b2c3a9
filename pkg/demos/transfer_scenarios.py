"""
The four transfer scenarios
===========================

A and C hold out one or two feeds entirely. B and D additionally move one
tool per held-out feed into training and fine-tune the A or C model on the
enlarged set. This script shows the splits and runs A followed by B on a
reduced setting.
"""

from wearcast.nn import default_reference_config, default_test_config
from wearcast.signals import PreprocessOptions, preprocess
from wearcast.synth import SynthConfig, cut_label, generate_dataset
from wearcast.train import TrainConfig
from wearcast.transfer import ScenarioSpec, run_scenario, split

WINDOW = 256
cfg = SynthConfig(window_length=WINDOW, phase_seconds=0.05, seed=2)
opts = PreprocessOptions(entry_margin=0.05, exit_margin=0.05, window_length=WINDOW)
samples = [preprocess(rec, cut_label(m), opts) for rec, m in generate_dataset(cfg)]

###############################################################################
# Which tools land where.

for spec in (ScenarioSpec("A", (0.045,)), ScenarioSpec("B", (0.045,)),
             ScenarioSpec("C", (0.015, 0.06)), ScenarioSpec("D", (0.015, 0.06))):
    tr, te = split(samples, spec)
    print(f"{spec.name:14s} train tools {sorted({s.tool_id for s in tr})}")
    print(f"{'':14s} test tools  {sorted({s.tool_id for s in te})}")

###############################################################################
# Scenario A, then B warm-started from the A models.

args = (default_test_config(WINDOW), default_reference_config(WINDOW), TrainConfig(epochs=25))
report_a, models = run_scenario(samples, ScenarioSpec("A", (0.045,)), *args)
report_b, _ = run_scenario(samples, ScenarioSpec("B", (0.045,)), *args, base_models=models)
for rep in (report_a, report_b):
    m = rep.metrics
    print(f"{rep.scenario.name}: test {m['test']['rmse']:.1f} µm, reference {m['reference']['rmse']:.1f} µm, "
          f"advantage {rep.advantage_rmse_pct:+.1f}%")
