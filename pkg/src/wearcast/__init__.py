"""Flank-wear estimation from milling force signals with a condition-channel 1D CNN.

The main entry points are re-exported here; see the submodules for details:

- ``signals``: segment isolation, rotation, filtering, windows, normalization
- ``labels``: per-edge wear measurements and the 10-value label
- ``nn``: numpy CNN with manual backpropagation and checkpoints
- ``train``: Adam with step decay
- ``transfer``: feed-transfer scenarios and metrics
- ``synth``: seeded synthetic milling data
- ``dataset``: on-disk manifest format and CSV import
"""

__version__ = "0.1.0"

from .labels import EdgeWearMeasurement, WearLabel, aggregate_edges, measure_profile
from .nn import Network, NetworkConfig, default_reference_config, default_test_config
from .signals import CutRecord, CuttingConditions, Normalizer, PreprocessOptions, fit_normalizer, preprocess
from .synth import SynthConfig, generate_dataset
from .train import TrainConfig, lr_at, train
from .transfer import ScenarioSpec, r_squared, rmse, run_scenario, split

__all__ = [
    "__version__",
    "EdgeWearMeasurement",
    "WearLabel",
    "aggregate_edges",
    "measure_profile",
    "Network",
    "NetworkConfig",
    "default_reference_config",
    "default_test_config",
    "CutRecord",
    "CuttingConditions",
    "Normalizer",
    "PreprocessOptions",
    "fit_normalizer",
    "preprocess",
    "SynthConfig",
    "generate_dataset",
    "TrainConfig",
    "lr_at",
    "train",
    "ScenarioSpec",
    "r_squared",
    "rmse",
    "run_scenario",
    "split",
]
