"""Experiment configuration: one TOML document with a section per module.

Example::

    seed = 3
    output = "runs/demo"
    # dataset = "data/synth"     # omit to generate synthetic data in memory

    [synth]
    noise_level = 0.05

    [preprocess]
    window_length = 2000

    [network]
    condition_keys = ["f_z"]

    [train]
    epochs = 100

    [[scenarios]]
    kind = "A"
    test_fpts = [0.045]

Unknown keys are rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .errors import ConfigError
from .signals import CONDITION_KEYS, PreprocessOptions
from .synth import ForceModel, SynthConfig, WearCoefficients
from .train import TrainConfig
from .transfer import ScenarioSpec

DEFAULT_SCENARIOS = (
    ScenarioSpec("A", (0.045,)),
    ScenarioSpec("B", (0.045,)),
    ScenarioSpec("C", (0.015, 0.060)),
    ScenarioSpec("D", (0.015, 0.060)),
)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output: str = "wearcast-out"
    dataset: str | None = None
    jobs: int = 1
    synth: SynthConfig = field(default_factory=SynthConfig)
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    condition_keys: tuple[str, ...] = ("f_z",)
    train: TrainConfig = field(default_factory=TrainConfig)
    scenarios: tuple[ScenarioSpec, ...] = DEFAULT_SCENARIOS

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        bad = [k for k in self.condition_keys if k not in CONDITION_KEYS]
        if bad:
            raise ConfigError(f"unknown condition keys {bad}; choose from {CONDITION_KEYS}")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate scenarios in {names}")

    def with_overrides(self, seed=None, output=None, jobs=None, window_length=None, dataset=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(seed))
        if output is not None:
            cfg = dataclasses.replace(cfg, output=str(output))
        if jobs is not None:
            cfg = dataclasses.replace(cfg, jobs=int(jobs))
        if dataset is not None:
            cfg = dataclasses.replace(cfg, dataset=str(dataset))
        if window_length is not None:
            cfg = dataclasses.replace(
                cfg,
                preprocess=dataclasses.replace(cfg.preprocess, window_length=int(window_length)),
                synth=dataclasses.replace(cfg.synth, window_length=int(window_length)),
            )
        return cfg

    def synth_config(self) -> SynthConfig:
        """The generator settings with the experiment seed applied."""
        return dataclasses.replace(self.synth, seed=self.seed)

    def train_config(self) -> TrainConfig:
        return dataclasses.replace(self.train, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output": self.output,
            "dataset": self.dataset,
            "jobs": self.jobs,
            "synth": _plain(dataclasses.asdict(self.synth)),
            "preprocess": dataclasses.asdict(self.preprocess),
            "network": {"condition_keys": list(self.condition_keys)},
            "train": dataclasses.asdict(self.train),
            "scenarios": [s.to_dict() for s in self.scenarios],
        }

    def content_hash(self) -> str:
        """SHA-256 of everything that affects results (output path and job count excluded)."""
        d = self.to_dict()
        del d["output"], d["jobs"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, where: str, nested: dict | None = None):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if nested and k in nested:
            kwargs[k] = _build(nested[k], v, f"{where}.{k}")
        elif isinstance(v, list):
            kwargs[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    top = {"seed", "output", "dataset", "jobs", "synth", "preprocess", "network", "train", "scenarios"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {k: data[k] for k in ("seed", "output", "dataset", "jobs") if k in data}
    if "synth" in data:
        synth = dict(data["synth"])
        if "seed" in synth:
            raise ConfigError("[synth] takes its seed from the top-level seed")
        kwargs["synth"] = _build(SynthConfig, synth, "synth", {"coefficients": WearCoefficients, "forces": ForceModel})
    if "preprocess" in data:
        kwargs["preprocess"] = _build(PreprocessOptions, data["preprocess"], "preprocess")
    if "network" in data:
        net = dict(data["network"])
        unknown = sorted(set(net) - {"condition_keys"})
        if unknown:
            raise ConfigError(f"unknown key(s) in [network]: {', '.join(unknown)}")
        if "condition_keys" in net:
            kwargs["condition_keys"] = tuple(net["condition_keys"])
    if "train" in data:
        train = dict(data["train"])
        if "seed" in train:
            raise ConfigError("[train] takes its seed from the top-level seed")
        kwargs["train"] = _build(TrainConfig, train, "train")
    if "scenarios" in data:
        specs = []
        for i, s in enumerate(data["scenarios"]):
            s = dict(s)
            s.pop("partial_learning", None)  # derived from kind; accepted for round trips
            specs.append(_build(ScenarioSpec, s, f"scenarios[{i}]"))
        kwargs["scenarios"] = tuple(specs)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


__all__ = ["ExperimentConfig", "DEFAULT_SCENARIOS", "config_from_dict", "load_config"]
