"""Transfer scenarios across feeds per tooth, metrics, and evaluation reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateActuals,
    DivisionByZeroReference,
    EmptyInput,
    LengthMismatch,
    SingleFptDataset,
    UnknownFpt,
)
from .labels import VB_E_INDEX
from .nn import Network, NetworkConfig
from .signals import Normalizer, ProcessedSample, fit_normalizer
from .train import TrainConfig, fine_tune, predict, train

FPT_ATOL = 1e-9
KINDS = ("A", "B", "C", "D")


def normalize_fpt(f_z: float) -> float:
    """Read a feed of 0.525 mm as 0.0525 mm (a known typo in tool records); other values pass through."""
    if math.isclose(f_z, 0.525, abs_tol=FPT_ATOL):
        return 0.0525
    return float(f_z)


def same_fpt(a: float, b: float) -> bool:
    return math.isclose(normalize_fpt(a), normalize_fpt(b), rel_tol=0.0, abs_tol=FPT_ATOL)


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    test_fpts: tuple[float, ...]
    partial_tool_rule: str = "lowest"  # or "highest"

    def __post_init__(self):
        object.__setattr__(self, "test_fpts", tuple(normalize_fpt(f) for f in self.test_fpts))
        if self.kind not in KINDS:
            raise ValueError(f"scenario kind must be one of {KINDS}, got {self.kind!r}")
        want = 1 if self.kind in "AB" else 2
        if len(self.test_fpts) != want:
            raise ValueError(f"scenario {self.kind} needs exactly {want} test FPT value(s)")
        if want == 2 and same_fpt(*self.test_fpts):
            raise ValueError("the two test FPT values must differ")
        if self.partial_tool_rule not in ("lowest", "highest"):
            raise ValueError(f"unknown partial_tool_rule {self.partial_tool_rule!r}")

    @property
    def partial_learning(self) -> bool:
        return self.kind in ("B", "D")

    @property
    def base(self) -> "ScenarioSpec":
        """The scenario without partial learning (A for B, C for D)."""
        kind = {"B": "A", "D": "C"}.get(self.kind, self.kind)
        return ScenarioSpec(kind, self.test_fpts, self.partial_tool_rule)

    @property
    def name(self) -> str:
        return f"{self.kind}_" + "_".join(f"{f:g}" for f in self.test_fpts)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "test_fpts": list(self.test_fpts),
            "partial_learning": self.partial_learning,
            "partial_tool_rule": self.partial_tool_rule,
        }


def _fpt_of(item) -> float:
    return normalize_fpt(item.conditions.f_z)


def split(dataset: Sequence, spec: ScenarioSpec):
    """Partition items (anything with tool_id, cut_index, conditions) into (train, test)."""
    fpts = sorted({_fpt_of(s) for s in dataset})
    if len(fpts) < 2:
        raise SingleFptDataset("dataset covers fewer than two feeds per tooth")
    for f in spec.test_fpts:
        if not any(same_fpt(f, g) for g in fpts):
            raise UnknownFpt(f"test FPT {f} not present in dataset {fpts}")

    def in_test_fpt(item) -> bool:
        return any(same_fpt(_fpt_of(item), f) for f in spec.test_fpts)

    moved: set[int] = set()
    if spec.partial_learning:
        for f in spec.test_fpts:
            tools = sorted({s.tool_id for s in dataset if same_fpt(_fpt_of(s), f)})
            moved.add(tools[0] if spec.partial_tool_rule == "lowest" else tools[-1])
    train_set, test_set = [], []
    for item in dataset:
        if in_test_fpt(item) and item.tool_id not in moved:
            test_set.append(item)
        else:
            train_set.append(item)
    return train_set, test_set


def rmse(pred, actual) -> float:
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise LengthMismatch(f"{p.shape} vs {a.shape}")
    if p.size == 0:
        raise EmptyInput("rmse of empty vectors")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def r_squared(pred, actual) -> float:
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise LengthMismatch(f"{p.shape} vs {a.shape}")
    if a.size < 2:
        raise DegenerateActuals("R² needs at least two actual values")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot <= 1e-12 * max(1.0, float(np.sum(a**2))):
        raise DegenerateActuals("actual values are (near) constant")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def advantage_pct(metric_ref: float, metric_test: float, lower_is_better: bool = True) -> float:
    """Relative improvement of the test model over the reference, in percent."""
    if metric_ref == 0:
        raise DivisionByZeroReference("reference metric is zero")
    if lower_is_better:
        return 100.0 * (metric_ref - metric_test) / metric_ref
    return 100.0 * (metric_test - metric_ref) / abs(metric_ref)


def _metrics(pred, actual) -> dict:
    out = {"n": int(len(actual)), "rmse": rmse(pred, actual)}
    try:
        out["r2"] = r_squared(pred, actual)
    except DegenerateActuals:
        out["r2"] = None
    return out


@dataclass
class ModelResult:
    network: Network
    normalizer: Normalizer
    loss_trace: list


@dataclass
class EvaluationReport:
    scenario: ScenarioSpec
    train_tools: list[int]
    test_tools: list[int]
    metrics: dict  # model -> {"rmse", "r2", "n"}
    advantage_rmse_pct: float | None
    advantage_r2_pct: float | None
    per_fpt: dict  # model -> {fpt string -> metrics}
    per_tool: dict  # model -> {tool id string -> metrics}
    predictions: list[dict]  # tool_id, cut_index, f_z, actual, predicted_test, predicted_ref
    train_size: int
    test_size: int
    advantage_convention: str = (
        "rmse: 100*(ref-test)/ref; r2: 100*(test-ref)/|ref|; metrics pooled over all test cuts on VB_E"
    )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "name": self.scenario.name,
            "train_tools": self.train_tools,
            "test_tools": self.test_tools,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "metrics": self.metrics,
            "advantage_rmse_pct": self.advantage_rmse_pct,
            "advantage_r2_pct": self.advantage_r2_pct,
            "advantage_convention": self.advantage_convention,
            "per_fpt": self.per_fpt,
            "per_tool": self.per_tool,
            "predictions": self.predictions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_predictions_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tool", "cut", "f_z", "actual", "predicted_test", "predicted_ref"])
            for row in self.predictions:
                w.writerow([
                    row["tool_id"], row["cut_index"], repr(row["f_z"]), repr(row["actual"]),
                    repr(row["predicted_test"]), repr(row["predicted_ref"]),
                ])


def _fit_model(config: NetworkConfig, train_set, cfg: TrainConfig, seed: int, normalizer=None, warm: Network | None = None, extra=()):
    norm = normalizer if normalizer is not None else fit_normalizer(train_set)
    if warm is None:
        result = train(Network.create(config, seed), [norm.apply(s) for s in train_set], cfg)
    else:
        result = fine_tune(warm, [norm.apply(s) for s in train_set], [norm.apply(s) for s in extra], cfg)
    return ModelResult(result.network, norm, result.loss_trace)


def run_scenario(
    dataset: Sequence[ProcessedSample],
    spec: ScenarioSpec,
    test_config: NetworkConfig,
    reference_config: NetworkConfig,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    base_models: dict[str, ModelResult] | None = None,
    models: Sequence[str] = ("test", "reference"),
):
    """Train and evaluate the condition-aware and reference models on one scenario.

    For partial-learning scenarios the networks are warm-started from the
    base scenario's models (given in ``base_models`` or trained here) and
    fine-tuned on the enlarged training set, keeping the base normalizer.
    Returns (report, {model name: ModelResult}).
    """
    configs = {"test": test_config, "reference": reference_config}
    train_set, test_set = split(dataset, spec)
    if not test_set:
        raise EmptyInput(f"scenario {spec.name} leaves no test cuts")
    trained: dict[str, ModelResult] = {}
    if spec.partial_learning:
        base_train, _ = split(dataset, spec.base)
        base_ids = {(s.tool_id, s.cut_index) for s in base_train}
        extra = [s for s in train_set if (s.tool_id, s.cut_index) not in base_ids]
        for name in models:
            base = (base_models or {}).get(name)
            if base is None:
                base = _fit_model(configs[name], base_train, train_cfg, seed)
            trained[name] = _fit_model(
                configs[name], base_train, train_cfg, seed, normalizer=base.normalizer, warm=base.network, extra=extra
            )
    else:
        for name in models:
            trained[name] = _fit_model(configs[name], train_set, train_cfg, seed)

    actual = np.array([s.label.vb_e for s in test_set])
    preds = {
        name: predict(m.network, [m.normalizer.apply(s) for s in test_set])[:, VB_E_INDEX]
        for name, m in trained.items()
    }
    report = build_report(spec, train_set, test_set, actual, preds)
    return report, trained


def build_report(spec, train_set, test_set, actual, preds: dict) -> EvaluationReport:
    metrics = {name: _metrics(p, actual) for name, p in preds.items()}
    adv_rmse = adv_r2 = None
    if "test" in metrics and "reference" in metrics:
        t, r = metrics["test"], metrics["reference"]
        if r["rmse"] != 0:
            adv_rmse = advantage_pct(r["rmse"], t["rmse"], lower_is_better=True)
        if r["r2"] is not None and t["r2"] is not None and r["r2"] != 0:
            adv_r2 = advantage_pct(r["r2"], t["r2"], lower_is_better=False)

    def grouped(key):
        groups: dict[str, list[int]] = {}
        for i, s in enumerate(test_set):
            groups.setdefault(key(s), []).append(i)
        return {
            name: {g: _metrics(p[idx], actual[idx]) for g, idx in sorted(groups.items())}
            for name, p in preds.items()
        }

    rows = []
    for i, s in enumerate(test_set):
        rows.append({
            "tool_id": int(s.tool_id),
            "cut_index": int(s.cut_index),
            "f_z": float(s.conditions.f_z),
            "actual": float(actual[i]),
            "predicted_test": float(preds["test"][i]) if "test" in preds else None,
            "predicted_ref": float(preds["reference"][i]) if "reference" in preds else None,
        })
    return EvaluationReport(
        scenario=spec,
        train_tools=sorted({int(s.tool_id) for s in train_set}),
        test_tools=sorted({int(s.tool_id) for s in test_set}),
        metrics=metrics,
        advantage_rmse_pct=adv_rmse,
        advantage_r2_pct=adv_r2,
        per_fpt=grouped(lambda s: f"{normalize_fpt(s.conditions.f_z):g}"),
        per_tool=grouped(lambda s: str(int(s.tool_id))),
        predictions=rows,
        train_size=len(train_set),
        test_size=len(test_set),
    )
