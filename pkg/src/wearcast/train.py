"""Adam training with a step-decayed learning rate and deterministic batching."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyDataset, ShapeMismatch
from .labels import LABEL_SIZE
from .nn import Network, build_batch, mse_grad, save_checkpoint
from .signals import ProcessedSample

LABEL_SCALE_UM = 100.0


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 0.001
    decay_rate: float = 0.7
    decay_every: int = 20
    epochs: int = 100
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.decay_rate <= 1:
            raise ConfigError(f"decay_rate must lie in (0, 1], got {self.decay_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.decay_every < 1:
            raise ConfigError(f"decay_every must be >= 1, got {self.decay_every}")
        if not self.initial_lr > 0:
            raise ConfigError("initial_lr must be positive")


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.initial_lr * cfg.decay_rate ** (epoch // cfg.decay_every)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, tensors: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(t) for t in tensors], [np.zeros_like(t) for t in tensors], 0)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update, applied in place; returns (params, state)."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class TrainResult:
    network: Network
    loss_trace: list[tuple[int, float, float]] = field(default_factory=list)  # (epoch, lr, train_mse)

    @property
    def losses(self) -> list[float]:
        return [row[2] for row in self.loss_trace]


def scaled_targets(samples: Sequence[ProcessedSample]) -> np.ndarray:
    return np.stack([s.label.as_array() for s in samples]) / LABEL_SCALE_UM


def train(
    net: Network,
    dataset: Sequence[ProcessedSample],
    cfg: TrainConfig = TrainConfig(),
    checkpoint_dir: str | Path | None = None,
    checkpoint_tag: str = "model",
) -> TrainResult:
    """Train a copy of ``net`` on normalized samples; the input network is left untouched.

    Each epoch shuffles with a generator seeded from ``cfg.seed`` and runs
    ceil(N / batch_size) Adam steps. The recorded loss for an epoch is the
    sample-weighted mean of its batch losses before each update.
    """
    if len(dataset) == 0:
        raise EmptyDataset("training set is empty")
    net = net.copy()
    x = np.ascontiguousarray(build_batch(dataset, net.config.condition_keys).transpose(0, 2, 1))
    y = scaled_targets(dataset)
    if y.shape[1] != net.config.output_dim:
        raise ShapeMismatch(f"labels have {y.shape[1]} values, network outputs {net.config.output_dim}")
    tensors = net.params.tensors()
    state = AdamState.zeros_like(tensors)
    rng = np.random.default_rng(cfg.seed)
    order = np.arange(len(dataset))
    n_batches = math.ceil(len(dataset) / cfg.batch_size)
    trace = []
    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt is not None:
        ckpt.mkdir(parents=True, exist_ok=True)

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        rng.shuffle(order)
        total = 0.0
        for b in range(n_batches):
            idx = np.sort(order[b * cfg.batch_size : (b + 1) * cfg.batch_size])
            pred, cache = net.forward(x[idx], channels_last=True)
            target = y[idx]
            total += float(np.sum((pred - target) ** 2)) / y.shape[1]
            grads, _ = net.backward(cache, mse_grad(pred, target), need_input_grad=False)
            adam_step(tensors, grads.tensors(), state, lr, cfg.beta1, cfg.beta2, cfg.epsilon)
        trace.append((epoch, lr, total / len(dataset)))
        done = epoch + 1
        if ckpt is not None and (done % cfg.decay_every == 0 or done == cfg.epochs):
            save_checkpoint(ckpt / f"{checkpoint_tag}_epoch{done:03d}.ckpt", net, epoch=done)
    return TrainResult(net, trace)


def fine_tune(
    net: Network,
    original: Sequence[ProcessedSample],
    extra: Sequence[ProcessedSample],
    cfg: TrainConfig = TrainConfig(),
    from_scratch: bool = False,
    **kwargs,
) -> TrainResult:
    """Continue training on original + extra with the schedule restarted at epoch 0.

    ``from_scratch`` re-initializes the network from its seed instead of
    warm-starting from the given weights.
    """
    if len(extra) == 0:
        raise EmptyDataset("fine-tuning needs at least one extra sample")
    start = Network.create(net.config, net.seed if net.seed is not None else cfg.seed) if from_scratch else net
    return train(start, list(original) + list(extra), cfg, **kwargs)


def predict(net: Network, samples: Sequence[ProcessedSample], batch_size: int = 32) -> np.ndarray:
    """Predicted 10-value labels in µm, one row per sample."""
    out = []
    for i in range(0, len(samples), batch_size):
        chunk = build_batch(samples[i : i + batch_size], net.config.condition_keys)
        out.append(np.atleast_2d(net.predict(chunk)))
    if not out:
        return np.zeros((0, net.config.output_dim))
    return np.vstack(out) * LABEL_SCALE_UM


def write_loss_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "lr", "train_mse"])
        for epoch, lr, mse in trace:
            w.writerow([epoch, repr(lr), repr(mse)])


__all__ = [
    "LABEL_SCALE_UM",
    "LABEL_SIZE",
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "lr_at",
    "adam_step",
    "train",
    "fine_tune",
    "predict",
    "write_loss_trace",
]
