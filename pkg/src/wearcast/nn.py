"""Small 1D convolutional regression network with hand-written reverse-mode gradients.

Everything runs in float64 on batched arrays shaped (N, C, T). Single
samples shaped (C, T) are accepted and returned without the batch axis.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import as_strided, sliding_window_view

from .errors import (
    ConfigError,
    KernelLargerThanInput,
    LengthMismatch,
    MissingForwardCache,
    ShapeMismatch,
    UnknownConditionKey,
    WindowTooShort,
)
from .signals import CONDITION_KEYS, SAMPLE_CHANNELS, ProcessedSample

MIN_WINDOW = 64


# ---------------------------------------------------------------- layer specs


@dataclass(frozen=True)
class Conv1d:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class MaxPool1d:
    window: int
    stride: int


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


LayerSpec = Union[Conv1d, Relu, MaxPool1d, GlobalAvgPool, Dense]
_LAYER_TYPES = {cls.__name__: cls for cls in (Conv1d, Relu, MaxPool1d, GlobalAvgPool, Dense)}


def _check_spec(spec: LayerSpec) -> None:
    for f in dataclasses.fields(spec):
        v = getattr(spec, f.name)
        lo = 0 if f.name == "padding" else 1
        if not isinstance(v, (int, np.integer)) or v < lo:
            raise ConfigError(f"{type(spec).__name__}.{f.name} must be an integer >= {lo}, got {v!r}")


def layer_output_shape(spec: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    """Per-sample output shape of ``spec`` for a per-sample input ``shape``."""
    if isinstance(spec, Conv1d):
        if len(shape) != 2 or shape[0] != spec.in_channels:
            raise ShapeMismatch(f"Conv1d expects ({spec.in_channels}, T), got {shape}")
        span = shape[1] + 2 * spec.padding
        if span < spec.kernel_size:
            raise KernelLargerThanInput(f"kernel {spec.kernel_size} longer than padded input {span}")
        return (spec.out_channels, (span - spec.kernel_size) // spec.stride + 1)
    if isinstance(spec, MaxPool1d):
        if len(shape) != 2 or shape[1] < spec.window:
            raise ShapeMismatch(f"MaxPool1d window {spec.window} does not fit input {shape}")
        return (shape[0], (shape[1] - spec.window) // spec.stride + 1)
    if isinstance(spec, GlobalAvgPool):
        if len(shape) != 2:
            raise ShapeMismatch(f"GlobalAvgPool expects (C, T), got {shape}")
        return (shape[0],)
    if isinstance(spec, Dense):
        if int(np.prod(shape)) != spec.in_features:
            raise ShapeMismatch(f"Dense expects {spec.in_features} features, got shape {shape}")
        return (spec.out_features,)
    return shape


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class NetworkConfig:
    layers: tuple[LayerSpec, ...]
    window_length: int
    signal_channels: int = len(SAMPLE_CHANNELS)
    condition_keys: tuple[str, ...] = ()
    output_dim: int = 10

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "condition_keys", tuple(self.condition_keys))
        for k in self.condition_keys:
            if k not in CONDITION_KEYS:
                raise UnknownConditionKey(k)
        for spec in self.layers:
            _check_spec(spec)
        self.shapes()

    @property
    def condition_channels(self) -> int:
        return len(self.condition_keys)

    @property
    def in_channels(self) -> int:
        return self.signal_channels + self.condition_channels

    @property
    def input_shape(self) -> tuple[int, ...]:
        first = self.layers[0] if self.layers else None
        if isinstance(first, Dense):
            return (first.in_features,)
        return (self.in_channels, self.window_length)

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample shapes: the input followed by every layer output."""
        if not self.layers:
            raise ConfigError("network has no layers")
        convs = [s for s in self.layers if isinstance(s, Conv1d)]
        if convs and convs[0].in_channels != self.in_channels:
            raise ConfigError(
                f"first Conv1d takes {convs[0].in_channels} channels, "
                f"input has {self.in_channels} ({self.signal_channels} signal + "
                f"{self.condition_channels} condition)"
            )
        shapes = [self.input_shape]
        for spec in self.layers:
            try:
                shapes.append(layer_output_shape(spec, shapes[-1]))
            except (ShapeMismatch, KernelLargerThanInput) as exc:
                raise ConfigError(f"{type(spec).__name__} at depth {len(shapes)}: {exc}") from exc
            if len(shapes[-1]) == 2 and shapes[-1][1] < 1:
                raise ConfigError("time dimension dropped below 1")
        if shapes[-1] != (self.output_dim,):
            raise ConfigError(f"network output shape {shapes[-1]} != ({self.output_dim},)")
        return shapes

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "signal_channels": self.signal_channels,
            "condition_keys": list(self.condition_keys),
            "output_dim": self.output_dim,
            "layers": [{"type": type(s).__name__, **dataclasses.asdict(s)} for s in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        layers = []
        for item in d["layers"]:
            item = dict(item)
            layers.append(_LAYER_TYPES[item.pop("type")](**item))
        return cls(
            layers=tuple(layers),
            window_length=int(d["window_length"]),
            signal_channels=int(d.get("signal_channels", len(SAMPLE_CHANNELS))),
            condition_keys=tuple(d.get("condition_keys", ())),
            output_dim=int(d.get("output_dim", 10)),
        )


def default_layers(in_channels: int, width: int = 32, hidden: int = 64, output_dim: int = 10) -> tuple:
    block = (Conv1d(width, width, 5, stride=2, padding=2), Relu(), MaxPool1d(2, 2))
    return (
        Conv1d(in_channels, width, 7, stride=1, padding=3),
        Relu(),
        *block * 3,
        GlobalAvgPool(),
        Dense(width, hidden),
        Relu(),
        Dense(hidden, output_dim),
    )


def default_test_config(window_length: int, condition_keys: Sequence[str] = ("f_z",)) -> NetworkConfig:
    if window_length < MIN_WINDOW:
        raise WindowTooShort(f"window_length must be >= {MIN_WINDOW}, got {window_length}")
    keys = tuple(condition_keys)
    return NetworkConfig(default_layers(len(SAMPLE_CHANNELS) + len(keys)), window_length, condition_keys=keys)


def default_reference_config(window_length: int) -> NetworkConfig:
    return default_test_config(window_length, condition_keys=())


# ---------------------------------------------------------------- parameters


class Parameters:
    """Weight/bias pairs per layer (None for layers without parameters)."""

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray] | None]):
        self.layers = layers

    def tensors(self) -> list[np.ndarray]:
        """Flat ordering used by the optimizer: W, b of each parametric layer in depth order."""
        out = []
        for pair in self.layers:
            if pair is not None:
                out.extend(pair)
        return out

    @property
    def count(self) -> int:
        return sum(t.size for t in self.tensors())

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors()]) if self.layers else np.zeros(0)

    def load_flat(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.count:
            raise ShapeMismatch(f"flat vector has {vector.size} values, expected {self.count}")
        pos = 0
        for t in self.tensors():
            t[...] = vector[pos : pos + t.size].reshape(t.shape)
            pos += t.size

    def copy(self) -> "Parameters":
        return Parameters([None if p is None else (p[0].copy(), p[1].copy()) for p in self.layers])

    def zeros_like(self) -> "Parameters":
        return Parameters([None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in self.layers])


def init_parameters(config: NetworkConfig, seed: int) -> Parameters:
    """He-normal weights, zero biases. Each layer draws from its own seeded stream."""
    streams = np.random.SeedSequence(seed).spawn(len(config.layers))
    layers: list = []
    for spec, ss in zip(config.layers, streams):
        rng = np.random.default_rng(ss)
        if isinstance(spec, Conv1d):
            fan_in = spec.in_channels * spec.kernel_size
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (spec.out_channels, spec.in_channels, spec.kernel_size))
            layers.append((w, np.zeros(spec.out_channels)))
        elif isinstance(spec, Dense):
            w = rng.normal(0.0, np.sqrt(2.0 / spec.in_features), (spec.out_features, spec.in_features))
            layers.append((w, np.zeros(spec.out_features)))
        else:
            layers.append(None)
    return Parameters(layers)


# ---------------------------------------------------------------- primitive ops
#
# Internally activations are channels-last, (N, T, C), so that every
# convolution window is one contiguous (K, C) block. The public op functions
# take and return the (C, T) / (N, C, T) layout.


def _conv_forward_cl(x, weights, bias, stride, padding):
    n, t, c = x.shape
    o, ci, k = weights.shape
    if ci != c:
        raise ShapeMismatch(f"weights expect {ci} input channels, input has {c}")
    if t + 2 * padding < k:
        raise KernelLargerThanInput(f"kernel {k} longer than padded input {t + 2 * padding}")
    xp = np.pad(x, ((0, 0), (padding, padding), (0, 0))) if padding else np.ascontiguousarray(x)
    t_out = (xp.shape[1] - k) // stride + 1
    s0, s1, s2 = xp.strides
    win = as_strided(xp, (n, t_out, k, c), (s0, s1 * stride, s1, s2), writeable=False)
    cols = win.reshape(n * t_out, k * c)
    out = cols @ weights.transpose(0, 2, 1).reshape(o, k * c).T
    out += bias
    return out.reshape(n, t_out, o), (cols, x.shape, stride, padding)


def _conv_backward_cl(grad, cache, weights, need_input_grad=True):
    cols, (n, t, c), stride, padding = cache
    o, _, k = weights.shape
    t_out = grad.shape[1]
    g = grad.reshape(n * t_out, o)
    dw = (g.T @ cols).reshape(o, k, c).transpose(0, 2, 1).copy()
    db = g.sum(axis=0)
    if not need_input_grad:
        return dw, db, None
    dcols = (g @ weights.transpose(0, 2, 1).reshape(o, k * c)).reshape(n, t_out, k, c)
    # col2im: tap j of output step i lands on padded position i*stride + j.
    # Taps are added in groups of `stride`, each group one contiguous block.
    groups = -(-k // stride)
    span = (t_out + groups) * stride
    dxp = np.zeros((n, span, c))
    blocks = dxp.reshape(n, t_out + groups, stride * c)
    for q in range(groups):
        taps = dcols[:, :, q * stride : (q + 1) * stride, :]
        blocks[:, q : q + t_out, : taps.shape[2] * c] += taps.reshape(n, t_out, -1)
    return dw, db, dxp[:, padding : padding + t, :]


def _pool_forward_cl(x, window, stride):
    n, t, c = x.shape
    if t < window:
        raise ShapeMismatch(f"pool window {window} longer than input {t}")
    t_out = (t - window) // stride + 1
    if window == 2 and stride == 2:
        a, b = x[:, 0 : 2 * t_out : 2, :], x[:, 1 : 2 * t_out : 2, :]
        second = b > a
        return np.maximum(a, b), (second, x.shape, window, stride)
    win = sliding_window_view(x, window, axis=1)[:, ::stride, :, :]
    idx = win.argmax(axis=3)
    out = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    return out, (idx, x.shape, window, stride)


def _pool_backward_cl(grad, cache):
    sel, shape, window, stride = cache
    n, t, c = shape
    dx = np.zeros(shape)
    t_out = grad.shape[1]
    if window == 2 and stride == 2:
        picked = grad * sel
        dx[:, 1 : 2 * t_out : 2, :] = picked
        dx[:, 0 : 2 * t_out : 2, :] = grad - picked
        return dx
    pos = np.arange(t_out)[None, :, None] * stride + sel
    if stride >= window:
        np.put_along_axis(dx, pos, grad, axis=1)
    else:
        flat = (np.arange(n)[:, None, None] * t + pos) * c + np.arange(c)[None, None, :]
        np.add.at(dx.reshape(-1), flat.ravel(), grad.ravel())
    return dx


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    return x, False


def conv1d_forward(x, weights, bias, stride: int = 1, padding: int = 0):
    """Cross-correlation with zero padding; x is (C_in, T) or (N, C_in, T)."""
    xb, squeeze = _as_batch(x)
    out, _ = _conv_forward_cl(xb.transpose(0, 2, 1), np.asarray(weights, float), np.asarray(bias, float), stride, padding)
    out = out.transpose(0, 2, 1)
    return out[0] if squeeze else out


def relu_forward(x):
    return np.maximum(x, 0.0)


def maxpool1d_forward(x, window: int, stride: int):
    xb, squeeze = _as_batch(x)
    out, _ = _pool_forward_cl(xb.transpose(0, 2, 1), window, stride)
    out = out.transpose(0, 2, 1)
    return out[0] if squeeze else out


def global_avg_pool(x):
    return np.asarray(x, dtype=np.float64).mean(axis=-1)


def dense_forward(x, weights, bias):
    """W @ x + b; inputs with more than one axis per sample are flattened."""
    xb = np.asarray(x, dtype=np.float64)
    if xb.ndim == 1:
        return weights @ xb + bias
    return xb.reshape(xb.shape[0], -1) @ weights.T + bias


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise LengthMismatch(f"prediction shape {pred.shape} != target shape {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred, target) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise LengthMismatch(f"prediction shape {pred.shape} != target shape {target.shape}")
    return 2.0 * (pred - target) / pred.size


# ---------------------------------------------------------------- network


@dataclass
class ForwardCache:
    layer_caches: list
    squeezed: bool


class Network:
    def __init__(self, config: NetworkConfig, params: Parameters, seed: int | None = None):
        self.config = config
        self.params = params
        self.seed = seed
        self._check_params()

    @classmethod
    def create(cls, config: NetworkConfig, seed: int = 0) -> "Network":
        return cls(config, init_parameters(config, seed), seed)

    def _check_params(self) -> None:
        if len(self.params.layers) != len(self.config.layers):
            raise ShapeMismatch("parameter list does not match layer list")
        for spec, pair in zip(self.config.layers, self.params.layers):
            if isinstance(spec, Conv1d):
                shapes = ((spec.out_channels, spec.in_channels, spec.kernel_size), (spec.out_channels,))
            elif isinstance(spec, Dense):
                shapes = ((spec.out_features, spec.in_features), (spec.out_features,))
            else:
                if pair is not None:
                    raise ShapeMismatch(f"{type(spec).__name__} takes no parameters")
                continue
            if pair is None or pair[0].shape != shapes[0] or pair[1].shape != shapes[1]:
                raise ShapeMismatch(f"{type(spec).__name__} parameters must have shapes {shapes}")

    def copy(self) -> "Network":
        return Network(self.config, self.params.copy(), self.seed)

    def forward(self, x, keep_cache: bool = True, channels_last: bool = False):
        """Run all layers; returns (output, cache). cache is None when keep_cache is False.

        ``channels_last`` marks a batched input already laid out as (N, T, C).
        """
        per_sample = self.config.input_shape
        x = np.asarray(x, dtype=np.float64)
        if channels_last:
            squeezed = False
            if x.shape[1:] != per_sample[::-1]:
                raise ShapeMismatch(f"input shape {x.shape[1:]} != configured {per_sample[::-1]} (T, C)")
            h = x
        else:
            squeezed = x.shape == per_sample
            if squeezed:
                x = x[None]
            if x.shape[1:] != per_sample:
                raise ShapeMismatch(f"input shape {x.shape[1:]} != configured {per_sample}")
            h = x.transpose(0, 2, 1) if x.ndim == 3 else x
        layers = self.config.layers
        caches = []
        i = 0
        while i < len(layers):
            spec, pair = layers[i], self.params.layers[i]
            cache = None
            if isinstance(spec, Conv1d):
                h, cache = _conv_forward_cl(h, pair[0], pair[1], spec.stride, spec.padding)
            elif isinstance(spec, Relu) and i + 1 < len(layers) and isinstance(layers[i + 1], MaxPool1d):
                # max-pooling commutes with relu; pooling first halves the elementwise work
                pool = layers[i + 1]
                h, pool_cache = _pool_forward_cl(h, pool.window, pool.stride)
                mask = h > 0
                h = np.maximum(h, 0.0)
                if keep_cache:
                    caches.extend([("fused", mask), pool_cache])
                i += 2
                continue
            elif isinstance(spec, Relu):
                cache = h > 0
                h = np.maximum(h, 0.0)
            elif isinstance(spec, MaxPool1d):
                h, cache = _pool_forward_cl(h, spec.window, spec.stride)
            elif isinstance(spec, GlobalAvgPool):
                cache = h.shape
                h = h.mean(axis=1)
            elif isinstance(spec, Dense):
                in_shape = h.shape
                if h.ndim == 3:
                    # flatten in the public (C, T) order
                    h = h.transpose(0, 2, 1)
                h = h.reshape(h.shape[0], -1)
                cache = (in_shape, h)
                h = h @ pair[0].T + pair[1]
            if keep_cache:
                caches.append(cache)
            i += 1
        if h.ndim == 3:
            h = h.transpose(0, 2, 1)
        out = h[0] if squeezed else h
        return out, (ForwardCache(caches, squeezed) if keep_cache else None)

    def predict(self, x) -> np.ndarray:
        return self.forward(x, keep_cache=False)[0]

    def backward(self, cache: ForwardCache | None, grad_output, need_input_grad: bool = True):
        """Reverse pass; returns (parameter gradients, gradient w.r.t. the input or None)."""
        if cache is None or not cache.layer_caches:
            raise MissingForwardCache("run forward(..., keep_cache=True) before backward")
        g = np.asarray(grad_output, dtype=np.float64)
        if cache.squeezed:
            g = g[None]
        if g.ndim == 3:
            g = g.transpose(0, 2, 1)
        layers = self.config.layers
        grads: list = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            spec, pair, c = layers[i], self.params.layers[i], cache.layer_caches[i]
            want_dx = need_input_grad or i > 0
            if isinstance(spec, Conv1d):
                dw, db, g = _conv_backward_cl(g, c, pair[0], need_input_grad=want_dx)
                grads[i] = (dw, db)
            elif isinstance(spec, MaxPool1d):
                prev = cache.layer_caches[i - 1] if i > 0 else None
                if isinstance(prev, tuple) and len(prev) == 2 and isinstance(prev[0], str):
                    g = g * prev[1]
                g = _pool_backward_cl(g, c)
            elif isinstance(spec, Relu):
                if not (isinstance(c, tuple) and isinstance(c[0], str)):
                    g = g * c
            elif isinstance(spec, GlobalAvgPool):
                g = np.broadcast_to(g[:, None, :] / c[1], c)
            elif isinstance(spec, Dense):
                in_shape, flat_in = c
                grads[i] = (g.T @ flat_in, g.sum(axis=0))
                if want_dx:
                    g = g @ pair[0]
                    if len(in_shape) == 3:
                        g = g.reshape(in_shape[0], in_shape[2], in_shape[1]).transpose(0, 2, 1)
                    else:
                        g = g.reshape(in_shape)
                else:
                    g = None
            if g is None:
                break
        dx = None
        if need_input_grad and g is not None:
            if g.ndim == 3:
                g = g.transpose(0, 2, 1)
            dx = np.ascontiguousarray(g[0] if cache.squeezed else g)
        return Parameters(grads), dx


def build_input(sample: ProcessedSample, condition_keys: Sequence[str] = ()) -> np.ndarray:
    """Stack signal rows with one constant row per scaled cutting condition."""
    for k in condition_keys:
        if k not in CONDITION_KEYS:
            raise UnknownConditionKey(k)
    if condition_keys and sample.scaled_conditions is None:
        raise ValueError("sample has not been normalized; condition values are unscaled")
    t = sample.T
    rows = [np.asarray(sample.signals, dtype=np.float64)]
    if condition_keys:
        rows.append(np.array([[sample.scaled_conditions[k]] * t for k in condition_keys], dtype=np.float64))
    return np.vstack(rows)


def build_batch(samples: Sequence[ProcessedSample], condition_keys: Sequence[str] = ()) -> np.ndarray:
    return np.stack([build_input(s, condition_keys) for s in samples])


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"WEARCKPT"


def save_checkpoint(path, net: Network, epoch: int = 0, extra: dict | None = None) -> None:
    header = {
        "format": "wearcast-checkpoint",
        "version": 1,
        "config": net.config.to_dict(),
        "seed": net.seed,
        "epoch": int(epoch),
        "parameter_count": net.params.count,
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = net.params.flat().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path) -> tuple[Network, dict]:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a wearcast checkpoint")
    (size,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + size].decode("utf-8"))
    config = NetworkConfig.from_dict(header["config"])
    params = init_parameters(config, 0)
    params.load_flat(np.frombuffer(data[16 + size :], dtype="<f8"))
    return Network(config, params, header.get("seed")), header
