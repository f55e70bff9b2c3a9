"""Per-cut signal preprocessing: from raw dynamometer recordings to a fixed 7-row window."""

from __future__ import annotations

import dataclasses
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import signal as sps

from .errors import (
    CutoffAboveNyquist,
    DegenerateChannel,
    EmptyFitSet,
    SegmentTooShort,
    WindowLongerThanRecord,
)
from .labels import WearLabel

CANONICAL_PERIOD = 50e-6
CANONICAL_WINDOW = 20_000
DESK_WINDOW = 2_000
DEFAULT_CUTOFF = 8000.0
FIR_TAPS = 255
CONDITION_KEYS = ("v_c", "a_p", "a_e", "f_z")


class ChannelId(str, enum.Enum):
    SPINDLE_TORQUE = "M_spindle"
    RCD_X = "F_RCD_x"
    RCD_Y = "F_RCD_y"
    SD_X = "F_SD_x"
    SD_Y = "F_SD_y"
    SD_FEED = "F_SD_feed"
    SD_NORMAL = "F_SD_normal"
    RCD_RESULTANT = "F_RCD_resultant"
    SD_RESULTANT = "F_SD_resultant"

    @property
    def is_raw(self) -> bool:
        return self in RAW_CHANNELS


RAW_CHANNELS = (
    ChannelId.SPINDLE_TORQUE,
    ChannelId.RCD_X,
    ChannelId.RCD_Y,
    ChannelId.SD_X,
    ChannelId.SD_Y,
)
DERIVED_CHANNELS = (
    ChannelId.SD_FEED,
    ChannelId.SD_NORMAL,
    ChannelId.RCD_RESULTANT,
    ChannelId.SD_RESULTANT,
)
# Row order of ProcessedSample.signals.
SAMPLE_CHANNELS = (
    ChannelId.SPINDLE_TORQUE,
    ChannelId.RCD_X,
    ChannelId.RCD_Y,
    ChannelId.SD_FEED,
    ChannelId.SD_NORMAL,
    ChannelId.RCD_RESULTANT,
    ChannelId.SD_RESULTANT,
)


@dataclass(frozen=True)
class CuttingConditions:
    v_c: float  # m/min
    a_p: float  # mm
    a_e: float  # mm
    f_z: float  # mm

    def __post_init__(self):
        for name in CONDITION_KEYS:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in CONDITION_KEYS}


@dataclass(frozen=True)
class CutRecord:
    tool_id: int
    cut_index: int
    conditions: CuttingConditions
    sampling_period: float
    channels: Mapping[ChannelId, np.ndarray]
    drive_position: np.ndarray
    tool_diameter: float = 6.0
    edge_count: int = 4

    def __post_init__(self):
        if not self.sampling_period > 0:
            raise ValueError("sampling_period must be positive")
        n = len(self.drive_position)
        if n < 1:
            raise ValueError("record must hold at least one sample")
        for cid, values in self.channels.items():
            if len(values) != n:
                raise ValueError(f"channel {ChannelId(cid).value} has {len(values)} samples, expected {n}")

    def __len__(self) -> int:
        return len(self.drive_position)

    @property
    def duration(self) -> float:
        return len(self) * self.sampling_period

    def sliced(self, start: int, stop: int) -> "CutRecord":
        return dataclasses.replace(
            self,
            channels={k: np.asarray(v)[start:stop] for k, v in self.channels.items()},
            drive_position=np.asarray(self.drive_position)[start:stop],
        )


@dataclass(frozen=True)
class ProcessedSample:
    signals: np.ndarray  # (7, T)
    conditions: CuttingConditions
    label: WearLabel
    tool_id: int = 0
    cut_index: int = 0
    # Filled in by Normalizer.apply; min-max scaled condition values.
    scaled_conditions: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.signals.ndim != 2 or self.signals.shape[0] != len(SAMPLE_CHANNELS):
            raise ValueError(f"signals must be 7 x T, got {self.signals.shape}")

    @property
    def T(self) -> int:
        return self.signals.shape[1]

    @property
    def normalized(self) -> bool:
        return self.scaled_conditions is not None


def _samples(seconds: float, period: float) -> int:
    return int(round(seconds / period))


def isolate_milling_segment(
    record: CutRecord, entry_margin: float = 0.5, exit_margin: float = 0.5
) -> CutRecord:
    """Drop the entry and exit phases, given as time margins, from every channel."""
    if entry_margin < 0 or exit_margin < 0:
        raise ValueError("margins must be non-negative")
    start = _samples(entry_margin, record.sampling_period)
    stop = len(record) - _samples(exit_margin, record.sampling_period)
    if stop - start < 1:
        raise SegmentTooShort(
            f"record of {len(record)} samples leaves {stop - start} after margins "
            f"({entry_margin}s, {exit_margin}s)"
        )
    return record.sliced(start, stop)


def rotate_to_feed_frame(f_x, f_y, theta):
    """Rotate workpiece-frame forces into the feed/normal frame."""
    c, s = np.cos(theta), np.sin(theta)
    return f_x * c + f_y * s, -f_x * s + f_y * c


def resultant(f_a, f_b):
    return np.hypot(f_a, f_b)


def lowpass_taps(sampling_period: float, cutoff: float, numtaps: int = FIR_TAPS) -> np.ndarray:
    nyquist = 0.5 / sampling_period
    if not 0 < cutoff < nyquist:
        raise CutoffAboveNyquist(f"cutoff {cutoff} Hz must lie in (0, {nyquist} Hz)")
    # firwin normalizes the windowed sinc to unit gain at DC.
    return sps.firwin(numtaps, cutoff, window="hamming", fs=1.0 / sampling_period)


def low_pass(
    signal,
    sampling_period: float = CANONICAL_PERIOD,
    cutoff: float = DEFAULT_CUTOFF,
    numtaps: int = FIR_TAPS,
) -> np.ndarray:
    """Zero-phase-delay FIR low-pass along the last axis, same length as the input."""
    x = np.asarray(signal, dtype=np.float64)
    taps = lowpass_taps(sampling_period, cutoff, numtaps)
    half = (numtaps - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    padded = np.pad(x, pad, mode="reflect" if x.shape[-1] > 1 else "edge")
    kernel = taps.reshape((1,) * (x.ndim - 1) + (-1,))
    return sps.oaconvolve(padded, kernel, mode="valid", axes=-1)


def extract_window(record: CutRecord, duration: float) -> CutRecord:
    """Keep the last ``duration`` seconds of every channel."""
    if duration <= 0:
        raise ValueError("window duration must be positive")
    n = _samples(duration, record.sampling_period)
    if n > len(record):
        raise WindowLongerThanRecord(f"window of {n} samples exceeds record of {len(record)}")
    return record.sliced(len(record) - n, len(record))


def derive_channels(record: CutRecord, cutoff: float | None = DEFAULT_CUTOFF) -> np.ndarray:
    """Build the filtered 7-row matrix for the whole record.

    The five component rows are filtered first and the resultants are formed
    from the filtered components, so resultant rows stay pointwise consistent.
    """
    ch = {k: np.asarray(v, dtype=np.float64) for k, v in record.channels.items()}
    feed, normal = rotate_to_feed_frame(
        ch[ChannelId.SD_X], ch[ChannelId.SD_Y], np.asarray(record.drive_position, dtype=np.float64)
    )
    components = np.stack(
        [ch[ChannelId.SPINDLE_TORQUE], ch[ChannelId.RCD_X], ch[ChannelId.RCD_Y], feed, normal]
    )
    if cutoff is not None:
        components = low_pass(components, record.sampling_period, cutoff)
    rcd_res = resultant(components[1], components[2])
    sd_res = resultant(components[3], components[4])
    return np.vstack([components, rcd_res, sd_res])


def assemble_sample(
    record: CutRecord,
    label: WearLabel,
    window_duration: float = 1.0,
    cutoff: float | None = DEFAULT_CUTOFF,
) -> ProcessedSample:
    """Rotate, filter, compute resultants, and cut the final window of a segmented record."""
    if window_duration <= 0:
        raise ValueError("window duration must be positive")
    rows = derive_channels(record, cutoff)
    n = _samples(window_duration, record.sampling_period)
    if n > rows.shape[1]:
        raise WindowLongerThanRecord(f"window of {n} samples exceeds record of {rows.shape[1]}")
    return ProcessedSample(
        signals=np.ascontiguousarray(rows[:, -n:]),
        conditions=record.conditions,
        label=label,
        tool_id=record.tool_id,
        cut_index=record.cut_index,
    )


@dataclass(frozen=True)
class PreprocessOptions:
    entry_margin: float = 0.5
    exit_margin: float = 0.5
    cutoff: float = DEFAULT_CUTOFF
    window_length: int = DESK_WINDOW


def preprocess(record: CutRecord, label: WearLabel, opts: PreprocessOptions = PreprocessOptions()) -> ProcessedSample:
    segment = isolate_milling_segment(record, opts.entry_margin, opts.exit_margin)
    return assemble_sample(
        segment, label, window_duration=opts.window_length * record.sampling_period, cutoff=opts.cutoff
    )


@dataclass(frozen=True)
class Normalizer:
    """Per-channel z-score and per-condition min-max statistics, frozen at fit time."""

    mean: np.ndarray
    scale: np.ndarray
    cond_min: Mapping[str, float]
    cond_max: Mapping[str, float]
    degenerate: tuple[int, ...] = field(default=())

    def scale_conditions(self, conditions: CuttingConditions) -> dict[str, float]:
        out = {}
        for k, v in conditions.as_dict().items():
            lo, hi = self.cond_min[k], self.cond_max[k]
            out[k] = (v - lo) / (hi - lo) if hi > lo else 0.0
        return out

    def apply(self, sample: ProcessedSample) -> ProcessedSample:
        signals = (sample.signals - self.mean[:, None]) / self.scale[:, None]
        return dataclasses.replace(
            sample, signals=signals, scaled_conditions=self.scale_conditions(sample.conditions)
        )

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "cond_min": dict(self.cond_min),
            "cond_max": dict(self.cond_max),
            "degenerate": list(self.degenerate),
        }


def fit_normalizer(samples: Sequence[ProcessedSample], min_std: float = 1e-12) -> Normalizer:
    if len(samples) == 0:
        raise EmptyFitSet("cannot fit a normalizer on zero samples")
    stacked = np.concatenate([s.signals for s in samples], axis=1)
    mean = stacked.mean(axis=1)
    std = stacked.std(axis=1)
    degenerate = tuple(int(i) for i in np.flatnonzero(std < min_std))
    if degenerate:
        names = [SAMPLE_CHANNELS[i].value for i in degenerate]
        warnings.warn(f"degenerate channels left unscaled: {names}", DegenerateChannel, stacklevel=2)
    scale = np.where(std < min_std, 1.0, std)
    conds = [s.conditions.as_dict() for s in samples]
    cond_min = {k: min(c[k] for c in conds) for k in CONDITION_KEYS}
    cond_max = {k: max(c[k] for c in conds) for k in CONDITION_KEYS}
    return Normalizer(mean, scale, cond_min, cond_max, degenerate)


def apply_normalizer(normalizer: Normalizer, sample: ProcessedSample) -> ProcessedSample:
    return normalizer.apply(sample)
