"""Flank-wear labels: per-edge section measurements and the 10-value target."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyMeasurementList, InvalidMeasurement, ProfileCoverageError

LABEL_SIZE = 10
VB_E_INDEX = 8
VB_MAX_E_INDEX = 9
WORN_LIMIT_UM = 200.0

LABEL_NAMES = (
    "VB_1", "VB_2", "VB_3", "VB_4",
    "VB_max_1", "VB_max_2", "VB_max_3", "VB_max_4",
    "VB_E", "VB_max_E",
)


@dataclass(frozen=True)
class SectionLayout:
    """Measurement sections along the cutting edge, in µm from the edge end."""

    intervals: tuple[tuple[float, float], ...] = (
        (1000.0, 1300.0),
        (700.0, 1000.0),
        (400.0, 700.0),
        (100.0, 400.0),
    )

    def __post_init__(self):
        spans = sorted(self.intervals)
        for lo, hi in spans:
            if hi <= lo:
                raise ValueError(f"empty section [{lo}, {hi}]")
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if not np.isclose(hi, lo):
                raise ValueError("sections must be contiguous and non-overlapping")

    @property
    def span(self) -> tuple[float, float]:
        lows, highs = zip(*self.intervals)
        return min(lows), max(highs)


DEFAULT_LAYOUT = SectionLayout()


@dataclass(frozen=True)
class EdgeWearMeasurement:
    edge_index: int
    section_avg: tuple[float, float, float, float]
    section_max: tuple[float, float, float, float]
    edge_avg: float
    edge_max: float

    def check(self, atol: float = 1e-9) -> None:
        """Raise InvalidMeasurement if the measurement is inconsistent."""
        avg = np.asarray(self.section_avg, dtype=float)
        mx = np.asarray(self.section_max, dtype=float)
        if avg.shape != (4,) or mx.shape != (4,):
            raise InvalidMeasurement("expected 4 section values")
        if np.any(mx < avg - atol):
            raise InvalidMeasurement(f"edge {self.edge_index}: section_max < section_avg")
        if not (self.edge_max >= self.edge_avg - atol and self.edge_avg >= 0):
            raise InvalidMeasurement(f"edge {self.edge_index}: need edge_max >= edge_avg >= 0")
        if self.edge_max < mx.max() - atol:
            raise InvalidMeasurement(f"edge {self.edge_index}: edge_max below a section maximum")

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.section_avg, self.section_max, [self.edge_avg, self.edge_max]]
        ).astype(np.float64)

    @classmethod
    def from_vector(cls, values: Sequence[float], edge_index: int = 1) -> "EdgeWearMeasurement":
        v = [float(x) for x in values]
        if len(v) != LABEL_SIZE:
            raise InvalidMeasurement(f"expected {LABEL_SIZE} values, got {len(v)}")
        return cls(edge_index, tuple(v[0:4]), tuple(v[4:8]), v[8], v[9])


@dataclass(frozen=True)
class WearLabel:
    """Tool-level label ordered [VB_1..VB_4, VB_max_1..VB_max_4, VB_E, VB_max_E]."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != LABEL_SIZE:
            raise InvalidMeasurement(f"label needs {LABEL_SIZE} values")

    @classmethod
    def from_array(cls, values) -> "WearLabel":
        return cls(tuple(float(x) for x in values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @property
    def vb_e(self) -> float:
        return self.values[VB_E_INDEX]

    @property
    def vb_max_e(self) -> float:
        return self.values[VB_MAX_E_INDEX]

    def violations(self) -> list[str]:
        out = []
        if any(v < 0 for v in self.values):
            out.append("negative wear value")
        if self.vb_e > self.vb_max_e:
            out.append(f"VB_E ({self.vb_e:g}) exceeds VB_max_E ({self.vb_max_e:g})")
        return out


def aggregate_edges(measurements: Sequence[EdgeWearMeasurement]) -> WearLabel:
    """Average the 10 per-edge values position-wise over however many edges are given."""
    if len(measurements) == 0:
        raise EmptyMeasurementList("no edge measurements")
    for m in measurements:
        m.check()
    stacked = np.stack([m.as_vector() for m in measurements])
    return WearLabel.from_array(stacked.mean(axis=0))


def measure_profile(
    profile: Sequence[float] | np.ndarray,
    positions: Sequence[float] | np.ndarray | None = None,
    layout: SectionLayout = DEFAULT_LAYOUT,
    edge_index: int = 1,
) -> EdgeWearMeasurement:
    """Section averages/maxima of a wear-width profile sampled along the edge.

    ``positions`` default to 0, 1, 2, ... µm (1 µm sampling). Samples on a
    shared section boundary are counted in both neighbouring sections.
    """
    w = np.asarray(profile, dtype=np.float64)
    x = np.arange(w.size, dtype=np.float64) if positions is None else np.asarray(positions, float)
    if x.shape != w.shape:
        raise ProfileCoverageError("profile and positions differ in length")
    lo, hi = layout.span
    if w.size == 0 or x.min() > lo or x.max() < hi:
        raise ProfileCoverageError(f"profile must cover [{lo:g}, {hi:g}] µm")
    if np.any(w < 0):
        raise ProfileCoverageError("profile has negative widths")

    avgs, maxes = [], []
    for a, b in layout.intervals:
        sel = (x >= a) & (x <= b)
        if not sel.any():
            raise ProfileCoverageError(f"no samples in section [{a:g}, {b:g}]")
        avgs.append(float(w[sel].mean()))
        maxes.append(float(w[sel].max()))
    whole = (x >= lo) & (x <= hi)
    return EdgeWearMeasurement(
        edge_index=edge_index,
        section_avg=tuple(avgs),
        section_max=tuple(maxes),
        edge_avg=float(w[whole].mean()),
        edge_max=float(w[whole].max()),
    )


def is_worn(measurements: Sequence[EdgeWearMeasurement], limit: float = WORN_LIMIT_UM) -> bool:
    """True once any edge's maximum flank wear reaches ``limit``."""
    return any(m.edge_max >= limit for m in measurements)
