"""Seeded synthetic milling data standing in for the Inconel 718 test series.

Nothing here is a physical cutting model. Wear follows a three-term law
(run-in, steady, accelerated) whose time scale shrinks with feed per tooth;
force amplitude grows with both feed and wear so the two are confounded in
the raw signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .labels import DEFAULT_LAYOUT, EdgeWearMeasurement, aggregate_edges, is_worn, measure_profile
from .signals import CANONICAL_PERIOD, DESK_WINDOW, ChannelId, CutRecord, CuttingConditions

DEFAULTS_VERSION = 1

FPT_GRID = (0.015, 0.030, 0.045, 0.0525, 0.060)
TOOLS_PER_FPT = (3, 3, 3, 2, 2)
# Cutting time per cut in seconds for each feed, as listed in the test plan.
CUT_DURATIONS = ((15.0, 25.0), (12.0, 22.0), (14.0, 17.0), (13.0, 13.0), (12.0, 12.0))

V_C = 25.0
A_P = 2.5
A_E = 1.5
TOOL_DIAMETER = 6.0
EDGE_COUNT = 4
WORKPIECE_RADIUS_MM = 150.0


@dataclass(frozen=True)
class WearCoefficients:
    """VB(t) = a*sqrt(t) + b*t + c*(exp(d*t) - 1), each term scaled by (f_z/f_ref)**exponent."""

    a: float = 3.3
    b: float = 0.385
    c: float = 9.46
    d: float = 0.012
    f_ref: float = 0.030
    exponents: tuple[float, float, float, float] = (0.35, 0.7, 0.0, 0.7)


@dataclass(frozen=True)
class ForceModel:
    base_force: float = 100.0  # N at f_ref and zero wear
    feed_exponent: float = 0.75
    wear_gain: float = 0.6  # relative force increase per 100 µm, before saturation
    wear_saturation: float = 250.0  # µm
    radial_ratio: float = 0.5
    tool_spread: float = 0.03  # per-tool multiplicative scatter


@dataclass(frozen=True)
class SynthConfig:
    fpt_grid: tuple[float, ...] = FPT_GRID
    tools_per_fpt: tuple[int, ...] = TOOLS_PER_FPT
    cut_durations: tuple[tuple[float, float], ...] = CUT_DURATIONS
    sampling_period: float = CANONICAL_PERIOD
    window_length: int = DESK_WINDOW
    wear_limit: float = 200.0
    noise_level: float = 0.05
    seed: int = 0
    # per-feed deviation of the force level from the power law, aligned with fpt_grid
    regime_factors: tuple[float, ...] = (1.0, 0.98, 1.06, 1.01, 1.0)
    coefficients: WearCoefficients = field(default_factory=WearCoefficients)
    forces: ForceModel = field(default_factory=ForceModel)
    edge_spread: float = 0.10
    tool_rate_spread: float = 0.08
    # entry/exit phases kept in every record, seconds
    phase_seconds: float = 0.5
    # milling time stored per record; None keeps 1.25 windows
    milling_seconds: float | None = None
    max_cuts_per_tool: int = 200
    v_c: float = V_C
    a_p: float = A_P
    a_e: float = A_E

    def __post_init__(self):
        grid = tuple(float(f) for f in self.fpt_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("fpt_grid must be strictly increasing")
        if not (len(grid) == len(self.tools_per_fpt) == len(self.cut_durations) == len(self.regime_factors)):
            raise ValueError("fpt_grid, tools_per_fpt, cut_durations and regime_factors must align")
        if self.wear_limit <= 0:
            raise ValueError("wear_limit must be positive")
        if self.noise_level < 0:
            raise ValueError("noise_level must be non-negative")

    @property
    def recorded_milling_seconds(self) -> float:
        if self.milling_seconds is not None:
            return self.milling_seconds
        return 1.25 * self.window_length * self.sampling_period

    def tool_layout(self) -> list[tuple[int, float]]:
        """(tool_id, f_z) pairs, tools numbered from 1 in grid order."""
        out, tool = [], 1
        for fz, count in zip(self.fpt_grid, self.tools_per_fpt):
            for _ in range(count):
                out.append((tool, float(fz)))
                tool += 1
        return out


def wear_curve(t, f_z: float, coeffs: WearCoefficients = WearCoefficients()):
    """Flank wear in µm after t seconds of cutting at feed f_z."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("cutting time must be non-negative")
    s = f_z / coeffs.f_ref
    ea, eb, ec, ed = coeffs.exponents
    a, b, c, d = coeffs.a * s**ea, coeffs.b * s**eb, coeffs.c * s**ec, coeffs.d * s**ed
    vb = a * np.sqrt(t) + b * t + c * np.expm1(d * t)
    return float(vb) if vb.ndim == 0 else vb


def time_to_wear(target: float, f_z: float, coeffs: WearCoefficients = WearCoefficients()) -> float:
    """Cutting time at which wear_curve reaches ``target`` (bisection)."""
    lo, hi = 0.0, 1.0
    while wear_curve(hi, f_z, coeffs) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if wear_curve(mid, f_z, coeffs) < target:
            lo = mid
        else:
            hi = mid
    return hi


def tooth_passing_frequency(v_c: float = V_C, diameter: float = TOOL_DIAMETER, edges: int = EDGE_COUNT) -> float:
    """Spindle speed times edge count, in Hz (v_c in m/min, diameter in mm)."""
    return edges * v_c * 1000.0 / (math.pi * diameter * 60.0)


def feed_angular_velocity(f_z: float, v_c: float = V_C, diameter: float = TOOL_DIAMETER, edges: int = EDGE_COUNT) -> float:
    """Rotary-table speed in rad/s for circumferential milling of the ring."""
    rpm = v_c * 1000.0 / (math.pi * diameter)
    feed_mm_s = f_z * edges * rpm / 60.0
    return feed_mm_s / WORKPIECE_RADIUS_MM


POSITIONS_UM = np.arange(100.0, 1301.0)


def edge_shape(phase: float) -> np.ndarray:
    """Relative wear width along the edge (mean 1 over the measured span)."""
    x = POSITIONS_UM
    shape = 0.85 + 0.3 * np.exp(-(x - 100.0) / 250.0) + 0.05 * np.sin(2 * np.pi * x / 170.0 + phase)
    return shape / shape.mean()


@dataclass
class WearState:
    cumulative_time: float
    edge_profiles: np.ndarray  # (edges, positions), µm

    def measurements(self) -> list[EdgeWearMeasurement]:
        return [
            measure_profile(p, POSITIONS_UM, DEFAULT_LAYOUT, edge_index=i + 1)
            for i, p in enumerate(self.edge_profiles)
        ]

    @property
    def mean_wear(self) -> float:
        return float(self.edge_profiles.mean())


def wear_state(t: float, f_z: float, edge_factors, edge_phases, coeffs: WearCoefficients, rate: float = 1.0) -> WearState:
    vb = wear_curve(t * rate, f_z, coeffs)
    profiles = np.stack([vb * k * edge_shape(ph) for k, ph in zip(edge_factors, edge_phases)])
    return WearState(t, profiles)


def force_amplitude(vb: float, f_z: float, model: ForceModel = ForceModel(), f_ref: float = 0.030) -> float:
    """Peak cutting force: power law in feed, saturating linear growth in wear."""
    sat = model.wear_saturation
    wear_factor = 1.0 + model.wear_gain * sat * math.tanh(vb / sat) / 100.0
    return model.base_force * (f_z / f_ref) ** model.feed_exponent * wear_factor


def synth_signals(
    state: WearState,
    conditions: CuttingConditions,
    duration: float,
    sampling_period: float = CANONICAL_PERIOD,
    noise_level: float = 0.0,
    seed: int = 0,
    *,
    tool_id: int = 0,
    cut_index: int = 0,
    start_angle: float = 0.0,
    phase_seconds: float = 0.0,
    force_scale: float = 1.0,
    model: ForceModel = ForceModel(),
    tool_diameter: float = TOOL_DIAMETER,
    edge_count: int = EDGE_COUNT,
) -> CutRecord:
    """Five raw channels plus drive position for one cut.

    The record is ``phase_seconds`` of entry, ``duration`` of steady milling
    and ``phase_seconds`` of exit, with the force envelope ramping in and out.
    """
    rng = np.random.default_rng(seed)
    n = int(round((duration + 2 * phase_seconds) / sampling_period))
    t = np.arange(n) * sampling_period

    f_tp = tooth_passing_frequency(conditions.v_c, tool_diameter, edge_count)
    spindle_phase0 = rng.uniform(0, 2 * np.pi)
    psi = 2 * np.pi * (f_tp / edge_count) * t + spindle_phase0

    # One tooth engaged at a time: engagement arc over tooth pitch.
    engage = math.acos(1.0 - 2.0 * conditions.a_e / tool_diameter)
    duty = min(engage / (2 * math.pi / edge_count), 1.0)
    tooth_phase = np.mod(psi * edge_count / (2 * np.pi), 1.0)
    frac = tooth_phase / duty
    pulse = np.where(frac < 1.0, np.sin(np.pi * np.minimum(frac, 1.0)), 0.0)
    immersion = np.pi - engage + engage * np.minimum(frac, 1.0)

    amp = force_scale * force_amplitude(state.mean_wear, conditions.f_z, model)
    if phase_seconds > 0:
        ramp = 0.6 * phase_seconds
        env = np.clip((t - 0.2 * phase_seconds) / ramp, 0, 1) * np.clip((t[-1] - t - 0.2 * phase_seconds) / ramp, 0, 1)
    else:
        env = np.ones(n)
    f_t = amp * env * pulse
    f_r = model.radial_ratio * f_t
    feed = f_t * np.cos(immersion) + f_r * np.sin(immersion)
    normal = f_t * np.sin(immersion) - f_r * np.cos(immersion)

    omega = feed_angular_velocity(conditions.f_z, conditions.v_c, tool_diameter, edge_count)
    theta = start_angle + omega * t
    sd_x = feed * np.cos(theta) - normal * np.sin(theta)
    sd_y = feed * np.sin(theta) + normal * np.cos(theta)
    rcd_x = feed * np.cos(psi) + normal * np.sin(psi)
    rcd_y = -feed * np.sin(psi) + normal * np.cos(psi)
    torque = f_t * tool_diameter / 2000.0  # N*m

    channels = {
        ChannelId.SPINDLE_TORQUE: torque,
        ChannelId.RCD_X: rcd_x,
        ChannelId.RCD_Y: rcd_y,
        ChannelId.SD_X: sd_x,
        ChannelId.SD_Y: sd_y,
    }
    if noise_level > 0:
        for cid in channels:
            clean = channels[cid]
            rms = float(np.sqrt(np.mean(clean**2)))
            channels[cid] = clean + rng.normal(0.0, noise_level * rms, n)
    return CutRecord(
        tool_id=tool_id,
        cut_index=cut_index,
        conditions=conditions,
        sampling_period=sampling_period,
        channels=channels,
        drive_position=theta,
        tool_diameter=tool_diameter,
        edge_count=edge_count,
    )


def _tool_rng(seed: int, tool_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tool_id]))


def tool_life_plan(cfg: SynthConfig, tool_id: int, f_z: float, durations: tuple[float, float]):
    """Per-cut (cumulative time, WearState) for one tool until the wear limit, plus tool factors."""
    rng = _tool_rng(cfg.seed, tool_id)
    edge_factors = 1.0 + rng.uniform(-cfg.edge_spread, cfg.edge_spread, EDGE_COUNT)
    edge_phases = rng.uniform(0, 2 * np.pi, EDGE_COUNT)
    rate = 1.0 + rng.uniform(-cfg.tool_rate_spread, cfg.tool_rate_spread)
    force_scale = 1.0 + rng.uniform(-cfg.forces.tool_spread, cfg.forces.tool_spread)
    start_angle = rng.uniform(0, 2 * np.pi)
    cuts = []
    elapsed = 0.0
    for cut in range(1, cfg.max_cuts_per_tool + 1):
        elapsed += rng.uniform(*durations) if durations[1] > durations[0] else durations[0]
        state = wear_state(elapsed, f_z, edge_factors, edge_phases, cfg.coefficients, rate)
        meas = state.measurements()
        cuts.append((cut, state, meas, int(rng.integers(0, 2**63 - 1))))
        if is_worn(meas, cfg.wear_limit):
            break
    return cuts, force_scale, start_angle


def generate_dataset(cfg: SynthConfig = SynthConfig(), with_signals: bool = True):
    """List of (CutRecord, edge measurements) over all tools in tool order.

    With ``with_signals=False`` the records are None; useful to inspect
    the wear plan cheaply.
    """
    out = []
    plan = zip(cfg.tool_layout(), _per_tool(cfg.cut_durations, cfg), _per_tool(cfg.regime_factors, cfg))
    for (tool_id, f_z), durations, regime in plan:
        cond = CuttingConditions(cfg.v_c, cfg.a_p, cfg.a_e, f_z)
        cuts, force_scale, start_angle = tool_life_plan(cfg, tool_id, f_z, tuple(durations))
        omega = feed_angular_velocity(f_z, cfg.v_c)
        for cut, state, meas, cut_seed in cuts:
            record = None
            if with_signals:
                record = synth_signals(
                    state,
                    cond,
                    cfg.recorded_milling_seconds,
                    cfg.sampling_period,
                    cfg.noise_level,
                    cut_seed,
                    tool_id=tool_id,
                    cut_index=cut,
                    start_angle=float(np.mod(start_angle + omega * state.cumulative_time, 2 * np.pi)),
                    phase_seconds=cfg.phase_seconds,
                    force_scale=force_scale * regime,
                    model=cfg.forces,
                )
            out.append((record, meas))
    return out


def _per_tool(values, cfg: SynthConfig):
    for value, count in zip(values, cfg.tools_per_fpt):
        for _ in range(count):
            yield value


def cut_label(measurements):
    return aggregate_edges(measurements)
