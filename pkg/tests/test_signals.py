import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wearcast.errors import CutoffAboveNyquist, DegenerateChannel, SegmentTooShort, WindowLongerThanRecord
from wearcast.signals import (
    RAW_CHANNELS,
    DERIVED_CHANNELS,
    SAMPLE_CHANNELS,
    ChannelId,
    CuttingConditions,
    ProcessedSample,
    assemble_sample,
    extract_window,
    fit_normalizer,
    isolate_milling_segment,
    low_pass,
    resultant,
    rotate_to_feed_frame,
)

from conftest import make_record

finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
angles = st.floats(-20, 20, allow_nan=False)


def tone_amplitude(x, freq, period):
    # single-sided FFT amplitude at an exact bin
    spec = np.fft.rfft(x)
    k = int(round(freq * len(x) * period))
    return 2 * abs(spec[k]) / len(x)


# ---- channel ids / conditions


def test_raw_and_derived_disjoint():
    assert not set(RAW_CHANNELS) & set(DERIVED_CHANNELS)
    assert set(RAW_CHANNELS) | set(DERIVED_CHANNELS) == set(ChannelId)
    assert len(SAMPLE_CHANNELS) == 7


def test_conditions_positive():
    with pytest.raises(ValueError):
        CuttingConditions(25, 2.5, 0.0, 0.03)


# ---- segmentation


def test_isolate_ten_second_record(record_factory):
    rec = record_factory(200_000)
    out = isolate_milling_segment(rec, 1.0, 1.0)
    assert len(out) == 160_000
    np.testing.assert_array_equal(out.channels[ChannelId.RCD_X], rec.channels[ChannelId.RCD_X][20_000:180_000])
    np.testing.assert_array_equal(out.drive_position, rec.drive_position[20_000:180_000])


def test_isolate_zero_margins_identity(record_factory):
    rec = record_factory(1000)
    out = isolate_milling_segment(rec, 0.0, 0.0)
    assert len(out) == len(rec)
    for cid in RAW_CHANNELS:
        np.testing.assert_array_equal(out.channels[cid], rec.channels[cid])


def test_isolate_too_short(record_factory):
    with pytest.raises(SegmentTooShort):
        isolate_milling_segment(record_factory(20_000), 1.0, 1.0)


def test_record_lengths_must_agree(conditions):
    from wearcast.signals import CutRecord

    with pytest.raises(ValueError):
        CutRecord(1, 1, conditions, 50e-6, {ChannelId.RCD_X: np.zeros(3)}, np.zeros(4))


# ---- rotation / resultant


def test_rotation_examples():
    assert rotate_to_feed_frame(1.0, 0.0, 0.0) == (1.0, 0.0)
    feed, normal = rotate_to_feed_frame(0.0, 1.0, math.pi / 2)
    assert feed == pytest.approx(1.0) and normal == pytest.approx(0.0, abs=1e-15)
    feed, normal = rotate_to_feed_frame(3.0, 4.0, 0.5)
    assert feed == pytest.approx(4.55044984008793, rel=1e-12)
    assert normal == pytest.approx(2.072053631748882, rel=1e-12)
    assert feed**2 + normal**2 == pytest.approx(25.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, finite, angles)
def test_rotation_isometry_and_inverse(fx, fy, th):
    feed, normal = rotate_to_feed_frame(fx, fy, th)
    assert feed**2 + normal**2 == pytest.approx(fx**2 + fy**2, rel=1e-9, abs=1e-9)
    bx, by = rotate_to_feed_frame(feed, normal, -th)
    assert bx == pytest.approx(fx, abs=1e-9 * max(1.0, abs(fx), abs(fy)))
    assert by == pytest.approx(fy, abs=1e-9 * max(1.0, abs(fx), abs(fy)))


def test_resultant_examples():
    assert resultant(3.0, 4.0) == 5.0
    assert resultant(0.0, 0.0) == 0.0
    assert resultant(1.5, -2.5) == pytest.approx(2.9154759474226504, rel=1e-14)


# ---- low-pass


def test_low_pass_preserves_constant():
    out = low_pass(np.full(5000, 7.0))
    assert out.shape == (5000,)
    np.testing.assert_allclose(out, 7.0, atol=1e-6)


def test_low_pass_passband_and_stopband():
    period = 50e-6
    t = np.arange(20_000) * period
    lo = low_pass(np.sin(2 * np.pi * 1000 * t), period, 8000)
    assert tone_amplitude(lo, 1000, period) == pytest.approx(1.0, rel=0.01)
    hi = low_pass(np.sin(2 * np.pi * 9500 * t), period, 8000)
    assert 20 * np.log10(tone_amplitude(hi, 9500, period)) <= -40


def test_low_pass_rejects_cutoff_at_nyquist():
    with pytest.raises(CutoffAboveNyquist):
        low_pass(np.zeros(100), 50e-6, 10_000)
    with pytest.raises(CutoffAboveNyquist):
        low_pass(np.zeros(100), 50e-6, 0.0)


def test_low_pass_short_inputs():
    assert low_pass(np.array([3.0])).tolist() == pytest.approx([3.0])
    assert low_pass(np.ones(10)).shape == (10,)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_low_pass_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    s1, s2 = rng.normal(size=(2, 600))
    lhs = low_pass(a * s1 + b * s2)
    rhs = a * low_pass(s1) + b * low_pass(s2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (abs(a) + abs(b) + 1))


# ---- window extraction


def test_window_one_second(record_factory):
    rec = record_factory(30_000)
    assert len(extract_window(rec, 1.0)) == 20_000
    assert len(extract_window(rec, 0.1)) == 2_000
    np.testing.assert_array_equal(
        extract_window(rec, 0.1).channels[ChannelId.SD_X], rec.channels[ChannelId.SD_X][-2000:]
    )


def test_window_full_length_identity(record_factory):
    rec = record_factory(400)
    out = extract_window(rec, 400 * 50e-6)
    np.testing.assert_array_equal(out.drive_position, rec.drive_position)


def test_window_idempotent(record_factory):
    rec = record_factory(5000)
    once = extract_window(rec, 0.05)
    twice = extract_window(once, 0.05)
    np.testing.assert_array_equal(once.channels[ChannelId.RCD_Y], twice.channels[ChannelId.RCD_Y])


def test_window_too_long(record_factory):
    with pytest.raises(WindowLongerThanRecord):
        extract_window(record_factory(100), 1.0)


# ---- sample assembly


def test_assemble_constant_sd_forces(conditions, label):
    rec = make_record(3000, conditions, sd=(3.0, 4.0), theta=0.0)
    s = assemble_sample(rec, label, window_duration=0.1)
    assert s.signals.shape == (7, 2000)
    np.testing.assert_allclose(s.signals[3], 3.0, atol=1e-6)
    np.testing.assert_allclose(s.signals[4], 4.0, atol=1e-6)
    np.testing.assert_allclose(s.signals[6], 5.0, atol=1e-6)


def test_assemble_canonical_shape(conditions, label):
    s = assemble_sample(make_record(21_000, conditions), label, window_duration=1.0)
    assert s.T == 20_000
    assert s.signals.size == 140_000


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_assemble_resultant_rows(seed):
    from wearcast.labels import WearLabel

    cond = CuttingConditions(25, 2.5, 1.5, 0.045)
    s = assemble_sample(make_record(800, cond, seed=seed), WearLabel.from_array([1] * 10), window_duration=0.025)
    rows = s.signals
    np.testing.assert_allclose(rows[5], np.hypot(rows[1], rows[2]), rtol=1e-6)
    np.testing.assert_allclose(rows[6], np.hypot(rows[3], rows[4]), rtol=1e-6)
    assert rows.shape == (7, 500)


# ---- normalizer


def _sample(signals, f_z, label):
    return ProcessedSample(np.asarray(signals, float), CuttingConditions(25, 2.5, 1.5, f_z), label)


def test_single_sample_normalizes_to_zero(label):
    s = _sample(np.arange(7 * 5).reshape(7, 5) % 3, 0.03, label)
    norm = fit_normalizer([s])
    out = norm.apply(s)
    assert np.all(np.abs(out.signals.mean(axis=1)) < 1e-12)


def test_condition_minmax(label):
    rng = np.random.default_rng(0)
    fit = [_sample(rng.normal(size=(7, 4)), fz, label) for fz in (0.015, 0.060)]
    norm = fit_normalizer(fit)
    assert norm.apply(fit[0]).scaled_conditions["f_z"] == pytest.approx(0.0)
    assert norm.apply(fit[1]).scaled_conditions["f_z"] == pytest.approx(1.0)
    other = _sample(rng.normal(size=(7, 4)), 0.030, label)
    assert norm.apply(other).scaled_conditions["f_z"] == pytest.approx(1 / 3)
    # constant conditions over the fit set map to 0
    assert norm.apply(other).scaled_conditions["v_c"] == 0.0


def test_statistics_frozen_at_fit(label):
    rng = np.random.default_rng(1)
    a = [_sample(rng.normal(size=(7, 50)), 0.03, label) for _ in range(3)]
    b = _sample(100 + 5 * rng.normal(size=(7, 50)), 0.045, label)
    norm = fit_normalizer(a)
    before = norm.apply(b).signals.copy()
    fit_normalizer(a + [b])
    np.testing.assert_array_equal(norm.apply(b).signals, before)


def test_degenerate_channel_passes_centered(label):
    sig = np.random.default_rng(2).normal(size=(7, 30))
    sig[2] = 4.0
    with pytest.warns(DegenerateChannel):
        norm = fit_normalizer([_sample(sig, 0.03, label)])
    assert norm.scale[2] == 1.0
    np.testing.assert_allclose(norm.apply(_sample(sig, 0.03, label)).signals[2], 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_normalizer_on_fit_set(seed, n):
    from wearcast.labels import WearLabel

    rng = np.random.default_rng(seed)
    lab = WearLabel.from_array([1] * 10)
    samples = [_sample(rng.normal(3, 7, size=(7, 40)) * rng.uniform(0.5, 2), 0.03, lab) for _ in range(n)]
    norm = fit_normalizer(samples)
    stacked = np.concatenate([norm.apply(s).signals for s in samples], axis=1)
    assert np.all(np.abs(stacked.mean(axis=1)) < 1e-6)
    np.testing.assert_allclose(stacked.std(axis=1), 1.0, atol=1e-6)
