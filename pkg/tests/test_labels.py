import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wearcast.errors import EmptyMeasurementList, InvalidMeasurement, ProfileCoverageError
from wearcast.labels import (
    DEFAULT_LAYOUT,
    EdgeWearMeasurement,
    SectionLayout,
    WearLabel,
    aggregate_edges,
    is_worn,
    measure_profile,
)

POS = np.arange(0.0, 1401.0)


def edge(vb_e, scale=1.0, idx=1):
    avg = tuple(scale * v for v in (40.0, 50.0, 60.0, 70.0))
    mx = tuple(scale * v for v in (55.0, 65.0, 80.0, 90.0))
    return EdgeWearMeasurement(idx, avg, mx, vb_e, max(scale * 95.0, vb_e))


def test_layout_matches_edge_sections():
    assert DEFAULT_LAYOUT.intervals[0] == (1000.0, 1300.0)
    assert DEFAULT_LAYOUT.intervals[-1] == (100.0, 400.0)
    assert all(hi - lo == 300.0 for lo, hi in DEFAULT_LAYOUT.intervals)
    assert DEFAULT_LAYOUT.span == (100.0, 1300.0)


def test_layout_rejects_gaps():
    with pytest.raises(ValueError):
        SectionLayout(((0.0, 100.0), (150.0, 300.0)))


def test_identical_edges_aggregate_to_themselves():
    m = edge(60.0)
    label = aggregate_edges([m, m, m, m])
    np.testing.assert_allclose(label.as_array(), m.as_vector())


def test_two_edges_mean_vb_e():
    label = aggregate_edges([edge(50.0), edge(100.0)])
    assert label.vb_e == pytest.approx(75.0)


def test_empty_measurements_rejected():
    with pytest.raises(EmptyMeasurementList):
        aggregate_edges([])


def test_invalid_measurement_rejected():
    bad = EdgeWearMeasurement(1, (10, 10, 10, 10), (5, 5, 5, 5), 10, 12)
    with pytest.raises(InvalidMeasurement):
        aggregate_edges([bad])


def test_constant_profile():
    m = measure_profile(np.full(POS.size, 80.0), POS)
    assert m.section_avg == (80.0,) * 4
    assert m.section_max == (80.0,) * 4
    assert m.edge_avg == 80.0 and m.edge_max == 80.0


def test_linear_ramp_section_means_at_midpoints():
    x = np.arange(100.0, 1301.0)
    w = 120.0 * (x - 100.0) / 1200.0
    m = measure_profile(w, x)
    for (lo, hi), avg in zip(DEFAULT_LAYOUT.intervals, m.section_avg):
        mid = 120.0 * ((lo + hi) / 2 - 100.0) / 1200.0
        assert abs(avg - mid) <= 0.5
    assert m.edge_max == pytest.approx(max(m.section_max))


def test_default_positions_are_micrometres():
    m = measure_profile(np.full(1301, 5.0))
    assert m.edge_avg == 5.0


def test_profile_must_cover_span():
    x = np.arange(200.0, 1301.0)
    with pytest.raises(ProfileCoverageError):
        measure_profile(np.ones_like(x), x)
    with pytest.raises(ProfileCoverageError):
        measure_profile(-np.ones_like(POS), POS)


def test_worn_flag():
    assert not is_worn([edge(50.0)])
    assert is_worn([edge(50.0), EdgeWearMeasurement(2, (1,) * 4, (1,) * 4, 100.0, 200.0)])


def test_label_violations():
    assert WearLabel.from_array([1] * 8 + [5, 4]).violations()
    assert not WearLabel.from_array([1] * 8 + [4, 5]).violations()


profiles = st.lists(
    st.lists(st.floats(0, 300, allow_nan=False), min_size=5, max_size=5), min_size=1, max_size=6
)


def _measure(seed_rows):
    # piecewise profile over the edge from 5 knot values
    knots = np.linspace(100.0, 1300.0, 5)
    return [measure_profile(np.interp(POS, knots, row), POS, edge_index=i + 1) for i, row in enumerate(seed_rows)]


@settings(max_examples=60, deadline=None)
@given(profiles, st.randoms(use_true_random=False))
def test_aggregate_permutation_invariant(rows, rnd):
    ms = _measure(rows)
    shuffled = list(ms)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(aggregate_edges(ms).as_array(), aggregate_edges(shuffled).as_array(), rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(profiles, st.floats(0, 10, allow_nan=False))
def test_aggregate_scales_linearly(rows, c):
    ms = _measure(rows)
    scaled = _measure([[c * v for v in r] for r in rows])
    np.testing.assert_allclose(aggregate_edges(scaled).as_array(), c * aggregate_edges(ms).as_array(), rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(profiles)
def test_aggregate_output_invariants(rows):
    label = aggregate_edges(_measure(rows))
    v = label.as_array()
    assert np.all(v >= 0)
    assert label.vb_e <= label.vb_max_e + 1e-12
    assert np.all(v[4:8] >= v[0:4] - 1e-12)
