import json
import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wearcast.errors import (
    DegenerateActuals,
    DivisionByZeroReference,
    EmptyInput,
    LengthMismatch,
    SingleFptDataset,
    UnknownFpt,
)
from wearcast.nn import default_reference_config, default_test_config
from wearcast.signals import CuttingConditions, PreprocessOptions, preprocess
from wearcast.synth import SynthConfig, cut_label, generate_dataset
from wearcast.train import TrainConfig
from wearcast.transfer import (
    ScenarioSpec,
    advantage_pct,
    normalize_fpt,
    r_squared,
    rmse,
    run_scenario,
    same_fpt,
    split,
)

# tool layout of the test plan: 3 + 3 + 3 + 2 + 2 tools, feed 0.0525 listed as 0.525
TABLE_LAYOUT = [(1, 0.015), (2, 0.015), (3, 0.015), (4, 0.030), (5, 0.030), (6, 0.030),
                (7, 0.045), (8, 0.045), (9, 0.045), (10, 0.525), (11, 0.525), (12, 0.060), (13, 0.060)]


@dataclass(frozen=True)
class Cut:
    tool_id: int
    cut_index: int
    conditions: CuttingConditions


def layout_cuts(layout=TABLE_LAYOUT, cuts_per_tool=4):
    return [Cut(t, c, CuttingConditions(25, 2.5, 1.5, f)) for t, f in layout for c in range(1, cuts_per_tool + 1)]


def tools(items):
    return sorted({i.tool_id for i in items})


# ---- feed normalization


def test_fpt_normalization():
    assert normalize_fpt(0.525) == 0.0525
    assert normalize_fpt(0.045) == 0.045
    assert same_fpt(0.525, 0.0525)
    assert not same_fpt(0.045, 0.0525)


# ---- split


def test_split_a_single_feed():
    train, test = split(layout_cuts(), ScenarioSpec("A", (0.015,)))
    assert tools(test) == [1, 2, 3]
    assert tools(train) == list(range(4, 14))


def test_split_b_moves_lowest_tool():
    train, test = split(layout_cuts(), ScenarioSpec("B", (0.015,)))
    assert tools(test) == [2, 3]
    assert 1 in tools(train)
    train, test = split(layout_cuts(), ScenarioSpec("B", (0.015,), partial_tool_rule="highest"))
    assert tools(test) == [1, 2]


def test_split_c_two_feeds():
    train, test = split(layout_cuts(), ScenarioSpec("C", (0.015, 0.060)))
    assert tools(test) == [1, 2, 3, 12, 13]
    assert tools(train) == list(range(4, 12))


def test_split_d_moves_one_tool_per_feed():
    train, test = split(layout_cuts(), ScenarioSpec("D", (0.015, 0.060)))
    assert tools(test) == [2, 3, 13]
    assert {1, 12} <= set(tools(train))


def test_split_mistyped_feed_in_spec_and_data():
    train, test = split(layout_cuts(), ScenarioSpec("A", (0.0525,)))
    assert tools(test) == [10, 11]
    train, test = split(layout_cuts(), ScenarioSpec("A", (0.525,)))
    assert tools(test) == [10, 11]


def test_split_errors():
    with pytest.raises(UnknownFpt):
        split(layout_cuts(), ScenarioSpec("A", (0.1,)))
    with pytest.raises(SingleFptDataset):
        split(layout_cuts([(1, 0.03), (2, 0.03)]), ScenarioSpec("A", (0.03,)))
    with pytest.raises(ValueError):
        ScenarioSpec("A", (0.015, 0.03))
    with pytest.raises(ValueError):
        ScenarioSpec("C", (0.015, 0.015))
    with pytest.raises(ValueError):
        ScenarioSpec("E", (0.015,))


@st.composite
def layouts(draw):
    grid = draw(st.lists(st.sampled_from([0.015, 0.03, 0.045, 0.0525, 0.06, 0.075]), min_size=2, max_size=6, unique=True))
    layout, tool = [], 1
    for f in sorted(grid):
        for _ in range(draw(st.integers(2, 4))):
            layout.append((tool, f))
            tool += 1
    kind = draw(st.sampled_from("ABCD"))
    n = 1 if kind in "AB" else 2
    if len(grid) < n + 1:
        n = 1
        kind = "A" if kind == "C" else "B" if kind == "D" else kind
    fpts = tuple(draw(st.permutations(grid))[:n])
    return layout, ScenarioSpec(kind, fpts), draw(st.integers(1, 3))


@settings(max_examples=1000, deadline=None)
@given(layouts())
def test_split_never_leaks(case):
    layout, spec, per_tool = case
    data = layout_cuts(layout, per_tool)
    train, test = split(data, spec)
    keys_train = {(c.tool_id, c.cut_index) for c in train}
    keys_test = {(c.tool_id, c.cut_index) for c in test}
    assert not keys_train & keys_test
    assert len(train) + len(test) == len(data)
    assert not set(tools(train)) & set(tools(test))
    in_test = lambda c: any(same_fpt(c.conditions.f_z, f) for f in spec.test_fpts)
    assert all(in_test(c) for c in test)
    moved = [c for c in train if in_test(c)]
    if spec.partial_learning:
        assert len(tools(moved)) == len(spec.test_fpts)
    else:
        assert not moved


# ---- metrics


def naive_rmse(p, a):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(p, a)) / len(a))


def naive_r2(p, a):
    mean = sum(a) / len(a)
    return 1 - sum((y - x) ** 2 for x, y in zip(p, a)) / sum((y - mean) ** 2 for y in a)


def test_metric_hand_cases():
    assert rmse([0, 0], [3, 4]) == math.sqrt(12.5)
    assert r_squared([1, 2, 4], [1, 2, 3]) == 0.5
    assert rmse([5.0], [5.0]) == 0.0
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0


@pytest.mark.parametrize("seed", range(100))
def test_metrics_match_naive(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    a = rng.normal(100, 40, n)
    p = a + rng.normal(0, 20, n)
    assert rmse(p, a) == pytest.approx(naive_rmse(p, a), rel=1e-12, abs=1e-12)
    assert r_squared(p, a) == pytest.approx(naive_r2(p, a), rel=1e-12, abs=1e-12)


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        rmse([1, 2], [1])
    with pytest.raises(EmptyInput):
        rmse([], [])
    with pytest.raises(DegenerateActuals):
        r_squared([1, 2, 3], [5, 5, 5])
    with pytest.raises(DegenerateActuals):
        r_squared([1], [1])


def test_advantage():
    assert advantage_pct(10.0, 7.71) == pytest.approx(22.9)
    assert advantage_pct(10.0, 10.0) == 0.0
    assert advantage_pct(0.5, 0.8, lower_is_better=False) == pytest.approx(60.0)
    assert advantage_pct(-0.5, 0.25, lower_is_better=False) == pytest.approx(150.0)
    with pytest.raises(DivisionByZeroReference):
        advantage_pct(0.0, 1.0)


# ---- scenario runs on a tiny synthetic set

WINDOW = 64
FAST = TrainConfig(epochs=2)


@pytest.fixture(scope="module")
def tiny_samples():
    cfg = SynthConfig(tools_per_fpt=(2, 2, 2, 2, 2), max_cuts_per_tool=3, phase_seconds=0.02, window_length=WINDOW, seed=3)
    opts = PreprocessOptions(entry_margin=0.02, exit_margin=0.02, window_length=WINDOW)
    return [preprocess(rec, cut_label(meas), opts) for rec, meas in generate_dataset(cfg)]


def run(samples, spec, **kw):
    return run_scenario(samples, spec, default_test_config(WINDOW), default_reference_config(WINDOW), FAST, seed=0, **kw)


def test_report_partitions_tools_and_serializes(tiny_samples):
    report, trained = run(tiny_samples, ScenarioSpec("C", (0.015, 0.06)))
    assert sorted(report.train_tools + report.test_tools) == list(range(1, 11))
    assert report.test_tools == [1, 2, 9, 10]
    assert set(trained) == {"test", "reference"}
    d = json.loads(report.to_json())
    assert d["scenario"]["kind"] == "C"
    assert set(d["per_fpt"]["test"]) == {"0.015", "0.06"}
    assert len(d["predictions"]) == report.test_size
    expected = 100 * (d["metrics"]["reference"]["rmse"] - d["metrics"]["test"]["rmse"]) / d["metrics"]["reference"]["rmse"]
    assert d["advantage_rmse_pct"] == pytest.approx(expected)


def test_run_is_deterministic(tiny_samples):
    a, _ = run(tiny_samples, ScenarioSpec("A", (0.045,)))
    b, _ = run(tiny_samples, ScenarioSpec("A", (0.045,)))
    assert a.to_json() == b.to_json()


def test_reference_ignores_conditions(tiny_samples):
    import dataclasses

    spec = ScenarioSpec("A", (0.045,))
    report, trained = run(tiny_samples, spec)
    _, test_set = split(tiny_samples, spec)
    ref, tst = trained["reference"], trained["test"]
    rng = np.random.default_rng(0)
    shuffled = [c.conditions for c in tiny_samples]
    rng.shuffle(shuffled)
    swapped = [dataclasses.replace(s, conditions=c) for s, c in zip(test_set, shuffled)]
    from wearcast.train import predict

    p_ref = predict(ref.network, [ref.normalizer.apply(s) for s in test_set])
    p_ref_swapped = predict(ref.network, [ref.normalizer.apply(s) for s in swapped])
    np.testing.assert_array_equal(p_ref, p_ref_swapped)
    p_t = predict(tst.network, [tst.normalizer.apply(s) for s in test_set])
    p_t_swapped = predict(tst.network, [tst.normalizer.apply(s) for s in swapped])
    assert not np.allclose(p_t, p_t_swapped)


def test_partial_learning_reuses_base_models(tiny_samples):
    spec_a = ScenarioSpec("A", (0.045,))
    _, base = run(tiny_samples, spec_a)
    report_b, trained_b = run(tiny_samples, ScenarioSpec("B", (0.045,)), base_models=base)
    assert report_b.test_tools == [6]
    assert 5 in report_b.train_tools
    # base normalizer kept
    np.testing.assert_array_equal(trained_b["test"].normalizer.mean, base["test"].normalizer.mean)
    # without given bases the A models are retrained identically
    report_b2, _ = run(tiny_samples, ScenarioSpec("B", (0.045,)))
    assert report_b.to_json() == report_b2.to_json()


def test_single_model_run(tiny_samples):
    report, trained = run(tiny_samples, ScenarioSpec("A", (0.03,)), models=("test",))
    assert set(trained) == {"test"}
    assert report.advantage_rmse_pct is None
    assert all(r["predicted_ref"] is None for r in report.predictions)


def test_fit_on_seen_data_beats_mean(tiny_samples):
    from wearcast.nn import Network
    from wearcast.signals import fit_normalizer
    from wearcast.train import predict, train

    norm = fit_normalizer(tiny_samples)
    data = [norm.apply(s) for s in tiny_samples]
    net = train(Network.create(default_test_config(WINDOW), 0), data, TrainConfig(epochs=60, batch_size=4)).network
    pred = predict(net, data)[:, 8]
    assert r_squared(pred, [s.label.vb_e for s in data]) > 0
