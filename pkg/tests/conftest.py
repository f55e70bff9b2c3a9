import numpy as np
import pytest

from wearcast.labels import WearLabel
from wearcast.signals import ChannelId, CutRecord, CuttingConditions


@pytest.fixture
def conditions():
    return CuttingConditions(v_c=25.0, a_p=2.5, a_e=1.5, f_z=0.03)


@pytest.fixture
def label():
    return WearLabel.from_array([10, 11, 12, 13, 15, 16, 17, 18, 11.5, 18])


def make_record(n, conditions, period=50e-6, seed=0, sd=None, theta=None, tool_id=1, cut_index=1):
    rng = np.random.default_rng(seed)
    channels = {cid: rng.normal(size=n) for cid in (
        ChannelId.SPINDLE_TORQUE, ChannelId.RCD_X, ChannelId.RCD_Y, ChannelId.SD_X, ChannelId.SD_Y)}
    if sd is not None:
        channels[ChannelId.SD_X] = np.full(n, sd[0], dtype=float)
        channels[ChannelId.SD_Y] = np.full(n, sd[1], dtype=float)
    drive = rng.uniform(0, 2 * np.pi, n) if theta is None else np.full(n, theta, dtype=float)
    return CutRecord(tool_id, cut_index, conditions, period, channels, drive)


@pytest.fixture
def record_factory(conditions):
    def factory(n, **kw):
        return make_record(n, kw.pop("conditions", conditions), **kw)
    return factory


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
