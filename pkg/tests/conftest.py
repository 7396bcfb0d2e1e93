import math

import numpy as np
import pytest

from posturemon.orientation import Quaternion
from posturemon.sensor_models import ImuSample, Trace

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def pitch_quat(angle_deg: float) -> Quaternion:
    h = math.radians(angle_deg) / 2
    return Quaternion(math.cos(h), 0.0, math.sin(h), 0.0)


def make_trace(angles, flex, rate_hz=100.0, t0=0) -> Trace:
    """Trace holding exact flexion angles (about y) and flex readings."""
    angles = np.asarray(angles, dtype=float)
    n = len(angles)
    flex = np.broadcast_to(np.asarray(flex, dtype=float), (n,))
    ts = t0 + np.round(np.arange(n) * 1000.0 / rate_hz).astype(np.int64)
    half = np.radians(angles) / 2
    quat = np.column_stack((np.cos(half), np.zeros(n), np.sin(half), np.zeros(n)))
    return Trace(ts, np.zeros((n, 9)), quat, flex)


def sample(t, angle_deg=0.0, flex=10_000.0) -> ImuSample:
    return ImuSample(t, 0, 0, 1, 0, 0, 0, 0, 0, 0, pitch_quat(angle_deg), flex)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
