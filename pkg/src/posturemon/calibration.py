"""Upright reference captured while the wearer stands still."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExcessiveMotion, InsufficientData, MalformedProfile, NonUnitInput
from .orientation import UNIT_TOL, sensor_normals, thoracic_angles
from .sensor_models import Trace

DEFAULT_WINDOW_MS = 10_000
DEFAULT_MAX_SPREAD_DEG = 5.0


@dataclass(frozen=True)
class CalibrationProfile:
    reference_normal: tuple[float, float, float]
    flex_baseline_ohms: float
    duration_ms: int
    sample_count: int
    motion_spread_deg: float

    def __post_init__(self):
        n = np.asarray(self.reference_normal, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise NonUnitInput("reference_normal must be a unit 3-vector")
        object.__setattr__(self, "reference_normal", tuple(float(v) for v in n))

    @classmethod
    def upright(cls, flex_baseline_ohms: float = 10_000.0) -> CalibrationProfile:
        """Profile of a sensor whose upright normal is the world vertical."""
        return cls((0.0, 0.0, 1.0), flex_baseline_ohms, 0, 1, 0.0)

    def to_text(self) -> str:
        nx, ny, nz = self.reference_normal
        return (
            f"reference_normal = {nx!r}, {ny!r}, {nz!r}\n"
            f"flex_baseline_ohms = {self.flex_baseline_ohms!r}\n"
            f"duration_ms = {self.duration_ms}\n"
            f"sample_count = {self.sample_count}\n"
            f"motion_spread_deg = {self.motion_spread_deg!r}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> CalibrationProfile:
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise MalformedProfile(f"line {lineno}: expected 'key = value'")
            values[key.strip()] = val.strip()
        expected = {
            "reference_normal",
            "flex_baseline_ohms",
            "duration_ms",
            "sample_count",
            "motion_spread_deg",
        }
        if set(values) != expected:
            missing = sorted(expected - set(values))
            extra = sorted(set(values) - expected)
            raise MalformedProfile(f"profile keys wrong: missing={missing} unknown={extra}")
        try:
            normal = tuple(float(v) for v in values["reference_normal"].split(","))
            return cls(
                normal,
                float(values["flex_baseline_ohms"]),
                int(values["duration_ms"]),
                int(values["sample_count"]),
                float(values["motion_spread_deg"]),
            )
        except ValueError as exc:
            raise MalformedProfile(f"bad profile value: {exc}") from None


def calibrate(
    samples,
    window_ms: int = DEFAULT_WINDOW_MS,
    max_spread_deg: float = DEFAULT_MAX_SPREAD_DEG,
) -> CalibrationProfile:
    """Average the sensor normals and flex readings over the first ``window_ms``.

    The window is ``[t0, t0 + window_ms)``. Each sample stands for one
    sample period, so a 100 Hz stream of exactly 1000 samples covers a
    10 s window. Normals are averaged rather than quaternions, which avoids
    the ``q``/``-q`` ambiguity.
    """
    trace = Trace.from_samples(samples)
    if len(trace) == 0:
        raise InsufficientData("no samples to calibrate on")
    ts = trace.timestamp_ms
    t0 = int(ts[0])
    period = float(np.median(np.diff(ts))) if len(ts) > 1 else 0.0
    span = float(ts[-1] - t0) + period
    if span < window_ms:
        raise InsufficientData(f"stream spans {span:g} ms, calibration needs {window_ms} ms")

    n = int(np.searchsorted(ts, t0 + window_ms, side="left"))
    n = max(n, 1)
    quats = trace.quat[:n]
    qn = np.linalg.norm(quats, axis=1)
    if np.any(np.abs(qn - 1.0) > UNIT_TOL):
        raise NonUnitInput("calibration window contains a non-unit quaternion")

    normals = sensor_normals(quats)
    mean = normals.mean(axis=0)
    mag = float(np.linalg.norm(mean))
    if mag < 1e-6:
        raise ExcessiveMotion("sensor normals cancel out; the wearer was not still")
    ref = mean / mag
    spread = float(np.max(thoracic_angles(ref, normals)))
    if spread > max_spread_deg:
        raise ExcessiveMotion(
            f"orientation wandered {spread:.2f} deg during calibration (limit {max_spread_deg})"
        )
    return CalibrationProfile(
        reference_normal=tuple(ref),
        flex_baseline_ohms=float(trace.flex_ohms[:n].mean()),
        duration_ms=int(window_ms),
        sample_count=n,
        motion_spread_deg=spread,
    )
