"""Flex-sensor model and synthetic labelled IMU + flex traces.

Motion model
------------
A :class:`MotionScript` is a contiguous list of segments, each one posture
held between two timestamps. Slouch and Bend segments are excursions from
upright: the trunk flexes forward (a rotation about the sensor's y axis, the
wearer's pitch axis) following a raised-cosine ramp up to the segment's peak
angle, holds, and ramps back to zero before the segment ends. Upright
segments stay at zero.

Channels are derived from the commanded trajectory:

* quaternion: commanded flexion plus bounded orientation noise;
* accelerometer (g): gravity seen by the sensor, i.e. the sensor normal;
* gyroscope (dps): central-difference rate of the noise-free flexion, plus
  a constant per-axis bias (``gyro_drift_dps``);
* magnetometer (µT): a fixed world field rotated into the sensor frame;
* flex (ohms): rises with flexion inside Slouch segments only. A bend hinges
  at the hips and leaves the spine, and so the flex strip, straight.

Reference layout timing
-----------------------
The upright/slouch/upright/bend/upright reference layout
(:data:`TABLE2_ROWS`) is tabulated on a 0-600 scale. Those values are
sample indices at 100 Hz, so the layout spans 0-6000 ms; reading them as
milliseconds would make every posture last a fraction of a second.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, overload

import numpy as np

from .errors import InvalidScript, OutOfRange
from .evaluation import TruthInterval
from .orientation import Quaternion, sensor_normals

RAMP_MS = 500
WORLD_FIELD_UT = np.array([22.0, 0.0, -42.0])
# Flexion at which a slouching spine saturates the flex strip.
FULL_BEND_ANGLE_DEG = 45.0
IMU_FIELDS = ("ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz")


class Posture(str, enum.Enum):
    UPRIGHT = "Upright"
    SLOUCH = "Slouch"
    BEND = "Bend"


@dataclass(frozen=True, slots=True)
class ImuSample:
    """One AHRS + flex reading."""

    timestamp_ms: int
    ax: float
    ay: float
    az: float
    gx: float
    gy: float
    gz: float
    mx: float
    my: float
    mz: float
    quat: Quaternion
    flex_ohms: float


class Trace(Sequence):
    """Column-oriented, immutable sequence of :class:`ImuSample`.

    Indexing yields ``ImuSample`` objects; bulk consumers (the detector, the
    CSV writer) read the numpy columns directly.
    """

    __slots__ = ("timestamp_ms", "imu", "quat", "flex_ohms")

    def __init__(self, timestamp_ms, imu, quat, flex_ohms):
        self.timestamp_ms = np.asarray(timestamp_ms, dtype=np.int64).reshape(-1)
        n = len(self.timestamp_ms)
        self.imu = np.asarray(imu, dtype=float).reshape(n, 9)
        self.quat = np.asarray(quat, dtype=float).reshape(n, 4)
        self.flex_ohms = np.asarray(flex_ohms, dtype=float).reshape(n)
        for arr in (self.timestamp_ms, self.imu, self.quat, self.flex_ohms):
            arr.flags.writeable = False

    @classmethod
    def empty(cls) -> Trace:
        return cls(np.zeros(0), np.zeros((0, 9)), np.zeros((0, 4)), np.zeros(0))

    @classmethod
    def from_samples(cls, samples: Iterable[ImuSample]) -> Trace:
        if isinstance(samples, Trace):
            return samples
        samples = list(samples)
        if not samples:
            return cls.empty()
        ts = np.fromiter((s.timestamp_ms for s in samples), dtype=np.int64, count=len(samples))
        imu = np.array(
            [(s.ax, s.ay, s.az, s.gx, s.gy, s.gz, s.mx, s.my, s.mz) for s in samples]
        )
        quat = np.array([(s.quat.b0, s.quat.b1, s.quat.b2, s.quat.b3) for s in samples])
        flex = np.fromiter((s.flex_ohms for s in samples), dtype=float, count=len(samples))
        return cls(ts, imu, quat, flex)

    def __len__(self) -> int:
        return len(self.timestamp_ms)

    @overload
    def __getitem__(self, i: int) -> ImuSample: ...

    @overload
    def __getitem__(self, i: slice) -> Trace: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Trace(self.timestamp_ms[i], self.imu[i], self.quat[i], self.flex_ohms[i])
        m = self.imu[i]
        q = self.quat[i]
        return ImuSample(
            int(self.timestamp_ms[i]),
            *(float(v) for v in m),
            quat=Quaternion(float(q[0]), float(q[1]), float(q[2]), float(q[3])),
            flex_ohms=float(self.flex_ohms[i]),
        )

    def __iter__(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.timestamp_ms, other.timestamp_ms)
            and np.array_equal(self.imu, other.imu)
            and np.array_equal(self.quat, other.quat)
            and np.array_equal(self.flex_ohms, other.flex_ohms)
        )

    __hash__ = None

    def to_bytes(self) -> bytes:
        return b"".join(
            a.tobytes() for a in (self.timestamp_ms, self.imu, self.quat, self.flex_ohms)
        )

    def with_quats(self, quat: np.ndarray) -> Trace:
        return Trace(self.timestamp_ms, self.imu, quat, self.flex_ohms)


@dataclass(frozen=True)
class FlexModel:
    flat_ohms: float = 10_000.0
    full_bend_ohms: float = 110_000.0
    tolerance_fraction: float = 0.30

    def __post_init__(self):
        if not self.flat_ohms < self.full_bend_ohms:
            raise OutOfRange("flat_ohms must be below full_bend_ohms")
        if not 0.0 <= self.tolerance_fraction < 1.0:
            raise OutOfRange("tolerance_fraction must lie in [0, 1)")


def flex_resistance(model: FlexModel, bend_fraction):
    """Linear flat-to-full-bend resistance; accepts a scalar or an array."""
    f = np.asarray(bend_fraction, dtype=float)
    if np.any(~((f >= 0.0) & (f <= 1.0))):
        raise OutOfRange(f"bend_fraction must lie in [0, 1], got {bend_fraction!r}")
    r = model.flat_ohms + (model.full_bend_ohms - model.flat_ohms) * f
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class Segment:
    start_ms: int
    end_ms: int
    posture: Posture
    peak_angle_deg: float = 0.0


@dataclass(frozen=True)
class MotionScript:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        validate_script(self)

    @classmethod
    def from_durations(cls, parts: Iterable[tuple]) -> MotionScript:
        """Build from ``(posture, duration_ms[, peak_deg])`` tuples laid end to end."""
        segs = []
        t = 0
        for part in parts:
            posture, dur = Posture(part[0]), int(part[1])
            peak = float(part[2]) if len(part) > 2 else 0.0
            segs.append(Segment(t, t + dur, posture, peak))
            t += dur
        return cls(tuple(segs))

    @property
    def duration_ms(self) -> int:
        return self.segments[-1].end_ms


def validate_script(script: MotionScript) -> None:
    segs = script.segments
    if not segs:
        raise InvalidScript("script has no segments")
    if segs[0].start_ms != 0:
        raise InvalidScript("first segment must start at 0 ms")
    prev_end = 0
    for i, s in enumerate(segs):
        if not isinstance(s.posture, Posture):
            raise InvalidScript(f"segment {i}: unknown posture {s.posture!r}")
        if s.start_ms != prev_end:
            raise InvalidScript(f"segment {i}: starts at {s.start_ms}, expected {prev_end}")
        if not s.end_ms > s.start_ms:
            raise InvalidScript(f"segment {i}: empty or reversed time range")
        if not 0.0 <= s.peak_angle_deg <= 90.0:
            raise InvalidScript(f"segment {i}: peak angle {s.peak_angle_deg} outside [0, 90]")
        prev_end = s.end_ms


def _ramp_ms(duration_ms: float) -> float:
    return min(float(RAMP_MS), duration_ms / 2.0)


def commanded_angle(script: MotionScript, t_ms) -> np.ndarray:
    """Noise-free flexion angle (degrees) at each timestamp."""
    t = np.asarray(t_ms, dtype=float)
    out = np.zeros_like(t)
    for s in script.segments:
        if s.posture is Posture.UPRIGHT or s.peak_angle_deg == 0.0:
            continue
        mask = (t >= s.start_ms) & (t < s.end_ms)
        if not mask.any():
            continue
        dur = float(s.end_ms - s.start_ms)
        r = _ramp_ms(dur)
        u = t[mask] - s.start_ms
        w = np.ones_like(u)
        up = u < r
        w[up] = 0.5 * (1.0 - np.cos(np.pi * u[up] / r))
        down = u > dur - r
        w[down] = 0.5 * (1.0 - np.cos(np.pi * (dur - u[down]) / r))
        out[mask] = s.peak_angle_deg * w
    return out


def time_above(segment: Segment, threshold_deg: float) -> float:
    """Milliseconds the segment's commanded angle spends at or above ``threshold_deg``."""
    if segment.posture is Posture.UPRIGHT or segment.peak_angle_deg < threshold_deg:
        return 0.0
    dur = float(segment.end_ms - segment.start_ms)
    r = _ramp_ms(dur)
    # raised-cosine ramp reaches threshold at fraction x of the ramp
    x = math.acos(1.0 - 2.0 * threshold_deg / segment.peak_angle_deg) / math.pi
    return dur - 2.0 * r * x


def sample_times(duration_ms: int, rate_hz: float) -> np.ndarray:
    if not rate_hz > 0:
        raise OutOfRange("rate_hz must be positive")
    if rate_hz > 1000:
        raise OutOfRange("rate_hz above 1000 Hz cannot give distinct millisecond timestamps")
    n = int(math.floor(duration_ms * rate_hz / 1000.0 + 1e-9))
    return np.round(np.arange(n) * (1000.0 / rate_hz)).astype(np.int64)


def pitch_quaternions(angle_deg: np.ndarray) -> np.ndarray:
    half = np.radians(angle_deg) / 2.0
    q = np.zeros((len(half), 4))
    q[:, 0] = np.cos(half)
    q[:, 2] = np.sin(half)
    return q


def world_to_body(quats: np.ndarray, v_world: np.ndarray) -> np.ndarray:
    """Apply each quaternion's world-to-body DCM to one world vector."""
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    vx, vy, vz = v_world
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    bx = (ww + xx - yy - zz) * vx + 2 * (x * y + w * z) * vy + 2 * (x * z - w * y) * vz
    by = 2 * (x * y - w * z) * vx + (ww - xx + yy - zz) * vy + 2 * (y * z + w * x) * vz
    bz = 2 * (x * z + w * y) * vx + 2 * (y * z - w * x) * vy + (ww - xx - yy + zz) * vz
    return np.column_stack((bx, by, bz))


def generate_trace(
    script: MotionScript,
    rate_hz: float = 100.0,
    noise_deg: float = 0.0,
    gyro_drift_dps: float = 0.0,
    seed: int = 0,
    *,
    flex_model: FlexModel | None = None,
    flat_tolerance: bool = False,
) -> Trace:
    """Synthesize a trace following ``script``.

    ``noise_deg`` bounds the orientation noise: each sample's flexion gets a
    Gaussian error with standard deviation ``noise_deg / 3`` clipped to
    ``±noise_deg``. With ``flat_tolerance`` the flex strip's flat resistance
    is scaled once per trace by a factor drawn uniformly from
    ``1 ± tolerance_fraction``.
    """
    validate_script(script)
    if noise_deg < 0:
        raise OutOfRange("noise_deg must be non-negative")
    model = flex_model or FlexModel()
    rng = np.random.default_rng(seed)

    t = sample_times(script.duration_ms, rate_hz)
    n = len(t)
    angle = commanded_angle(script, t)

    if noise_deg > 0:
        noise = np.clip(rng.normal(0.0, noise_deg / 3.0, n), -noise_deg, noise_deg)
    else:
        noise = np.zeros(n)
    quat = pitch_quaternions(angle + noise)

    accel = sensor_normals(quat)
    if n >= 2:
        rate = np.gradient(angle, t / 1000.0)
    else:
        rate = np.zeros(n)
    gyro = np.zeros((n, 3))
    gyro[:, 1] = rate
    gyro += gyro_drift_dps
    mag = world_to_body(quat, WORLD_FIELD_UT)

    if flat_tolerance:
        factor = 1.0 + model.tolerance_fraction * rng.uniform(-1.0, 1.0)
        model = replace(model, flat_ohms=model.flat_ohms * factor)
    flex = np.full(n, model.flat_ohms)
    slouch = np.zeros(n, dtype=bool)
    for s in script.segments:
        if s.posture is Posture.SLOUCH:
            slouch |= (t >= s.start_ms) & (t < s.end_ms)
    frac = np.clip(angle[slouch] / FULL_BEND_ANGLE_DEG, 0.0, 1.0)
    flex[slouch] = flex_resistance(model, frac)

    return Trace(t, np.column_stack((accel, gyro, mag)), quat, flex)


# Reference layout, in sample indices at 100 Hz.
TABLE2_ROWS = (
    (0, 100, Posture.UPRIGHT),
    (100, 240, Posture.SLOUCH),
    (240, 350, Posture.UPRIGHT),
    (350, 520, Posture.BEND),
    (520, 600, Posture.UPRIGHT),
)
TABLE2_SAMPLE_MS = 10


def table2_script(
    peak_deg: float = 30.0,
    *,
    lead_in_ms: int = 0,
    slouch_hold_ms: int | None = None,
    bend_hold_ms: int | None = None,
) -> MotionScript:
    """The five-interval upright/slouch/upright/bend/upright layout.

    ``*_hold_ms`` stretch a segment so it holds its peak that long between
    its ramps. ``lead_in_ms`` prepends extra upright time for calibration.
    """
    parts = []
    if lead_in_ms:
        parts.append((Posture.UPRIGHT, lead_in_ms, 0.0))
    for start, end, posture in TABLE2_ROWS:
        dur = (end - start) * TABLE2_SAMPLE_MS
        if posture is Posture.SLOUCH and slouch_hold_ms is not None:
            dur = slouch_hold_ms + 2 * RAMP_MS
        if posture is Posture.BEND and bend_hold_ms is not None:
            dur = bend_hold_ms + 2 * RAMP_MS
        parts.append((posture, dur, 0.0 if posture is Posture.UPRIGHT else peak_deg))
    return MotionScript.from_durations(parts)


def table2_trace(
    rate_hz: float = 100.0,
    *,
    peak_deg: float = 30.0,
    lead_in_ms: int = 0,
    slouch_hold_ms: int | None = None,
    bend_hold_ms: int | None = None,
    noise_deg: float = 0.0,
    seed: int = 0,
) -> tuple[Trace, list[TruthInterval]]:
    script = table2_script(
        peak_deg,
        lead_in_ms=lead_in_ms,
        slouch_hold_ms=slouch_hold_ms,
        bend_hold_ms=bend_hold_ms,
    )
    trace = generate_trace(script, rate_hz, noise_deg, 0.0, seed)
    truth = [
        TruthInterval(s.start_ms, s.end_ms)
        for s in script.segments
        if s.posture is Posture.SLOUCH
    ]
    return trace, truth


def slouch_intervals(
    script: MotionScript,
    angle_threshold_deg: float = 20.0,
    min_hold_ms: float = 3000.0,
) -> list[TruthInterval]:
    """Ground-truth positives: slouches held past threshold for at least ``min_hold_ms``.

    Shorter or shallower slouches are the "insignificant" kind a correct
    detector must ignore, so they are neither positives nor negatives.
    """
    return [
        TruthInterval(s.start_ms, s.end_ms)
        for s in script.segments
        if s.posture is Posture.SLOUCH and time_above(s, angle_threshold_deg) >= min_hold_ms
    ]


def random_script(
    rng: np.random.Generator,
    *,
    lead_in_ms: int = 10_000,
    episodes: tuple[int, int] = (1, 4),
    peak_range: tuple[float, float] = (15.0, 40.0),
    duration_range: tuple[int, int] = (1000, 8000),
    gap_range: tuple[int, int] = (2000, 5000),
    slouch_probability: float = 0.6,
    postures: tuple[Posture, ...] | None = None,
) -> MotionScript:
    """Random upright lead-in followed by slouch/bend episodes separated by upright gaps."""
    parts = [(Posture.UPRIGHT, lead_in_ms, 0.0)]
    for _ in range(int(rng.integers(episodes[0], episodes[1] + 1))):
        if postures is not None:
            posture = postures[int(rng.integers(len(postures)))]
        else:
            posture = Posture.SLOUCH if rng.random() < slouch_probability else Posture.BEND
        peak = float(np.round(rng.uniform(*peak_range), 3))
        dur = int(rng.integers(duration_range[0] // 10, duration_range[1] // 10 + 1)) * 10
        gap = int(rng.integers(gap_range[0] // 10, gap_range[1] // 10 + 1)) * 10
        parts.append((posture, dur, peak))
        parts.append((Posture.UPRIGHT, gap, 0.0))
    return MotionScript.from_durations(parts)


def two_slouch_script(
    peak_deg: float = 30.0,
    *,
    lead_in_ms: int = 10_000,
    long_ms: int = 4000,
    short_ms: int = 500,
    gap_ms: int = 2000,
) -> MotionScript:
    """A sustained slouch followed by a brief one from a sudden movement."""
    return MotionScript.from_durations(
        [
            (Posture.UPRIGHT, lead_in_ms, 0.0),
            (Posture.SLOUCH, long_ms, peak_deg),
            (Posture.UPRIGHT, gap_ms, 0.0),
            (Posture.SLOUCH, short_ms, peak_deg),
            (Posture.UPRIGHT, gap_ms, 0.0),
        ]
    )
