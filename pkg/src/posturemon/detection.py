"""Slouch/bend state machine driving the vibration motor.

Per sample, with ``theta`` the thoracic angle against the calibrated upright
normal and ``bent`` meaning the flex strip reads at least the resistance
threshold:

=================================  ===========================================
condition                          effect
=================================  ===========================================
theta >= threshold and bent        enter CandidateSlouch (timer starts); after
                                   ``debounce_ms`` in it, SlouchAlert with
                                   SlouchStart + VibrateOn
theta >= threshold and not bent    Bending with BendStart; never vibrates
theta <= threshold - hysteresis    Upright; VibrateOff + SlouchEnd out of an
                                   alert, BendEnd out of a bend
in between                         keep the current mode, timer not promoted
=================================  ===========================================

A bend whose flex reading crosses the threshold becomes a candidate slouch
(BendEnd first). An alert whose flex reading drops becomes a bend
(VibrateOff, SlouchEnd, BendStart). The debounce clock runs on timestamps,
not sample counts.

The flex threshold is absolute by default. With ``flex_relative_ohms`` set,
the strip counts as bent at the calibrated flat baseline plus that offset,
which absorbs per-strip tolerance in the flat resistance.

With ``idle_timeout_ms`` set, an IdleAlert fires once the angle has stayed
within 2 degrees of one value for that long; it re-arms after movement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationProfile
from .errors import NonMonotonicTimestamp, OutOfRange, UncalibratedDetector
from .orientation import sensor_normals, thoracic_angles
from .sensor_models import ImuSample, Trace

IDLE_BAND_DEG = 2.0


class Mode(str, enum.Enum):
    UPRIGHT = "Upright"
    CANDIDATE_SLOUCH = "CandidateSlouch"
    SLOUCH_ALERT = "SlouchAlert"
    BENDING = "Bending"


class EventKind(str, enum.Enum):
    SLOUCH_START = "SlouchStart"
    SLOUCH_END = "SlouchEnd"
    BEND_START = "BendStart"
    BEND_END = "BendEnd"
    VIBRATE_ON = "VibrateOn"
    VIBRATE_OFF = "VibrateOff"
    IDLE_ALERT = "IdleAlert"


_UPRIGHT = Mode.UPRIGHT
_CANDIDATE = Mode.CANDIDATE_SLOUCH
_ALERT = Mode.SLOUCH_ALERT
_BENDING = Mode.BENDING


@dataclass(frozen=True, slots=True)
class PostureEvent:
    timestamp_ms: int
    kind: EventKind
    angle_deg: float


@dataclass(frozen=True)
class DetectorConfig:
    angle_threshold_deg: float = 20.0
    flex_threshold_ohms: float = 33_000.0
    debounce_ms: int = 3000
    hysteresis_deg: float = 2.0
    idle_timeout_ms: int | None = None
    flex_relative_ohms: float | None = None

    def __post_init__(self):
        if not self.angle_threshold_deg > self.hysteresis_deg >= 0:
            raise OutOfRange("need angle_threshold_deg > hysteresis_deg >= 0")
        if self.debounce_ms < 0:
            raise OutOfRange("debounce_ms must be non-negative")
        if not self.flex_threshold_ohms > 0:
            raise OutOfRange("flex_threshold_ohms must be positive")
        if self.idle_timeout_ms is not None and self.idle_timeout_ms <= 0:
            raise OutOfRange("idle_timeout_ms must be positive when set")
        if self.flex_relative_ohms is not None and not self.flex_relative_ohms > 0:
            raise OutOfRange("flex_relative_ohms must be positive when set")

    def bent_threshold(self, calib: CalibrationProfile | None = None) -> float:
        """Resistance at which the strip counts as bent."""
        if self.flex_relative_ohms is None:
            return self.flex_threshold_ohms
        if calib is None:
            raise UncalibratedDetector("relative flex threshold needs a calibration profile")
        return calib.flex_baseline_ohms + self.flex_relative_ohms


@dataclass
class DetectorState:
    mode: Mode = Mode.UPRIGHT
    since_ms: int | None = None
    last_motion_ms: int | None = None
    vibrating: bool = False
    last_timestamp_ms: int | None = None
    idle_ref_deg: float | None = None
    idle_alerted: bool = False


class PostureDetector:
    """Single-stream detector; feed it (timestamp, angle, flex) in order."""

    def __init__(
        self,
        config: DetectorConfig,
        state: DetectorState | None = None,
        calib: CalibrationProfile | None = None,
    ):
        self.config = config
        self._thr = config.angle_threshold_deg
        self._low = config.angle_threshold_deg - config.hysteresis_deg
        self._flex = config.bent_threshold(calib)
        self._debounce = config.debounce_ms
        self._idle = config.idle_timeout_ms
        s = state or DetectorState()
        self.mode = s.mode
        self.since_ms = s.since_ms
        self.last_motion_ms = s.last_motion_ms
        self.last_timestamp_ms = s.last_timestamp_ms
        self.idle_ref_deg = s.idle_ref_deg
        self.idle_alerted = s.idle_alerted

    @property
    def state(self) -> DetectorState:
        return DetectorState(
            mode=self.mode,
            since_ms=self.since_ms,
            last_motion_ms=self.last_motion_ms,
            vibrating=self.mode is _ALERT,
            last_timestamp_ms=self.last_timestamp_ms,
            idle_ref_deg=self.idle_ref_deg,
            idle_alerted=self.idle_alerted,
        )

    def update(self, t: int, theta: float, flex: float) -> list[PostureEvent] | None:
        """Advance one sample; returns the events it caused, or None."""
        last = self.last_timestamp_ms
        if last is not None and t <= last:
            raise NonMonotonicTimestamp(f"timestamp {t} ms does not follow {last} ms")
        self.last_timestamp_ms = t
        mode = self.mode
        out = None

        if theta >= self._thr:
            if flex >= self._flex:
                if mode is _UPRIGHT or mode is _BENDING:
                    if mode is _BENDING:
                        out = [PostureEvent(t, EventKind.BEND_END, theta)]
                    mode = _CANDIDATE
                    self.since_ms = t
                if mode is _CANDIDATE and t - self.since_ms >= self._debounce:
                    mode = _ALERT
                    ev = [
                        PostureEvent(t, EventKind.SLOUCH_START, theta),
                        PostureEvent(t, EventKind.VIBRATE_ON, theta),
                    ]
                    out = ev if out is None else out + ev
            elif mode is not _BENDING:
                out = []
                if mode is _ALERT:
                    out.append(PostureEvent(t, EventKind.VIBRATE_OFF, theta))
                    out.append(PostureEvent(t, EventKind.SLOUCH_END, theta))
                out.append(PostureEvent(t, EventKind.BEND_START, theta))
                mode = _BENDING
                self.since_ms = None
        elif theta <= self._low and mode is not _UPRIGHT:
            if mode is _ALERT:
                out = [
                    PostureEvent(t, EventKind.VIBRATE_OFF, theta),
                    PostureEvent(t, EventKind.SLOUCH_END, theta),
                ]
            elif mode is _BENDING:
                out = [PostureEvent(t, EventKind.BEND_END, theta)]
            mode = _UPRIGHT
            self.since_ms = None
        self.mode = mode

        if self._idle is not None:
            ref = self.idle_ref_deg
            if ref is None or abs(theta - ref) > IDLE_BAND_DEG:
                self.idle_ref_deg = theta
                self.last_motion_ms = t
                self.idle_alerted = False
            elif not self.idle_alerted and t - self.last_motion_ms >= self._idle:
                self.idle_alerted = True
                ev = PostureEvent(t, EventKind.IDLE_ALERT, theta)
                out = [ev] if out is None else out + [ev]
        return out


def _require_calibration(calib):
    if calib is None:
        raise UncalibratedDetector("detector needs a calibration profile")
    if not isinstance(calib, CalibrationProfile):
        raise UncalibratedDetector(f"expected CalibrationProfile, got {type(calib).__name__}")


def step(
    state: DetectorState,
    sample: ImuSample,
    config: DetectorConfig,
    calib: CalibrationProfile,
) -> tuple[DetectorState, list[PostureEvent]]:
    """Pure single-sample transition; ``state`` is left untouched."""
    _require_calibration(calib)
    q = sample.quat
    normal = sensor_normals(np.array([[q.b0, q.b1, q.b2, q.b3]]))
    theta = float(thoracic_angles(calib.reference_normal, normal)[0])
    det = PostureDetector(config, state, calib)
    events = det.update(sample.timestamp_ms, theta, sample.flex_ohms)
    return det.state, events or []


def angle_series(trace, calib: CalibrationProfile) -> np.ndarray:
    _require_calibration(calib)
    trace = Trace.from_samples(trace)
    if len(trace) == 0:
        return np.zeros(0)
    return thoracic_angles(calib.reference_normal, sensor_normals(trace.quat))


def run(
    trace,
    config: DetectorConfig,
    calib: CalibrationProfile,
) -> tuple[list[PostureEvent], np.ndarray]:
    """Fold :func:`step` over a whole trace.

    Returns the events and the per-sample thoracic angle (degrees).
    """
    _require_calibration(calib)
    trace = Trace.from_samples(trace)
    angles = angle_series(trace, calib)
    ts = trace.timestamp_ms
    if len(ts) > 1:
        bad = np.flatnonzero(np.diff(ts) <= 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise NonMonotonicTimestamp(
                f"sample {i}: timestamp {ts[i]} ms does not follow {ts[i - 1]} ms"
            )

    det = PostureDetector(config, calib=calib)
    update = det.update
    events: list[PostureEvent] = []
    extend = events.extend
    for t, theta, flex in zip(ts.tolist(), angles.tolist(), trace.flex_ohms.tolist()):
        ev = update(t, theta, flex)
        if ev:
            extend(ev)
    return events, angles


def events_csv(events) -> str:
    lines = ["timestamp_ms,kind,angle_deg"]
    lines += [f"{e.timestamp_ms},{e.kind.value},{e.angle_deg:.6f}" for e in events]
    return "\n".join(lines) + "\n"
