import numpy as np
import pytest

from posturemon.calibration import CalibrationProfile, calibrate
from posturemon.detection import (
    DetectorConfig,
    DetectorState,
    EventKind,
    Mode,
    PostureDetector,
    events_csv,
    run,
    step,
)
from posturemon.errors import NonMonotonicTimestamp, OutOfRange, UncalibratedDetector
from posturemon.sensor_models import Trace, generate_trace, random_script, table2_trace, two_slouch_script

from .conftest import make_trace, sample

CFG = DetectorConfig()
UP = CalibrationProfile.upright()


def kinds(events):
    return [e.kind for e in events]


def test_upright_sample_no_events():
    state, events = step(DetectorState(), sample(0, 0.0, 10_000.0), CFG, UP)
    assert state.mode is Mode.UPRIGHT and events == []
    assert not state.vibrating


def test_sustained_slouch_hand_trace():
    # 1 s upright, then 25 deg with a bent strip for 4 s: candidate entry at
    # the sample t=1000, and the first sample with t - 1000 >= 3000 is t=4000.
    angles = np.r_[np.zeros(100), np.full(400, 25.0)]
    flex = np.r_[np.full(100, 10_000.0), np.full(400, 40_000.0)]
    events, series = run(make_trace(angles, flex), CFG, UP)
    assert [(e.timestamp_ms, e.kind) for e in events] == [
        (4000, EventKind.SLOUCH_START),
        (4000, EventKind.VIBRATE_ON),
    ]
    assert len(series) == 500
    assert series[150] == pytest.approx(25.0, abs=1e-9)


def test_stepwise_hand_trace_modes():
    state = DetectorState()
    modes = []
    for t, theta, flex in [
        (0, 0, 10_000), (10, 25, 40_000), (20, 19, 40_000), (3010, 25, 40_000),
        (3020, 17, 40_000),
    ]:  # fmt: skip
        state, ev = step(state, sample(t, theta, flex), CFG, UP)
        modes.append((state.mode, kinds(ev)))
    assert modes == [
        (Mode.UPRIGHT, []),
        (Mode.CANDIDATE_SLOUCH, []),
        # inside the hysteresis band the candidate keeps its timer
        (Mode.CANDIDATE_SLOUCH, []),
        (Mode.SLOUCH_ALERT, [EventKind.SLOUCH_START, EventKind.VIBRATE_ON]),
        (Mode.UPRIGHT, [EventKind.VIBRATE_OFF, EventKind.SLOUCH_END]),
    ]


def test_bend_never_vibrates():
    angles = np.r_[np.zeros(100), np.full(500, 25.0), np.zeros(100)]
    events, _ = run(make_trace(angles, 10_000.0), CFG, UP)
    assert kinds(events) == [EventKind.BEND_START, EventKind.BEND_END]
    assert events[0].timestamp_ms == 1000 and events[1].timestamp_ms == 6000


def test_hysteresis_band_does_not_promote_from_upright():
    events, _ = run(make_trace(np.full(600, 19.0), 40_000.0), CFG, UP)
    assert events == []


def test_bend_turning_into_slouch_and_back():
    angles = np.full(900, 25.0)
    flex = np.r_[np.full(100, 10_000.0), np.full(400, 40_000.0), np.full(400, 10_000.0)]
    events, _ = run(make_trace(angles, flex), CFG, UP)
    assert [(e.timestamp_ms, e.kind) for e in events] == [
        (0, EventKind.BEND_START),
        (1000, EventKind.BEND_END),
        (4000, EventKind.SLOUCH_START),
        (4000, EventKind.VIBRATE_ON),
        (5000, EventKind.VIBRATE_OFF),
        (5000, EventKind.SLOUCH_END),
        (5000, EventKind.BEND_START),
    ]


def test_debounce_uses_timestamps_not_sample_count():
    # 10 Hz stream: 3000 ms is 30 samples, not 300
    angles = np.full(40, 25.0)
    events, _ = run(make_trace(angles, 40_000.0, rate_hz=10.0), CFG, UP)
    assert [e.timestamp_ms for e in events if e.kind is EventKind.VIBRATE_ON] == [3000]


def test_zero_debounce_alerts_immediately():
    cfg = DetectorConfig(debounce_ms=0)
    events, _ = run(make_trace([0.0, 25.0], 40_000.0), cfg, UP)
    assert kinds(events) == [EventKind.SLOUCH_START, EventKind.VIBRATE_ON]
    assert events[0].timestamp_ms == 10


def test_two_slouch_scenario_one_alert():
    tr = generate_trace(two_slouch_script(), 100.0, 0.0, 0.0, 0)
    events, _ = run(tr, CFG, UP)
    on = [e for e in events if e.kind is EventKind.VIBRATE_ON]
    assert len(on) == 1


def test_stretched_table2_discriminates():
    tr, _ = table2_trace(100.0, lead_in_ms=10_000, slouch_hold_ms=5000, bend_hold_ms=5000)
    events, _ = run(tr, CFG, UP)
    k = kinds(events)
    assert k.count(EventKind.VIBRATE_ON) == 1
    assert k.count(EventKind.SLOUCH_START) == 1
    assert k.count(EventKind.BEND_START) == 1
    bend_at = next(e.timestamp_ms for e in events if e.kind is EventKind.BEND_START)
    assert all(
        e.timestamp_ms < bend_at
        for e in events
        if e.kind in (EventKind.VIBRATE_ON, EventKind.VIBRATE_OFF)
    )


def test_idle_alert_once_per_still_period():
    cfg = DetectorConfig(idle_timeout_ms=2000)
    angles = np.r_[np.full(300, 5.0), np.full(300, 10.0)]
    events, _ = run(make_trace(angles, 10_000.0), cfg, UP)
    idle = [e.timestamp_ms for e in events if e.kind is EventKind.IDLE_ALERT]
    assert idle == [2000, 5000]


def test_idle_off_by_default():
    events, _ = run(make_trace(np.full(1000, 5.0), 10_000.0), CFG, UP)
    assert events == []


def test_empty_trace():
    events, series = run(Trace.empty(), CFG, UP)
    assert events == [] and len(series) == 0


def test_non_monotonic_timestamps():
    tr = make_trace(np.zeros(5), 10_000.0)
    ts = tr.timestamp_ms.copy()
    ts[3] = ts[2]
    bad = Trace(ts, tr.imu, tr.quat, tr.flex_ohms)
    with pytest.raises(NonMonotonicTimestamp):
        run(bad, CFG, UP)
    state, _ = step(DetectorState(), sample(100), CFG, UP)
    with pytest.raises(NonMonotonicTimestamp):
        step(state, sample(100), CFG, UP)


def test_uncalibrated():
    with pytest.raises(UncalibratedDetector):
        run(make_trace([0.0], 10_000.0), CFG, None)
    with pytest.raises(UncalibratedDetector):
        step(DetectorState(), sample(0), CFG, None)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"angle_threshold_deg": 2.0, "hysteresis_deg": 2.0},
        {"hysteresis_deg": -1.0},
        {"debounce_ms": -1},
        {"flex_threshold_ohms": 0.0},
        {"idle_timeout_ms": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(OutOfRange):
        DetectorConfig(**kwargs)


def test_step_fold_equals_run(rng):
    for _ in range(5):
        tr = generate_trace(random_script(rng), 100.0, 1.0, 0.0, int(rng.integers(1 << 30)))
        events, _ = run(tr, CFG, UP)
        state, folded = DetectorState(), []
        for s in tr:
            state, ev = step(state, s, CFG, UP)
            folded += ev
        assert folded == events


def test_step_does_not_mutate_input_state():
    s0 = DetectorState()
    step(s0, sample(0, 25.0, 40_000.0), CFG, UP)
    assert s0 == DetectorState()


def test_detector_object_matches_state_property():
    det = PostureDetector(CFG)
    det.update(0, 25.0, 40_000.0)
    assert det.state.mode is Mode.CANDIDATE_SLOUCH and det.state.since_ms == 0


def test_run_is_deterministic(rng):
    tr = generate_trace(random_script(rng), 100.0, 1.0, 0.0, 11)
    a, sa = run(tr, CFG, UP)
    b, sb = run(tr, CFG, UP)
    assert a == b and np.array_equal(sa, sb)


def test_events_csv():
    events, _ = run(make_trace(np.full(400, 25.0), 40_000.0), CFG, UP)
    assert events_csv(events).splitlines() == [
        "timestamp_ms,kind,angle_deg",
        "3000,SlouchStart,25.000000",
        "3000,VibrateOn,25.000000",
    ]


def test_relative_flex_threshold_tracks_baseline():
    # a strip whose flat reading is 13 kOhm; 35 kOhm is below 13k + 23k
    angles = np.r_[np.zeros(1000), np.full(400, 25.0)]
    flex = np.r_[np.full(1000, 13_000.0), np.full(400, 35_000.0)]
    tr = make_trace(angles, flex)
    profile = calibrate(tr)
    absolute, _ = run(tr, CFG, profile)
    assert EventKind.VIBRATE_ON in kinds(absolute)
    relative, _ = run(tr, DetectorConfig(flex_relative_ohms=23_000.0), profile)
    assert kinds(relative) == [EventKind.BEND_START]
    assert DetectorConfig(flex_relative_ohms=23_000.0).bent_threshold(profile) == 36_000.0
    with pytest.raises(OutOfRange):
        DetectorConfig(flex_relative_ohms=0.0)
