"""End-to-end runs: calibrate, detect, score against labelled slouches."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .calibration import DEFAULT_WINDOW_MS, CalibrationProfile, calibrate
from .detection import DetectorConfig, EventKind, PostureEvent, run
from .evaluation import (
    ConfusionStats,
    TruthInterval,
    format_stats,
    match_events,
    reported_trial_note,
)
from .sensor_models import (
    MotionScript,
    Posture,
    Trace,
    generate_trace,
    random_script,
    slouch_intervals,
    table2_script,
    table2_trace,
)


@dataclass
class TraceResult:
    profile: CalibrationProfile
    events: list[PostureEvent]
    angles: np.ndarray
    stats: ConfusionStats


def evaluate_trace(
    trace: Trace,
    truth: list[TruthInterval],
    config: DetectorConfig | None = None,
    *,
    slack_ms: int = 1000,
    window_ms: int = DEFAULT_WINDOW_MS,
) -> TraceResult:
    config = config or DetectorConfig()
    profile = calibrate(trace, window_ms)
    events, angles = run(trace, config, profile)
    return TraceResult(profile, events, angles, match_events(events, truth, slack_ms))


@dataclass(frozen=True)
class CorpusItem:
    script: MotionScript
    trace: Trace
    truth: list[TruthInterval]


def synthetic_corpus(
    n_traces: int = 100,
    seed: int = 0,
    *,
    rate_hz: float = 100.0,
    noise_deg: float = 1.0,
    peak_range: tuple[float, float] = (15.0, 40.0),
    duration_range: tuple[int, int] = (1000, 8000),
    config: DetectorConfig | None = None,
):
    """Labelled random traces; positives are slouches held past the alert criteria.

    A slouch counts as positive when its commanded angle stays at or above
    the angle threshold for at least the debounce time. Shallower or shorter
    slouches are present in the traces but unlabelled, so alerting on them
    shows up as false positives.
    """
    config = config or DetectorConfig()
    rng = np.random.default_rng(seed)
    for i in range(n_traces):
        script = random_script(rng, peak_range=peak_range, duration_range=duration_range)
        trace = generate_trace(script, rate_hz, noise_deg, 0.0, seed * 100_003 + i)
        truth = slouch_intervals(script, config.angle_threshold_deg, config.debounce_ms)
        yield CorpusItem(script, trace, truth)


def corpus_stats(corpus, config: DetectorConfig | None = None, slack_ms: int = 1000):
    """Pooled confusion counts and total labelled positives over a corpus."""
    config = config or DetectorConfig()
    total = ConfusionStats(0, 0, 0)
    positives = 0
    for item in corpus:
        total = total + evaluate_trace(item.trace, item.truth, config, slack_ms=slack_ms).stats
        positives += len(item.truth)
    return total, positives


REPRO_NOISE_DEG = 1.0
REPRO_HOLD_MS = 5000
REPRO_PEAK_DEG = 30.0


def repro_report(seed: int = 0, rate_hz: float = 100.0) -> str:
    """Text report for the stretched slouch/bend reference scenario."""
    config = DetectorConfig()
    trace, truth = table2_trace(
        rate_hz,
        peak_deg=REPRO_PEAK_DEG,
        lead_in_ms=DEFAULT_WINDOW_MS,
        slouch_hold_ms=REPRO_HOLD_MS,
        bend_hold_ms=REPRO_HOLD_MS,
        noise_deg=REPRO_NOISE_DEG,
        seed=seed,
    )
    res = evaluate_trace(trace, truth, config)
    counts = Counter(e.kind for e in res.events)

    script = table2_script(
        REPRO_PEAK_DEG,
        lead_in_ms=DEFAULT_WINDOW_MS,
        slouch_hold_ms=REPRO_HOLD_MS,
        bend_hold_ms=REPRO_HOLD_MS,
    )
    bends = [s for s in script.segments if s.posture is Posture.BEND]
    vib_kinds = (EventKind.VIBRATE_ON, EventKind.VIBRATE_OFF)
    vib_in_bend = sum(
        1
        for e in res.events
        if e.kind in vib_kinds and any(b.start_ms <= e.timestamp_ms < b.end_ms for b in bends)
    )

    nx, ny, nz = res.profile.reference_normal
    lines = [
        "Slouch versus bend reference scenario",
        f"  rate {rate_hz:g} Hz, seed {seed}, orientation noise {REPRO_NOISE_DEG:g} deg, "
        f"peak {REPRO_PEAK_DEG:g} deg",
        "  segments (ms):",
    ]
    for s in script.segments:
        lines.append(f"    {s.start_ms:>6} - {s.end_ms:>6}  {s.posture.value}")
    lines += [
        "",
        f"Calibration: normal ({nx:.6f}, {ny:.6f}, {nz:.6f}), "
        f"flex baseline {res.profile.flex_baseline_ohms:.0f} ohm, "
        f"spread {res.profile.motion_spread_deg:.3f} deg, {res.profile.sample_count} samples",
        f"Peak thoracic angle: {float(np.max(res.angles)):.3f} deg",
        "",
        "Events:",
    ]
    for e in res.events:
        lines.append(f"  {e.timestamp_ms:>6} ms  {e.kind.value:<11} {e.angle_deg:8.3f} deg")
    lines += [
        "",
        f"SlouchStart={counts[EventKind.SLOUCH_START]} "
        f"VibrateOn={counts[EventKind.VIBRATE_ON]} "
        f"BendStart={counts[EventKind.BEND_START]} "
        f"vibration events during bend={vib_in_bend}",
        "",
        "Scenario evaluation:",
        format_stats(res.stats),
        "",
        reported_trial_note(),
    ]
    return "\n".join(lines) + "\n"
