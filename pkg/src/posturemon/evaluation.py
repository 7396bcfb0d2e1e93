"""Matching detector alerts to labelled slouches and sensitivity stats.

An alert is a ``VibrateOn`` event. It matches a labelled slouch when its
timestamp falls inside the slouch interval widened by ``slack_ms`` on each
side. Matching is greedy and one-to-one: alerts are taken in time order and
each claims the earliest still-unmatched interval it falls into. Matched
pairs count as true positives, leftover alerts as false positives, and
leftover intervals as false negatives. There is no natural negative unit in
continuous monitoring, so true negatives (and specificity) are not counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NoPositives, OutOfRange, UnsortedInput

VIBRATE_ON = "VibrateOn"

# Reported sensitivity from the 2-hour wearer trial, next to its raw counts.
REPORTED_TP = 47
REPORTED_FP = 6
REPORTED_FN = 8
REPORTED_POSITIVES = 55
REPORTED_SENSITIVITY_PERCENT = 85.1


@dataclass(frozen=True)
class TruthInterval:
    start_ms: int
    end_ms: int
    label: str = "Slouch"

    def __post_init__(self):
        if not self.start_ms < self.end_ms:
            raise UnsortedInput(f"interval [{self.start_ms}, {self.end_ms}] is empty or reversed")


@dataclass(frozen=True)
class ConfusionStats:
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def positives(self) -> int:
        return self.true_positives + self.false_negatives

    @property
    def sensitivity(self) -> float:
        return sensitivity(self)

    @property
    def sensitivity_fraction(self) -> Fraction:
        if self.positives == 0:
            raise NoPositives("no labelled positives")
        return Fraction(self.true_positives, self.positives)

    def __add__(self, other: ConfusionStats) -> ConfusionStats:
        return ConfusionStats(
            self.true_positives + other.true_positives,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
        )


def from_counts(
    true_positives: int,
    false_positives: int,
    false_negatives: int,
    positives: int | None = None,
) -> ConfusionStats:
    for name, v in (("TP", true_positives), ("FP", false_positives), ("FN", false_negatives)):
        if v < 0:
            raise OutOfRange(f"{name} must be non-negative")
    if positives is not None and positives != true_positives + false_negatives:
        raise OutOfRange(f"positives={positives} but TP+FN={true_positives + false_negatives}")
    return ConfusionStats(true_positives, false_positives, false_negatives)


def sensitivity(stats: ConfusionStats) -> float:
    denom = stats.true_positives + stats.false_negatives
    if denom == 0:
        raise NoPositives("sensitivity is undefined without positives")
    return stats.true_positives / denom


def _alert_times(alerts: Iterable) -> list[int]:
    times = []
    for a in alerts:
        if isinstance(a, (int, float)):
            times.append(a)
        elif getattr(a, "kind", None) == VIBRATE_ON:
            times.append(a.timestamp_ms)
    return times


def validate_truth(truth: Sequence[TruthInterval]) -> None:
    for prev, cur in zip(truth, truth[1:]):
        if cur.start_ms < prev.end_ms:
            raise UnsortedInput(
                f"truth intervals overlap or are unsorted at [{cur.start_ms}, {cur.end_ms}]"
            )


def match_events(
    alerts: Iterable,
    truth: Sequence[TruthInterval],
    slack_ms: int = 1000,
) -> ConfusionStats:
    """Greedy one-to-one matching of alert onsets against truth intervals.

    ``alerts`` may hold posture events (only ``VibrateOn`` ones are used) or
    bare timestamps.
    """
    truth = list(truth)
    validate_truth(truth)
    times = _alert_times(alerts)
    for a, b in zip(times, times[1:]):
        if b < a:
            raise UnsortedInput(f"alert at {b} ms follows alert at {a} ms")

    matched = [False] * len(truth)
    tp = fp = 0
    first_open = 0
    for t in times:
        while first_open < len(truth) and truth[first_open].end_ms + slack_ms < t:
            first_open += 1
        hit = None
        for j in range(first_open, len(truth)):
            iv = truth[j]
            if iv.start_ms - slack_ms > t:
                break
            if not matched[j] and t <= iv.end_ms + slack_ms:
                hit = j
                break
        if hit is None:
            fp += 1
        else:
            matched[hit] = True
            tp += 1
    return ConfusionStats(tp, fp, len(truth) - tp)


def format_stats(stats: ConfusionStats) -> str:
    """Aligned text block: FP, TP, FN, Positives, Sensitivity."""
    if stats.positives:
        sens = f"{stats.sensitivity:.4f} ({100 * stats.sensitivity:.2f}%)"
    else:
        sens = "undefined (no positives)"
    rows = [
        ("False Positive", str(stats.false_positives)),
        ("True Positive", str(stats.true_positives)),
        ("False Negative", str(stats.false_negatives)),
        ("Positives", str(stats.positives)),
        ("Sensitivity", sens),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def stats_csv(stats: ConfusionStats) -> str:
    sens = f"{stats.sensitivity:.6f}" if stats.positives else ""
    return (
        "false_positives,true_positives,false_negatives,positives,sensitivity\n"
        f"{stats.false_positives},{stats.true_positives},{stats.false_negatives},"
        f"{stats.positives},{sens}\n"
    )


def reported_trial_note() -> str:
    """Recomputes the trial's sensitivity from its counts and flags the mismatch."""
    stats = from_counts(REPORTED_TP, REPORTED_FP, REPORTED_FN)
    computed = 100 * stats.sensitivity
    lines = [
        f"Wearer trial counts: TP={REPORTED_TP} FN={REPORTED_FN} FP={REPORTED_FP} "
        f"Positives={REPORTED_POSITIVES}",
        f"Sensitivity from counts: {stats.true_positives}/{stats.positives} = "
        f"{stats.sensitivity:.6f} ({computed:.2f}%)",
        f"Reported sensitivity:    {REPORTED_SENSITIVITY_PERCENT:.1f}%",
    ]
    if abs(computed - REPORTED_SENSITIVITY_PERCENT) >= 0.05:
        lines.append(
            f"NOTE: reported {REPORTED_SENSITIVITY_PERCENT:.1f}% is inconsistent with its own "
            f"counts ({computed:.2f}%)."
        )
    return "\n".join(lines)
