"""Wearable posture monitoring: thoracic angle, slouch/bend detection, evaluation."""

from .calibration import CalibrationProfile, calibrate
from .detection import DetectorConfig, DetectorState, EventKind, PostureEvent, run, step
from .evaluation import ConfusionStats, TruthInterval, match_events, sensitivity
from .orientation import Quaternion, quat_to_dcm, sensor_normal, thoracic_angle
from .sensor_models import ImuSample, MotionScript, Posture, Trace, generate_trace

__all__ = [
    "CalibrationProfile",
    "ConfusionStats",
    "DetectorConfig",
    "DetectorState",
    "EventKind",
    "ImuSample",
    "MotionScript",
    "Posture",
    "PostureEvent",
    "Quaternion",
    "Trace",
    "TruthInterval",
    "calibrate",
    "generate_trace",
    "match_events",
    "quat_to_dcm",
    "run",
    "sensitivity",
    "sensor_normal",
    "step",
    "thoracic_angle",
]

__version__ = "0.1.0"
