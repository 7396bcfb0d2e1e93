"""Trace persistence (CSV) and the framed binary sensor link.

Both formats are specified byte-for-byte in ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .detection import EventKind, PostureEvent
from .errors import (
    BadFieldCount,
    InvalidScript,
    MalformedHeader,
    NonMonotonicTimestamp,
    UnparseableNumber,
)
from .evaluation import TruthInterval
from .orientation import Quaternion
from .sensor_models import ImuSample, MotionScript, Posture, Segment, Trace

CSV_COLUMNS = (
    "timestamp_ms",
    "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz",
    "qw", "qx", "qy", "qz",
    "flex_ohms",
)  # fmt: skip
CSV_HEADER = ",".join(CSV_COLUMNS)

SYNC = b"\xaa\x55"
PAYLOAD_LEN = 60
FRAME_LEN = len(SYNC) + 1 + PAYLOAD_LEN + 2
_PAYLOAD = struct.Struct("<I13fI")
assert _PAYLOAD.size == PAYLOAD_LEN


# --------------------------------------------------------------------------- CSV


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def dumps_csv(trace) -> str:
    """Serialise a trace; output is byte-identical for identical input."""
    trace = Trace.from_samples(trace)
    lines = [CSV_HEADER]
    cols = np.column_stack((trace.imu, trace.quat, trace.flex_ohms)).tolist()
    for t, row in zip(trace.timestamp_ms.tolist(), cols):
        lines.append(f"{t}," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def loads_csv(text: str) -> Trace:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise MalformedHeader(f"row 1: expected header {CSV_HEADER!r}")
    ts: list[int] = []
    values: list[list[float]] = []
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise BadFieldCount(f"row {rowno}: {len(row)} fields, expected {len(CSV_COLUMNS)}")
        try:
            t = int(row[0])
        except ValueError:
            raise UnparseableNumber(f"row {rowno}: bad timestamp {row[0]!r}") from None
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise UnparseableNumber(f"row {rowno}: {exc}") from None
        if ts and t <= ts[-1]:
            raise NonMonotonicTimestamp(f"row {rowno}: timestamp {t} does not follow {ts[-1]}")
        ts.append(t)
        values.append(vals)
    if not ts:
        return Trace.empty()
    arr = np.array(values)
    return Trace(ts, arr[:, :9], arr[:, 9:13], arr[:, 13])


def write_csv(trace, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(dumps_csv(trace))


def read_csv(path) -> Trace:
    with open(path, newline="") as f:
        return loads_csv(f.read())


# --------------------------------------------------------------------------- CRC


def crc16_ccitt_bitwise(data: bytes, crc: int = 0xFFFF) -> int:
    """Shift-register reference: poly 0x1021, MSB first, no reflection, no final xor."""
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def _make_table() -> tuple[int, ...]:
    return tuple(crc16_ccitt_bitwise(bytes([i]), 0) for i in range(256))


_CRC_TABLE = _make_table()


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    """Table-driven CRC-16/CCITT (same parameters as the bitwise reference)."""
    table = _CRC_TABLE
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[(crc >> 8) ^ byte]
    return crc


# ------------------------------------------------------------------------ frames


def encode_frame(sample: ImuSample) -> bytes:
    """65-byte frame: sync, length, little-endian payload, big-endian CRC.

    Float channels are narrowed to float32 and flex to the nearest integer ohm.
    """
    q = sample.quat
    payload = _PAYLOAD.pack(
        sample.timestamp_ms,
        sample.ax, sample.ay, sample.az,
        sample.gx, sample.gy, sample.gz,
        sample.mx, sample.my, sample.mz,
        q.b0, q.b1, q.b2, q.b3,
        int(round(sample.flex_ohms)),
    )  # fmt: skip
    body = bytes([PAYLOAD_LEN]) + payload
    return SYNC + body + crc16_ccitt(body).to_bytes(2, "big")


def encode_frames(samples: Iterable[ImuSample]) -> bytes:
    return b"".join(encode_frame(s) for s in samples)


def _decode_payload(payload: bytes) -> ImuSample:
    v = _PAYLOAD.unpack(payload)
    return ImuSample(
        v[0], *v[1:10], quat=Quaternion(v[10], v[11], v[12], v[13]), flex_ohms=float(v[14])
    )


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "BadCrc" | "Truncated" | "BadLength"
    offset: int  # stream offset of the sync word


class FrameDecoder:
    """Incremental, resynchronising frame decoder for one byte stream."""

    def __init__(self):
        self._buf = bytearray()
        self._base = 0  # stream offset of _buf[0]
        self.diagnostics: list[Diagnostic] = []

    def feed(self, data: bytes) -> list[ImuSample]:
        self._buf += data
        out: list[ImuSample] = []
        buf = self._buf
        pos = 0
        while True:
            i = buf.find(SYNC, pos)
            if i < 0:
                # keep a trailing 0xAA that may start the next sync word
                pos = len(buf) - 1 if buf.endswith(SYNC[:1]) else len(buf)
                break
            if len(buf) - i < 3:
                pos = i
                break
            if buf[i + 2] != PAYLOAD_LEN:
                self.diagnostics.append(Diagnostic("BadLength", self._base + i))
                pos = i + 1
                continue
            if len(buf) - i < FRAME_LEN:
                pos = i
                break
            body = bytes(buf[i + 2 : i + 3 + PAYLOAD_LEN])
            crc = int.from_bytes(buf[i + 3 + PAYLOAD_LEN : i + FRAME_LEN], "big")
            if crc16_ccitt(body) != crc:
                self.diagnostics.append(Diagnostic("BadCrc", self._base + i))
                pos = i + 1
                continue
            out.append(_decode_payload(body[1:]))
            pos = i + FRAME_LEN
        del buf[:pos]
        self._base += pos
        return out

    def close(self) -> None:
        """Flag a partial frame left at end of stream."""
        i = self._buf.find(SYNC)
        if i >= 0:
            self.diagnostics.append(Diagnostic("Truncated", self._base + i))
        self._base += len(self._buf)
        self._buf.clear()


def decode_frames(data: bytes) -> tuple[list[ImuSample], list[Diagnostic]]:
    dec = FrameDecoder()
    samples = dec.feed(data)
    dec.close()
    return samples, dec.diagnostics


# ------------------------------------------------------ small CSV side formats


def _read_rows(text: str, header: tuple[str, ...]):
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None or tuple(h.strip() for h in first) != header:
        raise MalformedHeader(f"row 1: expected header {','.join(header)!r}")
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise BadFieldCount(f"row {rowno}: {len(row)} fields, expected {len(header)}")
        yield rowno, [c.strip() for c in row]


def dumps_truth(intervals: Iterable[TruthInterval]) -> str:
    return "start_ms,end_ms\n" + "".join(f"{iv.start_ms},{iv.end_ms}\n" for iv in intervals)


def loads_truth(text: str) -> list[TruthInterval]:
    out = []
    for rowno, (a, b) in _read_rows(text, ("start_ms", "end_ms")):
        try:
            out.append(TruthInterval(int(a), int(b)))
        except ValueError as exc:
            raise UnparseableNumber(f"row {rowno}: {exc}") from None
    return out


SCRIPT_HEADER = ("start_ms", "end_ms", "posture", "peak_angle_deg")


def dumps_script(script: MotionScript) -> str:
    return ",".join(SCRIPT_HEADER) + "\n" + "".join(
        f"{s.start_ms},{s.end_ms},{s.posture.value},{s.peak_angle_deg:g}\n"
        for s in script.segments
    )


def loads_script(text: str) -> MotionScript:
    segs = []
    for rowno, (a, b, posture, peak) in _read_rows(text, SCRIPT_HEADER):
        try:
            p = Posture(posture)
        except ValueError:
            raise InvalidScript(f"row {rowno}: unknown posture {posture!r}") from None
        try:
            segs.append(Segment(int(a), int(b), p, float(peak)))
        except ValueError as exc:
            raise UnparseableNumber(f"row {rowno}: {exc}") from None
    return MotionScript(tuple(segs))


def loads_events(text: str) -> list[PostureEvent]:
    out = []
    for rowno, (t, kind, angle) in _read_rows(text, ("timestamp_ms", "kind", "angle_deg")):
        try:
            out.append(PostureEvent(int(t), EventKind(kind), float(angle)))
        except ValueError as exc:
            raise UnparseableNumber(f"row {rowno}: {exc}") from None
    return out
