import binascii
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posturemon.detection import EventKind, PostureEvent
from posturemon.errors import (
    BadFieldCount,
    InvalidScript,
    MalformedHeader,
    NonMonotonicTimestamp,
    UnparseableNumber,
)
from posturemon.evaluation import TruthInterval
from posturemon.orientation import Quaternion
from posturemon.sensor_models import ImuSample, Trace, generate_trace, random_script, table2_script
from posturemon.traceio import (
    CSV_HEADER,
    FRAME_LEN,
    FrameDecoder,
    crc16_ccitt,
    crc16_ccitt_bitwise,
    decode_frames,
    dumps_csv,
    dumps_script,
    dumps_truth,
    encode_frame,
    encode_frames,
    loads_csv,
    loads_events,
    loads_script,
    loads_truth,
    read_csv,
    write_csv,
)


def f32(x):
    return float(np.float32(x))


def random_samples(rng, n):
    """Samples whose fields are exactly representable on the wire."""
    vals = rng.normal(0, 50, size=(n, 9)).astype(np.float32).astype(float)
    q = rng.normal(size=(n, 4))
    q = (q / np.linalg.norm(q, axis=1, keepdims=True)).astype(np.float32).astype(float)
    ts = np.cumsum(rng.integers(1, 20, size=n))
    flex = rng.integers(1000, 200_000, size=n)
    return [
        ImuSample(int(ts[i]), *vals[i].tolist(), quat=Quaternion(*q[i].tolist()),
                  flex_ohms=float(flex[i]))
        for i in range(n)
    ]  # fmt: skip


# ---- CSV -----------------------------------------------------------------


def test_csv_round_trip(rng, tmp_path):
    tr = generate_trace(random_script(rng), 100.0, 1.0, 0.3, 5)
    path = tmp_path / "t.csv"
    write_csv(tr, path)
    back = read_csv(path)
    assert np.array_equal(back.timestamp_ms, tr.timestamp_ms)
    assert np.max(np.abs(back.imu - tr.imu)) < 1e-6
    assert np.max(np.abs(back.quat - tr.quat)) < 1e-6
    assert np.max(np.abs(back.flex_ohms - tr.flex_ohms)) < 1e-6 * 1e5


def test_csv_empty_trace():
    text = dumps_csv(Trace.empty())
    assert text == CSV_HEADER + "\n"
    assert len(loads_csv(text)) == 0


def test_csv_is_byte_deterministic(rng):
    tr = generate_trace(table2_script(), 100.0, 1.0, 0.0, 9)
    assert dumps_csv(tr).encode() == dumps_csv(tr).encode()
    assert dumps_csv(tr) == dumps_csv(loads_csv(dumps_csv(tr)))


def three_rows(rng):
    tr = generate_trace(table2_script(), 100.0, 0.0, 0.0, 0)[:3]
    return dumps_csv(tr).splitlines()


def test_csv_duplicate_timestamp_names_row(rng):
    lines = three_rows(rng)
    fields = lines[3].split(",")
    fields[0] = lines[2].split(",")[0]
    lines[3] = ",".join(fields)
    with pytest.raises(NonMonotonicTimestamp, match="row 4"):
        loads_csv("\n".join(lines))


def test_csv_header_and_field_errors(rng):
    lines = three_rows(rng)
    with pytest.raises(MalformedHeader):
        loads_csv("\n".join(["timestamp,ax"] + lines[1:]))
    with pytest.raises(MalformedHeader):
        loads_csv("")
    short = lines[:2] + [lines[2].rsplit(",", 1)[0]]
    with pytest.raises(BadFieldCount, match="row 3"):
        loads_csv("\n".join(short))
    bad = lines[:3] + [lines[3].replace(",", ",abc,", 1).rsplit(",", 1)[0]]
    with pytest.raises(UnparseableNumber, match="row 4"):
        loads_csv("\n".join(bad))


# ---- CRC -----------------------------------------------------------------


def test_crc_reference_value():
    assert crc16_ccitt_bitwise(b"123456789") == 0x29B1
    assert crc16_ccitt(b"123456789") == 0x29B1
    assert binascii.crc_hqx(b"123456789", 0xFFFF) == 0x29B1


@given(st.binary(max_size=200))
def test_crc_implementations_agree(data):
    ref = binascii.crc_hqx(data, 0xFFFF)
    assert crc16_ccitt_bitwise(data) == ref
    assert crc16_ccitt(data) == ref


# ---- frames --------------------------------------------------------------


def test_frame_layout():
    s = ImuSample(0x01020304, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0,
                  Quaternion(1.0, 0.0, 0.0, 0.0), 33_000.0)  # fmt: skip
    frame = encode_frame(s)
    assert len(frame) == FRAME_LEN == 65
    assert frame[:3] == b"\xaa\x55\x3c"
    assert frame[3:7] == b"\x04\x03\x02\x01"
    assert frame[7:11] == struct.pack("<f", 1.0)
    assert frame[59:63] == struct.pack("<I", 33_000)
    assert int.from_bytes(frame[63:], "big") == binascii.crc_hqx(frame[2:63], 0xFFFF)


def test_frame_round_trip_exact(rng):
    samples = random_samples(rng, 500)
    got, diags = decode_frames(encode_frames(samples))
    assert got == samples and diags == []


def test_frame_signed_zero_round_trip():
    s = ImuSample(5, -0.0, 0.0, 1.0, 0, 0, 0, 0, 0, 0, Quaternion(1.0, -0.0, 0.0, 0.0), 10_000.0)
    back = decode_frames(encode_frame(s))[0][0]
    assert encode_frame(back) == encode_frame(s)
    assert str(back.ax) == "-0.0"


def clean_sample(rng):
    while True:
        s = random_samples(rng, 1)[0]
        if b"\xaa\x55" not in encode_frame(s)[2:]:
            return s


def test_single_flipped_byte_gives_one_bad_crc(rng):
    frame = bytearray(encode_frame(clean_sample(rng)))
    frame[20] ^= 0x01
    samples, diags = decode_frames(bytes(frame))
    assert samples == []
    assert [(d.kind, d.offset) for d in diags] == [("BadCrc", 0)]


def test_bad_length_and_truncation(rng):
    good = encode_frame(clean_sample(rng))
    bad_len = b"\xaa\x55\x10" + good[3:]
    samples, diags = decode_frames(bad_len + good + good[:30])
    assert len(samples) == 1
    kinds = [d.kind for d in diags]
    assert kinds[0] == "BadLength" and diags[0].offset == 0
    assert kinds[-1] == "Truncated" and diags[-1].offset == 2 * FRAME_LEN


def test_streaming_feed_matches_batch(rng):
    samples = random_samples(rng, 200)
    data = encode_frames(samples)
    dec = FrameDecoder()
    got = []
    pos = 0
    while pos < len(data):
        n = int(rng.integers(1, 100))
        got += dec.feed(data[pos : pos + n])
        pos += n
    dec.close()
    assert got == samples and dec.diagnostics == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recovers_every_intact_frame(seed):
    rng = np.random.default_rng(seed)
    samples = random_samples(rng, 60)
    frames = [bytearray(encode_frame(s)) for s in samples]
    bad = set(rng.choice(60, size=6, replace=False).tolist())
    for i in bad:
        frames[i][int(rng.integers(3, FRAME_LEN))] ^= int(rng.integers(1, 256))
    noise = [bytes(rng.integers(0, 256, size=int(rng.integers(0, 5)), dtype=np.uint8))
             for _ in frames]  # fmt: skip
    stream = b"".join(bytes(f) + n for f, n in zip(frames, noise))
    got, _ = decode_frames(stream)
    intact = [s for i, s in enumerate(samples) if i not in bad]
    assert [s for s in got if s in intact] == intact


# ---- side formats --------------------------------------------------------


def test_truth_script_and_event_files():
    truth = [TruthInterval(1000, 2400), TruthInterval(5000, 9000)]
    assert loads_truth(dumps_truth(truth)) == truth
    script = table2_script(lead_in_ms=2000)
    assert loads_script(dumps_script(script)) == script
    events = loads_events("timestamp_ms,kind,angle_deg\n3000,VibrateOn,25.5\n")
    assert events == [PostureEvent(3000, EventKind.VIBRATE_ON, 25.5)]
    with pytest.raises(InvalidScript):
        loads_script("start_ms,end_ms,posture,peak_angle_deg\n0,100,Lying,0\n")
    with pytest.raises(UnparseableNumber):
        loads_truth("start_ms,end_ms\n0,abc\n")
    with pytest.raises(MalformedHeader):
        loads_events("t,k,a\n")
