import random
import struct

import pytest

from gripstream.core import GloveConfig, Side
from gripstream.protocol import (
    BATTERY_LIMIT_MV,
    FRAME_SIZE,
    VOLTAGE_LIMIT_MV,
    CrcMismatchError,
    EncodeError,
    EventKind,
    Frame,
    FrameFormatError,
    StreamEvent,
    SyncLossError,
    crc16,
    decode_frame,
    encode_frame,
    kernel_backend,
    required_bandwidth,
    scan_stream,
    scan_stream_offsets,
)
from gripstream.errors import DomainError

from helpers import frame_run, random_frame, wire


def raw_frame(glove_byte=0x52, seq=0, ts=0, battery=4200, voltages=(0,) * 12) -> bytes:
    """Hand-packed frame with a correct checksum but arbitrary field values."""
    body = struct.pack("<BBHIH12HH", 0xA5, glove_byte, seq, ts, battery, *voltages, 0)
    return body[:34] + crc16(body, 1, 33).to_bytes(2, "little")


def test_crc_check_value():
    # standard check input for CRC-16/CCITT-FALSE
    assert crc16(b"123456789") == 0x29B1
    assert crc16(b"") == 0xFFFF
    assert crc16(bytearray(b"123456789")) == 0x29B1


def test_crc_range_arguments():
    data = b"xx123456789yy"
    assert crc16(data, 2, 9) == 0x29B1
    assert crc16(data, 2) == crc16(data[2:])


def test_frame_wire_size_and_round_trip():
    rng = random.Random(21)
    for _ in range(500):
        frame = random_frame(rng)
        blob = encode_frame(frame)
        assert len(blob) == FRAME_SIZE == 36
        assert blob[0] == 0xA5
        assert decode_frame(blob) == frame


def test_decode_rejects_wrong_length():
    with pytest.raises(FrameFormatError):
        decode_frame(b"\xa5" * 35)
    with pytest.raises(FrameFormatError):
        decode_frame(b"\xa5" * 37)


def test_decode_rejects_bad_sync():
    blob = bytearray(encode_frame(random_frame(random.Random(22))))
    blob[0] = 0x00
    with pytest.raises(SyncLossError):
        decode_frame(bytes(blob))


def test_decode_rejects_bad_crc():
    blob = bytearray(encode_frame(random_frame(random.Random(23))))
    blob[10] ^= 0x01
    with pytest.raises(CrcMismatchError):
        decode_frame(bytes(blob))


def test_decode_rejects_bad_fields_behind_valid_crc():
    with pytest.raises(FrameFormatError):
        decode_frame(raw_frame(glove_byte=0x58))
    with pytest.raises(FrameFormatError):
        decode_frame(raw_frame(battery=BATTERY_LIMIT_MV + 1))
    with pytest.raises(FrameFormatError):
        decode_frame(raw_frame(voltages=(VOLTAGE_LIMIT_MV,) + (0,) * 11))


def test_encode_validates_fields():
    good = random_frame(random.Random(24))
    for bad in (
        Frame("R", 0, 0, 0, (0,) * 12),  # not a Side
        Frame(Side.LEFT, -1, 0, 0, (0,) * 12),
        Frame(Side.LEFT, 0x10000, 0, 0, (0,) * 12),
        Frame(Side.LEFT, 0, -5, 0, (0,) * 12),
        Frame(Side.LEFT, 0, 0, BATTERY_LIMIT_MV + 1, (0,) * 12),
        Frame(Side.LEFT, 0, 0, 0, (0,) * 11),
        Frame(Side.LEFT, 0, 0, 0, (VOLTAGE_LIMIT_MV,) + (0,) * 11),
    ):
        with pytest.raises(EncodeError):
            encode_frame(bad)
    assert decode_frame(encode_frame(good)) == good


def test_scan_clean_stream_has_no_events():
    frames = frame_run(random.Random(25), 3)
    got, events, remainder = scan_stream(wire(frames))
    assert got == frames
    assert events == []
    assert remainder == b""


def test_scan_skips_garbage_with_single_event():
    frames = frame_run(random.Random(26), 1)
    blob = b"\x01\x02\x03\x04\x05" + wire(frames)
    got, events, remainder = scan_stream(blob)
    assert got == frames
    assert events == [StreamEvent(EventKind.SYNC_LOSS, 0)]
    assert remainder == b""


def test_scan_reports_trailing_garbage():
    frames = frame_run(random.Random(27), 1)
    got, events, remainder = scan_stream(wire(frames) + b"zzz")
    assert got == frames
    assert events == [StreamEvent(EventKind.SYNC_LOSS, 36)]
    assert remainder == b""


def test_scan_buffers_partial_frame():
    frames = frame_run(random.Random(28), 2)
    blob = wire(frames)
    got, events, remainder = scan_stream(blob[:50])
    assert got == frames[:1]
    assert events == []
    assert remainder == blob[36:50]
    got2, events2, remainder2 = scan_stream(remainder + blob[50:])
    assert got2 == frames[1:]
    assert events2 == []
    assert remainder2 == b""


def test_scan_chunk_split_never_loses_frames():
    rng = random.Random(29)
    frames = frame_run(rng, 40)
    blob = wire(frames)
    for _ in range(50):
        cut = rng.randrange(len(blob) + 1)
        first, events1, rem = scan_stream(blob[:cut])
        second, events2, rem2 = scan_stream(rem + blob[cut:])
        assert first + second == frames
        assert events1 == events2 == []
        assert rem2 == b""


def test_scan_resyncs_after_crc_damage():
    frames = frame_run(random.Random(30), 3)
    blob = bytearray(wire(frames))
    blob[40] ^= 0xFF  # inside the second frame
    got, events, remainder = scan_stream(bytes(blob))
    # first and third frames survive; the damaged one surfaces as events
    assert got[0] == frames[0]
    assert got[-1] == frames[2]
    assert len(got) == 2
    assert any(e.kind is EventKind.CRC_MISMATCH for e in events)


def test_scan_consumes_field_invalid_frames_whole():
    frames = frame_run(random.Random(31), 1)
    bad = raw_frame(battery=BATTERY_LIMIT_MV + 100)
    got, events, remainder = scan_stream(bad + wire(frames))
    assert got == frames
    assert events == [StreamEvent(EventKind.FORMAT_ERROR, 0)]
    assert remainder == b""


def test_scan_offsets_are_byte_positions():
    frames = frame_run(random.Random(32), 2)
    pairs, events, _ = scan_stream_offsets(b"\x00" + wire(frames))
    assert [off for off, _ in pairs] == [1, 37]
    assert events == [StreamEvent(EventKind.SYNC_LOSS, 0)]


def test_single_bit_flips_never_yield_a_different_frame():
    rng = random.Random(33)
    for _ in range(20):
        frame = random_frame(rng)
        blob = encode_frame(frame)
        for bit in range(FRAME_SIZE * 8):
            damaged = bytearray(blob)
            damaged[bit // 8] ^= 1 << (bit % 8)
            got, _, _ = scan_stream(bytes(damaged))
            assert got == []  # either rejected or buffered, never misread


def test_sequence_gap_event_requires_missing_frames():
    with pytest.raises(DomainError):
        StreamEvent(EventKind.SEQUENCE_GAP, 0, missing_count=0)
    ev = StreamEvent(EventKind.SEQUENCE_GAP, 10, missing_count=3)
    assert ev.missing_count == 3


def test_required_bandwidth_budget():
    cfg = GloveConfig()
    assert required_bandwidth(1, cfg) == 14_400.0
    assert required_bandwidth(2, cfg) == 28_800.0
    assert required_bandwidth(2, cfg) <= 115_200.0
    assert required_bandwidth(1, GloveConfig(sample_period_ms=10.0)) == 28_800.0
    with pytest.raises(DomainError):
        required_bandwidth(0, cfg)


def test_kernel_backend_reports_selection():
    assert kernel_backend() in ("compiled", "pure-python")


def test_backends_agree_on_arbitrary_buffers():
    compiled = pytest.importorskip("gripstream.protocol._codec")
    from gripstream.protocol import _codec_py as pure

    rng = random.Random(34)
    for _ in range(60):
        # buffers mixing valid frames, corruption, and garbage
        parts = []
        for _ in range(rng.randrange(6)):
            roll = rng.random()
            if roll < 0.5:
                parts.append(encode_frame(random_frame(rng)))
            elif roll < 0.8:
                blob = bytearray(encode_frame(random_frame(rng)))
                blob[rng.randrange(36)] ^= 1 << rng.randrange(8)
                parts.append(bytes(blob))
            else:
                parts.append(bytes(rng.randrange(256) for _ in range(rng.randrange(30))))
        buf = b"".join(parts)[: rng.randrange(250)]
        assert compiled.crc16(buf) == pure.crc16(buf)
        items_c, tail_c = compiled.scan_indices(buf)
        items_p, tail_p = pure.scan_indices(buf)
        assert items_c == items_p
        assert tail_c == tail_p
