"""Wire format and codec for glove telemetry frames.

One frame carries all 12 sensor channels of one glove for one 20 ms
acquisition tick. Layout (36 bytes, little-endian):

    offset  size  field
    0       1     sync byte 0xA5
    1       1     glove id: 0x4C left, 0x52 right
    2       2     sequence counter, u16, wraps at 65536
    4       4     timestamp, milliseconds since session start, u32
    8       2     battery level, millivolts, u16 (<= 4300)
    10      24    12 x sensor voltage, millivolts, u16, channels S1..S12
                  (each < 3300, the supply rail)
    34      2     CRC-16/CCITT-FALSE over bytes 1..33

At 50 Hz one glove needs 36 * 8 * 50 = 14,400 bps, so a pair fits a
115,200 bps serial-class link with ample margin.

Decoding never trusts a damaged buffer: a frame is only accepted when sync
byte, checksum, and field ranges all validate, and scan_stream resynchronizes
on the next sync byte after any corruption, reporting what it skipped as
StreamEvents.

The byte-level kernels (checksum, boundary scan) come from a compiled Cython
module when available, with a pure-Python fallback; set GRIPSTREAM_PURE=1 to
force the fallback. kernel_backend() reports which one is active.
"""

import os
import struct
from dataclasses import dataclass
from enum import Enum

from gripstream.core import GloveConfig, Side
from gripstream.errors import DomainError, GripstreamError

from gripstream.protocol import _codec_py

if os.environ.get("GRIPSTREAM_PURE"):
    _kernel = _codec_py
    _BACKEND = "pure-python"
else:
    try:
        from gripstream.protocol import _codec as _kernel  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        _kernel = _codec_py
        _BACKEND = "pure-python"

SYNC_BYTE = _codec_py.SYNC_BYTE
FRAME_SIZE = _codec_py.FRAME_SIZE
VOLTAGE_LIMIT_MV = _codec_py.VOLTAGE_LIMIT_MV
BATTERY_LIMIT_MV = _codec_py.BATTERY_LIMIT_MV

GLOVE_BYTE = {Side.LEFT: _codec_py.GLOVE_LEFT_BYTE, Side.RIGHT: _codec_py.GLOVE_RIGHT_BYTE}
BYTE_GLOVE = {v: k for k, v in GLOVE_BYTE.items()}

_STRUCT = struct.Struct("<BBHIH12HH")
assert _STRUCT.size == FRAME_SIZE


def kernel_backend() -> str:
    """Name of the active codec kernel: 'compiled' or 'pure-python'."""
    return _BACKEND


def crc16(data, start: int = 0, length: int = -1) -> int:
    return _kernel.crc16(data, start, length)


class CodecError(GripstreamError):
    """Base class for frame encoding/decoding failures."""


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    pass


class SyncLossError(DecodeError):
    pass


class CrcMismatchError(DecodeError):
    pass


class FrameFormatError(DecodeError):
    pass


class EventKind(Enum):
    FRAME_DECODED = "frame_decoded"
    CRC_MISMATCH = "crc_mismatch"
    SYNC_LOSS = "sync_loss"
    SEQUENCE_GAP = "sequence_gap"
    DUPLICATE_FRAME = "duplicate_frame"
    FORMAT_ERROR = "format_error"
    OUT_OF_ORDER = "out_of_order"


@dataclass(frozen=True)
class StreamEvent:
    """Anomaly (or milestone) observed while consuming a byte stream."""

    kind: EventKind
    at_byte_offset: int
    missing_count: int = 0

    def __post_init__(self):
        if self.kind is EventKind.SEQUENCE_GAP and self.missing_count < 1:
            raise DomainError("sequence gap must report at least one missing frame")


@dataclass(frozen=True)
class Frame:
    """One 50 Hz transmission unit for one glove."""

    glove: Side
    seq: int
    timestamp_ms: int
    battery_mv: int
    voltages_mv: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "voltages_mv", tuple(int(v) for v in self.voltages_mv))

    def validate(self) -> None:
        if not isinstance(self.glove, Side):
            raise EncodeError(f"glove must be a Side, got {self.glove!r}")
        if not 0 <= self.seq <= 0xFFFF:
            raise EncodeError(f"sequence {self.seq} outside u16 range")
        if not 0 <= self.timestamp_ms <= 0xFFFFFFFF:
            raise EncodeError(f"timestamp {self.timestamp_ms} outside u32 range")
        if not 0 <= self.battery_mv <= BATTERY_LIMIT_MV:
            raise EncodeError(f"battery {self.battery_mv} mV outside [0, {BATTERY_LIMIT_MV}]")
        if len(self.voltages_mv) != 12:
            raise EncodeError(f"expected 12 voltages, got {len(self.voltages_mv)}")
        for i, v in enumerate(self.voltages_mv):
            if not 0 <= v < VOLTAGE_LIMIT_MV:
                raise EncodeError(f"S{i + 1} voltage {v} mV outside [0, {VOLTAGE_LIMIT_MV})")


def encode_frame(frame: Frame) -> bytes:
    """Serialize a frame to its 36-byte wire form."""
    frame.validate()
    body = _STRUCT.pack(
        SYNC_BYTE,
        GLOVE_BYTE[frame.glove],
        frame.seq,
        frame.timestamp_ms,
        frame.battery_mv,
        *frame.voltages_mv,
        0,
    )
    crc = _kernel.crc16(body, 1, 33)
    return body[:34] + crc.to_bytes(2, "little")


def _frame_at(buf: bytes, off: int) -> Frame:
    # caller guarantees the 36 bytes at off passed sync/CRC/field checks
    fields = _STRUCT.unpack_from(buf, off)
    return Frame(
        glove=BYTE_GLOVE[fields[1]],
        seq=fields[2],
        timestamp_ms=fields[3],
        battery_mv=fields[4],
        voltages_mv=tuple(fields[5:17]),
    )


def decode_frame(data: bytes) -> Frame:
    """Decode exactly one 36-byte frame; raise instead of guessing.

    SyncLossError for a bad sync byte, CrcMismatchError for a failed
    checksum, FrameFormatError for anything else (wrong length, unknown
    glove id, out-of-range fields).
    """
    buf = bytes(data)
    if len(buf) != FRAME_SIZE:
        raise FrameFormatError(f"frame must be {FRAME_SIZE} bytes, got {len(buf)}")
    if buf[0] != SYNC_BYTE:
        raise SyncLossError(f"expected sync byte 0x{SYNC_BYTE:02X}, got 0x{buf[0]:02X}")
    stored = buf[34] | (buf[35] << 8)
    computed = _kernel.crc16(buf, 1, 33)
    if stored != computed:
        raise CrcMismatchError(f"checksum 0x{stored:04X} != computed 0x{computed:04X}")
    fields = _STRUCT.unpack(buf)
    if fields[1] not in BYTE_GLOVE:
        raise FrameFormatError(f"unknown glove id 0x{fields[1]:02X}")
    if fields[4] > BATTERY_LIMIT_MV:
        raise FrameFormatError(f"battery {fields[4]} mV above {BATTERY_LIMIT_MV}")
    for i, v in enumerate(fields[5:17]):
        if v >= VOLTAGE_LIMIT_MV:
            raise FrameFormatError(f"S{i + 1} voltage {v} mV not below {VOLTAGE_LIMIT_MV}")
    return _frame_at(buf, 0)


_EVENT_FOR_KIND = {
    _codec_py.KIND_BAD_CRC: EventKind.CRC_MISMATCH,
    _codec_py.KIND_GARBAGE: EventKind.SYNC_LOSS,
    _codec_py.KIND_BAD_FIELDS: EventKind.FORMAT_ERROR,
}


def scan_stream_offsets(
    buffer,
) -> tuple[list[tuple[int, Frame]], list[StreamEvent], bytes]:
    """Like scan_stream but pairs each frame with its byte offset."""
    buf = bytes(buffer)
    items, tail = _kernel.scan_indices(buf)
    frames: list[tuple[int, Frame]] = []
    events: list[StreamEvent] = []
    for kind, off in items:
        if kind == _codec_py.KIND_FRAME:
            frames.append((off, _frame_at(buf, off)))
        else:
            events.append(StreamEvent(_EVENT_FOR_KIND[kind], off))
    return frames, events, buf[tail:]


def scan_stream(buffer) -> tuple[list[Frame], list[StreamEvent], bytes]:
    """Extract every intact frame from a buffer, resynchronizing past damage.

    Returns (frames, events, remainder). Garbage runs surface as one
    SYNC_LOSS event each, failed checksums as CRC_MISMATCH (scan resumes one
    byte later), checksum-valid frames with out-of-range fields as
    FORMAT_ERROR. The remainder is a trailing partial frame, to be fed back
    with the next chunk.
    """
    frames, events, remainder = scan_stream_offsets(buffer)
    return [f for _, f in frames], events, remainder


def required_bandwidth(gloves: int, cfg: GloveConfig) -> float:
    """Link budget in bits per second for the given number of gloves."""
    if gloves < 1:
        raise DomainError(f"need at least one glove, got {gloves}")
    return gloves * FRAME_SIZE * 8 * (1000.0 / cfg.sample_period_ms)
