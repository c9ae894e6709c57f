"""Pure-Python codec kernels: CRC-16/CCITT-FALSE and frame-boundary scanning.

This is the fallback for gripstream.protocol._codec (the compiled Cython
module). Both expose the same two functions with identical behavior; the
test suite cross-checks them on random buffers. Buffers must be bytes or
bytearray.
"""

SYNC_BYTE = 0xA5
FRAME_SIZE = 36
GLOVE_LEFT_BYTE = 0x4C
GLOVE_RIGHT_BYTE = 0x52
VOLTAGE_LIMIT_MV = 3300
BATTERY_LIMIT_MV = 4300

# scan_indices item kinds
KIND_FRAME = 0
KIND_BAD_CRC = 1
KIND_GARBAGE = 2
KIND_BAD_FIELDS = 3


def _build_table() -> tuple[int, ...]:
    # CRC-16/CCITT-FALSE: poly 0x1021, MSB first, init 0xFFFF, no final xor
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_TABLE = _build_table()


def crc16(data, start: int = 0, length: int = -1) -> int:
    """CRC-16/CCITT-FALSE over data[start:start+length] (length -1 = to end)."""
    if length < 0:
        length = len(data) - start
    crc = 0xFFFF
    table = _TABLE
    for i in range(start, start + length):
        crc = ((crc << 8) & 0xFFFF) ^ table[(crc >> 8) ^ data[i]]
    return crc


def _fields_ok(buf, off: int) -> bool:
    b = buf[off + 1]
    if b != GLOVE_LEFT_BYTE and b != GLOVE_RIGHT_BYTE:
        return False
    if buf[off + 8] | (buf[off + 9] << 8) > BATTERY_LIMIT_MV:
        return False
    for k in range(12):
        p = off + 10 + 2 * k
        if buf[p] | (buf[p + 1] << 8) >= VOLTAGE_LIMIT_MV:
            return False
    return True


def scan_indices(buf) -> tuple[list[tuple[int, int]], int]:
    """Locate frame boundaries in a raw buffer.

    Returns (items, tail) where each item is (kind, offset):
      KIND_FRAME      valid 36-byte frame at offset (consumed whole),
      KIND_BAD_CRC    sync byte at offset but checksum failed (resync +1),
      KIND_GARBAGE    run of non-sync bytes starting at offset (skipped),
      KIND_BAD_FIELDS checksum-valid frame with out-of-range fields
                      (consumed whole),
    and tail is the offset of the unconsumed trailing bytes: a partial frame
    starting with a sync byte, or len(buf) if everything was consumed.
    """
    items: list[tuple[int, int]] = []
    n = len(buf)
    i = 0
    while i < n:
        if buf[i] != SYNC_BYTE:
            items.append((KIND_GARBAGE, i))
            j = buf.find(b"\xa5", i)
            if j < 0:
                return items, n
            i = j
            continue
        if n - i < FRAME_SIZE:
            return items, i
        stored = buf[i + 34] | (buf[i + 35] << 8)
        if crc16(buf, i + 1, 33) != stored:
            items.append((KIND_BAD_CRC, i))
            i += 1
            continue
        if not _fields_ok(buf, i):
            items.append((KIND_BAD_FIELDS, i))
            i += FRAME_SIZE
            continue
        items.append((KIND_FRAME, i))
        i += FRAME_SIZE
    return items, n
