# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled codec kernels: CRC-16/CCITT-FALSE and frame-boundary scanning.

Behavior must stay identical to gripstream.protocol._codec_py (the constants
below mirror that module); the test suite cross-checks both backends on
random buffers.
"""

from libc.stdint cimport uint8_t, uint16_t, uint32_t

cdef enum:
    SYNC_BYTE = 0xA5
    FRAME_SIZE = 36
    GLOVE_LEFT_BYTE = 0x4C
    GLOVE_RIGHT_BYTE = 0x52
    VOLTAGE_LIMIT_MV = 3300
    BATTERY_LIMIT_MV = 4300

cdef uint16_t[256] _TABLE


cdef void _init_table() noexcept:
    cdef uint32_t crc
    cdef int byte, bit
    for byte in range(256):
        crc = <uint32_t>byte << 8
        for bit in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
        _TABLE[byte] = <uint16_t>crc


_init_table()


cdef inline uint16_t _crc_range(const uint8_t[::1] data, Py_ssize_t start,
                                Py_ssize_t length) noexcept nogil:
    cdef uint16_t crc = 0xFFFF
    cdef Py_ssize_t i
    for i in range(start, start + length):
        crc = <uint16_t>((crc << 8) ^ _TABLE[(crc >> 8) ^ data[i]])
    return crc


cdef inline bint _fields_ok(const uint8_t[::1] buf, Py_ssize_t off) noexcept nogil:
    cdef int k
    cdef uint32_t v
    if buf[off + 1] != GLOVE_LEFT_BYTE and buf[off + 1] != GLOVE_RIGHT_BYTE:
        return 0
    if (buf[off + 8] | (<uint32_t>buf[off + 9] << 8)) > BATTERY_LIMIT_MV:
        return 0
    for k in range(12):
        v = buf[off + 10 + 2 * k] | (<uint32_t>buf[off + 11 + 2 * k] << 8)
        if v >= VOLTAGE_LIMIT_MV:
            return 0
    return 1


def crc16(const uint8_t[::1] data, Py_ssize_t start=0, Py_ssize_t length=-1):
    """CRC-16/CCITT-FALSE over data[start:start+length] (length -1 = to end)."""
    if length < 0:
        length = data.shape[0] - start
    return _crc_range(data, start, length)


def scan_indices(const uint8_t[::1] buf):
    """Locate frame boundaries; see _codec_py.scan_indices for the contract."""
    cdef Py_ssize_t n = buf.shape[0]
    cdef Py_ssize_t i = 0, j
    cdef uint16_t stored
    items = []
    while i < n:
        if buf[i] != SYNC_BYTE:
            items.append((2, i))  # KIND_GARBAGE
            j = i + 1
            while j < n and buf[j] != SYNC_BYTE:
                j += 1
            if j >= n:
                return items, n
            i = j
            continue
        if n - i < FRAME_SIZE:
            return items, i
        stored = <uint16_t>(buf[i + 34] | (<uint16_t>buf[i + 35] << 8))
        if _crc_range(buf, i + 1, 33) != stored:
            items.append((1, i))  # KIND_BAD_CRC
            i += 1
            continue
        if not _fields_ok(buf, i):
            items.append((3, i))  # KIND_BAD_FIELDS
            i += FRAME_SIZE
            continue
        items.append((0, i))  # KIND_FRAME
        i += FRAME_SIZE
    return items, n
