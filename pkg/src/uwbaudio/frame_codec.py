"""Bit-exact encoder/decoder for the wireless core's three frame types.

On-wire layout (little-endian multi-byte fields):

====================================================================
| Offset | Size | Field           | Notes                          |
|--------|------|-----------------|--------------------------------|
| 0      | 1    | frame_type      | 1=Data, 2=Sync, 3=Ack          |
| 1      | 1    | network_id      |                                |
| 2      | 1    | connection_id   |                                |
| 3      | 1    | flags           | carried opaquely               |
| 4      | 2    | sequence        | uint16, wrapping               |
| 6      | 4    | timestamp_ticks | uint32 sender clock, 1 us tick |
| 10     | 2    | payload_len     | uint16 bytes                   |
| 12     | 2    | header_pad      | reserved, zero on encode       |
| 14     | 4    | mac_reserved    | MAC-layer bytes, opaque        |
| 18     | N    | payload         | payload_len bytes              |
| 18+N   | 2    | crc             | CRC-16/CCITT-FALSE, uint16 LE  |
====================================================================

Header is 14 bytes; the CRC covers header + mac_reserved + payload, so every
encoded frame is 20 + payload_len bytes.  Ack frames never carry a payload;
Sync frames are header-only when the transmit queue is empty.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

HEADER_LEN = 14
MAC_RESERVED_LEN = 4
CRC_LEN = 2
MIN_FRAME_LEN = HEADER_LEN + MAC_RESERVED_LEN + CRC_LEN  # 20 bytes
MAX_PAYLOAD_LEN = 0xFFFF

_HEADER_STRUCT = struct.Struct("<BBBBHIHH")


class FrameType(enum.IntEnum):
    DATA = 1
    SYNC = 2
    ACK = 3


class FrameCodecError(Exception):
    """Base class for frame encode/decode failures."""


class TruncationError(FrameCodecError):
    """Buffer shorter than the declared frame length."""


class IntegrityError(FrameCodecError):
    """CRC mismatch on decode."""


class ProtocolError(FrameCodecError):
    """Structurally invalid frame (unknown type, bad payload rules, ...)."""


@dataclass(frozen=True)
class FrameHeader:
    frame_type: FrameType
    network_id: int
    connection_id: int
    sequence: int
    timestamp_ticks: int
    payload_len: int
    flags: int = 0

    def __post_init__(self) -> None:
        for name, width in (
            ("network_id", 8),
            ("connection_id", 8),
            ("flags", 8),
            ("sequence", 16),
            ("payload_len", 16),
            ("timestamp_ticks", 32),
        ):
            value = getattr(self, name)
            if not 0 <= value < (1 << width):
                raise ProtocolError(f"{name} out of range for {width}-bit field: {value}")
        if self.frame_type not in (FrameType.DATA, FrameType.SYNC, FrameType.ACK):
            raise ProtocolError(f"unknown frame_type {self.frame_type!r}")
        if self.frame_type is FrameType.ACK and self.payload_len != 0:
            raise ProtocolError("Ack frames must not carry a payload")


@dataclass(frozen=True)
class Frame:
    header: FrameHeader
    mac_reserved: bytes = b"\x00" * MAC_RESERVED_LEN
    payload: bytes = b""

    def __post_init__(self) -> None:
        if len(self.mac_reserved) != MAC_RESERVED_LEN:
            raise ProtocolError(
                f"mac_reserved must be {MAC_RESERVED_LEN} bytes, got {len(self.mac_reserved)}"
            )
        if len(self.payload) != self.header.payload_len:
            raise ProtocolError(
                f"payload length {len(self.payload)} does not match "
                f"header payload_len {self.header.payload_len}"
            )

    @property
    def encoded_length(self) -> int:
        return MIN_FRAME_LEN + self.header.payload_len


def data_frame(
    network_id: int,
    connection_id: int,
    sequence: int,
    timestamp_ticks: int,
    payload: bytes,
    flags: int = 0,
    mac_reserved: bytes = b"\x00" * MAC_RESERVED_LEN,
) -> Frame:
    header = FrameHeader(
        FrameType.DATA, network_id, connection_id, sequence,
        timestamp_ticks, len(payload), flags,
    )
    return Frame(header, mac_reserved, payload)


def sync_frame(
    network_id: int,
    connection_id: int,
    sequence: int,
    timestamp_ticks: int,
    flags: int = 0,
) -> Frame:
    header = FrameHeader(
        FrameType.SYNC, network_id, connection_id, sequence, timestamp_ticks, 0, flags
    )
    return Frame(header)


def ack_frame(
    network_id: int,
    connection_id: int,
    sequence: int,
    timestamp_ticks: int,
    flags: int = 0,
) -> Frame:
    header = FrameHeader(
        FrameType.ACK, network_id, connection_id, sequence, timestamp_ticks, 0, flags
    )
    return Frame(header)


def _make_crc16_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return tuple(table)


_CRC16_TABLE = _make_crc16_table()


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC16_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


def encode_frame(frame: Frame) -> bytes:
    """Canonical wire bytes for a frame; the CRC is always recomputed."""
    hdr = frame.header
    body = _HEADER_STRUCT.pack(
        int(hdr.frame_type),
        hdr.network_id,
        hdr.connection_id,
        hdr.flags,
        hdr.sequence,
        hdr.timestamp_ticks,
        hdr.payload_len,
        0,
    ) + frame.mac_reserved + frame.payload
    return body + struct.pack("<H", crc16_ccitt(body))


def decode_frame(data: bytes) -> Frame:
    """Inverse of :func:`encode_frame`; rejects truncated or corrupted buffers."""
    if len(data) < MIN_FRAME_LEN:
        raise TruncationError(
            f"frame requires at least {MIN_FRAME_LEN} bytes, got {len(data)}"
        )
    (
        raw_type,
        network_id,
        connection_id,
        flags,
        sequence,
        timestamp_ticks,
        payload_len,
        _pad,
    ) = _HEADER_STRUCT.unpack_from(data, 0)
    total = MIN_FRAME_LEN + payload_len
    if len(data) < total:
        raise TruncationError(f"frame declares {total} bytes, buffer has {len(data)}")
    if len(data) > total:
        raise ProtocolError(f"{len(data) - total} trailing bytes after frame")
    body = data[: total - CRC_LEN]
    (crc,) = struct.unpack_from("<H", data, total - CRC_LEN)
    expected = crc16_ccitt(body)
    if crc != expected:
        raise IntegrityError(f"crc mismatch: got 0x{crc:04x}, expected 0x{expected:04x}")
    try:
        frame_type = FrameType(raw_type)
    except ValueError:
        raise ProtocolError(f"unknown frame_type {raw_type}") from None
    header = FrameHeader(
        frame_type, network_id, connection_id, sequence,
        timestamp_ticks, payload_len, flags,
    )
    mac_reserved = data[HEADER_LEN : HEADER_LEN + MAC_RESERVED_LEN]
    payload = data[HEADER_LEN + MAC_RESERVED_LEN : total - CRC_LEN]
    return Frame(header, mac_reserved, payload)


def frame_airtime_us(encoded_length: int, phy_rate_bps: int) -> int:
    """On-air duration of ``encoded_length`` bytes, rounded up to whole us."""
    if phy_rate_bps <= 0:
        raise ValueError(f"phy_rate_bps must be positive, got {phy_rate_bps}")
    bits = encoded_length * 8
    return -(-bits * 1_000_000 // phy_rate_bps)


def frame_airtime(frame: Frame, phy_rate_bps: int) -> int:
    return frame_airtime_us(frame.encoded_length, phy_rate_bps)


def frames_to_hex(frames) -> str:
    """Golden-vector hex dump: one frame per line, lowercase, no separators."""
    return "\n".join(encode_frame(f).hex() for f in frames) + "\n"


def frames_from_hex(text: str) -> list[Frame]:
    return [decode_frame(bytes.fromhex(line)) for line in text.split() if line]
