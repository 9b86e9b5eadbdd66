"""IMA ADPCM codec: 4 bits per 16-bit sample with per-block state headers.

Compressed block layout:

    u32 LE   frame count N
    per channel: predictor int16 LE, step_index u8, pad u8
    nibbles  one 4-bit code per sample in frame order (ch0, ch1, ...),
             packed two per byte (low nibble first), zero-padded

The header snapshots the codec state at block start, so any block decodes
without its predecessors.  A streaming encoder carries state across blocks for
smooth prediction; the one-shot functions start from zero state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .audio_format import AudioFormat

STEP_TABLE = (
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17,
    19, 21, 23, 25, 28, 31, 34, 37, 41, 45,
    50, 55, 60, 66, 73, 80, 88, 97, 107, 118,
    130, 143, 157, 173, 190, 209, 230, 253, 279, 307,
    337, 371, 408, 449, 494, 544, 598, 658, 724, 796,
    876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358,
    5894, 6484, 7132, 7845, 8630, 9493, 10442, 11487, 12635, 13899,
    15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767,
)

INDEX_TABLE = (-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8)

BLOCK_COUNT_LEN = 4
STATE_HEADER_LEN = 4  # per channel


class UnsupportedFormatError(ValueError):
    """ADPCM path accepts 16-bit input only."""


@dataclass
class ChannelState:
    predictor: int = 0
    step_index: int = 0


def _encode_sample(sample: int, state: ChannelState) -> int:
    step = STEP_TABLE[state.step_index]
    diff = sample - state.predictor
    code = 0
    if diff < 0:
        code = 8
        diff = -diff
    if diff >= step:
        code |= 4
        diff -= step
    if diff >= step >> 1:
        code |= 2
        diff -= step >> 1
    if diff >= step >> 2:
        code |= 1
    _apply_code(code, state)
    return code


def _apply_code(code: int, state: ChannelState) -> None:
    step = STEP_TABLE[state.step_index]
    diffq = step >> 3
    if code & 4:
        diffq += step
    if code & 2:
        diffq += step >> 1
    if code & 1:
        diffq += step >> 2
    if code & 8:
        predictor = state.predictor - diffq
    else:
        predictor = state.predictor + diffq
    state.predictor = max(-32768, min(32767, predictor))
    state.step_index = max(0, min(88, state.step_index + INDEX_TABLE[code]))


class AdpcmEncoder:
    """Streaming encoder: state carries across blocks, each block self-decodes."""

    def __init__(self, channels: int):
        self.channels = channels
        self.states = [ChannelState() for _ in range(channels)]

    def encode_block(self, samples: np.ndarray) -> bytes:
        """Compress interleaved int16 samples into one independent block."""
        flat = np.asarray(samples).ravel()
        if flat.size % self.channels:
            raise ValueError("sample count not divisible by channel count")
        num_frames = flat.size // self.channels
        parts = [struct.pack("<I", num_frames)]
        for state in self.states:
            parts.append(struct.pack("<hBB", state.predictor, state.step_index, 0))
        codes = bytearray()
        pending = -1
        for i, sample in enumerate(flat.tolist()):
            code = _encode_sample(int(sample), self.states[i % self.channels])
            if pending < 0:
                pending = code
            else:
                codes.append(pending | (code << 4))
                pending = -1
        if pending >= 0:
            codes.append(pending)
        parts.append(bytes(codes))
        return b"".join(parts)


def decode_block(data: bytes, channels: int) -> np.ndarray:
    """Decode one compressed block to interleaved int16 samples."""
    if not data:
        return np.zeros(0, dtype=np.int16)
    head = BLOCK_COUNT_LEN + channels * STATE_HEADER_LEN
    if len(data) < head:
        raise ValueError(f"block shorter than its header: {len(data)} bytes")
    (num_frames,) = struct.unpack_from("<I", data, 0)
    states = []
    for ch in range(channels):
        predictor, step_index, _ = struct.unpack_from(
            "<hBB", data, BLOCK_COUNT_LEN + ch * STATE_HEADER_LEN
        )
        states.append(ChannelState(predictor, step_index))
    total = num_frames * channels
    need = head + (total + 1) // 2
    if len(data) < need:
        raise ValueError(f"block declares {total} samples, data too short")
    out = np.empty(total, dtype=np.int16)
    nibbles = data[head:]
    for i in range(total):
        byte = nibbles[i >> 1]
        code = (byte >> 4) if i & 1 else (byte & 0x0F)
        state = states[i % channels]
        _apply_code(code, state)
        out[i] = state.predictor
    return out


def adpcm_encode(samples: np.ndarray, fmt: AudioFormat) -> bytes:
    """One-shot block compression starting from zero codec state."""
    if fmt.bit_depth != 16:
        raise UnsupportedFormatError(
            f"ADPCM supports 16-bit input only, got bit_depth {fmt.bit_depth}"
        )
    if np.asarray(samples).size == 0:
        return b""
    return AdpcmEncoder(fmt.channels).encode_block(samples)


def adpcm_decode(data: bytes, fmt: AudioFormat) -> np.ndarray:
    if fmt.bit_depth != 16:
        raise UnsupportedFormatError(
            f"ADPCM supports 16-bit output only, got bit_depth {fmt.bit_depth}"
        )
    return decode_block(data, fmt.channels)
