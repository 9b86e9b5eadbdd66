"""Audio pipeline: packing, PCM serialization, concealment, jitter buffer,
and clock-drift compensation.

Sample blocks are interleaved signed integers (channel-major within a frame,
little-endian on the wire).  A block is split into payload chunks that ride in
data frames; the receiver reassembles chunks, conceals anything missing at its
playout deadline, and drains the jitter buffer through an adjustable-rate
cursor that the drift compensator steers.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .audio_format import AudioFormat

PAYLOAD_HEADER_LEN = 8  # u32 block time, u16 sample offset, u16 frame count


class StreamError(ValueError):
    """Malformed payload stream (overlaps, inconsistent metadata, ...)."""


class ConcealPolicy(enum.Enum):
    SILENCE = "silence"
    REPEAT_LAST = "repeat_last"


def _sample_dtype(fmt: AudioFormat):
    return np.int16 if fmt.bit_depth == 16 else np.int32


@dataclass
class AudioBlock:
    """A chunk of interleaved samples with the capture time of its first frame."""

    format: AudioFormat
    samples: np.ndarray
    capture_time_us: int = 0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=_sample_dtype(self.format))
        if self.samples.ndim != 1:
            self.samples = self.samples.ravel()
        if self.samples.size % self.format.channels:
            raise StreamError(
                f"sample count {self.samples.size} not divisible by "
                f"{self.format.channels} channels"
            )

    @property
    def num_frames(self) -> int:
        return self.samples.size // self.format.channels

    @property
    def duration_us(self) -> int:
        return round(self.num_frames * 1_000_000 / self.format.sampling_rate_hz)


def pcm_passthrough(block: AudioBlock) -> bytes:
    """Bit-exact little-endian serialization; the lossless transport mode."""
    return pcm_to_bytes(block.samples, block.format)


def pcm_to_bytes(samples: np.ndarray, fmt: AudioFormat) -> bytes:
    samples = np.asarray(samples)
    if fmt.bit_depth == 16:
        return samples.astype("<i2").tobytes()
    if samples.size and (samples.max(initial=0) > 0x7FFFFF or samples.min(initial=0) < -0x800000):
        raise StreamError("sample out of 24-bit range")
    quads = samples.astype("<i4").view(np.uint8).reshape(-1, 4)
    return quads[:, :3].tobytes()


def pcm_from_bytes(data: bytes, fmt: AudioFormat) -> np.ndarray:
    if fmt.bit_depth == 16:
        return np.frombuffer(data, dtype="<i2").copy()
    if len(data) % 3:
        raise StreamError(f"24-bit PCM byte count {len(data)} not divisible by 3")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
    quads = np.zeros((raw.shape[0], 4), dtype=np.uint8)
    quads[:, :3] = raw
    values = quads.view("<u4").ravel().astype(np.int64)
    values[values >= 1 << 23] -= 1 << 24
    return values.astype(np.int32)


@dataclass(frozen=True)
class AudioPayload:
    """One packed slice of a block: capture-offset metadata plus raw PCM."""

    block_time_us: int
    sample_offset: int  # in sample frames from block start
    num_frames: int
    data: bytes

    def to_bytes(self) -> bytes:
        return (
            struct.pack(
                "<IHH",
                self.block_time_us & 0xFFFFFFFF,
                self.sample_offset,
                self.num_frames,
            )
            + self.data
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "AudioPayload":
        if len(raw) < PAYLOAD_HEADER_LEN:
            raise StreamError(f"payload shorter than metadata header: {len(raw)}")
        block_time, offset, num_frames = struct.unpack_from("<IHH", raw, 0)
        return cls(block_time, offset, num_frames, raw[PAYLOAD_HEADER_LEN:])


def pack_audio(block: AudioBlock, max_payload_bytes: int) -> list[AudioPayload]:
    """Split a block into payloads of at most ``max_payload_bytes`` PCM bytes.

    Payload boundaries always fall on whole sample frames; concatenating the
    payloads reproduces the block bit-exactly.
    """
    frame_bytes = block.format.frame_bytes
    if max_payload_bytes < frame_bytes:
        raise ValueError(
            f"max_payload_bytes {max_payload_bytes} below one sample frame ({frame_bytes})"
        )
    frames_per_payload = max_payload_bytes // frame_bytes
    payloads = []
    for start in range(0, block.num_frames, frames_per_payload):
        stop = min(start + frames_per_payload, block.num_frames)
        chunk = block.samples[start * block.format.channels : stop * block.format.channels]
        payloads.append(
            AudioPayload(
                block.capture_time_us & 0xFFFFFFFF,
                start,
                stop - start,
                pcm_to_bytes(chunk, block.format),
            )
        )
    return payloads


def unpack_audio(
    payloads: list[AudioPayload],
    fmt: AudioFormat,
    expected_frames: int | None = None,
) -> tuple[AudioBlock, list[tuple[int, int]]]:
    """Reassemble payloads into a block; missing ranges are returned as gaps.

    Gap samples are zero-filled in the block and listed as half-open frame
    ranges for the concealment stage.  Overlapping payloads are a protocol
    error.
    """
    if not payloads and expected_frames is None:
        return AudioBlock(fmt, np.zeros(0, dtype=_sample_dtype(fmt))), []
    ordered = sorted(payloads, key=lambda p: p.sample_offset)
    total = expected_frames
    if total is None:
        total = max(p.sample_offset + p.num_frames for p in ordered)
    block_time = ordered[0].block_time_us if ordered else 0
    samples = np.zeros(total * fmt.channels, dtype=_sample_dtype(fmt))
    present = np.zeros(total, dtype=bool)
    for p in ordered:
        if p.block_time_us != block_time:
            raise StreamError(
                f"payload block time {p.block_time_us} != {block_time} in one block"
            )
        end = p.sample_offset + p.num_frames
        if end > total:
            raise StreamError(f"payload range [{p.sample_offset}, {end}) exceeds block")
        if present[p.sample_offset : end].any():
            raise StreamError(f"overlapping payload at frame offset {p.sample_offset}")
        pcm = pcm_from_bytes(p.data, fmt)
        if pcm.size != p.num_frames * fmt.channels:
            raise StreamError(
                f"payload data holds {pcm.size} samples, metadata says "
                f"{p.num_frames * fmt.channels}"
            )
        samples[p.sample_offset * fmt.channels : end * fmt.channels] = pcm
        present[p.sample_offset : end] = True
    gaps = _runs(~present)
    return AudioBlock(fmt, samples, block_time), gaps


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges where ``mask`` is True."""
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(edges[i]), int(edges[i + 1])) for i in range(0, len(edges), 2)]


def conceal(
    gap_frames: int,
    history: np.ndarray | None,
    policy: ConcealPolicy,
    channels: int,
    dtype=np.int16,
) -> np.ndarray:
    """Fill a gap of ``gap_frames`` sample frames; output length equals the gap."""
    if gap_frames <= 0:
        raise ValueError(f"gap length must be positive, got {gap_frames}")
    if policy is ConcealPolicy.REPEAT_LAST and history is not None and len(history):
        last = np.asarray(history).ravel()[-channels:]
        return np.tile(last, gap_frames).astype(dtype)
    return np.zeros(gap_frames * channels, dtype=dtype)


@dataclass
class DriftCompensator:
    """Proportional playout-rate controller keyed on jitter-buffer occupancy."""

    target_occupancy_frames: float
    gain: float = 0.1
    max_adjust_ppm: float = 500.0
    deadband_frames: float = 0.0
    adjustment_ratio: float = 1.0
    measured_drift_ppm: float = 0.0


def compensate_drift(comp: DriftCompensator, occupancy_window) -> float:
    """Update the playout adjustment ratio from an occupancy observation window.

    ratio = 1 + gain * (occupancy - target) / target, clamped to the ppm limit.
    Occupancy above target drains faster (ratio > 1).  With a nonzero deadband
    the ratio snaps to exactly 1.0 for small errors so an on-target stream is
    never resampled.
    """
    window = list(occupancy_window)
    if not window:
        raise ValueError("occupancy window must not be empty")
    occupancy = sum(window) / len(window)
    error = occupancy - comp.target_occupancy_frames
    if abs(error) <= comp.deadband_frames:
        ratio = 1.0
    else:
        ratio = 1.0 + comp.gain * error / comp.target_occupancy_frames
        limit = comp.max_adjust_ppm * 1e-6
        ratio = min(1.0 + limit, max(1.0 - limit, ratio))
    comp.adjustment_ratio = ratio
    comp.measured_drift_ppm = (ratio - 1.0) * 1e6
    return ratio


@dataclass
class ReadResult:
    samples: np.ndarray  # interleaved, num_frames * channels long
    started_blocks: list[tuple[int, float]]  # (block index, fraction into read)
    finished_blocks: list[tuple[int, bool]]  # (block index, concealed?)
    underflow: bool


class JitterBuffer:
    """Time-ordered block store with a fractional playout cursor.

    Payload chunks are inserted by absolute block index; ``read`` drains whole
    output frames, consuming ``ratio`` source frames per output frame via
    linear interpolation (exact copy when the cursor stays integral).  Ranges
    missing at read time are concealed and counted, never silent.
    """

    def __init__(
        self,
        fmt: AudioFormat,
        preset_latency_us: int,
        frames_per_block: int,
        policy: ConcealPolicy = ConcealPolicy.SILENCE,
    ):
        self.format = fmt
        self.preset_latency_us = preset_latency_us
        self.frames_per_block = frames_per_block
        self.policy = policy
        self.target_occupancy_frames = (
            preset_latency_us * fmt.sampling_rate_hz / 1_000_000
        )
        self._payloads: dict[int, list[AudioPayload]] = {}
        self._blocks: dict[int, np.ndarray] = {}
        self._concealed: dict[int, bool] = {}
        self._read_pos = 0.0
        self._arrived_frames = 0
        self._consumed_frames = 0.0
        self._frontier = 0  # one past the highest arrived frame index
        self._last_frame: np.ndarray | None = None
        self.underflow_events = 0
        self.overflow_events = 0
        self.concealment_events = 0

    @property
    def occupancy_frames(self) -> float:
        return self._arrived_frames - self._consumed_frames

    @property
    def read_position_frames(self) -> float:
        return self._read_pos

    def insert(self, block_index: int, payload: AudioPayload) -> None:
        self._payloads.setdefault(block_index, []).append(payload)
        self._arrived_frames += payload.num_frames
        end = block_index * self.frames_per_block + payload.sample_offset + payload.num_frames
        self._frontier = max(self._frontier, end)
        if self.occupancy_frames > 4 * self.target_occupancy_frames:
            self.overflow_events += 1

    def _materialize(self, block_index: int) -> np.ndarray:
        cached = self._blocks.get(block_index)
        if cached is not None:
            return cached
        payloads = self._payloads.get(block_index, [])
        block, gaps = unpack_audio(payloads, self.format, self.frames_per_block)
        samples = block.samples
        channels = self.format.channels
        concealed = bool(gaps)
        for start, stop in gaps:
            history = self._last_frame if start == 0 else samples[: start * channels]
            samples[start * channels : stop * channels] = conceal(
                stop - start, history, self.policy, channels, samples.dtype
            )
            self.concealment_events += 1
        self._blocks[block_index] = samples
        self._concealed[block_index] = concealed
        self._last_frame = samples[-channels:] if samples.size else self._last_frame
        return samples

    def read(self, num_frames: int, ratio: float = 1.0) -> ReadResult:
        channels = self.format.channels
        fpb = self.frames_per_block
        start_pos = self._read_pos
        end_pos = start_pos + num_frames * ratio
        integral = ratio == 1.0 and start_pos == int(start_pos)
        first = int(start_pos)
        last = int(end_pos) if integral else int(np.floor(start_pos + (num_frames - 1) * ratio)) + 1
        underflow = last > self._frontier and num_frames > 0
        if underflow:
            self.underflow_events += 1

        first_block = first // fpb
        last_block = max(first_block, (max(last, first + 1) - 1) // fpb)
        source = np.concatenate(
            [self._materialize(b) for b in range(first_block, last_block + 1)]
        )
        base = first_block * fpb
        if integral:
            lo = (first - base) * channels
            out = source[lo : lo + num_frames * channels].copy()
        else:
            positions = start_pos + np.arange(num_frames) * ratio - base
            frames2d = source.reshape(-1, channels)
            out2d = np.empty((num_frames, channels), dtype=np.float64)
            idx = np.arange(frames2d.shape[0])
            for ch in range(channels):
                out2d[:, ch] = np.interp(positions, idx, frames2d[:, ch].astype(np.float64))
            out = np.rint(out2d).astype(source.dtype).ravel()

        # blocks whose first frame the cursor passes during this read; the
        # cursor range can extend past the fetched source range by a fraction
        consumed = num_frames * ratio
        b_first = int(start_pos // fpb)
        if b_first * fpb < start_pos:
            b_first += 1
        b_last = int(end_pos // fpb)
        if b_last * fpb >= end_pos:
            b_last -= 1
        started = [
            (b, (b * fpb - start_pos) / consumed if consumed else 0.0)
            for b in range(b_first, b_last + 1)
        ]
        finished = []
        for b in list(self._blocks):
            if (b + 1) * fpb <= end_pos:
                finished.append((b, self._concealed[b]))
                del self._blocks[b]
                self._concealed.pop(b, None)
                self._payloads.pop(b, None)
        finished.sort()
        self._read_pos = end_pos
        self._consumed_frames += num_frames * ratio
        return ReadResult(out, started, finished, underflow)
