"""WAV (RIFF/WAVE, PCM format tag 1) reader/writer for 16- and 24-bit audio."""

from __future__ import annotations

import wave

import numpy as np

from .audio_core import AudioBlock, pcm_from_bytes, pcm_to_bytes
from .audio_format import AudioFormat


def read_wav(path) -> AudioBlock:
    """Load an interleaved PCM WAV file into a single block."""
    with wave.open(str(path), "rb") as w:
        width = w.getsampwidth()
        if width not in (2, 3):
            raise ValueError(f"unsupported sample width {width * 8} bits (want 16 or 24)")
        fmt = AudioFormat(w.getframerate(), width * 8, w.getnchannels())
        raw = w.readframes(w.getnframes())
    return AudioBlock(fmt, pcm_from_bytes(raw, fmt))


def write_wav(path, block: AudioBlock) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(block.format.channels)
        w.setsampwidth(block.format.bytes_per_sample)
        w.setframerate(block.format.sampling_rate_hz)
        w.writeframes(pcm_to_bytes(block.samples, block.format))


def sine_block(
    fmt: AudioFormat,
    num_frames: int,
    freq_hz: float = 1000.0,
    amplitude: float = 0.5,
    start_frame: int = 0,
) -> np.ndarray:
    """Synthetic test tone, identical on every channel, interleaved."""
    peak = (1 << (fmt.bit_depth - 1)) - 1
    n = np.arange(start_frame, start_frame + num_frames, dtype=np.float64)
    mono = np.rint(amplitude * peak * np.sin(2 * np.pi * freq_hz * n / fmt.sampling_rate_hz))
    dtype = np.int16 if fmt.bit_depth == 16 else np.int32
    return np.repeat(mono, fmt.channels).astype(dtype)
