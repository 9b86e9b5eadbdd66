"""IMA ADPCM codec against an independent reference implementation."""

import struct

import numpy as np
import pytest

from uwbaudio.adpcm import (
    AdpcmEncoder,
    UnsupportedFormatError,
    adpcm_decode,
    adpcm_encode,
    decode_block,
)
from uwbaudio.audio_format import AudioFormat

FMT_MONO = AudioFormat(48000, 16, 1)
FMT_STEREO = AudioFormat(48000, 16, 2)


# --- reference oracle: straight transliteration of the standard algorithm ---

REF_STEP = [
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 19, 21, 23, 25, 28, 31, 34, 37,
    41, 45, 50, 55, 60, 66, 73, 80, 88, 97, 107, 118, 130, 143, 157, 173,
    190, 209, 230, 253, 279, 307, 337, 371, 408, 449, 494, 544, 598, 658,
    724, 796, 876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358, 5894, 6484,
    7132, 7845, 8630, 9493, 10442, 11487, 12635, 13899, 15289, 16818,
    18500, 20350, 22385, 24623, 27086, 29794, 32767,
]
REF_INDEX = [-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8]


def ref_decode_nibble(code, predictor, index):
    step = REF_STEP[index]
    diff = step >> 3
    if code & 4:
        diff += step
    if code & 2:
        diff += step >> 1
    if code & 1:
        diff += step >> 2
    if code & 8:
        predictor -= diff
    else:
        predictor += diff
    predictor = max(-32768, min(32767, predictor))
    index = max(0, min(88, index + REF_INDEX[code]))
    return predictor, index


def ref_decode_block(data: bytes, channels: int) -> np.ndarray:
    """Independent decoder for the block layout: count, state headers, nibbles."""
    if not data:
        return np.zeros(0, dtype=np.int16)
    (num_frames,) = struct.unpack_from("<I", data, 0)
    states = []
    for ch in range(channels):
        pred, idx, _pad = struct.unpack_from("<hBB", data, 4 + 4 * ch)
        states.append([pred, idx])
    total = num_frames * channels
    out = []
    nibbles = data[4 + 4 * channels :]
    for i in range(total):
        byte = nibbles[i // 2]
        code = (byte >> 4) & 0x0F if i % 2 else byte & 0x0F
        state = states[i % channels]
        state[0], state[1] = ref_decode_nibble(code, state[0], state[1])
        out.append(state[0])
    return np.array(out, dtype=np.int16)


def sine(fmt: AudioFormat, seconds: float, amplitude: int = 32767) -> np.ndarray:
    n = int(fmt.sampling_rate_hz * seconds)
    t = np.arange(n) / fmt.sampling_rate_hz
    mono = np.round(amplitude * np.sin(2 * np.pi * 1000 * t))
    return np.repeat(mono, fmt.channels).astype(np.int16)


def snr_db(reference: np.ndarray, decoded: np.ndarray) -> float:
    ref = reference.astype(np.float64)
    err = ref - decoded.astype(np.float64)
    return 10 * np.log10(np.sum(ref**2) / np.sum(err**2))


class TestAgainstOracle:
    def test_decode_matches_reference_bit_exactly(self):
        rng = np.random.default_rng(42)
        samples = rng.integers(-32768, 32768, size=960 * 2, dtype=np.int16)
        coded = adpcm_encode(samples, FMT_STEREO)
        assert np.array_equal(adpcm_decode(coded, FMT_STEREO), ref_decode_block(coded, 2))

    def test_streaming_blocks_match_reference(self):
        rng = np.random.default_rng(7)
        enc = AdpcmEncoder(channels=2)
        for _ in range(20):
            block = rng.integers(-32768, 32768, size=96 * 2, dtype=np.int16)
            coded = enc.encode_block(block)
            assert np.array_equal(decode_block(coded, 2), ref_decode_block(coded, 2))

    def test_all_zero_input_decodes_to_zero(self):
        samples = np.zeros(480 * 2, dtype=np.int16)
        decoded = adpcm_decode(adpcm_encode(samples, FMT_STEREO), FMT_STEREO)
        assert not decoded.any()

    def test_full_scale_sine_snr(self):
        # reference implementation measured ~36.8 dB on this signal
        samples = sine(FMT_STEREO, 0.5)
        decoded = adpcm_decode(adpcm_encode(samples, FMT_STEREO), FMT_STEREO)
        assert snr_db(samples, decoded) >= 30.0


class TestBlockStructure:
    def test_four_to_one_plus_header(self):
        samples = np.zeros(960, dtype=np.int16)  # mono, 1920 bytes of PCM
        coded = adpcm_encode(samples, FMT_MONO)
        assert len(coded) == 4 + 4 + 480  # count + state header + nibbles

    def test_empty_block(self):
        assert adpcm_encode(np.zeros(0, dtype=np.int16), FMT_MONO) == b""
        assert adpcm_decode(b"", FMT_MONO).size == 0

    def test_block_independence(self):
        """Any suffix of blocks decodes without its predecessors."""
        rng = np.random.default_rng(3)
        enc = AdpcmEncoder(channels=1)
        blocks = [
            enc.encode_block(rng.integers(-32768, 32768, size=96, dtype=np.int16))
            for _ in range(10)
        ]
        whole = [decode_block(b, 1) for b in blocks]
        for start in range(10):
            for i in range(start, 10):
                assert np.array_equal(decode_block(blocks[i], 1), whole[i])

    def test_24_bit_input_rejected(self):
        fmt24 = AudioFormat(96000, 24, 2)
        with pytest.raises(UnsupportedFormatError):
            adpcm_encode(np.zeros(4, dtype=np.int32), fmt24)
        with pytest.raises(UnsupportedFormatError):
            adpcm_decode(b"\x00" * 16, fmt24)

    def test_odd_sample_count_mono(self):
        samples = np.array([100, -200, 300], dtype=np.int16)
        decoded = adpcm_decode(adpcm_encode(samples, FMT_MONO), FMT_MONO)
        assert decoded.size == 3

    def test_truncated_block_rejected(self):
        coded = adpcm_encode(np.zeros(96, dtype=np.int16), FMT_MONO)
        with pytest.raises(ValueError):
            decode_block(coded[: len(coded) // 2], 1)
