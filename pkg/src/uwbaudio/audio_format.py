"""Audio stream descriptors, exact bit-rate math, and quality-tier classification."""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from fractions import Fraction

# Sampling rates accepted for tier classification.  Raw bit-rate math accepts
# any positive rate.
TIER_SAMPLING_RATES_HZ = frozenset(
    {8000, 16000, 32000, 44100, 48000, 96000, 192000, 384000}
)

SUPPORTED_BIT_DEPTHS = frozenset({16, 24})


class FormatError(ValueError):
    """Raised when an audio format field is out of range; message names the field."""


@dataclass(frozen=True)
class AudioFormat:
    """PCM stream descriptor: sampling rate, bit depth, channel count."""

    sampling_rate_hz: int
    bit_depth: int
    channels: int

    def __post_init__(self) -> None:
        if not isinstance(self.sampling_rate_hz, int) or self.sampling_rate_hz <= 0:
            raise FormatError(
                f"sampling_rate_hz must be a positive integer, got {self.sampling_rate_hz!r}"
            )
        if self.bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise FormatError(f"bit_depth must be 16 or 24, got {self.bit_depth!r}")
        if not isinstance(self.channels, int) or self.channels < 1:
            raise FormatError(f"channels must be >= 1, got {self.channels!r}")

    @property
    def bytes_per_sample(self) -> int:
        return self.bit_depth // 8

    @property
    def frame_bytes(self) -> int:
        """Bytes of one sample frame (one sample per channel)."""
        return self.channels * self.bytes_per_sample


@functools.total_ordering
class QualityTier(enum.Enum):
    """Audio quality tiers ordered by minimum bit rate.

    ``SUB_CD`` is the explicit below-baseline result, not an error.  The rated
    tiers collapse marketing labels with identical parameters (e.g. the
    24-bit/48 kHz rows) into one technical tier each.
    """

    SUB_CD = ("sub-CD", 0, 0, 0)
    CD_RESOLUTION = ("CD resolution", 44100, 16, Fraction(14112, 10))
    HD_AUDIO = ("HD Audio", 48000, 24, Fraction(2304))
    HI_RESOLUTION = ("Hi Resolution", 96000, 24, Fraction(4608))
    ULTRA_HD = ("Ultra HD", 192000, 24, Fraction(9216))

    def __init__(self, label, min_rate, min_depth, min_kbps):
        self.label = label
        self.min_sampling_rate_hz = min_rate
        self.min_bit_depth = min_depth
        self.min_bitrate_kbps = Fraction(min_kbps)

    def __lt__(self, other: "QualityTier") -> bool:
        return self.min_bitrate_kbps < other.min_bitrate_kbps


# Rated tiers from best to worst, for highest-match classification.
_RATED_TIERS = (
    QualityTier.ULTRA_HD,
    QualityTier.HI_RESOLUTION,
    QualityTier.HD_AUDIO,
    QualityTier.CD_RESOLUTION,
)

# Hi-Res Audio Wireless certification thresholds.
HIRES_MIN_BIT_DEPTH = 24
HIRES_MIN_SAMPLING_RATE_HZ = 96000


def compute_bitrate(fmt: AudioFormat) -> Fraction:
    """Exact PCM bit rate in kilobits per second.

    Returned as a rational so table values like 1411.2 kbps stay exact.
    """
    return Fraction(fmt.sampling_rate_hz * fmt.bit_depth * fmt.channels, 1000)


def classify_tier(fmt: AudioFormat) -> QualityTier:
    """Highest quality tier whose thresholds ``fmt`` meets or exceeds.

    Requires a sampling rate from the recognized ladder; formats below the
    two-channel CD baseline classify as ``QualityTier.SUB_CD``.
    """
    if fmt.sampling_rate_hz not in TIER_SAMPLING_RATES_HZ:
        raise FormatError(
            f"sampling_rate_hz {fmt.sampling_rate_hz} is not a recognized tier rate "
            f"{sorted(TIER_SAMPLING_RATES_HZ)}"
        )
    if fmt.channels >= 2:
        for tier in _RATED_TIERS:
            if (
                fmt.sampling_rate_hz >= tier.min_sampling_rate_hz
                and fmt.bit_depth >= tier.min_bit_depth
            ):
                return tier
    return QualityTier.SUB_CD


def hires_wireless_eligible(fmt: AudioFormat) -> bool:
    """True iff the format meets the Hi-Res wireless floor of 24-bit/96 kHz."""
    return (
        fmt.bit_depth >= HIRES_MIN_BIT_DEPTH
        and fmt.sampling_rate_hz >= HIRES_MIN_SAMPLING_RATE_HZ
    )


def format_kbps(kbps: Fraction) -> str:
    """Render an exact kbps value without float artifacts (1411.2, 2304, ...)."""
    if kbps.denominator == 1:
        return str(kbps.numerator)
    scaled = kbps * 10
    if scaled.denominator == 1:
        whole, tenth = divmod(scaled.numerator, 10)
        return f"{whole}.{tenth}"
    return str(float(kbps))
