"""Scenario configuration: flat key-value files plus the bandwidth profiles.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
The "bandwidth" profiles of the evaluation hardware map to configurable PHY
payload rates and per-frame PHY overhead (preamble and framing time at the
radio, independent of the payload rate).  The defaults are calibrated so the
evaluation-matched scenario lands near the reported link utilization; they are
configuration, not physics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .audio_format import AudioFormat

# profile name -> (payload rate bits/s, per-frame PHY overhead in us)
PHY_PROFILES = {
    "1.2": (16_000_000, 40),
    "1.6": (21_000_000, 50),
}


class ConfigError(ValueError):
    """Bad scenario configuration; message names the key (and line, if from a file)."""


@dataclass
class ScenarioConfig:
    # link
    phy_profile: str = "1.2"
    phy_rate_bps: int = 0  # 0 = take from profile
    phy_overhead_us: int = -1  # -1 = take from profile
    loss_prob: float = 0.0
    drift_ppm: float = 0.0  # sender clock drift
    receiver_drift_ppm: float = 0.0
    channels: int = 2  # hop channel count
    networks: int = 1
    propagation_delay_us: int = 1
    # audio
    audio_sampling_rate_hz: int = 48000
    audio_bit_depth: int = 16
    audio_channels: int = 2
    source: str = "sine"  # sine | random | none
    codec: str = "pcm"  # pcm | adpcm
    conceal: str = "silence"  # silence | repeat_last
    # pipeline
    preset_latency_ms: float = 10.0
    block_ms: float = 2.0
    playout_margin_us: int = 400
    drift_deadband_frames: int = 8
    drift_window_ticks: int = 50
    # MAC
    superframe_us: int = 2000
    slot_duration_us: int = 250
    slot_capacity_bytes: int = 256
    slot_phase_us: int = 50
    retry_delay_us: int = 64
    max_retries: int = 3
    turnaround_us: int = 10
    auto_sync: bool = True
    auto_reply: bool = True
    sync_check_interval_us: int = 1000
    # run
    duration_s: float = 10.0
    seed: int = 1

    def resolved_phy(self) -> tuple[int, int]:
        """(payload rate bps, per-frame overhead us) after profile lookup."""
        rate, overhead = 0, 0
        if self.phy_profile:
            if self.phy_profile not in PHY_PROFILES:
                raise ConfigError(
                    f"key 'phy_profile': unknown profile {self.phy_profile!r}; "
                    f"choose from {sorted(PHY_PROFILES)} or set phy_rate_bps"
                )
            rate, overhead = PHY_PROFILES[self.phy_profile]
        if self.phy_rate_bps > 0:
            rate = self.phy_rate_bps
        if self.phy_overhead_us >= 0:
            overhead = self.phy_overhead_us
        if rate <= 0:
            raise ConfigError("key 'phy_rate_bps': no PHY rate configured")
        return rate, overhead

    @property
    def audio_format(self) -> AudioFormat:
        return AudioFormat(
            self.audio_sampling_rate_hz, self.audio_bit_depth, self.audio_channels
        )

    @property
    def preset_latency_us(self) -> int:
        return round(self.preset_latency_ms * 1000)

    @property
    def block_us(self) -> int:
        return round(self.block_ms * 1000)

    @property
    def frames_per_block(self) -> int:
        frames = self.audio_sampling_rate_hz * self.block_us / 1_000_000
        if frames != int(frames) or frames < 1:
            raise ConfigError(
                f"key 'block_ms': {self.block_ms} ms is not a whole number of "
                f"sample frames at {self.audio_sampling_rate_hz} Hz"
            )
        return int(frames)

    @property
    def duration_us(self) -> int:
        return round(self.duration_s * 1_000_000)

    def validate(self) -> "ScenarioConfig":
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"key 'loss_prob': must be in [0, 1], got {self.loss_prob}")
        if abs(self.drift_ppm) > 500 or abs(self.receiver_drift_ppm) > 500:
            raise ConfigError("key 'drift_ppm': |drift| must be <= 500 ppm")
        if self.networks < 1:
            raise ConfigError(f"key 'networks': must be >= 1, got {self.networks}")
        if self.channels < 1:
            raise ConfigError(f"key 'channels': must be >= 1, got {self.channels}")
        if self.source not in ("sine", "random", "none"):
            raise ConfigError(f"key 'source': unknown source {self.source!r}")
        if self.codec not in ("pcm", "adpcm"):
            raise ConfigError(f"key 'codec': unknown codec {self.codec!r}")
        if self.conceal not in ("silence", "repeat_last"):
            raise ConfigError(f"key 'conceal': unknown policy {self.conceal!r}")
        if self.duration_s <= 0:
            raise ConfigError(f"key 'duration_s': must be positive, got {self.duration_s}")
        if self.preset_latency_ms <= 0:
            raise ConfigError(
                f"key 'preset_latency_ms': must be positive, got {self.preset_latency_ms}"
            )
        self.resolved_phy()
        self.audio_format
        self.frames_per_block
        return self


# config-file key -> dataclass field (dots allowed in file keys)
_KEY_ALIASES = {
    "audio.sampling_rate_hz": "audio_sampling_rate_hz",
    "audio.bit_depth": "audio_bit_depth",
    "audio.channels": "audio_channels",
}

_DEFAULTS = ScenarioConfig()
_FIELD_TYPES = {f.name: type(getattr(_DEFAULTS, f.name)) for f in fields(ScenarioConfig)}


def _coerce(name: str, ftype, raw: str, where: str):
    raw = raw.strip()
    try:
        if ftype is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if ftype is int:
            return int(raw, 0)
        if ftype is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key '{name}'{where}: cannot parse value {raw!r} as {ftype.__name__}") from None


def parse_scenario_text(text: str) -> ScenarioConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELD_TYPES:
            raise ConfigError(f"key '{key}' (line {lineno}): unknown configuration key")
        values[name] = _coerce(key, _FIELD_TYPES[name], raw, f" (line {lineno})")
    return ScenarioConfig(**values).validate()


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


def apply_overrides(config: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Return a copy with non-None override values applied, then re-validated."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **updates).validate() if updates else config
