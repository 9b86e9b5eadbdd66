"""UWB lossless audio transport stack with a deterministic link simulator."""

from .audio_format import (
    AudioFormat,
    FormatError,
    QualityTier,
    classify_tier,
    compute_bitrate,
    hires_wireless_eligible,
)
from .audio_core import (
    AudioBlock,
    AudioPayload,
    ConcealPolicy,
    DriftCompensator,
    JitterBuffer,
    compensate_drift,
    conceal,
    pack_audio,
    pcm_passthrough,
    unpack_audio,
)
from .adpcm import adpcm_decode, adpcm_encode
from .frame_codec import (
    Frame,
    FrameHeader,
    FrameType,
    decode_frame,
    encode_frame,
    frame_airtime,
)
from .scenario import ScenarioConfig, load_scenario, parse_scenario_text
from .sim_harness import (
    ChannelModel,
    ClockModel,
    RunMetrics,
    measure_latency,
    measure_utilization,
    run_scenario,
)
from .wireless_core import (
    AdmissionError,
    CcaState,
    Connection,
    Schedule,
    build_schedule,
    cca_attempt,
    detect_sync_loss,
    on_slot_begin,
    peak_rate,
)

__version__ = "0.1.0"
