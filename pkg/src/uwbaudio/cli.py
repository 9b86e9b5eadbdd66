"""Command-line front door: run scenarios, sweep presets, audit bit rates.

Exit codes: 0 success, 1 runtime error, 2 configuration or admission error.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys

import numpy as np

from .audio_format import (
    AudioFormat,
    FormatError,
    QualityTier,
    classify_tier,
    compute_bitrate,
    format_kbps,
    hires_wireless_eligible,
)
from .audio_core import AudioBlock
from .frame_codec import (
    FrameCodecError,
    data_frame,
    ack_frame,
    sync_frame,
    decode_frame,
    encode_frame,
    frames_from_hex,
)
from .scenario import ConfigError, ScenarioConfig, apply_overrides, load_scenario
from .sim_harness import LinkSimulation, RunMetrics
from .wav_io import read_wav, write_wav
from .wireless_core import AdmissionError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

SWEEP_COLUMNS = (
    "bandwidth_profile",
    "channel",
    "sampling_rate",
    "bit_depth",
    "bit_rate_kbps",
    "preset_latency_ms",
    "real_latency_ms",
    "link_utilization",
    "success_rate",
)


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def _metrics_json(metrics: RunMetrics, seed: int) -> str:
    payload = {"seed": seed, **metrics.to_dict()}
    return json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n"


def _load_config(args) -> ScenarioConfig:
    config = load_scenario(args.config)
    return apply_overrides(
        config,
        seed=args.seed,
        preset_latency_ms=args.preset_latency_ms,
        phy_profile=args.profile,
        loss_prob=args.loss_prob,
        drift_ppm=args.drift_ppm,
    )


def _channel_label(channels: int) -> str:
    return {1: "Mono", 2: "Stereo"}.get(channels, f"{channels}ch")


def cmd_run(args) -> int:
    config = _load_config(args)
    source = None
    if args.in_wav:
        block = read_wav(args.in_wav)
        config = apply_overrides(
            config,
            audio_sampling_rate_hz=block.format.sampling_rate_hz,
            audio_bit_depth=block.format.bit_depth,
            audio_channels=block.format.channels,
        )
        source = block.samples
        # run long enough to play every input block out
        blocks = math.ceil(block.num_frames / config.frames_per_block)
        needed_us = blocks * config.block_us + config.preset_latency_us + 200_000
        config = apply_overrides(config, duration_s=needed_us / 1e6)
    sim = LinkSimulation(
        config,
        collect_playout=args.out_wav is not None,
        source_samples=source,
    )
    metrics = sim.run()
    text = _metrics_json(metrics, config.seed)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("\n".join(sim.trace) + "\n")
    if args.out_wav:
        samples = sim.playout_samples()
        write_wav(args.out_wav, AudioBlock(config.audio_format, samples))
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _load_config(args)
    presets = [float(p) for p in args.presets.split(",")] if args.presets else []
    profiles = args.profiles.split(",") if args.profiles else [base.phy_profile]
    rows = []
    trace_lines: list[str] = []
    for profile in profiles:
        for preset in presets:
            try:
                config = apply_overrides(
                    base, phy_profile=profile, preset_latency_ms=preset
                )
                sim = LinkSimulation(config)
                metrics = sim.run()
            except (ConfigError, AdmissionError) as exc:
                print(f"cell profile={profile} preset={preset}: {exc}", file=sys.stderr)
                rows.append(
                    (profile, _channel_label(base.audio_channels),
                     base.audio_sampling_rate_hz, base.audio_bit_depth,
                     "-", f"{preset:g}", "infeasible", "-", "-")
                )
                continue
            kbps = compute_bitrate(config.audio_format)
            rows.append(
                (
                    profile,
                    _channel_label(config.audio_channels),
                    config.audio_sampling_rate_hz,
                    config.audio_bit_depth,
                    format_kbps(kbps),
                    f"{preset:g}",
                    f"{metrics.real_latency_us.mean_us / 1000:.3f}",
                    f"{metrics.link_utilization:.4f}",
                    f"{metrics.success_rate:.5f}",
                )
            )
            trace_lines.extend(sim.trace)
    csv_text = ",".join(SWEEP_COLUMNS) + "\n"
    csv_text += "".join(",".join(str(c) for c in row) + "\n" for row in rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    sys.stdout.write(csv_text)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("\n".join(trace_lines) + "\n")
    return EXIT_OK


def cmd_bitrate(args) -> int:
    fmt = AudioFormat(args.rate, args.depth, args.channels)
    kbps = compute_bitrate(fmt)
    tier = classify_tier(fmt)
    parts = [f"{format_kbps(kbps)} kbps", tier.label]
    if hires_wireless_eligible(fmt):
        parts.append("Hi-Res-wireless eligible")
    print(", ".join(parts))
    return EXIT_OK


def cmd_frames(args) -> int:
    if args.check:
        with open(args.check, "r", encoding="utf-8") as fh:
            text = fh.read()
        frames = frames_from_hex(text)
        for frame, line in zip(frames, text.split()):
            if encode_frame(frame).hex() != line:
                print(f"mismatch on frame seq={frame.header.sequence}")
                return EXIT_RUNTIME
        print(f"{len(frames)} frames verified")
        return EXIT_OK
    rng = random.Random(args.seed if args.seed is not None else 0)
    for i in range(args.count):
        kind = rng.choice(("data", "sync", "ack"))
        seq = rng.randrange(1 << 16)
        ts = rng.randrange(1 << 32)
        net, conn = rng.randrange(256), rng.randrange(256)
        if kind == "data":
            payload = bytes(rng.randrange(256) for _ in range(rng.randrange(64)))
            frame = data_frame(net, conn, seq, ts, payload)
        elif kind == "sync":
            frame = sync_frame(net, conn, seq, ts)
        else:
            frame = ack_frame(net, conn, seq, ts)
        print(encode_frame(frame).hex())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwbaudio",
        description="UWB audio transport simulator and tooling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and emit metrics JSON")
    run_p.add_argument("--config", required=True, help="scenario config file")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--in", dest="in_wav", default=None, help="input WAV file")
    run_p.add_argument("--out", dest="out_wav", default=None, help="playout WAV file")
    run_p.add_argument("--metrics", default=None, help="metrics JSON output path")
    run_p.add_argument("--trace", default=None, help="event trace output path")
    run_p.add_argument("--preset-latency-ms", type=float, default=None)
    run_p.add_argument("--profile", default=None)
    run_p.add_argument("--loss-prob", type=float, default=None)
    run_p.add_argument("--drift-ppm", type=float, default=None)
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="sweep preset latencies x profiles to CSV")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--presets", default="5,10,20", help="comma list of ms presets")
    sweep_p.add_argument("--profiles", default="1.2,1.6", help="comma list of profiles")
    sweep_p.add_argument("--out", default=None, help="CSV output path")
    sweep_p.add_argument("--trace", default=None, help="concatenated trace output path")
    sweep_p.add_argument("--preset-latency-ms", type=float, default=None)
    sweep_p.add_argument("--profile", default=None)
    sweep_p.add_argument("--loss-prob", type=float, default=None)
    sweep_p.add_argument("--drift-ppm", type=float, default=None)
    sweep_p.set_defaults(fn=cmd_sweep)

    bitrate_p = sub.add_parser("bitrate", help="exact bit rate and quality tier")
    bitrate_p.add_argument("--rate", type=int, required=True, help="sampling rate Hz")
    bitrate_p.add_argument("--depth", type=int, required=True, help="bit depth")
    bitrate_p.add_argument("--channels", type=int, required=True)
    bitrate_p.set_defaults(fn=cmd_bitrate)

    frames_p = sub.add_parser("frames", help="dump or verify golden frame vectors")
    frames_p.add_argument("--count", type=int, default=16)
    frames_p.add_argument("--seed", type=int, default=0)
    frames_p.add_argument("--check", default=None, help="hex dump file to verify")
    frames_p.set_defaults(fn=cmd_frames)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, AdmissionError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameCodecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
