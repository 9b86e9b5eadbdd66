"""Deterministic discrete-event simulation of sender(s), channel, receiver(s).

One run drives capture -> pack -> slot schedule -> CCA -> channel -> reassembly
-> jitter buffer -> playout and reports real latency, link utilization, and
success rate.  Everything is keyed on (config, seed): the event queue orders by
(time, priority, insertion sequence) with channel events before transmit
events before application events, so identical inputs give byte-identical
traces and metrics.

Retransmission model: data frames expect an auto-reply Ack inside the same
slot exchange; an unacknowledged chunk is retransmitted in the next available
slot (owned or contention) until acknowledged or stale.  Frames dropped by the
channel and recovered this way count toward latency; anything still missing at
the playout deadline is concealed and counted against the success rate.
"""

from __future__ import annotations

import heapq
import random
import statistics
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import adpcm
from .audio_core import (
    AudioBlock,
    AudioPayload,
    ConcealPolicy,
    DriftCompensator,
    JitterBuffer,
    PAYLOAD_HEADER_LEN,
    compensate_drift,
    pack_audio,
    pcm_to_bytes,
)
from .frame_codec import (
    Frame,
    FrameType,
    MIN_FRAME_LEN,
    ack_frame,
    data_frame,
    frame_airtime,
    frame_airtime_us,
    sync_frame,
)
from .scenario import ScenarioConfig
from .wav_io import sine_block
from .wireless_core import (
    AdmissionError,
    CcaOutcomeKind,
    CcaState,
    Connection,
    Schedule,
    TxActionKind,
    build_schedule,
    cca_attempt,
    detect_sync_loss,
    on_slot_begin,
    trace_line,
)

PRIO_CHANNEL = 0
PRIO_TX = 1
PRIO_APP = 2


@dataclass
class ChannelModel:
    phy_rate_bps: int
    loss_probability: float
    channels: int
    propagation_delay_us: int
    phy_overhead_us: int = 0


@dataclass
class ClockModel:
    drift_ppm: float = 0.0
    offset_us: int = 0

    def local(self, t_global_us: int) -> int:
        return self.offset_us + round(t_global_us * (1 + self.drift_ppm * 1e-6))

    def to_global(self, local_us: int) -> int:
        """Global time at which this clock reads ``local_us``."""
        return round((local_us - self.offset_us) * 1_000_000 / (1_000_000 + self.drift_ppm))

    def interval(self, k: int, step_us: int) -> int:
        """Global time of the k-th tick of a local ``step_us`` cadence."""
        return self.to_global(k * step_us)


@dataclass
class LatencyStats:
    mean_us: float
    p95_us: float
    max_us: float
    count: int
    in_flight: int


@dataclass
class RunMetrics:
    real_latency_us: LatencyStats
    link_utilization: float
    success_rate: float
    sync_loss_events: int
    concealment_events: int
    underflow_events: int
    overflow_events: int
    blocks_captured: int
    blocks_played: int
    blocks_concealed: int
    blocks_in_flight: int
    per_network: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        lat = self.real_latency_us
        return {
            "real_latency_us": {
                "mean": lat.mean_us,
                "p95": lat.p95_us,
                "max": lat.max_us,
                "count": lat.count,
                "in_flight": lat.in_flight,
            },
            "link_utilization": self.link_utilization,
            "success_rate": self.success_rate,
            "sync_loss_events": self.sync_loss_events,
            "concealment_events": self.concealment_events,
            "underflow_events": self.underflow_events,
            "overflow_events": self.overflow_events,
            "blocks": {
                "captured": self.blocks_captured,
                "played": self.blocks_played,
                "concealed": self.blocks_concealed,
                "in_flight": self.blocks_in_flight,
            },
            "per_network": self.per_network,
        }


def measure_latency(trace_lines, network: int | None = None) -> LatencyStats:
    """Per-block capture-to-playout latency from an event trace.

    Pairs ``capture`` and ``playout`` events by (network, block).  Blocks that
    were concealed or still in flight at the end of the trace are excluded
    from the distribution; in-flight blocks are counted.
    """
    captures: dict[tuple[str, str], int] = {}
    latencies: list[int] = []
    adjudicated: set[tuple[str, str]] = set()
    for line in trace_lines:
        t, event, net, conn, _chan, seq, outcome = line.split(",", 6)
        if network is not None and net != str(network):
            continue
        key = (net, seq)
        if event == "capture":
            captures[key] = int(t)
        elif event == "playout":
            adjudicated.add(key)
            if outcome == "played" and key in captures:
                latencies.append(int(t) - captures[key])
    in_flight = len(set(captures) - adjudicated)
    if not latencies:
        return LatencyStats(float("nan"), float("nan"), float("nan"), 0, in_flight)
    arr = sorted(latencies)
    p95 = arr[min(len(arr) - 1, int(0.95 * (len(arr) - 1) + 0.5))]
    return LatencyStats(
        statistics.fmean(arr), float(p95), float(arr[-1]), len(arr), in_flight
    )


def measure_utilization(
    trace_lines, allocated_fraction: float, elapsed_us: int, network: int | None = None
) -> float:
    """Total on-air time of tx events over the allocated share of elapsed time.

    ``tx`` trace lines carry ``kind:onair_us`` in the outcome column; data,
    sync, ack, and retransmission airtime all count.
    """
    if elapsed_us <= 0:
        raise ValueError("elapsed time must be positive")
    onair = 0
    for line in trace_lines:
        _t, event, net, _conn, _chan, _seq, outcome = line.split(",", 6)
        if event != "tx":
            continue
        if network is not None and net != str(network):
            continue
        onair += int(outcome.rsplit(":", 1)[1])
    share = allocated_fraction * elapsed_us
    if share <= 0:
        return 0.0
    return min(1.0, onair / share)


@dataclass
class _Chunk:
    seq: int
    block_index: int
    payload: AudioPayload
    wire: bytes
    deadline_us: int
    sent_time_us: int | None = None
    tx_count: int = 0
    in_cca: bool = False  # an attempt chain is live; don't start another


class _Network:
    """Per-network state: one audio sender, its schedule, and one receiver."""

    def __init__(self, sim: "LinkSimulation", index: int, schedule: Schedule):
        cfg = sim.config
        self.index = index
        self.schedule = schedule
        self.conn = Connection(
            connection_id=index,
            network_id=index,
            required_bitrate_bps=sim.required_bitrate_bps,
            auto_sync=cfg.auto_sync,
            auto_reply=cfg.auto_reply,
        )
        self.sender_clock = ClockModel(cfg.drift_ppm)
        self.receiver_clock = ClockModel(cfg.receiver_drift_ppm)
        self.next_seq = 0
        self.block_count = 0
        self.capture_global: dict[int, int] = {}
        self.block_start_time: dict[int, int] = {}
        self.seen_seqs: set[int] = set()
        self.seen_order: deque = deque()
        self.jbuf = JitterBuffer(
            cfg.audio_format,
            cfg.preset_latency_us,
            cfg.frames_per_block,
            ConcealPolicy(cfg.conceal),
        )
        self.comp = DriftCompensator(
            target_occupancy_frames=self.jbuf.target_occupancy_frames,
            deadband_frames=cfg.drift_deadband_frames,
        )
        self.occupancy_window: deque = deque(maxlen=cfg.drift_window_ticks)
        self.calibrated = False
        self.ratio = 1.0
        # capture-frontier estimate from chunk timestamps: sender-us of audio
        # known to exist, and the global arrival time of that knowledge
        self.frontier_audio_us = 0.0
        self.frontier_arrival_us = 0
        self.playout_started = False
        self.playout_tick = 0
        self.playout_anchor_us = 0
        self.in_sync_loss = False
        self.sync_loss_events = 0
        self.blocks_played = 0
        self.blocks_concealed = 0
        self.adpcm_encoder = (
            adpcm.AdpcmEncoder(cfg.audio_channels) if cfg.codec == "adpcm" else None
        )
        self.allocated_fraction = (
            sum(s.duration_us for s in schedule.owned_slots(index)) / schedule.period_us
        )


class LinkSimulation:
    """One deterministic run over ``config.duration_s`` simulated seconds."""

    def __init__(self, config: ScenarioConfig, seed: int | None = None,
                 collect_playout: bool = False, source_samples: np.ndarray | None = None):
        config.validate()
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.rng_loss = random.Random(self.seed * 2654435761 % (1 << 31) ^ 0x5EED)
        self.rng_audio = random.Random(self.seed * 2654435761 % (1 << 31) ^ 0xA0D10)
        self.collect_playout = collect_playout
        self.source_samples = source_samples
        self.trace: list[str] = []
        self._queue: list = []
        self._counter = 0
        self.now = 0

        fmt = config.audio_format
        self.fmt = fmt
        self.frames_per_block = config.frames_per_block
        self.required_bitrate_bps = int(
            fmt.sampling_rate_hz * fmt.bit_depth * fmt.channels
        )
        self.phy_rate_bps, self.phy_overhead_us = config.resolved_phy()
        self.channel = ChannelModel(
            self.phy_rate_bps,
            config.loss_prob,
            config.channels,
            config.propagation_delay_us,
            self.phy_overhead_us,
        )
        self.max_chunk_pcm = config.slot_capacity_bytes - PAYLOAD_HEADER_LEN
        if self.max_chunk_pcm < fmt.frame_bytes:
            raise AdmissionError(
                f"slot_capacity_bytes {config.slot_capacity_bytes} cannot carry one "
                f"sample frame plus payload metadata"
            )
        if config.codec == "adpcm":
            coded = (
                adpcm.BLOCK_COUNT_LEN
                + fmt.channels * adpcm.STATE_HEADER_LEN
                + (self.frames_per_block * fmt.channels + 1) // 2
            )
            if coded > self.max_chunk_pcm:
                raise AdmissionError(
                    f"ADPCM block of {coded} bytes exceeds the {self.max_chunk_pcm}-byte "
                    f"payload budget; shrink block_ms or grow slot_capacity_bytes"
                )
        self._check_slot_fit()

        self.networks = []
        for i in range(config.networks):
            conn = Connection(
                connection_id=i,
                network_id=i,
                required_bitrate_bps=self.required_bitrate_bps,
                auto_sync=config.auto_sync,
                auto_reply=config.auto_reply,
            )
            schedule = build_schedule(
                [conn],
                config.superframe_us,
                config.slot_capacity_bytes,
                self.phy_rate_bps,
                slot_duration_us=config.slot_duration_us,
                channel_count=config.channels,
            )
            self.networks.append(_Network(self, i, schedule))
        self.cca = CcaState(config.channels, config.retry_delay_us, config.max_retries)
        self.playout_out: list[np.ndarray] = []

    # -- plumbing ---------------------------------------------------------

    def _push(self, time_us: int, prio: int, fn, *args) -> None:
        if time_us > self.config.duration_us:
            return
        self._counter += 1
        heapq.heappush(self._queue, (time_us, prio, self._counter, fn, args))

    def _trace(self, event, net, conn, chan, seq, outcome) -> None:
        self.trace.append(trace_line(self.now, event, net, conn, chan, seq, outcome))

    def _exchange_airtime(self, frame: Frame) -> tuple[int, int]:
        """(frame on-air us incl PHY overhead, reserved channel window us)."""
        onair = frame_airtime(frame, self.phy_rate_bps) + self.phy_overhead_us
        window = onair
        if frame.header.frame_type is FrameType.DATA and self.config.auto_reply:
            ack_onair = (
                frame_airtime_us(MIN_FRAME_LEN, self.phy_rate_bps) + self.phy_overhead_us
            )
            window += self.config.turnaround_us + ack_onair
        return onair, window

    def _check_slot_fit(self) -> None:
        cfg = self.config
        data_len = MIN_FRAME_LEN + cfg.slot_capacity_bytes
        data_onair = frame_airtime_us(data_len, self.phy_rate_bps) + self.phy_overhead_us
        ack_onair = frame_airtime_us(MIN_FRAME_LEN, self.phy_rate_bps) + self.phy_overhead_us
        exchange = data_onair + cfg.turnaround_us + ack_onair
        if exchange > cfg.slot_duration_us:
            raise AdmissionError(
                f"slot exchange needs {exchange} us (data {data_onair} + turnaround "
                f"{cfg.turnaround_us} + ack {ack_onair}) but slots are "
                f"{cfg.slot_duration_us} us"
            )

    # -- source -----------------------------------------------------------

    def _source_frames(self, net: _Network, start_frame: int) -> np.ndarray | None:
        cfg = self.config
        n = self.frames_per_block
        if self.source_samples is not None:
            lo = start_frame * self.fmt.channels
            hi = lo + n * self.fmt.channels
            if lo >= self.source_samples.size:
                return None
            chunk = self.source_samples[lo:hi]
            if chunk.size < n * self.fmt.channels:
                pad = np.zeros(n * self.fmt.channels - chunk.size, dtype=chunk.dtype)
                chunk = np.concatenate([chunk, pad])
            return chunk
        if cfg.source == "none":
            return None
        if cfg.source == "sine":
            return sine_block(self.fmt, n, start_frame=start_frame)
        lo, hi = -(1 << (self.fmt.bit_depth - 1)), (1 << (self.fmt.bit_depth - 1)) - 1
        dtype = np.int16 if self.fmt.bit_depth == 16 else np.int32
        return np.array(
            [self.rng_audio.randint(lo, hi) for _ in range(n * self.fmt.channels)],
            dtype=dtype,
        )

    # -- event handlers ----------------------------------------------------

    def _on_capture(self, net: _Network, k: int) -> None:
        t = self.now
        samples = self._source_frames(net, k * self.frames_per_block)
        if samples is None:
            return
        idx = net.block_count
        net.block_count += 1
        capture_local = net.sender_clock.local(t)
        block = AudioBlock(self.fmt, samples, capture_local)
        net.capture_global[idx] = t
        self._trace("capture", net.index, net.index, None, idx, "ok")
        deadline = t + self.config.preset_latency_us - self.config.playout_margin_us
        if self.config.codec == "adpcm":
            coded = net.adpcm_encoder.encode_block(samples)
            payloads = [AudioPayload(capture_local & 0xFFFFFFFF, 0, self.frames_per_block, coded)]
        else:
            payloads = pack_audio(block, self.max_chunk_pcm)
        for payload in payloads:
            chunk = _Chunk(net.next_seq, idx, payload, payload.to_bytes(), deadline)
            net.next_seq = (net.next_seq + 1) & 0xFFFF
            net.conn.tx_queue.append(chunk)
        if not net.playout_started:
            net.playout_started = True
            net.playout_anchor_us = deadline
            self._push(deadline, PRIO_APP, self._on_playout, net)
        next_k = k + 1
        self._push(
            net.sender_clock.interval(next_k, self.config.block_us),
            PRIO_APP,
            self._on_capture,
            net,
            next_k,
        )

    def _on_superframe(self, net: _Network, m: int) -> None:
        # The slot grid runs on the sender's clock: the wireless core schedules
        # its own superframe, so capture and transmission never drift apart.
        cfg = self.config
        base_local = m * cfg.superframe_us + cfg.slot_phase_us
        for slot in net.schedule.slots:
            self._push(
                net.sender_clock.to_global(base_local + slot.start_offset_us),
                PRIO_TX,
                self._on_slot,
                net,
                slot,
            )
        self._push(
            net.sender_clock.to_global((m + 1) * cfg.superframe_us),
            PRIO_TX,
            self._on_superframe,
            net,
            m + 1,
        )

    def _on_slot(self, net: _Network, slot) -> None:
        t = self.now
        queue = net.conn.tx_queue
        while queue and queue[0].deadline_us <= t:
            stale = queue.popleft()
            self._trace("drop", net.index, net.index, slot.channel_index, stale.seq, "stale")
        action = on_slot_begin(net.conn, slot, t)
        if action.kind is TxActionKind.SEND_SYNC:
            frame = sync_frame(
                net.index, net.index, net.next_seq, net.sender_clock.local(t) & 0xFFFFFFFF
            )
            net.next_seq = (net.next_seq + 1) & 0xFFFF
            self._attempt_cca(net, frame, slot, None, 0)
            return
        if action.kind is not TxActionKind.SEND_DATA:
            return
        head = queue[0]
        fresh = head.sent_time_us is None
        retx_due = not fresh and head.sent_time_us < t
        if head.in_cca or not (fresh or retx_due):
            return  # attempt in flight or ack still pending
        head.in_cca = True
        frame = data_frame(
            net.index,
            net.index,
            head.seq,
            net.sender_clock.local(t) & 0xFFFFFFFF,
            head.wire,
        )
        self._attempt_cca(net, frame, slot, head, 0)

    def _attempt_cca(self, net: _Network, frame: Frame, slot, chunk, tries: int) -> None:
        t = self.now
        onair, window = self._exchange_airtime(frame)
        outcome = cca_attempt(self.cca, slot.channel_index, t, window)
        if outcome.kind is CcaOutcomeKind.BUSY:
            self._trace(
                "cca", net.index, net.index, slot.channel_index,
                frame.header.sequence, "busy",
            )
            if tries + 1 <= self.cca.max_retries:
                self._push(
                    outcome.retry_at_us, PRIO_TX, self._attempt_cca,
                    net, frame, slot, chunk, tries + 1,
                )
            else:
                self._trace(
                    "drop", net.index, net.index, slot.channel_index,
                    frame.header.sequence, "cca_exhausted",
                )
                if chunk is not None and net.conn.tx_queue and net.conn.tx_queue[0] is chunk:
                    net.conn.tx_queue.popleft()
            return
        kind = {FrameType.DATA: "data", FrameType.SYNC: "sync"}[frame.header.frame_type]
        if chunk is not None:
            if chunk.tx_count:
                kind = "retx"
            chunk.sent_time_us = t
            chunk.tx_count += 1
        net.conn.last_tx_time_us = t
        net.in_sync_loss = False
        self._trace(
            "tx", net.index, net.index, slot.channel_index,
            frame.header.sequence, f"{kind}:{onair}",
        )
        self._push(
            t + onair + self.channel.propagation_delay_us,
            PRIO_CHANNEL,
            self._on_deliver,
            net,
            frame,
            slot.channel_index,
            chunk,
        )

    def _on_deliver(self, net: _Network, frame: Frame, channel: int, chunk) -> None:
        t = self.now
        seq = frame.header.sequence
        if self.channel.loss_probability > 0 and self.rng_loss.random() < self.channel.loss_probability:
            self._trace("rx", net.index, net.index, channel, seq, "lost")
            return
        ftype = frame.header.frame_type
        if ftype is FrameType.DATA:
            if seq in net.seen_seqs:
                self._trace("rx", net.index, net.index, channel, seq, "dup")
            else:
                net.seen_seqs.add(seq)
                net.seen_order.append(seq)
                if len(net.seen_order) > 512:
                    net.seen_seqs.discard(net.seen_order.popleft())
                payload = chunk.payload
                if self.config.codec == "adpcm":
                    pcm = adpcm.decode_block(payload.data, self.fmt.channels)
                    payload = AudioPayload(
                        payload.block_time_us,
                        payload.sample_offset,
                        payload.num_frames,
                        pcm_to_bytes(pcm, self.fmt),
                    )
                net.jbuf.insert(chunk.block_index, payload)
                # Track the capture frontier only at whole-block completions so
                # every reference point shares one transport phase; mixed
                # per-chunk phases would alias into the drift estimate.
                if payload.sample_offset + payload.num_frames == self.frames_per_block:
                    audio_us = (chunk.block_index + 1) * self.config.block_us
                    if audio_us > net.frontier_audio_us:
                        net.frontier_audio_us = audio_us
                        net.frontier_arrival_us = t
                self._trace("rx", net.index, net.index, channel, seq, "ok")
            if self.config.auto_reply:
                ack = ack_frame(
                    net.index, net.index, seq,
                    net.receiver_clock.local(t) & 0xFFFFFFFF,
                )
                ack_onair = frame_airtime(ack, self.phy_rate_bps) + self.phy_overhead_us
                ack_start = t + self.config.turnaround_us
                self._trace("tx", net.index, net.index, channel, seq, f"ack:{ack_onair}")
                self._push(
                    ack_start + ack_onair + self.channel.propagation_delay_us,
                    PRIO_CHANNEL,
                    self._on_ack,
                    net,
                    ack,
                    channel,
                )
        elif ftype is FrameType.SYNC:
            self._trace("rx", net.index, net.index, channel, seq, "ok")

    def _on_ack(self, net: _Network, ack: Frame, channel: int) -> None:
        seq = ack.header.sequence
        if self.channel.loss_probability > 0 and self.rng_loss.random() < self.channel.loss_probability:
            self._trace("rx", net.index, net.index, channel, seq, "lost")
            return
        queue = net.conn.tx_queue
        if queue and queue[0].seq == seq and queue[0].sent_time_us is not None:
            queue.popleft()
            self._trace("rx", net.index, net.index, channel, seq, "ok")
        else:
            self._trace("rx", net.index, net.index, channel, seq, "dup")

    def _on_playout(self, net: _Network) -> None:
        t = self.now
        # Continuous occupancy estimate: the chunk-timestamp frontier
        # extrapolated to now, minus the cursor position.  Unlike the raw
        # arrived-frame count this is not quantized to whole blocks, so the
        # compensator sees clock drift long before a full block accumulates.
        rate = self.fmt.sampling_rate_hz
        occ = (
            (net.frontier_audio_us + (t - net.frontier_arrival_us)) * rate / 1e6
            - net.jbuf.read_position_frames
        )
        if not net.calibrated:
            net.comp.target_occupancy_frames = max(occ, 1.0)
            net.calibrated = True
        net.occupancy_window.append(occ)
        if len(net.occupancy_window) == net.occupancy_window.maxlen:
            net.ratio = compensate_drift(net.comp, net.occupancy_window)
        result = net.jbuf.read(self.frames_per_block, net.ratio)
        if self.collect_playout and net.index == 0:
            self.playout_out.append(result.samples)
        # a block's audio starts mid-tick when the cursor is off-grid; record
        # the sub-tick playout instant so latency is not tick-quantized
        for b, frac in result.started_blocks:
            net.block_start_time[b] = t + round(frac * self.config.block_us)
        for b, concealed in result.finished_blocks:
            start = net.block_start_time.pop(b, t)
            outcome = "concealed" if concealed else "played"
            if concealed:
                net.blocks_concealed += 1
            else:
                net.blocks_played += 1
            self.trace.append(
                trace_line(start, "playout", net.index, net.index, None, b, outcome)
            )
        net.playout_tick += 1
        self._push(
            net.playout_anchor_us
            + net.receiver_clock.interval(net.playout_tick, self.config.block_us),
            PRIO_APP,
            self._on_playout,
            net,
        )

    def _on_sync_check(self, net: _Network) -> None:
        t = self.now
        if detect_sync_loss(net.conn, t):
            if not net.in_sync_loss:
                net.in_sync_loss = True
                net.sync_loss_events += 1
                self._trace("sync_loss", net.index, net.index, None, None, "detected")
        self._push(
            t + self.config.sync_check_interval_us, PRIO_APP, self._on_sync_check, net
        )

    # -- run ---------------------------------------------------------------

    def run(self) -> RunMetrics:
        for net in self.networks:
            self._push(0, PRIO_APP, self._on_capture, net, 0)
            self._push(
                self.config.sync_check_interval_us, PRIO_APP, self._on_sync_check, net
            )
            self._push(net.sender_clock.to_global(0), PRIO_TX, self._on_superframe, net, 0)
        while self._queue:
            time_us, _prio, _n, fn, args = heapq.heappop(self._queue)
            self.now = time_us
            fn(*args)
        self.now = self.config.duration_us
        return self._metrics()

    def _metrics(self) -> RunMetrics:
        elapsed = self.config.duration_us
        per_network = []
        total_played = total_concealed = total_captured = 0
        total_sync_loss = total_conceal_events = 0
        total_underflow = total_overflow = 0
        utilizations = []
        latency_all = measure_latency(self.trace)
        for net in self.networks:
            lat = measure_latency(self.trace, network=net.index)
            util = measure_utilization(
                self.trace, net.allocated_fraction, elapsed, network=net.index
            )
            adjudicated = net.blocks_played + net.blocks_concealed
            success = net.blocks_played / adjudicated if adjudicated else 1.0
            per_network.append(
                {
                    "network": net.index,
                    "latency_mean_us": lat.mean_us,
                    "link_utilization": util,
                    "success_rate": success,
                    "blocks_captured": net.block_count,
                    "blocks_played": net.blocks_played,
                    "blocks_concealed": net.blocks_concealed,
                    "sync_loss_events": net.sync_loss_events,
                }
            )
            utilizations.append(util)
            total_played += net.blocks_played
            total_concealed += net.blocks_concealed
            total_captured += net.block_count
            total_sync_loss += net.sync_loss_events
            total_conceal_events += net.jbuf.concealment_events
            total_underflow += net.jbuf.underflow_events
            total_overflow += net.jbuf.overflow_events
        adjudicated = total_played + total_concealed
        return RunMetrics(
            real_latency_us=latency_all,
            link_utilization=(
                sum(utilizations) / len(utilizations) if utilizations else 0.0
            ),
            success_rate=total_played / adjudicated if adjudicated else 1.0,
            sync_loss_events=total_sync_loss,
            concealment_events=total_conceal_events,
            underflow_events=total_underflow,
            overflow_events=total_overflow,
            blocks_captured=total_captured,
            blocks_played=total_played,
            blocks_concealed=total_concealed,
            blocks_in_flight=total_captured - adjudicated,
            per_network=per_network,
        )

    def playout_samples(self) -> np.ndarray:
        if not self.playout_out:
            dtype = np.int16 if self.fmt.bit_depth == 16 else np.int32
            return np.zeros(0, dtype=dtype)
        return np.concatenate(self.playout_out)


def run_scenario(
    config: ScenarioConfig,
    seed: int | None = None,
    collect_playout: bool = False,
    source_samples: np.ndarray | None = None,
) -> tuple[RunMetrics, list[str], LinkSimulation]:
    """Run one scenario; returns (metrics, trace lines, finished simulation)."""
    sim = LinkSimulation(config, seed, collect_playout, source_samples)
    metrics = sim.run()
    return metrics, sim.trace, sim
