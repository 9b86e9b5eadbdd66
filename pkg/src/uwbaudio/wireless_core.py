"""Wireless protocol stack: connections, TDMA timeslot schedules, CCA, sync.

A superframe of ``period_us`` is divided into equal slots.  Each connection
owns enough slots for its required bit rate; leftover slots stay open for
contention (used for retransmissions).  A transmitter never exceeds the
10 ms maximum transmission period while auto-sync is enabled: if its queue is
empty at a sync slot it sends a header-only sync frame.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

MAX_SYNC_PERIOD_US = 10_000

DEFAULT_SLOT_DURATION_US = 250
DEFAULT_RETRY_DELAY_US = 64
DEFAULT_MAX_RETRIES = 3

CONTENTION = -1  # slot owner value for contention slots


class AdmissionError(ValueError):
    """Demand exceeds schedule capacity; message names the overcommitted amount."""


class ScheduleError(ValueError):
    """Structurally invalid schedule request (period, slot grid, lookups)."""


@dataclass
class Connection:
    connection_id: int
    network_id: int
    required_bitrate_bps: int = 0
    auto_sync: bool = True
    auto_reply: bool = True
    tx_queue: deque = field(default_factory=deque)
    last_tx_time_us: int = 0


@dataclass(frozen=True)
class Slot:
    index: int
    start_offset_us: int
    duration_us: int
    owner: int  # connection_id or CONTENTION
    channel_index: int
    is_sync: bool = False


@dataclass(frozen=True)
class Schedule:
    period_us: int
    slots: tuple[Slot, ...]
    sync_slot_indices: frozenset[int]
    connection_ids: frozenset[int] = frozenset()

    def owned_slots(self, connection_id: int) -> list[Slot]:
        return [s for s in self.slots if s.owner == connection_id]

    def contention_slots(self) -> list[Slot]:
        return [s for s in self.slots if s.owner == CONTENTION]


class TxActionKind(enum.Enum):
    SEND_DATA = "send_data"
    SEND_SYNC = "send_sync"
    NO_OP = "no_op"


@dataclass(frozen=True)
class TxAction:
    kind: TxActionKind
    payload: bytes | None = None


def build_schedule(
    connections: list[Connection],
    period_us: int,
    slot_capacity_bytes: int,
    phy_rate_bps: int,
    slot_duration_us: int = DEFAULT_SLOT_DURATION_US,
    channel_count: int = 1,
    utilization_bound: float = 1.0,
) -> Schedule:
    """Allocate timeslots so every connection's peak rate covers its demand.

    Deterministic: connections are served in (required bit rate descending,
    connection id ascending) order and slots are handed out round-robin, so
    identical inputs produce identical schedules.  Unassigned slots become
    contention slots.  Raises :class:`AdmissionError` when demand exceeds the
    slot supply.
    """
    if period_us <= 0 or period_us > MAX_SYNC_PERIOD_US:
        raise ScheduleError(
            f"period_us must be in (0, {MAX_SYNC_PERIOD_US}] to satisfy the sync "
            f"deadline, got {period_us}"
        )
    if period_us % slot_duration_us:
        raise ScheduleError(
            f"period_us {period_us} is not a multiple of slot_duration_us {slot_duration_us}"
        )
    if phy_rate_bps <= 0:
        raise ScheduleError(f"phy_rate_bps must be positive, got {phy_rate_bps}")
    num_slots = period_us // slot_duration_us
    slot_bits = slot_capacity_bytes * 8
    period_s = period_us / 1_000_000

    quotas: dict[int, int] = {}
    for conn in connections:
        needed = math.ceil(conn.required_bitrate_bps * period_s / slot_bits)
        if conn.auto_sync:
            needed = max(needed, 1)
        quotas[conn.connection_id] = needed

    demand = sum(quotas.values())
    budget = int(num_slots * utilization_bound)
    if demand > budget:
        demand_bps = demand * slot_bits / period_s
        budget_bps = budget * slot_bits / period_s
        raise AdmissionError(
            f"demand of {demand} slots ({demand_bps / 1e6:.3f} Mbps) exceeds "
            f"{budget} available ({budget_bps / 1e6:.3f} Mbps); "
            f"overcommitted by {demand - budget} slots"
        )

    order = sorted(connections, key=lambda c: (-c.required_bitrate_bps, c.connection_id))
    remaining = dict(quotas)
    owners = []
    while len(owners) < num_slots and any(remaining[c.connection_id] > 0 for c in order):
        for conn in order:
            if len(owners) >= num_slots:
                break
            if remaining[conn.connection_id] > 0:
                owners.append(conn.connection_id)
                remaining[conn.connection_id] -= 1
    owners.extend([CONTENTION] * (num_slots - len(owners)))

    network_id = connections[0].network_id if connections else 0
    sync_indices = set()
    seen = set()
    for i, owner in enumerate(owners):
        if owner != CONTENTION and owner not in seen:
            conn = next(c for c in connections if c.connection_id == owner)
            if conn.auto_sync:
                sync_indices.add(i)
            seen.add(owner)

    slots = tuple(
        Slot(
            index=i,
            start_offset_us=i * slot_duration_us,
            duration_us=slot_duration_us,
            owner=owner,
            channel_index=(i + network_id) % channel_count,
            is_sync=i in sync_indices,
        )
        for i, owner in enumerate(owners)
    )
    return Schedule(
        period_us,
        slots,
        frozenset(sync_indices),
        frozenset(c.connection_id for c in connections),
    )


def peak_rate(
    connection: Connection, schedule: Schedule, slot_capacity_bytes: int
) -> float:
    """Throughput ceiling implied by the connection's owned slots, in bits/s."""
    if connection.connection_id not in schedule.connection_ids:
        raise ScheduleError(
            f"connection {connection.connection_id} does not appear in the schedule"
        )
    owned = len(schedule.owned_slots(connection.connection_id))
    return owned * slot_capacity_bytes * 8 * 1_000_000 / schedule.period_us


def on_slot_begin(connection: Connection, slot: Slot, now_us: int) -> TxAction:
    """Decide what a connection transmits when one of its slots begins."""
    if connection.tx_queue and slot.owner in (connection.connection_id, CONTENTION):
        return TxAction(TxActionKind.SEND_DATA, payload=connection.tx_queue[0])
    if slot.is_sync and connection.auto_sync and slot.owner == connection.connection_id:
        return TxAction(TxActionKind.SEND_SYNC)
    return TxAction(TxActionKind.NO_OP)


def detect_sync_loss(connection: Connection, now_us: int) -> bool:
    """True once the gap since the last transmission exceeds 10 ms."""
    return now_us - connection.last_tx_time_us > MAX_SYNC_PERIOD_US


class CcaOutcomeKind(enum.Enum):
    CLEAR = "clear"
    BUSY = "busy"


@dataclass(frozen=True)
class CcaOutcome:
    kind: CcaOutcomeKind
    busy_until_us: int | None = None  # set when CLEAR: end of this transmission
    retry_at_us: int | None = None  # set when BUSY


class CcaState:
    """Listen-before-talk bookkeeping over a set of hop channels."""

    def __init__(
        self,
        channel_count: int,
        retry_delay_us: int = DEFAULT_RETRY_DELAY_US,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ):
        self.channel_busy_until = [0] * channel_count
        self.retry_delay_us = retry_delay_us
        self.max_retries = max_retries


def cca_attempt(
    state: CcaState, channel: int, now_us: int, airtime_us: int
) -> CcaOutcome:
    """Clear Channel Assessment: transmit now or back off for a fixed delay.

    On CLEAR the channel is marked busy for the whole transmission, so a
    second transmitter observing the channel during that window backs off.
    The caller counts consecutive BUSY outcomes against ``state.max_retries``
    and drops the frame when they are exhausted.
    """
    if state.channel_busy_until[channel] <= now_us:
        state.channel_busy_until[channel] = now_us + airtime_us
        return CcaOutcome(CcaOutcomeKind.CLEAR, busy_until_us=now_us + airtime_us)
    return CcaOutcome(CcaOutcomeKind.BUSY, retry_at_us=now_us + state.retry_delay_us)


def trace_line(
    time_us: int,
    event: str,
    network,
    connection,
    channel,
    seq,
    outcome: str,
) -> str:
    """Event-trace line: ``time_us,event,network,connection,channel,seq,outcome``."""

    def cell(v):
        return "-" if v is None else str(v)

    return f"{time_us},{event},{cell(network)},{cell(connection)},{cell(channel)},{cell(seq)},{outcome}"
