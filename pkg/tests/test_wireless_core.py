"""Timeslot scheduling, CCA contention, sync-deadline machinery."""

import itertools
import math
import random

import pytest

from uwbaudio.wireless_core import (
    CONTENTION,
    AdmissionError,
    CcaOutcomeKind,
    CcaState,
    Connection,
    MAX_SYNC_PERIOD_US,
    ScheduleError,
    Slot,
    TxAction,
    TxActionKind,
    build_schedule,
    cca_attempt,
    detect_sync_loss,
    on_slot_begin,
    peak_rate,
    trace_line,
)


def conn(cid, bitrate=0, auto_sync=True, auto_reply=True, net=0):
    return Connection(
        connection_id=cid,
        network_id=net,
        required_bitrate_bps=bitrate,
        auto_sync=auto_sync,
        auto_reply=auto_reply,
    )


def brute_force_feasible(demands_bps, num_slots, slot_bits, period_s, needs_slot):
    """Enumerate every slot-count assignment and test the peak-rate rules."""
    k = len(demands_bps)
    if k == 0:
        return True
    for counts in itertools.product(range(num_slots + 1), repeat=k):
        if sum(counts) > num_slots:
            continue
        ok = True
        for count, demand, must_have in zip(counts, demands_bps, needs_slot):
            if count * slot_bits / period_s < demand:
                ok = False
                break
            if must_have and count == 0:
                ok = False
                break
        if ok:
            return True
    return False


class TestBuildSchedule:
    def test_single_stereo_stream_gets_two_slots(self):
        # 1536 kbps needs 384 payload bytes per 2 ms; 256-byte slots -> 2 slots
        c = conn(0, bitrate=1_536_000)
        schedule = build_schedule([c], 2000, 256, 16_000_000)
        owned = schedule.owned_slots(0)
        assert len(owned) >= 2
        assert peak_rate(c, schedule, 256) >= 1_536_000

    def test_zero_connections_empty_schedule(self):
        schedule = build_schedule([], 2000, 256, 16_000_000)
        assert schedule.period_us == 2000
        assert all(s.owner == CONTENTION for s in schedule.slots)

    def test_two_sixty_percent_streams_rejected(self):
        # schedule payload capacity: 8 slots x 2048 bits / 2 ms = 8.192 Mbps
        demand = int(8_192_000 * 0.6)
        with pytest.raises(AdmissionError, match="overcommitted"):
            build_schedule([conn(0, demand), conn(1, demand)], 2000, 256, 16_000_000)

    def test_deterministic_for_identical_input(self):
        conns = [conn(2, 900_000), conn(0, 1_200_000), conn(1, 900_000)]
        a = build_schedule(conns, 2000, 256, 16_000_000)
        b = build_schedule([conn(2, 900_000), conn(0, 1_200_000), conn(1, 900_000)],
                           2000, 256, 16_000_000)
        assert a == b

    def test_auto_sync_connection_gets_sync_slot(self):
        schedule = build_schedule([conn(0, 0, auto_sync=True)], 2000, 256, 16_000_000)
        assert len(schedule.owned_slots(0)) == 1
        assert schedule.sync_slot_indices

    def test_sync_deadline_bounds_period(self):
        with pytest.raises(ScheduleError, match="period"):
            build_schedule([], MAX_SYNC_PERIOD_US + 1000, 256, 16_000_000)

    def test_slots_tile_the_period(self):
        schedule = build_schedule([conn(0, 1_536_000)], 2000, 256, 16_000_000,
                                  slot_duration_us=250)
        assert sum(s.duration_us for s in schedule.slots) == 2000
        starts = [s.start_offset_us for s in schedule.slots]
        assert starts == sorted(set(starts))

    def test_slot_exclusivity(self):
        conns = [conn(i, 1_000_000) for i in range(3)]
        schedule = build_schedule(conns, 2000, 256, 16_000_000)
        for slot in schedule.slots:
            assert slot.owner in (0, 1, 2, CONTENTION)

    def test_channel_hop_offsets_by_network(self):
        c0 = conn(0, 1_536_000, net=0)
        c1 = conn(0, 1_536_000, net=1)
        s0 = build_schedule([c0], 2000, 256, 16_000_000, channel_count=2)
        s1 = build_schedule([c1], 2000, 256, 16_000_000, channel_count=2)
        for a, b in zip(s0.slots, s1.slots):
            assert a.channel_index != b.channel_index

    def test_feasibility_matches_brute_force(self):
        """Admission decisions agree with exhaustive slot-count enumeration."""
        rng = random.Random(1234)
        agree = 0
        for trial in range(500):
            num_conns = rng.randint(1, 4)
            slot_dur = rng.choice([100, 125, 200, 250, 400, 500])
            num_slots = rng.randint(1, min(20, 2000 // slot_dur * 4))
            period = slot_dur * num_slots
            if period > MAX_SYNC_PERIOD_US:
                continue
            cap = rng.choice([64, 128, 256])
            slot_bits = cap * 8
            conns = []
            for cid in range(num_conns):
                demand = rng.randint(0, int(num_slots * slot_bits / (period / 1e6)))
                conns.append(conn(cid, demand, auto_sync=rng.random() < 0.7))
            expected = brute_force_feasible(
                [c.required_bitrate_bps for c in conns],
                num_slots,
                slot_bits,
                period / 1e6,
                [c.auto_sync for c in conns],
            )
            try:
                schedule = build_schedule(conns, period, cap, 16_000_000,
                                          slot_duration_us=slot_dur)
                got = True
                for c in conns:
                    assert peak_rate(c, schedule, cap) >= c.required_bitrate_bps
            except AdmissionError:
                got = False
            assert got == expected, f"trial {trial}: scheduler={got} oracle={expected}"
            agree += 1
        assert agree >= 400  # most trials must actually run


class TestPeakRate:
    def test_three_slots_of_ten(self):
        c = conn(7, 1_000_000)
        schedule = build_schedule([c], 2500, 128, 16_000_000, slot_duration_us=250)
        assert len(schedule.owned_slots(7)) == 3  # ceil(1e6 * 2.5ms / 1024 bits)
        assert peak_rate(c, schedule, 128) == 1_228_800

    def test_zero_owned_slots(self):
        c = conn(1, 0, auto_sync=False)
        schedule = build_schedule([c], 2000, 256, 16_000_000)
        assert peak_rate(c, schedule, 256) == 0

    def test_all_slots_owned(self):
        c = conn(0, 8_192_000)  # exactly 4 slots x 2048 bits per 1 ms
        schedule = build_schedule([c], 1000, 256, 64_000_000, slot_duration_us=250)
        assert len(schedule.owned_slots(0)) == 4
        assert peak_rate(c, schedule, 256) == 4 * 256 * 8 * 1000

    def test_unknown_connection_is_lookup_error(self):
        schedule = build_schedule([conn(0, 0)], 2000, 256, 16_000_000)
        with pytest.raises(ScheduleError, match="appear"):
            peak_rate(conn(9, 0), schedule, 256)


class TestOnSlotBegin:
    def slot(self, owner, is_sync=False):
        return Slot(0, 0, 250, owner, 0, is_sync)

    def test_nonempty_queue_sends_data(self):
        c = conn(0)
        c.tx_queue.append(b"payload")
        action = on_slot_begin(c, self.slot(0), 0)
        assert action.kind is TxActionKind.SEND_DATA
        assert action.payload == b"payload"

    def test_empty_queue_sync_slot_sends_sync(self):
        action = on_slot_begin(conn(0), self.slot(0, is_sync=True), 0)
        assert action.kind is TxActionKind.SEND_SYNC

    def test_empty_queue_no_sync_duty(self):
        c = conn(0, auto_sync=False)
        assert on_slot_begin(c, self.slot(0, is_sync=True), 0).kind is TxActionKind.NO_OP
        assert on_slot_begin(conn(0), self.slot(0), 0).kind is TxActionKind.NO_OP

    def test_contention_slot_carries_queue(self):
        c = conn(0)
        c.tx_queue.append(b"x")
        assert on_slot_begin(c, self.slot(CONTENTION), 0).kind is TxActionKind.SEND_DATA


class TestCca:
    def test_fig4_contention_narrative(self):
        """Slot 1: net 1 clear on channel 0, net 2 busy and retries; slot 2:
        both clear on distinct hop channels."""
        state = CcaState(channel_count=2, retry_delay_us=64)
        first = cca_attempt(state, 0, now_us=0, airtime_us=150)
        assert first.kind is CcaOutcomeKind.CLEAR
        second = cca_attempt(state, 0, now_us=5, airtime_us=150)
        assert second.kind is CcaOutcomeKind.BUSY
        assert second.retry_at_us == 5 + 64
        # second timeslot: networks hop to distinct channels
        third = cca_attempt(state, 0, now_us=250, airtime_us=150)
        fourth = cca_attempt(state, 1, now_us=250, airtime_us=150)
        assert third.kind is CcaOutcomeKind.CLEAR
        assert fourth.kind is CcaOutcomeKind.CLEAR

    def test_clear_marks_channel_busy(self):
        state = CcaState(1)
        outcome = cca_attempt(state, 0, 100, 50)
        assert outcome.busy_until_us == 150
        assert state.channel_busy_until[0] == 150

    def test_channel_free_after_airtime(self):
        state = CcaState(1)
        cca_attempt(state, 0, 0, 150)
        assert cca_attempt(state, 0, 150, 10).kind is CcaOutcomeKind.CLEAR


class TestSyncLoss:
    def test_within_max_period(self):
        c = conn(0)
        c.last_tx_time_us = 0
        assert not detect_sync_loss(c, 9_900)

    def test_beyond_max_period(self):
        c = conn(0)
        c.last_tx_time_us = 0
        assert detect_sync_loss(c, 10_100)

    def test_fresh_connection(self):
        c = conn(0)
        c.last_tx_time_us = 5000
        assert not detect_sync_loss(c, 5000)

    def test_boundary_is_exclusive(self):
        c = conn(0)
        assert not detect_sync_loss(c, MAX_SYNC_PERIOD_US)


class TestTraceLine:
    def test_format(self):
        line = trace_line(125, "tx", 0, 1, 2, 7, "data:150")
        assert line == "125,tx,0,1,2,7,data:150"

    def test_missing_fields_dashed(self):
        assert trace_line(1, "capture", 0, 0, None, 3, "ok") == "1,capture,0,0,-,3,ok"
