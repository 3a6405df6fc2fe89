from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import T0
from soilnet import motesim
from soilnet.energy import BatteryModel
from soilnet.motesim import (
    FLASH_CAPACITY_RECORDS,
    RECORD_SIZE_BYTES,
    FlashRing,
    MoteState,
    RangeEvictedError,
    SampleRecord,
    advance,
    default_sensor_suite,
    make_status,
    take_sample,
)

DAY = 86_400


def fresh_mote(**kw):
    return MoteState(mote_id="m1", boot_utc_s=T0, sensors=default_sensor_suite("m1"), **kw)


# -- record wire format ------------------------------------------------------

def test_record_round_trip():
    rec = SampleRecord(seq=70_000, mote_time_s=123_456, readings=(1, 1023, 0, 512, 700))
    data = rec.to_bytes()
    assert len(data) == RECORD_SIZE_BYTES == 16
    back = SampleRecord.from_bytes(data, seq_high=70_000)
    assert back == rec


def test_record_big_endian_layout():
    rec = SampleRecord(seq=0x0102, mote_time_s=0x01020304, readings=(5, 6, 7, 8, 9))
    assert rec.to_bytes()[:6] == bytes([1, 2, 3, 4, 1, 2])


# -- flash ring ---------------------------------------------------------------

def test_capacity_arithmetic():
    assert FLASH_CAPACITY_RECORDS == 524_288 // 16 == 32_768


def test_ring_overwrite_boundary():
    ring = FlashRing()
    for i in range(FLASH_CAPACITY_RECORDS):
        ring.append(SampleRecord(i, i, (0, 0, 0, 0, 0)))
    assert ring.overwritten_count == 0
    assert ring.stored_records == FLASH_CAPACITY_RECORDS
    ring.append(SampleRecord(FLASH_CAPACITY_RECORDS, 0, (0, 0, 0, 0, 0)))
    assert ring.overwritten_count == 1
    assert ring.tail_seq == 1
    assert ring.stored_records == FLASH_CAPACITY_RECORDS
    with pytest.raises(RangeEvictedError) as exc:
        ring.read_range(0, 5)
    assert exc.value.lost_count == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=200), st.integers(min_value=2, max_value=40))
def test_ring_invariants(n, capacity):
    ring = FlashRing()
    ring.capacity_records = capacity
    for i in range(n):
        ring.append(SampleRecord(i, i, (0, 0, 0, 0, 0)))
    assert ring.head_seq == n
    assert ring.stored_records == min(n, capacity)
    assert ring.tail_seq == max(0, n - capacity)
    got = ring.read_range(ring.tail_seq, ring.head_seq)
    assert [r.seq for r in got] == list(range(ring.tail_seq, ring.head_seq))


def test_read_range_bounds():
    ring = FlashRing()
    for i in range(10):
        ring.append(SampleRecord(i, i, (0, 0, 0, 0, 0)))
    assert ring.read_range(3, 3) == []
    assert [r.seq for r in ring.read_range(2, 5)] == [2, 3, 4]
    assert ring.record(7).seq == 7
    with pytest.raises(ValueError):
        ring.read_range(5, 11)


# -- sampling and beaconing ---------------------------------------------------

def test_daily_counts(env):
    mote = fresh_mote()
    emissions = advance(mote, env, random.Random(0), T0 + DAY)
    samples = [e for e in emissions if e.kind == "sample"]
    beacons = [e for e in emissions if e.kind == "beacon"]
    assert len(samples) == 1440
    assert len(beacons) == 720 * 6
    assert mote.flash.stored_bytes == 1440 * 16 == 23_040


def test_buffer_lasts_about_22_days():
    assert FLASH_CAPACITY_RECORDS / 1440 == pytest.approx(22.75, abs=0.01)


def test_emissions_time_ordered_and_deterministic(env):
    runs = []
    for _ in range(2):
        mote = fresh_mote()
        runs.append(advance(mote, env, random.Random(7), T0 + 3 * 3600))
    assert runs[0] == runs[1]
    times = [e.utc_s for e in runs[0]]
    assert times == sorted(times)


def test_beacon_window_layout(env):
    mote = fresh_mote()
    emissions = advance(mote, env, random.Random(0), T0 + 240)
    beacons = [e for e in emissions if e.kind == "beacon"]
    assert len(beacons) == 2 * 6
    first_window = beacons[:6]
    offsets = [b.utc_s - first_window[0].utc_s for b in first_window]
    assert offsets == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0, 1.25])
    assert len({id(b.payload) for b in first_window}) == 1  # same status repeated


def test_dynamic_sample_interval(env):
    mote = fresh_mote()
    mote.set_sample_interval(300)
    advance(mote, env, random.Random(0), T0 + 3600)
    assert mote.flash.stored_records == 12
    with pytest.raises(ValueError):
        mote.set_sample_interval(0)


def test_advance_rejects_past(env):
    mote = fresh_mote()
    advance(mote, env, random.Random(0), T0 + 600)
    with pytest.raises(ValueError):
        advance(mote, env, random.Random(0), T0 + 60)


def test_sampling_stops_below_flash_floor(env):
    battery = BatteryModel()
    # pack at ~2.1 V: below the 2.2 V flash floor, above none of it
    consumed = battery.capacity_mah * (3.0 - 2.1) / (3.0 - 1.6)
    mote = fresh_mote(battery=battery, initial_consumed_mah=consumed)
    assert take_sample(mote, env, T0 + 60) is None
    assert mote.flash.stored_records == 0


def test_radio_silence_below_radio_floor(env):
    battery = BatteryModel()
    consumed = battery.capacity_mah * (3.0 - 1.9) / (3.0 - 1.6)
    mote = fresh_mote(battery=battery, initial_consumed_mah=consumed)
    emissions = advance(mote, env, random.Random(0), T0 + DAY)
    assert [e for e in emissions if e.kind == "beacon"] == []


def test_status_accounting(env):
    mote = fresh_mote()
    advance(mote, env, random.Random(0), T0 + 600)
    status = make_status(mote)
    assert status.stored_records == 10
    assert status.highest_seq == 9
    motesim.mark_downloaded(mote, 9)
    assert make_status(mote).stored_records == 0
    assert 0 <= status.battery_adc <= 1023


def test_reboot_opens_new_epoch(env):
    mote = fresh_mote()
    advance(mote, env, random.Random(0), T0 + 600)
    mote.reboot(T0 + 700)
    assert mote.epoch == 1
    assert mote.clock_s == 0
    advance(mote, env, random.Random(0), T0 + 760)
    assert mote.flash.record(mote.flash.head_seq - 1).mote_time_s == 60


def test_energy_ledger_accrues(env):
    mote = fresh_mote()
    advance(mote, env, random.Random(0), T0 + DAY)
    assert mote.energy_ledger["sensing"] == pytest.approx(1440 * 0.64 * 0.79 / 3600)
    assert mote.energy_ledger["radio_status"] == pytest.approx(0.36 * 24, rel=1e-9)
    assert mote.consumed_mah == pytest.approx(sum(mote.energy_ledger.values()))


def test_readings_follow_environment(env):
    mote = fresh_mote()
    noon = take_sample(mote, env, T0 + 12 * 3600)
    midnight = take_sample(mote, env, T0 + 24 * 3600)
    photo_idx = motesim.READING_ORDER.index("photo")
    assert noon.readings[photo_idx] > 700
    assert midnight.readings[photo_idx] == 0
    assert all(0 <= r <= 1023 for r in noon.readings)
