"""One mote's firmware behavior against a synthetic environment.

Minute sampling into a flash ring buffer, duty-cycled status beaconing
(6 beacons per 2-minute window, 250 ms apart), and energy accounting per
subsystem. All randomness comes from an injected generator; a single
MoteState is strictly sequential.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

from . import calib
from .calib import ADC_MAX, BATTERY_ADC_FULLSCALE_V
from .energy import (
    RADIO_ON_CURRENT_MA,
    RADIO_WINDOW_ON_S,
    SAMPLE_CURRENT_MA,
    SAMPLE_DURATION_S,
    BatteryModel,
)
from .registry import CalibrationConstants, Sensor

FLASH_CAPACITY_BYTES = 524_288
RECORD_SIZE_BYTES = 16
FLASH_CAPACITY_RECORDS = FLASH_CAPACITY_BYTES // RECORD_SIZE_BYTES  # 32768

# Wire layout: 4 B mote_time_s, 2 B low bits of seq, 5 x 2 B readings, big-endian.
_RECORD_STRUCT = struct.Struct(">IH5H")

READING_ORDER = ("soil_temperature", "soil_moisture", "box_temperature", "photo", "battery_voltage")


class RangeEvictedError(ValueError):
    """Requested sequence range starts before the ring's oldest record."""

    def __init__(self, from_seq: int, tail_seq: int):
        self.lost_count = tail_seq - from_seq
        super().__init__(
            f"records {from_seq}..{tail_seq - 1} overwritten ({self.lost_count} lost)")


@dataclass(frozen=True)
class SampleRecord:
    seq: int
    mote_time_s: int
    readings: tuple[int, int, int, int, int]

    def to_bytes(self) -> bytes:
        return _RECORD_STRUCT.pack(self.mote_time_s & 0xFFFFFFFF, self.seq & 0xFFFF, *self.readings)

    @classmethod
    def from_bytes(cls, data: bytes, seq_high: int = 0) -> "SampleRecord":
        mote_time, seq_low, *readings = _RECORD_STRUCT.unpack(data)
        return cls(seq=(seq_high & ~0xFFFF) | seq_low, mote_time_s=mote_time,
                   readings=tuple(readings))


class StatusMessage(NamedTuple):
    mote_id: str
    stored_records: int
    highest_seq: int
    battery_adc: int


class Emission(NamedTuple):
    utc_s: float
    kind: str  # "sample" | "beacon"
    payload: object


@dataclass(frozen=True)
class RadioSchedule:
    status_period_s: int = 120
    window_s: float = 2.0  # protocol availability; energy uses the measured 1.9 s
    beacon_spacing_ms: int = 250
    beacons_per_window: int = 6


class FlashRing:
    """Circular record store; overwrite advances the tail."""

    capacity_records = FLASH_CAPACITY_RECORDS

    def __init__(self):
        self._records: list[SampleRecord] = []
        self._start = 0  # index of tail within _records (compacted lazily)
        self.head_seq = 0  # next sequence number to write
        self.tail_seq = 0  # oldest retained sequence number
        self.overwritten_count = 0

    @property
    def stored_records(self) -> int:
        return self.head_seq - self.tail_seq

    @property
    def stored_bytes(self) -> int:
        return self.stored_records * RECORD_SIZE_BYTES

    def append(self, record: SampleRecord) -> None:
        self._records.append(record)
        self.head_seq += 1
        if self.head_seq - self.tail_seq > self.capacity_records:
            self.tail_seq += 1
            self._start += 1
            self.overwritten_count += 1
            if self._start > self.capacity_records:
                del self._records[:self._start]
                self._start = 0

    def read_range(self, from_seq: int, to_seq: int) -> list[SampleRecord]:
        """Records with seq in [from_seq, to_seq), in order; no mutation."""
        if from_seq >= to_seq:
            return []
        if from_seq < self.tail_seq:
            raise RangeEvictedError(from_seq, self.tail_seq)
        if to_seq > self.head_seq:
            raise ValueError(f"range end {to_seq} beyond head {self.head_seq}")
        lo = self._start + (from_seq - self.tail_seq)
        return self._records[lo:lo + (to_seq - from_seq)]

    def record(self, seq: int) -> SampleRecord:
        return self.read_range(seq, seq + 1)[0]


def default_sensor_suite(mote_id: str = "mote",
                         thermistor_coeffs=(1.129148e-3, 2.34125e-4, 8.76741e-8),
                         watermark_coeffs=(-2.0, 20.0, 0.01, 0.05),
                         bias_ohms: float = 0.0) -> dict[str, Sensor]:
    """A standard five-sensor loadout for standalone simulation and tests."""
    cal_t = CalibrationConstants(thermistor_coeffs=thermistor_coeffs,
                                 reference_bias_ohms=bias_ohms)
    cal_m = CalibrationConstants(thermistor_coeffs=thermistor_coeffs,
                                 watermark_coeffs=watermark_coeffs,
                                 reference_bias_ohms=bias_ohms)
    def mk(st, ch, cal, depth, prec):
        return Sensor(sensor_id=f"{mote_id}-{st}", mote_id=mote_id, sensor_type=st,
                      depth_cm=depth, adc_channel=ch, calibration=cal, precision=prec)
    return {
        "soil_temperature": mk("soil_temperature", 0, cal_t, 10.0, 0.5),
        "soil_moisture": mk("soil_moisture", 1, cal_m, 10.0, 2.0),
        "box_temperature": mk("box_temperature", 2, cal_t, -5.0, 0.5),
        "photo": mk("photo", 3, CalibrationConstants(), -5.0, 0.0),
        "battery_voltage": mk("battery_voltage", 4, CalibrationConstants(), -5.0, 0.01),
    }


@dataclass
class MoteState:
    mote_id: str
    boot_utc_s: int
    sensors: dict[str, Sensor] = field(default_factory=dict)
    battery: BatteryModel = field(default_factory=BatteryModel)
    sample_interval_s: int = 60
    schedule: RadioSchedule = field(default_factory=RadioSchedule)
    initial_consumed_mah: float = 0.0
    clock_s: int = 0
    epoch: int = 0
    downloaded_through: int = -1  # highest seq acked by the gateway
    flash: FlashRing = field(default_factory=FlashRing)
    energy_ledger: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.sample_interval_s < 1:
            raise ValueError("sample interval must be >= 1 s")

    @property
    def utc_s(self) -> int:
        return self.boot_utc_s + self.clock_s

    @property
    def consumed_mah(self) -> float:
        return self.initial_consumed_mah + sum(self.energy_ledger.values())

    def charge(self, subsystem: str, current_ma: float, duration_s: float) -> None:
        self.energy_ledger[subsystem] = self.energy_ledger.get(subsystem, 0.0) \
            + current_ma * duration_s / 3600.0

    def pack_voltage(self, temp_c: float | None = None) -> float:
        return self.battery.pack_voltage(self.consumed_mah, temp_c=temp_c)

    def set_sample_interval(self, interval_s: int) -> None:
        """Dynamic sampling frequency, settable at runtime."""
        if interval_s < 1:
            raise ValueError("sample interval must be >= 1 s")
        self.sample_interval_s = int(interval_s)

    def reboot(self, utc_s: int) -> None:
        """Reset the boot-relative clock and open a new epoch."""
        self.boot_utc_s = utc_s
        self.clock_s = 0
        self.epoch += 1


def _quantize(count: float) -> int:
    return min(ADC_MAX, max(0, round(count)))


def synthesize_readings(mote: MoteState, env, utc_s: float) -> tuple[int, int, int, int, int]:
    """Evaluate ground truth and run the calibration chain backwards."""
    soil_t = env.soil_temperature(utc_s)
    air_t = env.air_temperature(utc_s)
    readings = []
    for sensor_type in READING_ORDER:
        sensor = mote.sensors.get(sensor_type)
        if sensor is None:
            readings.append(0)
            continue
        cal = sensor.calibration
        if sensor.sensor_type == "soil_temperature":
            r = calib.thermistor_resistance(soil_t, cal.thermistor_coeffs)
            count = calib.resistance_to_adc(r, cal.reference_resistor_ohms, cal.reference_bias_ohms)
        elif sensor.sensor_type == "box_temperature":
            r = calib.thermistor_resistance(air_t, cal.thermistor_coeffs)
            count = calib.resistance_to_adc(r, cal.reference_resistor_ohms, cal.reference_bias_ohms)
        elif sensor.sensor_type == "soil_moisture":
            r = calib.watermark_resistance(env.moisture_kpa(utc_s), soil_t, cal.watermark_coeffs)
            count = calib.resistance_to_adc(r, cal.reference_resistor_ohms, cal.reference_bias_ohms)
        elif sensor.sensor_type == "photo":
            count = ADC_MAX * env.light_level(utc_s)
        else:  # battery_voltage
            count = ADC_MAX * mote.pack_voltage(air_t) / BATTERY_ADC_FULLSCALE_V
        readings.append(_quantize(count))
    return tuple(readings)


def take_sample(mote: MoteState, env, utc_s: float | None = None) -> SampleRecord | None:
    """Sample all channels and append to flash; None once the pack is below
    the flash floor (flash fails first as the battery dies)."""
    if utc_s is None:
        utc_s = mote.utc_s
    if mote.pack_voltage(env.air_temperature(utc_s)) < mote.battery.flash_floor_pack:
        return None
    record = SampleRecord(seq=mote.flash.head_seq,
                          mote_time_s=int(utc_s - mote.boot_utc_s),
                          readings=synthesize_readings(mote, env, utc_s))
    mote.flash.append(record)
    mote.charge("sensing", SAMPLE_CURRENT_MA, SAMPLE_DURATION_S)
    return record


def make_status(mote: MoteState, temp_c: float | None = None) -> StatusMessage:
    return StatusMessage(
        mote_id=mote.mote_id,
        stored_records=max(0, mote.flash.head_seq - max(mote.flash.tail_seq,
                                                        mote.downloaded_through + 1)),
        highest_seq=mote.flash.head_seq - 1,
        battery_adc=_quantize(ADC_MAX * mote.pack_voltage(temp_c) / BATTERY_ADC_FULLSCALE_V),
    )


def advance(mote: MoteState, env, rng, until_utc_s: float) -> list[Emission]:
    """Run the mote forward, returning samples and beacon transmissions in
    time order. Deterministic for a given (mote, env, rng, schedule)."""
    until_clock = int(until_utc_s) - mote.boot_utc_s
    if until_clock < mote.clock_s:
        raise ValueError("cannot advance into the past")
    sched = mote.schedule
    spacing_s = sched.beacon_spacing_ms / 1000.0
    emissions: list[Emission] = []
    while True:
        next_sample = (mote.clock_s // mote.sample_interval_s + 1) * mote.sample_interval_s
        next_window = (mote.clock_s // sched.status_period_s + 1) * sched.status_period_s
        t = min(next_sample, next_window)
        if t > until_clock:
            break
        mote.clock_s = t
        utc = mote.boot_utc_s + t
        if t % mote.sample_interval_s == 0:
            record = take_sample(mote, env, utc)
            if record is not None:
                emissions.append(Emission(utc, "sample", record))
        if t % sched.status_period_s == 0:
            if mote.pack_voltage(env.air_temperature(utc)) >= mote.battery.radio_floor_pack:
                status = make_status(mote, env.air_temperature(utc))
                for k in range(sched.beacons_per_window):
                    emissions.append(Emission(utc + k * spacing_s, "beacon", status))
                mote.charge("radio_status", RADIO_ON_CURRENT_MA, RADIO_WINDOW_ON_S)
    mote.clock_s = until_clock
    return emissions


def flash_read_range(mote: MoteState, from_seq: int, to_seq: int) -> list[SampleRecord]:
    return mote.flash.read_range(from_seq, to_seq)


def mark_downloaded(mote: MoteState, through_seq: int) -> None:
    mote.downloaded_through = max(mote.downloaded_through, through_seq)
