"""Level 0 -> 1 -> 2 -> 3 processing with provenance.

Staging + dedup, promotion (sensor time to UTC, geolocation), calibration to
physical units, bad-interval masking, weather ingestion, and time-step
gridding. Every batch is tagged with a load or calibration version resolving
to a LoadHistory record.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

from . import calib
from .calib import ADC_MAX, BATTERY_ADC_FULLSCALE_V
from .collector import read_level0
from .config import utc_seconds
from .registry import Registry, locate_sensor
from .store import (
    BadDataInterval,
    CalibratedRow,
    DataSeriesRow,
    LoadRecord,
    MeasurementRow,
    StagedRow,
    Store,
    WeatherDay,
)

WEATHER_HEADER = "date,tmin_c,tmax_c,tavg_c,precipitation_mm,humidity_pct,pressure_hpa,events"

# Level-0 reading columns in record order, and the sensor type sourcing each.
_CHANNEL_TYPES = ("soil_temperature", "soil_moisture", "box_temperature", "photo", "battery_voltage")


class PipelineError(ValueError):
    pass


def stage_and_dedup(csv_path, store: Store):
    """Load a Level-0 file into staging, dropping duplicate (mote, epoch, seq)
    keys and out-of-range rows. Returns (staged, duplicates, malformed)."""
    try:
        rows = read_level0(csv_path)
    except ValueError as exc:
        raise PipelineError(str(exc)) from exc
    seen = {(m.mote_id, m.epoch, m.seq) for m in store.measurement}
    seen.update((s.mote_id, s.epoch, s.seq) for s in store.staging)
    staged = duplicates = malformed = 0
    for row in rows:
        try:
            epoch = int(row["epoch"])
            seq = int(row["seq"])
            mote_time = int(row["mote_time_s"])
            readings = tuple(int(row[k]) for k in ("soil_temp_adc", "soil_moist_adc",
                                                   "box_temp_adc", "photo_adc", "battery_adc"))
            anchor_mote = int(row["anchor_mote_time_s"])
            anchor_utc = utc_seconds(row["anchor_utc_iso8601"])
        except (ValueError, TypeError):
            malformed += 1
            continue
        if any(not 0 <= r <= ADC_MAX for r in readings) or mote_time < 0:
            malformed += 1
            continue
        key = (row["mote_id"], epoch, seq)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        store.staging.append(StagedRow(
            download_id=row["download_id"], mote_id=row["mote_id"], epoch=epoch, seq=seq,
            mote_time_s=mote_time, readings=readings,
            anchor_mote_time_s=anchor_mote, anchor_utc_s=anchor_utc))
        staged += 1
    return staged, duplicates, malformed


def promote_level1(store: Store, registry: Registry, load_version: str,
                   load_time_s: int | None = None) -> int:
    """Promote staging to Level-1 measurements: UTC conversion from the
    per-row anchor, geolocation, bad-interval flagging. Purges staging and
    writes the LoadHistory record."""
    if not store.staging:
        return 0
    sensors_by_mote: dict[tuple[str, str], object] = {}
    positions: dict[str, tuple[float, float, float]] = {}
    for s in registry.sensors.values():
        sensors_by_mote[(s.mote_id, s.sensor_type)] = s
        _, _, (lat, lon), depth = locate_sensor(registry, s.sensor_id)
        positions[s.sensor_id] = (lat, lon, depth)

    # Clock regression inside an epoch means a missed reboot: quarantine.
    quarantined = 0
    ordered = sorted(store.staging, key=lambda r: (r.mote_id, r.epoch, r.seq))
    last_time: dict[tuple[str, int], int] = {}
    good_rows = []
    for row in ordered:
        key = (row.mote_id, row.epoch)
        if key in last_time and row.mote_time_s < last_time[key]:
            quarantined += 1
            continue
        last_time[key] = row.mote_time_s
        good_rows.append(row)

    bad_by_sensor: dict[str, list[BadDataInterval]] = {}
    for interval in store.bad_data:
        bad_by_sensor.setdefault(interval.sensor_id, []).append(interval)

    promoted = 0
    missing_channels = 0
    for row in good_rows:
        if row.mote_id not in registry.motes:
            raise PipelineError(f"staged data for unknown mote {row.mote_id!r}")
        utc_s = row.anchor_utc_s + (row.mote_time_s - row.anchor_mote_time_s)
        for channel, sensor_type in enumerate(_CHANNEL_TYPES):
            sensor = sensors_by_mote.get((row.mote_id, sensor_type))
            if sensor is None:
                missing_channels += 1
                continue
            lat, lon, depth = positions[sensor.sensor_id]
            is_bad = 0
            for interval in bad_by_sensor.get(sensor.sensor_id, ()):
                if interval.start_utc_s <= utc_s < interval.end_utc_s:
                    is_bad = 1
                    break
            store.measurement.append(MeasurementRow(
                sensor_id=sensor.sensor_id, mote_id=row.mote_id, utc_s=utc_s,
                raw_value=row.readings[channel], lat=lat, lon=lon, depth_cm=depth,
                mote_time_s=row.mote_time_s, epoch=row.epoch, seq=row.seq,
                download_id=row.download_id, anchor_mote_time_s=row.anchor_mote_time_s,
                anchor_utc_s=row.anchor_utc_s, load_version=load_version))
            promoted += 1

    notes = []
    if quarantined:
        notes.append(f"{quarantined} rows quarantined (clock regression without epoch increment)")
    if missing_channels:
        notes.append(f"{missing_channels} channel values dropped (no matching sensor)")
    if load_time_s is None:
        load_time_s = max((m.utc_s for m in store.measurement), default=0)
    files = ";".join(sorted({r.download_id for r in store.staging}))
    store.load_history.append(LoadRecord(
        load_version=load_version, filename=files, load_time_s=load_time_s,
        procedure_name="promote_level1", error_notes="; ".join(notes)))
    store.staging.clear()
    return promoted


def _has_thermistor(sensor) -> bool:
    return any(c != 0.0 for c in sensor.calibration.thermistor_coeffs)


def _has_watermark(sensor) -> bool:
    return any(c != 0.0 for c in sensor.calibration.watermark_coeffs)


def calibrate_pending(store: Store, registry: Registry, calib_version: str,
                      step_s: int = 600) -> int:
    """Convert every processed=0, is_bad=0 measurement to physical units.

    Moisture conversion needs soil temperature: same mote at the same instant
    when available, otherwise the patch-average soil temperature for the
    measurement's time step."""
    pending = [m for m in store.measurement if not m.processed and not m.is_bad]
    if not pending:
        return 0
    sensors = registry.sensors
    patch_of_mote = {m.mote_id: m.patch_id for m in registry.motes.values()}

    def convert_temperature(m, sensor):
        r = calib.adc_to_resistance(m.raw_value, sensor.calibration.reference_resistor_ohms,
                                    sensor.calibration.reference_bias_ohms)
        value, _ = calib.thermistor_celsius(r, sensor.calibration.thermistor_coeffs)
        return value

    calibrated_count = 0
    skipped = 0
    moisture_rows = []

    # Pass 1: everything except moisture.
    for m in pending:
        sensor = sensors.get(m.sensor_id)
        if sensor is None:
            skipped += 1
            continue
        st = sensor.sensor_type
        if st == "soil_moisture":
            moisture_rows.append(m)
            continue
        try:
            if st in ("soil_temperature", "box_temperature"):
                if not _has_thermistor(sensor):
                    skipped += 1
                    continue
                value = convert_temperature(m, sensor)
            elif st == "battery_voltage":
                value = m.raw_value * BATTERY_ADC_FULLSCALE_V / ADC_MAX
            else:  # photo: raw proxy, no conversion defined
                value = float(m.raw_value)
        except calib.OpenCircuitError:
            skipped += 1
            continue
        except calib.CalibrationDomainError:
            skipped += 1
            continue
        store.calibrated.append(CalibratedRow(
            sensor_id=m.sensor_id, utc_s=m.utc_s, value=value,
            std_error=sensor.precision, calib_version=calib_version))
        m.processed = 1
        calibrated_count += 1

    # Reference temperatures: the whole Calibrated table, including soil
    # temps converted in earlier runs. Dedupe per (sensor, time) first.
    soil_temp_rows: dict[tuple[str, int], tuple[str, float]] = {}
    for c in store.calibrated:
        sensor = sensors.get(c.sensor_id)
        if sensor is not None and sensor.sensor_type == "soil_temperature":
            soil_temp_rows[(c.sensor_id, c.utc_s)] = (sensor.mote_id, c.value)
    soil_temp_at: dict[tuple[str, int], float] = {}
    patch_step_acc: dict[tuple[str, int], list[float]] = {}
    for (_, utc_s), (mote_id, value) in soil_temp_rows.items():
        soil_temp_at[(mote_id, utc_s)] = value
        acc = patch_step_acc.setdefault((patch_of_mote[mote_id], utc_s // step_s), [0.0, 0])
        acc[0] += value
        acc[1] += 1

    # Pass 2: moisture, with the co-located or patch-average temperature.
    for m in moisture_rows:
        sensor = sensors[m.sensor_id]
        if not _has_watermark(sensor):
            skipped += 1
            continue
        temp = soil_temp_at.get((m.mote_id, m.utc_s))
        if temp is None:
            acc = patch_step_acc.get((patch_of_mote[m.mote_id], m.utc_s // step_s))
            if acc is None or acc[1] == 0:
                skipped += 1
                continue
            temp = acc[0] / acc[1]
        try:
            r = calib.adc_to_resistance(m.raw_value, sensor.calibration.reference_resistor_ohms,
                                        sensor.calibration.reference_bias_ohms)
            value, _ = calib.watermark_kpa(r, temp, sensor.calibration.watermark_coeffs)
        except (calib.OpenCircuitError, calib.CalibrationDomainError):
            skipped += 1
            continue
        store.calibrated.append(CalibratedRow(
            sensor_id=m.sensor_id, utc_s=m.utc_s, value=value,
            std_error=sensor.precision, calib_version=calib_version))
        m.processed = 1
        calibrated_count += 1

    notes = f"{skipped} rows skipped (missing constants or reference temperature)" if skipped else ""
    load_time = max((m.utc_s for m in pending), default=0)
    store.load_history.append(LoadRecord(
        load_version=calib_version, filename="", load_time_s=load_time,
        procedure_name="calibrate_pending", error_notes=notes))
    return calibrated_count


def mark_bad(store: Store, interval: BadDataInterval) -> int:
    """Flag overlapping measurements and purge already-derived values."""
    if interval not in store.bad_data:
        store.bad_data.append(interval)
    affected = 0
    for m in store.measurement:
        if (m.sensor_id == interval.sensor_id and not m.is_bad
                and interval.start_utc_s <= m.utc_s < interval.end_utc_s):
            m.is_bad = 1
            affected += 1
    kept = []
    for c in store.calibrated:
        if (c.sensor_id == interval.sensor_id
                and interval.start_utc_s <= c.utc_s < interval.end_utc_s):
            affected += 1
        else:
            kept.append(c)
    store.calibrated[:] = kept
    return affected


def grid_dataseries(store: Store, step_s: int = 600, gap_policy: str = "missing",
                    max_gap_steps: int = 0) -> int:
    """Rebuild the Level-3 grid: per sensor, per [k*step, (k+1)*step) window.

    gap_policy "interpolate" linearly fills interior runs of empty steps no
    longer than max_gap_steps; filled cells carry interpolated=1, count=0.
    """
    if step_s <= 0 or 3600 % step_s != 0:
        raise PipelineError(f"step {step_s} s must divide 3600")
    if gap_policy not in ("missing", "interpolate"):
        raise PipelineError(f"unknown gap policy {gap_policy!r}")
    by_cell: dict[tuple[str, int], list[float]] = {}
    for c in store.calibrated:
        by_cell.setdefault((c.sensor_id, c.utc_s // step_s), []).append(c.value)
    cells: dict[tuple[str, int], DataSeriesRow] = {}
    for (sensor_id, step), values in by_cell.items():
        n = len(values)
        mean = sum(values) / n
        if n > 1:
            var = sum((v - mean) ** 2 for v in values) / (n - 1)
            stddev = math.sqrt(max(0.0, var))
        else:
            stddev = 0.0
        cells[(sensor_id, step)] = DataSeriesRow(
            sensor_id=sensor_id, step_index=step, step_s=step_s, mean=mean,
            min=min(values), max=max(values), stddev=stddev, count=n)
    if gap_policy == "interpolate" and max_gap_steps > 0:
        by_sensor: dict[str, list[int]] = {}
        for sensor_id, step in cells:
            by_sensor.setdefault(sensor_id, []).append(step)
        for sensor_id, steps in by_sensor.items():
            steps.sort()
            for left, right in zip(steps, steps[1:]):
                gap = right - left - 1
                if gap == 0 or gap > max_gap_steps:
                    continue
                lo = cells[(sensor_id, left)].mean
                hi = cells[(sensor_id, right)].mean
                for k in range(1, gap + 1):
                    mean = lo + (hi - lo) * k / (gap + 1)
                    cells[(sensor_id, left + k)] = DataSeriesRow(
                        sensor_id=sensor_id, step_index=left + k, step_s=step_s,
                        mean=mean, min=mean, max=mean, stddev=0.0, count=0, interpolated=1)
    store.dataseries[:] = [cells[key] for key in sorted(cells)]
    return len(store.dataseries)


def ingest_weather(csv_path, store: Store) -> int:
    """Load daily weather rows; re-ingest replaces by date (last writer wins)."""
    path = Path(csv_path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return 0
        if reader.fieldnames != WEATHER_HEADER.split(","):
            raise PipelineError(f"not a weather file: columns {reader.fieldnames}")
        count = 0
        for row in reader:
            try:
                day = WeatherDay(
                    date=row["date"],
                    tmin_c=float(row["tmin_c"]), tmax_c=float(row["tmax_c"]),
                    tavg_c=float(row["tavg_c"]),
                    precipitation_mm=float(row["precipitation_mm"]),
                    humidity_pct=float(row["humidity_pct"]),
                    pressure_hpa=float(row["pressure_hpa"]),
                    events=frozenset(t for t in row["events"].split(";") if t))
            except (ValueError, TypeError):
                continue
            if not day.tmin_c <= day.tavg_c <= day.tmax_c:
                continue  # rejected and counted as dropped
            store.weather[day.date] = day
            count += 1
    return count


def reconstruct_level0(store: Store, registry: Registry) -> dict[str, list[str]]:
    """Rebuild Level-0 CSV data lines from Level-1 rows, keyed by download.

    Exact inverse of ingestion for motes carrying all five channels; the
    acceptance check for "invertible and lossless"."""
    from .config import iso_utc

    type_of = {s.sensor_id: s.sensor_type for s in registry.sensors.values()}
    groups: dict[tuple[str, str, int, int], dict] = {}
    for m in store.measurement:
        key = (m.download_id, m.mote_id, m.epoch, m.seq)
        g = groups.setdefault(key, {
            "mote_time_s": m.mote_time_s,
            "anchor_mote_time_s": m.anchor_mote_time_s,
            "anchor_utc_s": m.anchor_utc_s,
            "readings": {},
        })
        g["readings"][type_of[m.sensor_id]] = m.raw_value
    out: dict[str, list[str]] = {}
    for (download_id, mote_id, epoch, seq) in sorted(groups):
        g = groups[(download_id, mote_id, epoch, seq)]
        vals = ",".join(str(g["readings"].get(t, 0)) for t in _CHANNEL_TYPES)
        line = (f"{download_id},{mote_id},{epoch},{seq},{g['mote_time_s']},{vals},"
                f"{g['anchor_mote_time_s']},{iso_utc(g['anchor_utc_s'])}")
        out.setdefault(download_id, []).append(line)
    return out
