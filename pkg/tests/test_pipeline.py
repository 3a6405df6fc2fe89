from __future__ import annotations

import random

import pytest

from conftest import T0, make_registry
from soilnet.channel import LinkModel
from soilnet.collector import LEVEL0_HEADER, export_level0, run_download
from soilnet.config import iso_utc
from soilnet.motesim import MoteState, advance
from soilnet.pipeline import (
    PipelineError,
    calibrate_pending,
    grid_dataseries,
    ingest_weather,
    mark_bad,
    promote_level1,
    reconstruct_level0,
    stage_and_dedup,
)
from soilnet.store import BadDataInterval, CalibratedRow, Store

WEATHER = "scenarios/weather_jan2006.csv"


def simulate_level0(tmp_path, registry, env, hours=6, mote_ids=("m1", "m2")):
    paths = []
    for mid in mote_ids:
        sensors = {s.sensor_type: s for s in registry.mote_sensors(mid)}
        mote = MoteState(mote_id=mid, boot_utc_s=T0, sensors=sensors)
        advance(mote, env, random.Random(0), T0 + hours * 3600)
        records, _ = run_download(mote, 0, LinkModel(), random.Random(0))
        path = tmp_path / f"dl0-{mid}.csv"
        export_level0(records, mid, f"dl0-{mid}", (mote.clock_s, T0 + hours * 3600), path)
        paths.append(path)
    return paths


@pytest.fixture
def two_motes():
    return make_registry(("m1", "m2"))


@pytest.fixture
def loaded(tmp_path, two_motes, env):
    store = Store(tmp_path / "store")
    for p in simulate_level0(tmp_path, two_motes, env):
        stage_and_dedup(p, store)
    promote_level1(store, two_motes, store.next_load_version())
    return store


def test_stage_and_promote_counts(tmp_path, two_motes, env):
    store = Store(tmp_path / "store")
    paths = simulate_level0(tmp_path, two_motes, env, hours=2)
    staged, dups, malformed = stage_and_dedup(paths[0], store)
    assert (staged, dups, malformed) == (120, 0, 0)
    n = promote_level1(store, two_motes, "load-000001")
    assert n == 120 * 5  # five channels per record
    assert store.staging == []  # purged
    assert store.load_history[0].load_version == "load-000001"


def test_anchor_time_arithmetic(loaded):
    for m in loaded.measurement:
        assert m.utc_s == m.anchor_utc_s + (m.mote_time_s - m.anchor_mote_time_s)
        assert m.utc_s == T0 + m.mote_time_s  # boot == anchor epoch here


def test_double_ingest_is_noop(tmp_path, loaded, two_motes, env):
    before = len(loaded.measurement)
    for p in simulate_level0(tmp_path, two_motes, env):
        staged, dups, malformed = stage_and_dedup(p, loaded)
        assert staged == 0
        assert dups > 0
    assert promote_level1(loaded, two_motes, "load-000002") == 0
    assert len(loaded.measurement) == before


def test_geolocation_attached(loaded, two_motes):
    by_mote = {m.mote_id: m for m in loaded.measurement}
    assert by_mote["m1"].lon != by_mote["m2"].lon  # 2 m spacing shows up
    assert by_mote["m1"].lat == pytest.approx(39.0, abs=1e-4)


def craft_level0(path, rows):
    lines = [LEVEL0_HEADER]
    for seq, mote_time in rows:
        lines.append(f"d1,m1,0,{seq},{mote_time},100,200,300,400,500,0,{iso_utc(T0)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_clock_regression_quarantined(tmp_path, registry):
    store = Store(tmp_path / "store")
    craft_level0(tmp_path / "a.csv", [(0, 60), (1, 120), (2, 90), (3, 180)])
    stage_and_dedup(tmp_path / "a.csv", store)
    n = promote_level1(store, registry, "load-000001")
    assert n == 3 * 5  # seq 2 quarantined
    assert "quarantined" in store.load_history[0].error_notes


def test_malformed_rows_counted(tmp_path, registry):
    store = Store(tmp_path / "store")
    path = tmp_path / "a.csv"
    lines = [LEVEL0_HEADER,
             f"d1,m1,0,0,60,100,200,300,400,500,0,{iso_utc(T0)}",
             f"d1,m1,0,1,120,2000,200,300,400,500,0,{iso_utc(T0)}",  # ADC out of range
             f"d1,m1,0,2,-5,100,200,300,400,500,0,{iso_utc(T0)}",  # negative time
             f"d1,m1,0,3,xx,100,200,300,400,500,0,{iso_utc(T0)}",  # unparsable
             f"d1,m1,0,0,60,100,200,300,400,500,0,{iso_utc(T0)}"]  # duplicate
    path.write_text("\n".join(lines) + "\n")
    assert stage_and_dedup(path, store) == (1, 1, 3)


def test_unknown_mote_rejected(tmp_path, registry):
    store = Store(tmp_path / "store")
    craft_level0(tmp_path / "a.csv", [(0, 60)])
    store.staging[:] = []
    stage_and_dedup(tmp_path / "a.csv", store)
    for row in store.staging:
        row.mote_id = "ghost"
    with pytest.raises(PipelineError):
        promote_level1(store, registry, "load-000001")


def test_missing_sensor_drops_channel(tmp_path, env):
    reg = make_registry(("m1",), drop_sensors=(("m1", "photo"),))
    store = Store(tmp_path / "store")
    paths = simulate_level0(tmp_path, reg, env, hours=1, mote_ids=("m1",))
    stage_and_dedup(paths[0], store)
    assert promote_level1(store, reg, "load-000001") == 60 * 4
    assert "dropped" in store.load_history[0].error_notes


def test_calibration_matches_ground_truth(loaded, two_motes, env):
    n = calibrate_pending(loaded, two_motes, "calib-000001")
    assert n == len(loaded.measurement)
    assert all(m.processed for m in loaded.measurement)
    sensors = two_motes.sensors
    for c in loaded.calibrated:
        st = sensors[c.sensor_id].sensor_type
        if st == "soil_temperature":
            assert c.value == pytest.approx(env.soil_temperature(c.utc_s), abs=0.25)
            assert c.std_error == 0.5
        elif st == "soil_moisture":
            assert c.value == pytest.approx(env.moisture_kpa(c.utc_s), abs=2.0)
        elif st == "battery_voltage":
            assert 1.6 <= c.value <= 3.3
    # nothing left pending: a second pass converts zero rows
    assert calibrate_pending(loaded, two_motes, "calib-000002") == 0


def test_moisture_uses_patch_average_without_local_temp(tmp_path, env):
    reg = make_registry(("m1", "m2"), drop_sensors=(("m2", "soil_temperature"),))
    store = Store(tmp_path / "store")
    for p in simulate_level0(tmp_path, reg, env, hours=2):
        stage_and_dedup(p, store)
    promote_level1(store, reg, "load-000001")
    calibrate_pending(store, reg, "calib-000001")
    m2_moist = [c for c in store.calibrated if c.sensor_id == "m2-soil_moisture"]
    assert m2_moist  # converted via the m1 patch-average reference
    for c in m2_moist:
        assert c.value == pytest.approx(env.moisture_kpa(c.utc_s), abs=2.0)


def test_moisture_skipped_without_any_reference(tmp_path, env):
    reg = make_registry(("m1",), drop_sensors=(("m1", "soil_temperature"),))
    store = Store(tmp_path / "store")
    for p in simulate_level0(tmp_path, reg, env, hours=1, mote_ids=("m1",)):
        stage_and_dedup(p, store)
    promote_level1(store, reg, "load-000001")
    calibrate_pending(store, reg, "calib-000001")
    assert [c for c in store.calibrated if c.sensor_id == "m1-soil_moisture"] == []
    assert "skipped" in store.load_history[-1].error_notes


def test_mark_bad_masks_and_purges(loaded, two_motes):
    calibrate_pending(loaded, two_motes, "calib-000001")
    interval = BadDataInterval("m1-soil_temperature", T0 + 3600, T0 + 7200, "ants in box")
    affected = mark_bad(loaded, interval)
    assert affected > 0
    assert not any(c.sensor_id == interval.sensor_id
                   and interval.start_utc_s <= c.utc_s < interval.end_utc_s
                   for c in loaded.calibrated)
    flagged = [m for m in loaded.measurement if m.is_bad]
    assert all(m.sensor_id == interval.sensor_id for m in flagged)
    # idempotent: everything already masked
    assert mark_bad(loaded, interval) == 0
    assert loaded.bad_data.count(interval) == 1
    # gridding never sees masked rows
    grid_dataseries(loaded, 600)
    assert not any(d.sensor_id == interval.sensor_id
                   and interval.start_utc_s <= d.step_index * 600 < interval.end_utc_s
                   for d in loaded.dataseries)


def test_bad_interval_validation():
    with pytest.raises(ValueError):
        BadDataInterval("x", 100, 100)


def test_grid_statistics_oracle(loaded, two_motes):
    calibrate_pending(loaded, two_motes, "calib-000001")
    n = grid_dataseries(loaded, 600)
    assert n == len(loaded.dataseries)
    by_cell = {}
    for c in loaded.calibrated:
        by_cell.setdefault((c.sensor_id, c.utc_s // 600), []).append(c.value)
    assert len(by_cell) == n
    for d in loaded.dataseries:
        vals = by_cell[(d.sensor_id, d.step_index)]
        mean = sum(vals) / len(vals)
        assert d.count == len(vals)
        assert d.mean == pytest.approx(mean)
        assert d.min == min(vals)
        assert d.max == max(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            assert d.stddev == pytest.approx(var ** 0.5)
        else:
            assert d.stddev == 0.0
    # conservation: every calibrated row lands in exactly one cell
    assert sum(d.count for d in loaded.dataseries) == len(loaded.calibrated)


def test_grid_interpolation(tmp_path):
    store = Store(tmp_path / "store")
    for step, value in ((0, 10.0), (2, 14.0), (6, 30.0)):
        store.calibrated.append(CalibratedRow("s", step * 600 + 30, value, 0.0, "c1"))
    grid_dataseries(store, 600, gap_policy="interpolate", max_gap_steps=2)
    cells = {d.step_index: d for d in store.dataseries}
    assert cells[1].mean == pytest.approx(12.0)  # linear midpoint
    assert cells[1].interpolated == 1
    assert cells[1].count == 0
    assert 4 not in cells  # 3-step gap exceeds the limit
    # policy "missing" leaves holes alone
    grid_dataseries(store, 600, gap_policy="missing")
    assert {d.step_index for d in store.dataseries} == {0, 2, 6}


def test_grid_validation(loaded):
    with pytest.raises(PipelineError):
        grid_dataseries(loaded, 700)
    with pytest.raises(PipelineError):
        grid_dataseries(loaded, 600, gap_policy="extrapolate")


def test_weather_ingest(tmp_path):
    store = Store(tmp_path / "store")
    assert ingest_weather(WEATHER, store) == 31
    jan18 = store.weather["2006-01-18"]
    assert jan18.precipitation_mm == 18.0
    assert jan18.events == {"rain", "wind"}
    # last writer wins on re-ingest
    patched = tmp_path / "w.csv"
    patched.write_text(
        "date,tmin_c,tmax_c,tavg_c,precipitation_mm,humidity_pct,pressure_hpa,events\n"
        "2006-01-18,0,5,2.5,20,90,1000,rain\n"
        "2006-01-19,5,3,4,0,80,1010,\n")  # tmin > tmax: dropped
    assert ingest_weather(patched, store) == 1
    assert store.weather["2006-01-18"].precipitation_mm == 20.0
    assert store.weather["2006-01-19"].precipitation_mm == 4.0  # original kept


def test_weather_rejects_other_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    store = Store(tmp_path / "store")
    with pytest.raises(PipelineError):
        ingest_weather(p, store)


def test_reconstruct_level0_is_exact(tmp_path, two_motes, env):
    store = Store(tmp_path / "store")
    paths = simulate_level0(tmp_path, two_motes, env)
    for p in paths:
        stage_and_dedup(p, store)
    promote_level1(store, two_motes, "load-000001")
    recon = reconstruct_level0(store, two_motes)
    for p in paths:
        lines = p.read_text().splitlines()[1:]
        assert recon[lines[0].split(",")[0]] == lines


def test_store_save_open_round_trip(tmp_path, loaded, two_motes):
    calibrate_pending(loaded, two_motes, "calib-000001")
    grid_dataseries(loaded, 600)
    mark_bad(loaded, BadDataInterval("m1-photo", T0, T0 + 60, "check"))
    ingest_weather(WEATHER, loaded)
    loaded.save()
    back = Store.open(loaded.root)
    assert len(back.measurement) == len(loaded.measurement)
    assert back.load_history == loaded.load_history
    assert back.bad_data == loaded.bad_data
    assert back.weather == loaded.weather
    # save -> open -> save is a fixed point: identical bytes table by table
    back.root = tmp_path / "store2"
    back.save()
    for f in sorted(loaded.root.iterdir()):
        assert (back.root / f.name).read_bytes() == f.read_bytes()


def test_store_rejects_foreign_files(tmp_path):
    root = tmp_path / "store"
    root.mkdir()
    (root / "measurement.csv").write_text("sensor_id,value\nx,1\n")
    from soilnet.store import StoreFormatError
    with pytest.raises(StoreFormatError):
        Store.open(root)
