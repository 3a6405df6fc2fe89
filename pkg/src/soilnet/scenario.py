"""End-to-end scenario runs: simulate motes and downloads, feed the
pipeline, grid, build the cube, and emit reports.

Everything is derived from (config, seed): simulated clocks drive all
timestamps, so a rerun with the same seed is byte-identical.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .channel import DELIVERED, LinkModel, transmit
from .collector import (
    DownloadError,
    DownloadPolicy,
    export_level0,
    handle_status,
    run_download,
)
from .config import ConfigError, iso_utc, parse_sections
from .cube import Cube
from .energy import BatteryModel, default_budget, duty_cycle_avg, predict_lifetime_days, total_avg_current
from .environment import EnvironmentModel, environment_from_section
from .motesim import MoteState, advance
from .pipeline import (
    calibrate_pending,
    grid_dataseries,
    ingest_weather,
    promote_level1,
    stage_and_dedup,
)
from .registry import Registry, load_site_config
from .report import render_timeseries_svg
from .store import Store

DAY_S = 86_400


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    registry_path: Path
    start_utc_s: int
    duration_s: int
    seed: int
    sample_interval_s: int = 60
    download_every_s: int = 7 * DAY_S
    weather_path: Path | None = None
    gap_policy: str = "missing"
    max_gap_steps: int = 0
    out_dir: Path = Path("out")
    env: EnvironmentModel | None = None
    battery: BatteryModel = field(default_factory=BatteryModel)
    beacon_link: LinkModel = field(default_factory=LinkModel)
    download_link: LinkModel = field(default_factory=LinkModel)
    beacon_links_by_mote: dict[str, LinkModel] = field(default_factory=dict)
    policy: DownloadPolicy = field(default_factory=DownloadPolicy)


def _link_from_section(sec) -> LinkModel:
    return LinkModel(
        loss_prob=sec.get_float("loss_prob", 0.0),
        corrupt_prob=sec.get_float("corrupt_prob", 0.0),
        lqi_mean_good=sec.get_float("lqi_mean_good", 102.0),
        lqi_mean_bad=sec.get_float("lqi_mean_bad", 68.0),
        lqi_sigma=sec.get_float("lqi_sigma", 4.0),
        quality_mixture=sec.get_float("quality_mixture", 1.0),
        state_persistence=sec.get_float("state_persistence", 0.0),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    sections = parse_sections(path)
    main = next((s for s in sections if s.name == "scenario"), None)
    if main is None:
        raise ConfigError("scenario config needs a [scenario] section", path, 1)
    if not main.has("seed"):
        raise main.error("scenario requires an explicit seed (no ambient randomness)", "seed")
    duration_days = main.get_float("duration_days")
    if duration_days <= 0:
        raise main.error("duration_days must be positive", "duration_days")
    start = int(main.get_utc("start_utc").timestamp())
    sc = Scenario(
        name=main.get_str("name", path.stem),
        registry_path=path.parent / main.get_str("registry"),
        start_utc_s=start,
        duration_s=int(duration_days * DAY_S),
        seed=main.get_int("seed"),
        sample_interval_s=main.get_int("sample_interval_s", 60),
        download_every_s=int(main.get_float("download_every_days", 7.0) * DAY_S),
        weather_path=(path.parent / main.get_str("weather")) if main.has("weather") else None,
        gap_policy=main.get_str("gap_policy", "missing"),
        max_gap_steps=main.get_int("max_gap_steps", 0),
        out_dir=path.parent / main.get_str("out_dir", "out"),
    )
    if sc.download_every_s <= 0:
        raise main.error("download_every_days must be positive", "download_every_days")
    for sec in sections:
        if sec.name == "environment":
            sc.env = environment_from_section(sec, start)
        elif sec.name == "beacon_link":
            link = _link_from_section(sec)
            if sec.has("mote_id"):
                sc.beacon_links_by_mote[sec.get_str("mote_id")] = link
            else:
                sc.beacon_link = link
        elif sec.name == "download_link":
            sc.download_link = _link_from_section(sec)
        elif sec.name == "battery":
            sc.battery = BatteryModel(
                cells=sec.get_int("cells", 2),
                capacity_mah=sec.get_float("capacity_mah", 2200.0),
                v_full_cell=sec.get_float("v_full_cell", 1.5),
                v_cutoff_cell=sec.get_float("v_cutoff_cell", 0.8),
                flash_floor_pack=sec.get_float("flash_floor_pack", 2.2),
                radio_floor_pack=sec.get_float("radio_floor_pack", 2.10),
                temp_coeff_v_per_c=sec.get_float("temp_coeff_v_per_c", 0.004),
            )
        elif sec.name not in ("scenario",):
            raise sec.error(f"unknown section [{sec.name}] in scenario config")
    if sc.env is None:
        sc.env = EnvironmentModel(t0_utc_s=start)
    return sc


def run_scenario(config_path, out_dir=None, seed: int | None = None) -> Path:
    """Run a full deployment scenario; returns the artifact directory."""
    sc = load_scenario(config_path)
    if seed is not None:
        sc.seed = seed
    registry = load_site_config(sc.registry_path)
    out = Path(out_dir) if out_dir is not None else sc.out_dir
    (out / "level0").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)

    motes = []
    for mote_id in sorted(registry.motes):
        sensors = {s.sensor_type: s for s in registry.mote_sensors(mote_id)}
        motes.append(MoteState(mote_id=mote_id, boot_utc_s=sc.start_utc_s, sensors=sensors,
                               battery=sc.battery, sample_interval_s=sc.sample_interval_s))

    beacon_rng = {m.mote_id: random.Random(f"{sc.seed}:{m.mote_id}:beacon") for m in motes}
    dl_rng = {m.mote_id: random.Random(f"{sc.seed}:{m.mote_id}:download") for m in motes}

    store = Store(out / "store")
    health: dict = {}
    next_seq = {m.mote_id: 0 for m in motes}
    stats_lines = ["download_id,mote_id,since_seq,records,packets_expected,"
                   "packets_received_bulk,bulk_losses,retransmission_requests,"
                   "max_retries_for_one_packet,duration_s,outcome"]

    end = sc.start_utc_s + sc.duration_s
    checkpoints = list(range(sc.start_utc_s + sc.download_every_s, end + 1, sc.download_every_s))
    if not checkpoints or checkpoints[-1] != end:
        checkpoints.append(end)
    download_n = 0
    for t_dl in checkpoints:
        for mote in motes:
            mid = mote.mote_id
            link = sc.beacon_links_by_mote.get(mid, sc.beacon_link)
            for em in advance(mote, sc.env, beacon_rng[mid], t_dl):
                if em.kind != "beacon":
                    continue
                delivery = transmit(link, beacon_rng[mid], em.payload)
                if delivery.outcome == DELIVERED:
                    handle_status(health, em.payload, delivery.lqi, em.utc_s)
            last_seen = health[mid].last_seen_utc_s if mid in health else None
            download_id = f"dl{download_n:04d}-{mid}"
            since = next_seq[mid]
            try:
                records, stats = run_download(
                    mote, since, sc.download_link, dl_rng[mid], sc.policy,
                    last_status_utc_s=last_seen, now_utc_s=t_dl)
            except DownloadError as exc:
                stats_lines.append(f"{download_id},{mid},{since},0,0,0,0,0,0,0,"
                                   f"{type(exc).__name__}")
                continue
            if records:
                csv_path = out / "level0" / f"{download_id}.csv"
                export_level0(records, mid, download_id,
                              (mote.clock_s, iso_utc(t_dl)), csv_path, epoch=mote.epoch)
                stage_and_dedup(csv_path, store)
                promote_level1(store, registry, store.next_load_version(), load_time_s=t_dl)
                next_seq[mid] = records[-1].seq + 1
            stats_lines.append(
                f"{download_id},{mid},{since},"
                f"{len(records)},{stats.packets_expected},{stats.packets_received_bulk},"
                f"{stats.bulk_losses},{stats.retransmission_requests},"
                f"{stats.max_retries_for_one_packet},{stats.duration_s:.2f},ok")
        download_n += 1

    if sc.weather_path is not None:
        ingest_weather(sc.weather_path, store)
    calibrate_pending(store, registry, "calib-000001")
    grid_dataseries(store, 600, gap_policy=sc.gap_policy, max_gap_steps=sc.max_gap_steps)
    cube = Cube.build(store.dataseries, store.weather, registry)
    store.save()

    _write(out / "reports" / "download_stats.csv", "\n".join(stats_lines) + "\n")
    _write(out / "reports" / "energy.csv", _energy_report(sc, motes))
    _write(out / "reports" / "cube_cells.csv", _cube_snapshot(cube))
    _write(out / "reports" / "moisture_6h.svg", _moisture_chart(store, registry))
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _energy_report(sc: Scenario, motes) -> str:
    budget = default_budget()
    lines = ["section,name,i_on_ma,t_on_s,period_s,avg_ma"]
    for c in budget.components:
        lines.append(f"budget,{c.name},{c.i_on_ma:.6f},{c.t_on_s:.3f},{c.period_s:.1f},"
                     f"{duty_cycle_avg(c.i_on_ma, c.t_on_s, c.period_s):.6f}")
    total = total_avg_current(budget)
    lines.append(f"budget,total,,,,{total:.6f}")
    lines.append(f"lifetime,to_pack_cutoff_days,,,,"
                 f"{predict_lifetime_days(sc.battery, total, 'pack_cutoff'):.2f}")
    lines.append(f"lifetime,to_flash_floor_days,,,,"
                 f"{predict_lifetime_days(sc.battery, total, 'flash_floor'):.2f}")
    for mote in motes:
        for subsystem in sorted(mote.energy_ledger):
            lines.append(f"ledger,{mote.mote_id}:{subsystem},,,,"
                         f"{mote.energy_ledger[subsystem]:.6f}")
    return "\n".join(lines) + "\n"


def _cube_snapshot(cube: Cube) -> str:
    lines = ["measure,site_id,patch_id,mote_id,sensor_id,date,hour,slot,"
             "mean,min,max,stddev,count,interpolated"]
    for f in cube.facts:
        loc = f.location
        lines.append(f"{f.measure},{loc.site_id},{loc.patch_id or ''},{loc.mote_id or ''},"
                     f"{loc.sensor_id or ''},{f.time.date},"
                     f"{'' if f.time.hour is None else f.time.hour},"
                     f"{'' if f.time.slot is None else f.time.slot},"
                     f"{f.mean:.6f},{f.vmin:.6f},{f.vmax:.6f},{f.stddev:.6f},"
                     f"{f.count},{int(f.interpolated)}")
    return "\n".join(lines) + "\n"


def _moisture_chart(store: Store, registry: Registry, bucket_s: int = 6 * 3600,
                    max_series: int = 3) -> str:
    """Six-hour moisture averages for the first few motes, with the weather
    overlay (precipitation bars, temperature band)."""
    moisture_sensors = sorted(
        (s for s in registry.sensors.values() if s.sensor_type == "soil_moisture"),
        key=lambda s: s.sensor_id)[:max_series]
    series = []
    for sensor in moisture_sensors:
        acc: dict[int, list[float]] = {}
        for row in store.dataseries:
            if row.sensor_id != sensor.sensor_id or row.count == 0:
                continue
            bucket = (row.step_index * row.step_s) // bucket_s
            cell = acc.setdefault(bucket, [0.0, 0])
            cell[0] += row.mean * row.count
            cell[1] += row.count
        pts = [(b * bucket_s + bucket_s // 2, acc[b][0] / acc[b][1]) for b in sorted(acc)]
        series.append((sensor.sensor_id, pts))
    return render_timeseries_svg(series, weather=store.weather,
                                 title="Soil moisture (6 h averages)", y_label="kPa")
