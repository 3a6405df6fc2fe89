"""Command-line front end: scenario runs, pipeline steps, cube queries,
and report rendering.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError
from .cube import Cube, CubeError, CubeQuery
from .energy import BatteryModel, default_budget, duty_cycle_avg, predict_lifetime_days, total_avg_current
from .pipeline import (
    PipelineError,
    calibrate_pending,
    grid_dataseries,
    ingest_weather,
    promote_level1,
    stage_and_dedup,
)
from .registry import RegistryError, load_site_config
from .report import render_table, render_timeseries_svg
from .scenario import ScenarioError, run_scenario
from .store import Store, StoreFormatError

CONFIG_ERRORS = (ConfigError, ScenarioError, RegistryError, StoreFormatError, CubeError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soilnet",
                                     description="soil sensing simulator and data pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario config end to end")
    p.add_argument("scenario", help="scenario config file")
    p.add_argument("--out", help="artifact directory (default from config)")
    p.add_argument("--seed", type=int, help="override the scenario seed")

    p = sub.add_parser("ingest", help="stage raw CSV files and promote to measurements")
    p.add_argument("files", nargs="+", help="raw download CSV files")
    p.add_argument("--store", required=True)
    p.add_argument("--registry", required=True, help="site configuration file")

    p = sub.add_parser("calibrate", help="convert unprocessed measurements to units")
    p.add_argument("--store", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--version", default="calib-000001", help="calibration version tag")

    p = sub.add_parser("grid", help="resample calibrated data onto a fixed grid")
    p.add_argument("--store", required=True)
    p.add_argument("--step", type=int, default=600, help="grid step in seconds")
    p.add_argument("--gap-policy", choices=("missing", "interpolate"), default="missing")
    p.add_argument("--max-gap-steps", type=int, default=0)

    p = sub.add_parser("weather", help="ingest a daily weather CSV")
    p.add_argument("file")
    p.add_argument("--store", required=True)

    p = sub.add_parser("query", help="aggregate the cube")
    p.add_argument("--store", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--aggregate", default="average")
    p.add_argument("--time-level", default="date")
    p.add_argument("--location-level", default="sensor")
    p.add_argument("--cyclic-group", choices=("hour_of_day", "week_of_year"))
    p.add_argument("--filter", action="append", default=[], metavar="ATTR=VALUE")
    p.add_argument("--include-interpolated", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("energy", help="print the current budget and lifetime")
    p.add_argument("--capacity-mah", type=float, default=2200.0)
    p.add_argument("--stop", choices=("pack_cutoff", "flash_floor"), default="pack_cutoff")

    p = sub.add_parser("report", help="render a time-series chart from the grid")
    p.add_argument("--store", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--out", required=True, help="SVG output path")
    p.add_argument("--title", default="")
    return parser


def _parse_filters(pairs):
    filters = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"filter {pair!r} is not ATTR=VALUE", Path("-"), 0)
        attr, _, raw = pair.partition("=")
        values = []
        for token in raw.split(","):
            try:
                values.append(int(token))
            except ValueError:
                try:
                    values.append(float(token))
                except ValueError:
                    values.append(token)
        filters[attr] = values[0] if len(values) == 1 else values
    return filters


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    out = run_scenario(args.scenario, out_dir=args.out, seed=args.seed)
    print(f"scenario complete: {out}")
    return 0


def _cmd_ingest(args) -> int:
    store = Store.open(args.store)
    registry = load_site_config(args.registry)
    for path in args.files:
        staged, dups, malformed = stage_and_dedup(path, store)
        promoted = promote_level1(store, registry, store.next_load_version())
        print(f"{path}: staged={staged} duplicates={dups} malformed={malformed} "
              f"promoted={promoted}")
    store.save()
    return 0


def _cmd_calibrate(args) -> int:
    store = Store.open(args.store)
    registry = load_site_config(args.registry)
    n = calibrate_pending(store, registry, args.version)
    store.save()
    print(f"calibrated {n} measurements ({args.version})")
    return 0


def _cmd_grid(args) -> int:
    store = Store.open(args.store)
    n = grid_dataseries(store, args.step, gap_policy=args.gap_policy,
                        max_gap_steps=args.max_gap_steps)
    store.save()
    print(f"gridded {n} cells at {args.step} s")
    return 0


def _cmd_weather(args) -> int:
    store = Store.open(args.store)
    n = ingest_weather(args.file, store)
    store.save()
    print(f"ingested {n} weather days")
    return 0


def _cmd_query(args) -> int:
    store = Store.open(args.store)
    registry = load_site_config(args.registry)
    cube = Cube.build(store.dataseries, store.weather, registry)
    q = CubeQuery(measure=args.measure, aggregate=args.aggregate,
                  time_level=args.time_level, location_level=args.location_level,
                  filters=_parse_filters(args.filter), cyclic_group=args.cyclic_group,
                  include_interpolated=args.include_interpolated)
    _emit(render_table(cube.query(q), args.format), args.out)
    return 0


def _cmd_energy(args) -> int:
    budget = default_budget()
    battery = BatteryModel(capacity_mah=args.capacity_mah)
    print("component,i_on_ma,t_on_s,period_s,avg_ma")
    for c in budget.components:
        print(f"{c.name},{c.i_on_ma:.4f},{c.t_on_s:.3f},{c.period_s:.1f},"
              f"{duty_cycle_avg(c.i_on_ma, c.t_on_s, c.period_s):.4f}")
    total = total_avg_current(budget)
    print(f"total,,,,{total:.4f}")
    print(f"lifetime_days ({args.stop}): "
          f"{predict_lifetime_days(battery, total, args.stop):.1f}")
    return 0


def _cmd_report(args) -> int:
    store = Store.open(args.store)
    registry = load_site_config(args.registry)
    wanted = {s.sensor_id for s in registry.sensors.values()
              if s.sensor_type == args.measure}
    series_map: dict[str, list] = {}
    for row in store.dataseries:
        if row.sensor_id in wanted and row.count > 0:
            series_map.setdefault(row.sensor_id, []).append(
                (row.step_index * row.step_s + row.step_s // 2, row.mean))
    series = [(sid, series_map[sid]) for sid in sorted(series_map)]
    svg = render_timeseries_svg(series, weather=store.weather,
                                title=args.title or args.measure, y_label=args.measure)
    _emit(svg, args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "calibrate": _cmd_calibrate,
    "grid": _cmd_grid,
    "weather": _cmd_weather,
    "query": _cmd_query,
    "energy": _cmd_energy,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, OSError, ValueError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
