"""Dimensional aggregation over the gridded series and daily weather.

Three dimensions: time (year / season / week / date / hour / 10-minute
slot, plus cyclic hour-of-day and week-of-year groupings), location
(site / patch / mote / sensor with positional attributes), and measure.
The cube is immutable after build; queries are exact scans, ordered by
group key.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .registry import Registry

STEP_S = 600

TIME_LEVELS = ("year", "season", "week", "date", "hour", "slot")
LOCATION_LEVELS = ("site", "patch", "mote", "sensor")
AGGREGATES = ("average", "min", "max", "median", "stddev", "count")
CYCLIC_GROUPS = ("hour_of_day", "week_of_year")

WEATHER_MEASURES = ("tmin_c", "tmax_c", "tavg_c", "precipitation_mm", "humidity_pct",
                    "pressure_hpa")

_SEASONS = {12: "DJF", 1: "DJF", 2: "DJF", 3: "MAM", 4: "MAM", 5: "MAM",
            6: "JJA", 7: "JJA", 8: "JJA", 9: "SON", 10: "SON", 11: "SON"}


class CubeError(ValueError):
    pass


class CubeQueryError(CubeError):
    pass


@dataclass(frozen=True)
class TimeKey:
    year: int
    season_year: int
    season: str  # meteorological: DJF / MAM / JJA / SON
    iso_year: int
    iso_week: int
    date: str
    hour: int | None  # None for day-grain facts (weather)
    slot: int | None  # absolute 10-minute step index

    @classmethod
    def from_utc(cls, utc_s: int, slot: int | None = None, day_grain: bool = False) -> "TimeKey":
        dt = datetime.fromtimestamp(utc_s, tz=timezone.utc)
        iso = dt.isocalendar()
        return cls(
            year=dt.year,
            season_year=dt.year + 1 if dt.month == 12 else dt.year,
            season=_SEASONS[dt.month],
            iso_year=iso[0], iso_week=iso[1],
            date=dt.strftime("%Y-%m-%d"),
            hour=None if day_grain else dt.hour,
            slot=None if day_grain else slot,
        )


@dataclass(frozen=True)
class LocationKey:
    site_id: str
    patch_id: str | None
    mote_id: str | None
    sensor_id: str | None
    depth_cm: float | None = None
    land_cover: str | None = None
    mote_type: str | None = None


@dataclass(frozen=True)
class CubeFact:
    time: TimeKey
    location: LocationKey
    measure: str
    mean: float
    vmin: float
    vmax: float
    stddev: float
    count: int
    interpolated: bool = False


@dataclass
class CubeQuery:
    measure: str
    aggregate: str = "average"
    time_level: str = "date"
    location_level: str = "sensor"
    filters: dict = field(default_factory=dict)
    cyclic_group: str | None = None
    include_interpolated: bool = False


@dataclass(frozen=True)
class CellResult:
    key: tuple
    value: float
    count: int


class Cube:
    def __init__(self, facts: tuple[CubeFact, ...], measures: frozenset):
        self.facts = facts
        self.measures = measures

    @classmethod
    def build(cls, dataseries, weather, registry: Registry) -> "Cube":
        """Assemble the immutable fact table; weather joins at per-site,
        per-day grain."""
        locations: dict[str, LocationKey] = {}
        for s in registry.sensors.values():
            mote = registry.motes[s.mote_id]
            patch = registry.patches[mote.patch_id]
            locations[s.sensor_id] = LocationKey(
                site_id=patch.site_id, patch_id=patch.patch_id, mote_id=mote.mote_id,
                sensor_id=s.sensor_id, depth_cm=s.depth_cm, land_cover=patch.land_cover,
                mote_type=mote.mote_type)
        sensor_types = {s.sensor_id: s.sensor_type for s in registry.sensors.values()}
        facts: list[CubeFact] = []
        for cell in dataseries:
            if cell.step_s != STEP_S:
                raise CubeError(f"cube requires {STEP_S} s grid, got {cell.step_s} s "
                                f"for sensor {cell.sensor_id}")
            loc = locations.get(cell.sensor_id)
            if loc is None:
                raise CubeError(f"dataseries references unknown sensor {cell.sensor_id!r}")
            facts.append(CubeFact(
                time=TimeKey.from_utc(cell.step_index * STEP_S, slot=cell.step_index),
                location=loc, measure=sensor_types[cell.sensor_id],
                mean=cell.mean, vmin=cell.min, vmax=cell.max, stddev=cell.stddev,
                count=cell.count, interpolated=bool(cell.interpolated)))
        days = weather.values() if isinstance(weather, dict) else weather
        for day in sorted(days, key=lambda d: d.date):
            utc_s = int(datetime.strptime(day.date, "%Y-%m-%d")
                        .replace(tzinfo=timezone.utc).timestamp())
            tkey = TimeKey.from_utc(utc_s, day_grain=True)
            for site in registry.sites.values():
                loc = LocationKey(site_id=site.site_id, patch_id=None, mote_id=None,
                                  sensor_id=None)
                for measure in WEATHER_MEASURES:
                    v = getattr(day, measure)
                    facts.append(CubeFact(time=tkey, location=loc, measure=measure,
                                          mean=v, vmin=v, vmax=v, stddev=0.0, count=1))
        measures = frozenset(f.measure for f in facts)
        return cls(tuple(facts), measures)

    def query(self, q: CubeQuery) -> list[CellResult]:
        return query(self, q)


def _time_bucket(t: TimeKey, level: str):
    if level == "year":
        return (t.year,)
    if level == "season":
        return (t.season_year, t.season)
    if level == "week":
        return (t.iso_year, t.iso_week)
    if level == "date":
        return (t.date,)
    if level == "hour":
        if t.hour is None:
            raise CubeQueryError("measure is day-grain; no hour level available")
        return (t.date, t.hour)
    if level == "slot":
        if t.slot is None:
            raise CubeQueryError("measure is day-grain; no slot level available")
        return (t.slot,)
    raise CubeQueryError(f"unknown time level {level!r}")


def _cyclic_bucket(t: TimeKey, group: str):
    if group == "hour_of_day":
        if t.hour is None:
            raise CubeQueryError("measure is day-grain; no hour-of-day grouping")
        return (t.hour,)
    if group == "week_of_year":
        return (t.iso_week,)
    raise CubeQueryError(f"unknown cyclic group {group!r}")


def _location_bucket(loc: LocationKey, level: str):
    if level == "site":
        return (loc.site_id,)
    if level == "patch":
        return (loc.site_id, loc.patch_id)
    if level == "mote":
        return (loc.site_id, loc.patch_id, loc.mote_id)
    if level == "sensor":
        return (loc.site_id, loc.patch_id, loc.mote_id, loc.sensor_id)
    raise CubeQueryError(f"unknown location level {level!r}")


_TIME_ATTRS = ("year", "season", "season_year", "iso_week", "iso_year", "date", "hour", "slot")
_LOC_ATTRS = ("site_id", "patch_id", "mote_id", "sensor_id", "depth_cm", "land_cover",
              "mote_type")


def _matches(fact: CubeFact, filters: dict) -> bool:
    for attr, want in filters.items():
        if attr in _TIME_ATTRS:
            have = getattr(fact.time, attr)
        elif attr in _LOC_ATTRS:
            have = getattr(fact.location, attr)
        else:
            raise CubeQueryError(f"unknown filter attribute {attr!r}")
        if isinstance(want, (list, tuple, set, frozenset)):
            if have not in want:
                return False
        elif have != want:
            return False
    return True


def _validate(cube: Cube, q: CubeQuery) -> None:
    if q.aggregate not in AGGREGATES:
        raise CubeQueryError(f"unknown aggregate {q.aggregate!r}")
    if q.time_level not in TIME_LEVELS:
        raise CubeQueryError(f"unknown time level {q.time_level!r}")
    if q.location_level not in LOCATION_LEVELS:
        raise CubeQueryError(f"unknown location level {q.location_level!r}")
    if q.cyclic_group is not None:
        if q.cyclic_group not in CYCLIC_GROUPS:
            raise CubeQueryError(f"unknown cyclic group {q.cyclic_group!r}")
        if q.time_level in ("hour", "slot"):
            raise CubeQueryError("cyclic grouping excludes sub-day time levels")
    if q.measure in WEATHER_MEASURES and q.location_level != "site":
        raise CubeQueryError(f"weather measure {q.measure!r} is site-grain only")


def query(cube: Cube, q: CubeQuery) -> list[CellResult]:
    """Aggregate matching facts; results ordered by group key.

    Cell means are weighted by their sample counts, so a rollup of rollups
    equals the direct rollup. Median is the count-weighted median of cell
    means (exact, computed at query time)."""
    _validate(cube, q)
    groups: dict[tuple, list[CubeFact]] = {}
    for fact in cube.facts:
        if fact.measure != q.measure:
            continue
        if fact.interpolated and not q.include_interpolated:
            continue
        if not _matches(fact, q.filters):
            continue
        if q.cyclic_group is not None:
            tkey = _cyclic_bucket(fact.time, q.cyclic_group)
        else:
            tkey = _time_bucket(fact.time, q.time_level)
        key = tkey + _location_bucket(fact.location, q.location_level)
        groups.setdefault(key, []).append(fact)
    results = []
    for key in sorted(groups, key=_sort_key):
        facts = groups[key]
        value, count = _aggregate(facts, q.aggregate)
        results.append(CellResult(key=key, value=value, count=count))
    return results


def cyclic_group(cube: Cube, q: CubeQuery) -> list[CellResult]:
    """Group by the recurring cycle position named in q.cyclic_group."""
    if q.cyclic_group is None:
        raise CubeQueryError("query has no cyclic_group set")
    return query(cube, q)


def _sort_key(key: tuple):
    return tuple((0, v) if isinstance(v, (int, float)) and not isinstance(v, bool)
                 else (1, str(v)) for v in key)


def _weight(fact: CubeFact) -> int:
    # interpolated cells have count 0; weigh them as a single synthetic value
    return fact.count if fact.count > 0 else 1


def _aggregate(facts: list[CubeFact], aggregate: str):
    total = sum(f.count for f in facts)
    if aggregate == "count":
        return float(total), total
    if aggregate == "min":
        return min(f.vmin for f in facts), total
    if aggregate == "max":
        return max(f.vmax for f in facts), total
    weights = [_weight(f) for f in facts]
    wsum = sum(weights)
    if aggregate == "average":
        return sum(f.mean * w for f, w in zip(facts, weights)) / wsum, total
    if aggregate == "stddev":
        mu = sum(f.mean * w for f, w in zip(facts, weights)) / wsum
        var = sum(w * (f.mean - mu) ** 2 for f, w in zip(facts, weights)) / wsum
        return math.sqrt(max(0.0, var)), total
    # median: count-weighted median of cell means (lower median on ties)
    pairs = sorted(zip((f.mean for f in facts), weights))
    half = wsum / 2.0
    acc = 0
    for mean, w in pairs:
        acc += w
        if acc >= half:
            return mean, total
    return pairs[-1][0], total
