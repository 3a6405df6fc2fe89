"""Independent brute-force implementations used to check the cube."""
from __future__ import annotations

import math

from soilnet.cube import WEATHER_MEASURES, CubeQuery

_TIME_ATTRS = ("year", "season", "season_year", "iso_week", "iso_year", "date", "hour", "slot")


def _oracle_time_key(t, level):
    return {
        "year": (t.year,),
        "season": (t.season_year, t.season),
        "week": (t.iso_year, t.iso_week),
        "date": (t.date,),
        "hour": (t.date, t.hour),
        "slot": (t.slot,),
        "hour_of_day": (t.hour,),
        "week_of_year": (t.iso_week,),
    }[level]


def _oracle_loc_key(loc, level):
    parts = (loc.site_id, loc.patch_id, loc.mote_id, loc.sensor_id)
    return parts[: ("site", "patch", "mote", "sensor").index(level) + 1]


def _oracle_matches(f, filters):
    for attr, want in filters.items():
        have = getattr(f.time, attr) if attr in _TIME_ATTRS else getattr(f.location, attr)
        allowed = want if isinstance(want, (list, tuple, set, frozenset)) else (want,)
        if have not in allowed:
            return False
    return True


def brute_force_query(facts, q: CubeQuery):
    """Reference scan; returns {group key: (value, count)}."""
    groups: dict[tuple, list] = {}
    for f in facts:
        if f.measure != q.measure:
            continue
        if f.interpolated and not q.include_interpolated:
            continue
        if not _oracle_matches(f, q.filters):
            continue
        tkey = _oracle_time_key(f.time, q.cyclic_group or q.time_level)
        groups.setdefault(tkey + _oracle_loc_key(f.location, q.location_level), []).append(f)
    out = {}
    for key, fs in groups.items():
        total = sum(f.count for f in fs)
        if q.aggregate == "count":
            out[key] = (float(total), total)
            continue
        if q.aggregate == "min":
            out[key] = (min(f.vmin for f in fs), total)
            continue
        if q.aggregate == "max":
            out[key] = (max(f.vmax for f in fs), total)
            continue
        pairs = [(f.mean, f.count if f.count > 0 else 1) for f in fs]
        wsum = sum(w for _, w in pairs)
        mu = sum(v * w for v, w in pairs) / wsum
        if q.aggregate == "average":
            out[key] = (mu, total)
        elif q.aggregate == "stddev":
            var = sum(w * (v - mu) ** 2 for v, w in pairs) / wsum
            out[key] = (math.sqrt(max(0.0, var)), total)
        elif q.aggregate == "median":
            out[key] = (weighted_lower_median(pairs), total)
        else:
            raise AssertionError(q.aggregate)
    return out


def weighted_lower_median(pairs):
    """Lower weighted median: first value whose cumulative weight reaches
    half the total, scanning values in ascending order."""
    pairs = sorted(pairs)
    half = sum(w for _, w in pairs) / 2.0
    acc = 0
    for v, w in pairs:
        acc += w
        if acc >= half:
            return v
    return pairs[-1][0]


def random_query(rng, measures, sensor_ids, dates):
    """Draw one randomized-but-valid CubeQuery over the fixture."""
    measure = rng.choice(measures)
    is_weather = measure in WEATHER_MEASURES
    aggregate = rng.choice(("average", "min", "max", "median", "stddev", "count"))
    location_level = "site" if is_weather else rng.choice(("site", "patch", "mote", "sensor"))
    cyclic = None
    if is_weather:
        time_level = rng.choice(("year", "season", "week", "date"))
        if rng.random() < 0.2:
            time_level, cyclic = "date", "week_of_year"
    else:
        time_level = rng.choice(("year", "season", "week", "date", "hour", "slot"))
        if rng.random() < 0.3:
            time_level = "date"
            cyclic = rng.choice(("hour_of_day", "week_of_year"))
    filters = {}
    if rng.random() < 0.5:
        filters["date"] = rng.sample(dates, k=min(len(dates), rng.randint(1, 3)))
    if not is_weather and rng.random() < 0.4:
        filters["sensor_id"] = rng.sample(sensor_ids, k=min(len(sensor_ids), 2))
    return CubeQuery(measure=measure, aggregate=aggregate, time_level=time_level,
                     location_level=location_level, filters=filters, cyclic_group=cyclic,
                     include_interpolated=rng.random() < 0.5)
