"""Site / patch / mote / sensor hierarchy plus the experiment event log.

The registry is the schema backbone: it owns identity, geometry, calibration
constants, and per-sensor error characteristics. It is immutable after load
except for the append-only event log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

from .config import Section, parse_sections

SENSOR_TYPES = ("soil_temperature", "soil_moisture", "box_temperature", "photo", "battery_voltage")

# Physical output unit implied by each sensor type.
SENSOR_UNITS = {
    "soil_temperature": "degC",
    "soil_moisture": "kPa",
    "box_temperature": "degC",
    "photo": "raw",
    "battery_voltage": "V",
}

EVENT_SCOPES = ("global", "site", "patch", "mote")

METERS_PER_DEGREE_LAT = 111_320.0


@dataclass(frozen=True)
class Site:
    site_id: str
    name: str
    latitude: float
    longitude: float
    description: str = ""


@dataclass(frozen=True)
class Patch:
    patch_id: str
    site_id: str
    reference_coords: tuple[float, float]  # (lat, lon) degrees
    extent_m: tuple[float, float]  # (width east, height north) meters
    land_cover: str = "forest"


@dataclass(frozen=True)
class Mote:
    mote_id: str
    patch_id: str
    offset_m: tuple[float, float]  # (x east, y north) from patch reference
    mote_type: str = "micaz"
    deploy_date: str = ""


@dataclass(frozen=True)
class CalibrationConstants:
    reference_resistor_ohms: float = 10_000.0
    reference_bias_ohms: float = 0.0  # per-mote measured correction
    thermistor_coeffs: tuple[float, float, float] = (0.0, 0.0, 0.0)
    watermark_coeffs: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Sensor:
    sensor_id: str
    mote_id: str
    sensor_type: str
    depth_cm: float  # negative = above surface
    adc_channel: int
    calibration: CalibrationConstants = field(default_factory=CalibrationConstants)
    precision: float = 0.0  # standard error in output units

    @property
    def unit(self) -> str:
        return SENSOR_UNITS[self.sensor_type]


@dataclass(frozen=True)
class Event:
    timestamp: datetime
    scope: str  # global | site | patch | mote
    kind: str
    note: str = ""
    identifier: str | None = None


class RegistryError(ValueError):
    pass


@dataclass
class Registry:
    sites: dict[str, Site] = field(default_factory=dict)
    patches: dict[str, Patch] = field(default_factory=dict)
    motes: dict[str, Mote] = field(default_factory=dict)
    sensors: dict[str, Sensor] = field(default_factory=dict)
    event_log: list[Event] = field(default_factory=list)

    def mote_sensors(self, mote_id: str) -> list[Sensor]:
        return [s for s in self.sensors.values() if s.mote_id == mote_id]

    def patch_motes(self, patch_id: str) -> list[Mote]:
        return [m for m in self.motes.values() if m.patch_id == patch_id]

    def sensor_by_channel(self, mote_id: str, adc_channel: int) -> Sensor | None:
        for s in self.sensors.values():
            if s.mote_id == mote_id and s.adc_channel == adc_channel:
                return s
        return None

    def mote_sensor_of_type(self, mote_id: str, sensor_type: str) -> Sensor | None:
        for s in self.sensors.values():
            if s.mote_id == mote_id and s.sensor_type == sensor_type:
                return s
        return None

    def record_event(self, event: Event) -> None:
        """Append to the ordered event log after resolving the scope."""
        if event.scope not in EVENT_SCOPES:
            raise RegistryError(f"unknown event scope {event.scope!r}")
        if event.scope == "global":
            if event.identifier is not None:
                raise RegistryError("global events carry no identifier")
        else:
            table = {"site": self.sites, "patch": self.patches, "mote": self.motes}[event.scope]
            if event.identifier not in table:
                raise RegistryError(f"event references unknown {event.scope} {event.identifier!r}")
        self.event_log.append(event)

    def events(self, scope: str | None = None, identifier: str | None = None,
               start: datetime | None = None, end: datetime | None = None) -> list[Event]:
        out = []
        for e in self.event_log:
            if scope is not None and e.scope != scope:
                continue
            if identifier is not None and e.identifier != identifier:
                continue
            if start is not None and e.timestamp < start:
                continue
            if end is not None and e.timestamp >= end:
                continue
            out.append(e)
        return out


def locate_sensor(registry: Registry, sensor_id: str):
    """Resolve a sensor to (site_id, patch_id, (lat, lon), depth_cm).

    Local offsets are projected with an equirectangular approximation around
    the patch reference; deployments are meters-scale so the error is
    negligible.
    """
    sensor = registry.sensors.get(sensor_id)
    if sensor is None:
        raise RegistryError(f"unknown sensor {sensor_id!r}")
    mote = registry.motes[sensor.mote_id]
    patch = registry.patches[mote.patch_id]
    ref_lat, ref_lon = patch.reference_coords
    dx, dy = mote.offset_m
    lat = ref_lat + dy / METERS_PER_DEGREE_LAT
    lon = ref_lon + dx / (METERS_PER_DEGREE_LAT * math.cos(math.radians(ref_lat)))
    return patch.site_id, patch.patch_id, (lat, lon), sensor.depth_cm


def _parse_site(sec: Section) -> Site:
    return Site(
        site_id=sec.get_str("site_id"),
        name=sec.get_str("name", ""),
        latitude=sec.get_float("latitude"),
        longitude=sec.get_float("longitude"),
        description=sec.get_str("description", ""),
    )


def _parse_patch(sec: Section) -> Patch:
    extent = sec.get_floats("extent_m", 2)
    if extent[0] <= 0 or extent[1] <= 0:
        raise sec.error("patch extent must be strictly positive", "extent_m")
    return Patch(
        patch_id=sec.get_str("patch_id"),
        site_id=sec.get_str("site_id"),
        reference_coords=sec.get_floats("reference_coords", 2),
        extent_m=extent,
        land_cover=sec.get_str("land_cover", "forest"),
    )


def _parse_mote(sec: Section) -> Mote:
    return Mote(
        mote_id=sec.get_str("mote_id"),
        patch_id=sec.get_str("patch_id"),
        offset_m=sec.get_floats("offset_m", 2),
        mote_type=sec.get_str("mote_type", "micaz"),
        deploy_date=sec.get_str("deploy_date", ""),
    )


def _parse_sensor(sec: Section) -> Sensor:
    sensor_type = sec.get_str("sensor_type")
    if sensor_type not in SENSOR_TYPES:
        raise sec.error(f"unknown sensor_type {sensor_type!r}", "sensor_type")
    channel = sec.get_int("adc_channel")
    if not 0 <= channel <= 6:
        raise sec.error("adc_channel must be in 0..6", "adc_channel")
    r_ref = sec.get_float("reference_resistor_ohms", 10_000.0)
    if r_ref <= 0:
        raise sec.error("reference_resistor_ohms must be positive", "reference_resistor_ohms")
    thermistor = (0.0, 0.0, 0.0)
    if sec.has("thermistor_coeffs"):
        thermistor = sec.get_floats("thermistor_coeffs", 3)
    watermark = (0.0, 0.0, 0.0, 0.0)
    if sec.has("watermark_coeffs"):
        watermark = sec.get_floats("watermark_coeffs", 4)
    return Sensor(
        sensor_id=sec.get_str("sensor_id"),
        mote_id=sec.get_str("mote_id"),
        sensor_type=sensor_type,
        depth_cm=sec.get_float("depth_cm", 0.0),
        adc_channel=channel,
        calibration=CalibrationConstants(
            reference_resistor_ohms=r_ref,
            reference_bias_ohms=sec.get_float("reference_bias_ohms", 0.0),
            thermistor_coeffs=thermistor,
            watermark_coeffs=watermark,
        ),
        precision=sec.get_float("precision", 0.0),
    )


def load_site_config(path) -> Registry:
    """Load and validate a site config; rejects the whole file on any error."""
    sections = parse_sections(path)
    reg = Registry()
    parsers = {"site": _parse_site, "patch": _parse_patch, "mote": _parse_mote, "sensor": _parse_sensor}
    tables = {"site": reg.sites, "patch": reg.patches, "mote": reg.motes, "sensor": reg.sensors}
    for sec in sections:
        if sec.name == "event":
            continue  # events arrive through record_event, not the site config
        if sec.name not in parsers:
            raise sec.error(f"unknown section [{sec.name}]")
        entity = parsers[sec.name](sec)
        key = getattr(entity, f"{sec.name}_id")
        if key in tables[sec.name]:
            raise sec.error(f"duplicate {sec.name}_id {key!r}")
        tables[sec.name][key] = entity
        _check_references(reg, sec, entity)
    return reg


def _check_references(reg: Registry, sec: Section, entity) -> None:
    if isinstance(entity, Patch):
        if entity.site_id not in reg.sites:
            raise sec.error(f"patch references unknown site {entity.site_id!r}", "site_id")
    elif isinstance(entity, Mote):
        patch = reg.patches.get(entity.patch_id)
        if patch is None:
            raise sec.error(f"mote references unknown patch {entity.patch_id!r}", "patch_id")
        x, y = entity.offset_m
        w, h = patch.extent_m
        if not (0 <= x <= w and 0 <= y <= h):
            raise sec.error(f"mote offset {entity.offset_m} outside patch extent {patch.extent_m}", "offset_m")
    elif isinstance(entity, Sensor):
        if entity.mote_id not in reg.motes:
            raise sec.error(f"sensor references unknown mote {entity.mote_id!r}", "mote_id")
        for other in reg.sensors.values():
            if (other.sensor_id != entity.sensor_id
                    and other.mote_id == entity.mote_id
                    and other.adc_channel == entity.adc_channel):
                raise sec.error(
                    f"ADC channel {entity.adc_channel} on mote {entity.mote_id!r} already "
                    f"used by sensor {other.sensor_id!r}", "adc_channel")
