"""Embedded file-backed column store for the measurement pipeline.

One append-only table per file under a store directory, mirroring the
Measurement / Calibrated / DataSeries / LoadHistory / BadData / WeatherInfo
layout. Files are CSV with a one-line format magic; UTC times serialize as
ISO-8601 and live in memory as integer epoch seconds.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .config import iso_utc, utc_seconds

MAGIC = "#soilnet-store v1"


@dataclass
class StagedRow:
    download_id: str
    mote_id: str
    epoch: int
    seq: int
    mote_time_s: int
    readings: tuple[int, int, int, int, int]  # soil_t, soil_m, box_t, photo, battery
    anchor_mote_time_s: int
    anchor_utc_s: int


@dataclass
class MeasurementRow:
    sensor_id: str
    mote_id: str
    utc_s: int
    raw_value: int
    lat: float
    lon: float
    depth_cm: float
    mote_time_s: int  # retained, with epoch/seq/anchor, for lossless inversion
    epoch: int
    seq: int
    download_id: str
    anchor_mote_time_s: int
    anchor_utc_s: int
    load_version: str
    processed: int = 0
    is_bad: int = 0


@dataclass
class CalibratedRow:
    sensor_id: str
    utc_s: int
    value: float
    std_error: float
    calib_version: str


@dataclass
class DataSeriesRow:
    sensor_id: str
    step_index: int
    step_s: int
    mean: float
    min: float
    max: float
    stddev: float
    count: int
    interpolated: int = 0


@dataclass
class LoadRecord:
    load_version: str
    filename: str
    load_time_s: int
    procedure_name: str
    error_notes: str = ""


@dataclass
class BadDataInterval:
    sensor_id: str
    start_utc_s: int
    end_utc_s: int
    reason: str = ""

    def __post_init__(self):
        if self.start_utc_s >= self.end_utc_s:
            raise ValueError("BadData interval must have start < end")


@dataclass
class WeatherDay:
    date: str  # YYYY-MM-DD
    tmin_c: float
    tmax_c: float
    tavg_c: float
    precipitation_mm: float
    humidity_pct: float
    pressure_hpa: float
    events: frozenset = frozenset()


class StoreFormatError(ValueError):
    pass


class Store:
    """Single-writer store; all tables held in memory, flushed with save()."""

    def __init__(self, root):
        self.root = Path(root)
        self.staging: list[StagedRow] = []
        self.measurement: list[MeasurementRow] = []
        self.calibrated: list[CalibratedRow] = []
        self.dataseries: list[DataSeriesRow] = []
        self.load_history: list[LoadRecord] = []
        self.bad_data: list[BadDataInterval] = []
        self.weather: dict[str, WeatherDay] = {}

    @classmethod
    def open(cls, root) -> "Store":
        store = cls(root)
        if (store.root / "measurement.csv").exists() or (store.root / "staging.csv").exists():
            store._load()
        return store

    def next_load_version(self) -> str:
        return f"load-{len(self.load_history) + 1:06d}"

    # -- persistence ------------------------------------------------------

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self._write("staging.csv", "staging",
                    "download_id,mote_id,epoch,seq,mote_time_s,soil_temp_adc,soil_moist_adc,"
                    "box_temp_adc,photo_adc,battery_adc,anchor_mote_time_s,anchor_utc",
                    (self._staged_line(r) for r in self.staging))
        self._write("measurement.csv", "measurement",
                    "sensor_id,mote_id,utc_time,raw_value,lat,lon,depth_cm,mote_time_s,epoch,seq,"
                    "download_id,anchor_mote_time_s,anchor_utc,load_version,processed,is_bad",
                    (f"{m.sensor_id},{m.mote_id},{iso_utc(m.utc_s)},{m.raw_value},{m.lat:.8f},{m.lon:.8f},"
                     f"{m.depth_cm:g},{m.mote_time_s},{m.epoch},{m.seq},{m.download_id},"
                     f"{m.anchor_mote_time_s},{iso_utc(m.anchor_utc_s)},{m.load_version},"
                     f"{m.processed},{m.is_bad}"
                     for m in self.measurement))
        self._write("calibrated.csv", "calibrated",
                    "sensor_id,utc_time,value,std_error,calib_version",
                    (f"{c.sensor_id},{iso_utc(c.utc_s)},{c.value:.6f},{c.std_error:.6f},"
                     f"{c.calib_version}" for c in self.calibrated))
        self._write("dataseries.csv", "dataseries",
                    "sensor_id,step_index,step_s,mean,min,max,stddev,count,interpolated",
                    (f"{d.sensor_id},{d.step_index},{d.step_s},{d.mean:.6f},{d.min:.6f},"
                     f"{d.max:.6f},{d.stddev:.6f},{d.count},{d.interpolated}"
                     for d in self.dataseries))
        self._write("load_history.csv", "load_history",
                    "load_version,filename,load_time,procedure_name,error_notes",
                    (f"{l.load_version},{l.filename},{iso_utc(l.load_time_s)},"
                     f"{l.procedure_name},{l.error_notes}" for l in self.load_history))
        self._write("bad_data.csv", "bad_data",
                    "sensor_id,start,end,reason",
                    (f"{b.sensor_id},{iso_utc(b.start_utc_s)},{iso_utc(b.end_utc_s)},{b.reason}"
                     for b in self.bad_data))
        self._write("weather.csv", "weather",
                    "date,tmin_c,tmax_c,tavg_c,precipitation_mm,humidity_pct,pressure_hpa,events",
                    (f"{w.date},{w.tmin_c:g},{w.tmax_c:g},{w.tavg_c:g},{w.precipitation_mm:g},"
                     f"{w.humidity_pct:g},{w.pressure_hpa:g},{';'.join(sorted(w.events))}"
                     for w in (self.weather[d] for d in sorted(self.weather))))

    @staticmethod
    def _staged_line(r: StagedRow) -> str:
        return (f"{r.download_id},{r.mote_id},{r.epoch},{r.seq},{r.mote_time_s},"
                f"{r.readings[0]},{r.readings[1]},{r.readings[2]},{r.readings[3]},"
                f"{r.readings[4]},{r.anchor_mote_time_s},{iso_utc(r.anchor_utc_s)}")

    def _write(self, name: str, table: str, header: str, lines) -> None:
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{MAGIC} {table}\n{header}\n")
            for line in lines:
                fh.write(line + "\n")

    def _read(self, name: str, table: str) -> list[list[str]]:
        path = self.root / name
        if not path.exists():
            return []
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(MAGIC):
            raise StoreFormatError(f"{path}: missing store magic")
        if lines[0] != f"{MAGIC} {table}":
            raise StoreFormatError(f"{path}: wrong table tag {lines[0]!r}")
        return [line.split(",") for line in lines[2:] if line]

    def _load(self) -> None:
        for row in self._read("staging.csv", "staging"):
            self.staging.append(StagedRow(
                download_id=row[0], mote_id=row[1], epoch=int(row[2]), seq=int(row[3]),
                mote_time_s=int(row[4]), readings=tuple(int(v) for v in row[5:10]),
                anchor_mote_time_s=int(row[10]), anchor_utc_s=utc_seconds(row[11])))
        for row in self._read("measurement.csv", "measurement"):
            self.measurement.append(MeasurementRow(
                sensor_id=row[0], mote_id=row[1], utc_s=utc_seconds(row[2]),
                raw_value=int(row[3]), lat=float(row[4]), lon=float(row[5]),
                depth_cm=float(row[6]), mote_time_s=int(row[7]), epoch=int(row[8]),
                seq=int(row[9]), download_id=row[10], anchor_mote_time_s=int(row[11]),
                anchor_utc_s=utc_seconds(row[12]), load_version=row[13],
                processed=int(row[14]), is_bad=int(row[15])))
        for row in self._read("calibrated.csv", "calibrated"):
            self.calibrated.append(CalibratedRow(
                sensor_id=row[0], utc_s=utc_seconds(row[1]), value=float(row[2]),
                std_error=float(row[3]), calib_version=row[4]))
        for row in self._read("dataseries.csv", "dataseries"):
            self.dataseries.append(DataSeriesRow(
                sensor_id=row[0], step_index=int(row[1]), step_s=int(row[2]),
                mean=float(row[3]), min=float(row[4]), max=float(row[5]),
                stddev=float(row[6]), count=int(row[7]), interpolated=int(row[8])))
        for row in self._read("load_history.csv", "load_history"):
            self.load_history.append(LoadRecord(
                load_version=row[0], filename=row[1], load_time_s=utc_seconds(row[2]),
                procedure_name=row[3], error_notes=",".join(row[4:])))
        for row in self._read("bad_data.csv", "bad_data"):
            self.bad_data.append(BadDataInterval(
                sensor_id=row[0], start_utc_s=utc_seconds(row[1]),
                end_utc_s=utc_seconds(row[2]), reason=",".join(row[3:])))
        for row in self._read("weather.csv", "weather"):
            day = WeatherDay(date=row[0], tmin_c=float(row[1]), tmax_c=float(row[2]),
                             tavg_c=float(row[3]), precipitation_mm=float(row[4]),
                             humidity_pct=float(row[5]), pressure_hpa=float(row[6]),
                             events=frozenset(t for t in row[7].split(";") if t))
            self.weather[day.date] = day
