"""Synthetic ground-truth environment driving the mote simulator.

Air temperature is a daily sinusoid with optional seasonal drift; soil
temperature at depth is the damped, lagged version of it. Soil water tension
follows cycles of quick wetting on rain events and slower exponential
drying. All functions take absolute UTC seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

DAY_S = 86_400


@dataclass(frozen=True)
class EnvironmentModel:
    t0_utc_s: int  # reference epoch for seasonal drift
    air_mean_c: float = 4.0
    air_daily_amp_c: float = 6.0
    seasonal_drift_c_per_day: float = 0.0
    air_peak_hour: float = 15.0
    soil_damping: float = 0.45  # amplitude ratio at sensor depth
    soil_lag_s: float = 4 * 3600.0
    # (utc_s, mm) rain events, time-ordered
    rain_events: tuple[tuple[int, float], ...] = ()
    wetting_kpa_per_mm: float = 6.0
    drying_tau_s: float = 3 * DAY_S
    dry_kpa: float = 120.0
    wet_floor_kpa: float = 4.0
    max_kpa: float = 200.0
    day_start_hour: float = 7.0
    day_length_h: float = 10.0
    light_peak: float = 0.85  # fraction of ADC full scale at solar noon

    def __post_init__(self):
        if self.air_daily_amp_c < 0 or self.soil_damping < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.drying_tau_s <= 0:
            raise ValueError("drying time constant must be positive")

    def air_temperature(self, utc_s: float) -> float:
        days = (utc_s - self.t0_utc_s) / DAY_S
        hour = (utc_s % DAY_S) / 3600.0
        diurnal = self.air_daily_amp_c * math.cos(2 * math.pi * (hour - self.air_peak_hour) / 24.0)
        return self.air_mean_c + self.seasonal_drift_c_per_day * days + diurnal

    def soil_temperature(self, utc_s: float) -> float:
        days = (utc_s - self.t0_utc_s) / DAY_S
        hour = ((utc_s - self.soil_lag_s) % DAY_S) / 3600.0
        diurnal = self.soil_damping * self.air_daily_amp_c * math.cos(
            2 * math.pi * (hour - self.air_peak_hour) / 24.0)
        return self.air_mean_c + self.seasonal_drift_c_per_day * days + diurnal

    def moisture_kpa(self, utc_s: float) -> float:
        """Soil water tension: high = dry. Rain knocks it down, drying relaxes it."""
        tension = self.dry_kpa
        for event_s, mm in self.rain_events:
            if event_s <= utc_s:
                tension -= self.wetting_kpa_per_mm * mm * math.exp(-(utc_s - event_s) / self.drying_tau_s)
        return min(self.max_kpa, max(self.wet_floor_kpa, tension))

    def light_level(self, utc_s: float) -> float:
        """Photoperiod in [0, light_peak]: half-sine across the daylight window."""
        hour = (utc_s % DAY_S) / 3600.0
        if self.day_length_h <= 0:
            return 0.0
        phase = (hour - self.day_start_hour) / self.day_length_h
        if not 0.0 <= phase <= 1.0:
            return 0.0
        return self.light_peak * math.sin(math.pi * phase)


def environment_from_section(sec, t0_utc_s: int) -> EnvironmentModel:
    """Build an EnvironmentModel from a scenario [environment] section."""
    from .config import utc_seconds

    rain: list[tuple[int, float]] = []
    if sec.has("rain"):
        for item in sec.raw("rain").split(";"):
            item = item.strip()
            if not item:
                continue
            when, _, amount = item.rpartition(":")
            # timestamps themselves contain ':', so split on the last one
            rain.append((utc_seconds(when), float(amount)))
    rain.sort()
    return EnvironmentModel(
        t0_utc_s=t0_utc_s,
        air_mean_c=sec.get_float("air_mean_c", 4.0),
        air_daily_amp_c=sec.get_float("air_daily_amp_c", 6.0),
        seasonal_drift_c_per_day=sec.get_float("seasonal_drift_c_per_day", 0.0),
        air_peak_hour=sec.get_float("air_peak_hour", 15.0),
        soil_damping=sec.get_float("soil_damping", 0.45),
        soil_lag_s=sec.get_float("soil_lag_s", 4 * 3600.0),
        rain_events=tuple(rain),
        wetting_kpa_per_mm=sec.get_float("wetting_kpa_per_mm", 6.0),
        drying_tau_s=sec.get_float("drying_tau_s", 3 * DAY_S),
        dry_kpa=sec.get_float("dry_kpa", 120.0),
        wet_floor_kpa=sec.get_float("wet_floor_kpa", 4.0),
        day_start_hour=sec.get_float("day_start_hour", 7.0),
        day_length_h=sec.get_float("day_length_h", 10.0),
        light_peak=sec.get_float("light_peak", 0.85),
    )
