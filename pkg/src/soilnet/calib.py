"""Raw-count to engineering-unit conversions.

Covers the resistive voltage divider, the log-cubic NTC thermistor
regression, and the rational Watermark moisture regression, plus exact
inverses used to synthesize ADC counts from ground truth.
"""
from __future__ import annotations

import math

import numpy as np

ADC_MAX = 1023  # 10-bit converter

# Battery channel full-scale volts (fixed reference, not ratiometric).
BATTERY_ADC_FULLSCALE_V = 3.3

KELVIN_OFFSET = 273.15


class OpenCircuitError(ValueError):
    """Divider pegged at full scale: the sensor leg reads as disconnected."""


class CalibrationDomainError(ValueError):
    pass


def adc_to_resistance(adc: float, r_ref_ohms: float, bias_ohms: float = 0.0) -> float:
    """Invert the divider: reference resistor to power, sensor to ground.

    Ratiometric, so the supply voltage cancels: R = R_ref * count / (1023 - count).
    """
    if not 0 <= adc <= ADC_MAX:
        raise ValueError(f"ADC count {adc} outside [0, {ADC_MAX}]")
    if adc == ADC_MAX:
        raise OpenCircuitError("ADC at full scale: open circuit on the sensor leg")
    return (r_ref_ohms + bias_ohms) * adc / (ADC_MAX - adc)


def resistance_to_adc(r_ohms: float, r_ref_ohms: float, bias_ohms: float = 0.0) -> float:
    """Forward divider transfer; returns the unquantized count."""
    if r_ohms < 0:
        raise ValueError("negative resistance")
    return ADC_MAX * r_ohms / (r_ohms + r_ref_ohms + bias_ohms)


def thermistor_celsius(r_ohms: float, coeffs, precision: float = 0.5):
    """Log-cubic NTC regression: 1/T_K = A + B ln R + C (ln R)^3.

    Returns (degC, std_error); std_error is the configured sensor precision.
    """
    if r_ohms <= 0:
        raise CalibrationDomainError("thermistor resistance must be positive")
    a, b, c = coeffs
    ln_r = math.log(r_ohms)
    inv_t = a + b * ln_r + c * ln_r ** 3
    if inv_t <= 0:
        raise CalibrationDomainError("regression left the physical domain (1/T <= 0)")
    return 1.0 / inv_t - KELVIN_OFFSET, precision


def thermistor_resistance(deg_c: float, coeffs) -> float:
    """Exact inverse of thermistor_celsius (Cardano root of the cubic in ln R)."""
    a, b, c = coeffs
    inv_t = 1.0 / (deg_c + KELVIN_OFFSET)
    if c == 0.0:
        if b == 0.0:
            raise CalibrationDomainError("degenerate thermistor coefficients")
        return math.exp((inv_t - a) / b)
    # c*x^3 + b*x + (a - 1/T) = 0, x = ln R; NTC coefficients give one real root
    p = b / c
    q = (a - inv_t) / c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc < 0:
        raise CalibrationDomainError("thermistor inverse has no unique real root")
    root = math.sqrt(disc)
    x = _cbrt(-q / 2.0 + root) + _cbrt(-q / 2.0 - root)
    return math.exp(x)


def _cbrt(v: float) -> float:
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def watermark_kpa(r_ohms: float, soil_temp_c: float, coeffs, precision: float = 0.0,
                  denom_eps: float = 1e-9):
    """Rational moisture regression: kPa = (c0 + c1*Rk) / (1 + c2*T + c3*Rk).

    Rk is resistance in kilo-ohms. Returns (kPa, std_error).
    """
    if r_ohms <= 0:
        raise CalibrationDomainError("moisture sensor resistance must be positive")
    c0, c1, c2, c3 = coeffs
    r_k = r_ohms / 1000.0
    denom = 1.0 + c2 * soil_temp_c + c3 * r_k
    if abs(denom) < denom_eps:
        raise CalibrationDomainError("moisture regression denominator near zero")
    return (c0 + c1 * r_k) / denom, precision


def watermark_resistance(kpa: float, soil_temp_c: float, coeffs) -> float:
    """Exact inverse of watermark_kpa for ground-truth synthesis; returns ohms."""
    c0, c1, c2, c3 = coeffs
    denom = c1 - kpa * c3
    if abs(denom) < 1e-12:
        raise CalibrationDomainError("moisture inverse singular at this tension")
    r_k = (kpa * (1.0 + c2 * soil_temp_c) - c0) / denom
    if r_k <= 0:
        raise CalibrationDomainError(f"tension {kpa} kPa maps to nonpositive resistance")
    return r_k * 1000.0


def fit_watermark(points):
    """Least-squares fit of (c0..c3) from the 9-point (R_ohms, T_c, kPa) grid.

    Linearized form: kPa = c0 + c1*Rk - c2*(kPa*T) - c3*(kPa*Rk).
    Returns (coeffs, residuals) where residuals are per-point kPa errors of
    the refit model.
    """
    pts = list(points)
    if len(pts) != 9:
        raise ValueError(f"expected the 3x3 calibration grid (9 points), got {len(pts)}")
    seen = set()
    for r, t, _ in pts:
        if (r, t) in seen:
            raise np.linalg.LinAlgError(f"duplicate calibration point (R={r}, T={t})")
        seen.add((r, t))
    design = np.empty((9, 4))
    target = np.empty(9)
    for i, (r_ohms, t_c, kpa) in enumerate(pts):
        r_k = r_ohms / 1000.0
        design[i] = (1.0, r_k, -kpa * t_c, -kpa * r_k)
        target[i] = kpa
    coeffs, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    coeffs = tuple(float(v) for v in coeffs)
    residuals = np.array([watermark_kpa(r, t, coeffs)[0] - kpa for r, t, kpa in pts])
    return coeffs, residuals
