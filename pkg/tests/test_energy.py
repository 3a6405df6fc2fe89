from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from soilnet.energy import (
    BatteryModel,
    BudgetComponent,
    CurrentBudget,
    EnergyModelError,
    consumed_from_voltage,
    consumed_mah,
    default_budget,
    duty_cycle_avg,
    predict_lifetime_days,
    total_avg_current,
    voltage_trace,
)


def test_component_averages():
    budget = default_budget()
    avgs = {c.name: duty_cycle_avg(c.i_on_ma, c.t_on_s, c.period_s)
            for c in budget.components}
    assert avgs["radio_status"] == pytest.approx(0.36, abs=1e-12)
    assert avgs["sensing"] == pytest.approx(0.008, abs=1e-12)


def test_total_average_current():
    assert total_avg_current(default_budget()) == pytest.approx(0.368, abs=1e-12)


def test_sleep_floor_superposition():
    budget = default_budget()
    budget.sleep_floor_ma = 0.002
    assert total_avg_current(budget) == pytest.approx(0.370)


def test_consumed_linearity():
    i = total_avg_current(default_budget())
    weekly = consumed_mah(i, 7 * 24)
    assert weekly == pytest.approx(61.824)
    assert consumed_mah(i, 70 * 24) == pytest.approx(10 * weekly)


def test_consumed_vs_voltage_derived():
    model = BatteryModel()
    # a 0.2 V/cell drop over ten weeks against the closed-form budget
    from_voltage = consumed_from_voltage(0.2, model)
    assert from_voltage == pytest.approx(628.57, abs=0.01)
    closed_form = consumed_mah(total_avg_current(default_budget()), 70 * 24)
    assert abs(from_voltage - closed_form) / from_voltage < 0.02


def test_lifetime_stop_conditions():
    model = BatteryModel()
    i = total_avg_current(default_budget())
    to_cutoff = predict_lifetime_days(model, i)
    to_flash = predict_lifetime_days(model, i, stop="flash_floor")
    assert to_flash < to_cutoff
    assert 130 <= to_flash <= 155
    assert to_cutoff == pytest.approx(2200 / i / 24)
    with pytest.raises(EnergyModelError):
        predict_lifetime_days(model, i, stop="never")
    with pytest.raises(EnergyModelError):
        predict_lifetime_days(model, 0.0)


@given(st.floats(min_value=0.01, max_value=5.0), st.floats(min_value=0.01, max_value=5.0))
def test_lifetime_monotone_in_current(i1, i2):
    model = BatteryModel()
    lo, hi = sorted((i1, i2))
    assert predict_lifetime_days(model, hi) <= predict_lifetime_days(model, lo)


def test_pack_voltage_endpoints():
    model = BatteryModel()
    assert model.pack_voltage(0.0) == pytest.approx(3.0)
    assert model.pack_voltage(2200.0) == pytest.approx(1.6)
    assert model.pack_voltage(1100.0) == pytest.approx(2.3)


def test_pack_voltage_temperature_modulation():
    model = BatteryModel()
    cold = model.pack_voltage(0.0, temp_c=0.0)
    ref = model.pack_voltage(0.0, temp_c=20.0)
    assert ref == pytest.approx(3.0)
    assert cold == pytest.approx(3.0 - 2 * 0.004 * 20)


def test_voltage_trace_monotone_at_constant_temp():
    model = BatteryModel()
    trace = voltage_trace(model, 0.368, [20.0] * 48, interval_s=3600)
    assert all(a > b for a, b in zip(trace, trace[1:]))
    # diurnal temperature adds ripple on top of the same decline
    temps = [10.0, 30.0] * 24
    wavy = voltage_trace(model, 0.368, temps, interval_s=3600)
    assert any(a < b for a, b in zip(wavy, wavy[1:]))


def test_validation():
    with pytest.raises(EnergyModelError):
        BudgetComponent("x", 1.0, 10.0, 5.0)
    with pytest.raises(EnergyModelError):
        BudgetComponent("x", -1.0, 1.0, 5.0)
    with pytest.raises(EnergyModelError):
        duty_cycle_avg(1.0, 2.0, 0.0)
    with pytest.raises(EnergyModelError):
        consumed_mah(-1.0, 1.0)
    with pytest.raises(EnergyModelError):
        consumed_from_voltage(0.8, BatteryModel())
    with pytest.raises(EnergyModelError):
        BatteryModel(v_cutoff_cell=1.6)
    with pytest.raises(EnergyModelError):
        BatteryModel(flash_floor_pack=5.0)
    assert total_avg_current(CurrentBudget()) == 0.0
