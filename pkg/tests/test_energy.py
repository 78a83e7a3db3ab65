import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from osmores.energy import (BatteryStore, DeviceBattery, EnergyConfigError, EnergyController, EnergyPolicy,
                            PowerGrid, SolarInstallation, compute_avg_draw, pv_power, self_consumption,
                            tick_datacenter, tick_device)
from osmores.traces import IrradianceTrace, constant_trace, synth_clear_sky

T0 = datetime(2016, 6, 1, tzinfo=timezone.utc)
GRID = PowerGrid(cost_per_kwh=0.25, low_carbon_fraction=0.6, res_fraction=0.3)


def controller(pv_w_per_kwp=None, peak=1.0, draw=2.0, policy="OnGrid", battery=None, trace=None):
    if trace is None and pv_w_per_kwp is not None:
        trace = constant_trace(pv_w_per_kwp, 48, start=T0)
    solar = SolarInstallation(peak, trace) if trace is not None else None
    return EnergyController(GRID, EnergyPolicy.parse(policy), draw, solar, battery)


def check_conservation(ledger, tol=1e-9):
    assert ledger.from_pv_direct + ledger.to_battery + ledger.to_grid_export == pytest.approx(
        ledger.pv_produced, abs=tol)
    assert ledger.from_pv_direct + ledger.from_battery + ledger.from_grid == pytest.approx(ledger.demand, abs=tol)


@pytest.mark.parametrize("s_ann,e_u,expected", [(8760, 1.0, 1.0), (8760, 0.6, 8760 / 0.6 / 8760), (0, 0.5, 0.0)])
def test_avg_draw_examples(s_ann, e_u, expected):
    assert compute_avg_draw(s_ann, e_u) == pytest.approx(expected, abs=1e-12)
    assert compute_avg_draw(8760, 0.6) == pytest.approx(1.6667, abs=1e-4)


@pytest.mark.parametrize("e_u", [0, -0.1, 1.5])
def test_avg_draw_rejects_bad_utilization(e_u):
    with pytest.raises(EnergyConfigError):
        compute_avg_draw(100, e_u)


def test_avg_draw_leap_year_divisor():
    start = datetime(2016, 1, 1, tzinfo=timezone.utc)
    solar = SolarInstallation(1.0, constant_trace(1000, 8784, start=start))
    ctrl = EnergyController.build(GRID, "OnGrid", solar, res_utilization=1.0)
    assert ctrl.avg_draw == pytest.approx(1.0)


def test_pv_power_examples():
    assert pv_power(controller(500, peak=10), T0) == pytest.approx(5.0)
    assert pv_power(controller(0, peak=10), T0) == 0
    assert pv_power(controller(812, peak=3.5), T0) == pytest.approx(2.842, abs=1e-12)
    assert pv_power(controller(None, policy="GridOnly"), T0) == 0


@pytest.mark.parametrize("pv_kw,expected", [(5, 1.0), (1, 0.5), (2, 1.0), (0, 0.0)])
def test_self_consumption_examples(pv_kw, expected):
    assert self_consumption(controller(pv_kw * 1000, draw=2.0), T0) == pytest.approx(expected)


def test_self_consumption_zero_draw():
    assert self_consumption(controller(800, draw=0.0), T0) == 0.0


def test_grid_only_tick():
    ctrl = controller(None, draw=2.0, policy="GridOnly")
    delta = tick_datacenter(ctrl, T0, 3600)
    assert delta.from_grid == pytest.approx(2000)
    assert delta.grid_cost == pytest.approx(2 * GRID.cost_per_kwh)


def test_on_grid_surplus_tick():
    delta = tick_datacenter(controller(3000, draw=2.0), T0, 3600)
    assert delta.from_pv_direct == pytest.approx(2000)
    assert delta.to_grid_export == pytest.approx(1000)
    assert delta.from_grid == 0


def test_storage_tick_near_full_battery():
    battery = BatteryStore(capacity=10.0, charge=9.99)
    ctrl = controller(3000, draw=2.0, policy="OnGridEnergyStorage", battery=battery)
    delta = tick_datacenter(ctrl, T0, 3600)
    # Independent oracle: 1 kWh surplus, 0.01 Wh of room.
    assert delta.to_battery == pytest.approx(0.01, abs=1e-9)
    assert delta.to_grid_export == pytest.approx(1000 - 0.01, abs=1e-9)
    assert battery.charge == pytest.approx(10.0)
    check_conservation(delta)


def test_storage_limits_charge_power_and_drains_at_night():
    battery = BatteryStore(capacity=5000, charge=0, max_charge_power=500)
    trace = IrradianceTrace("x", T0, [3000.0, 0.0])
    ctrl = controller(policy="OnGridEnergyStorage", battery=battery, trace=trace, draw=2.0)
    d1 = tick_datacenter(ctrl, T0, 3600)
    assert d1.to_battery == pytest.approx(500)
    assert d1.to_grid_export == pytest.approx(500)
    d2 = tick_datacenter(ctrl, T0 + timedelta(hours=1), 3600)
    assert d2.from_battery == pytest.approx(500)
    assert d2.from_grid == pytest.approx(1500)
    assert battery.charge == 0
    check_conservation(ctrl.ledger)


def test_storage_policy_needs_battery():
    with pytest.raises(EnergyConfigError):
        controller(100, policy="OnGridEnergyStorage")


def test_grid_fraction_invariants():
    with pytest.raises(EnergyConfigError):
        PowerGrid(0.1, low_carbon_fraction=0.3, res_fraction=0.5)
    with pytest.raises(EnergyConfigError):
        PowerGrid(-1, 0.5, 0.1)
    with pytest.raises(EnergyConfigError):
        SolarInstallation(0, constant_trace(1, 1, start=T0))


def test_policy_names():
    assert EnergyPolicy.parse("OnGridEnergyStoragePolicy") is EnergyPolicy.ON_GRID_STORAGE
    with pytest.raises(EnergyConfigError):
        EnergyPolicy.parse("OffGrid")


def run_ticks(ctrl, hours, tick=60):
    for k in range(hours * 3600 // tick):
        tick_datacenter(ctrl, T0 + timedelta(seconds=k * tick), tick)
    return ctrl.ledger


@settings(max_examples=30, deadline=None)
@given(peak=st.floats(0.1, 50), draw=st.floats(0, 30), cap=st.floats(0, 50000),
       frac=st.floats(0, 1), rate=st.floats(0, 20000), policy=st.sampled_from(list(EnergyPolicy)))
def test_conservation_and_battery_bounds(peak, draw, cap, frac, rate, policy):
    trace = synth_clear_sky(900, 5, 20, 2, start=T0)
    battery = BatteryStore(cap, cap * frac, rate) if policy is EnergyPolicy.ON_GRID_STORAGE else None
    ctrl = controller(peak=peak, draw=draw, policy=policy.value, battery=battery, trace=trace)
    for k in range(48 * 4):
        t = T0 + timedelta(minutes=15 * k)
        delta = tick_datacenter(ctrl, t, 900)
        check_conservation(delta)
        assert 0 <= self_consumption(ctrl, t) <= 1
        assert min(delta.as_dict().values()) >= 0
        if battery is not None:
            assert 0 <= battery.charge <= battery.capacity
            assert delta.to_battery <= rate * 0.25 + 1e-9
    check_conservation(ctrl.ledger)
    if policy is EnergyPolicy.GRID_ONLY:
        led = ctrl.ledger
        assert led.from_pv_direct == led.from_battery == led.to_battery == led.to_grid_export == 0


def test_zero_trace_on_grid_equals_grid_only():
    zero = constant_trace(0, 24, start=T0)
    a = run_ticks(controller(trace=zero, draw=1.3), 24)
    b = run_ticks(controller(trace=zero, draw=1.3, policy="GridOnly"), 24)
    for name in ("from_pv_direct", "from_battery", "from_grid", "to_battery", "to_grid_export", "grid_cost"):
        assert getattr(a, name) == getattr(b, name)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 20), st.floats(0, 20))
def test_direct_use_monotone_in_peak(peak, extra):
    trace = synth_clear_sky(1000, 6, 18, 1, start=T0)
    low = run_ticks(controller(trace=trace, peak=peak, draw=3.0), 24, tick=600)
    high = run_ticks(controller(trace=trace, peak=peak + extra, draw=3.0), 24, tick=600)
    assert high.from_pv_direct >= low.from_pv_direct - 1e-9


def test_ledger_is_cumulative_and_monotone():
    ctrl = controller(trace=synth_clear_sky(1000, 6, 18, 1, start=T0), draw=1.0)
    previous = ctrl.ledger.as_dict()
    for k in range(24):
        tick_datacenter(ctrl, T0 + timedelta(hours=k), 3600)
        current = ctrl.ledger.as_dict()
        assert all(current[f] >= previous[f] for f in current)
        previous = current


# --- device batteries -----------------------------------------------------

def test_device_consumption_only():
    dev = DeviceBattery(3000, 2000, 3.7)
    tick_device(dev, T0, 60, 100, None)
    assert dev.charge == 2000 - 100


def test_device_capacity_clamp():
    dev = DeviceBattery(3000, 2990, 3.7, panel_peak=10)
    # 185 W/kWp on 10 W at 3.7 V gives 500 mA, i.e. 50 mAh over 360 s.
    tick_device(dev, T0, 360, 0, constant_trace(185, 1, start=T0))
    assert dev.charge == 3000


def test_device_harvest_current():
    dev = DeviceBattery(3000, 0, 3.7, panel_peak=10)
    assert dev.harvest_current(1000) == pytest.approx(10 / 3.7 * 1000)
    assert dev.harvest_current(1000) == pytest.approx(2702.7, abs=0.1)
    clipped = DeviceBattery(3000, 0, 3.7, panel_peak=10, max_charge_current=1000)
    assert clipped.harvest_current(1000) == 1000


def test_device_depletes_and_resumes_above_threshold():
    dev = DeviceBattery(1000, 5, 3.7, panel_peak=1)
    tick_device(dev, T0, 60, 10, None)
    assert dev.charge == 0 and dev.depleted
    dev.charge = 0
    dev._settle(10)  # exactly 1 %: still depleted
    assert dev.depleted
    dev._settle(10.5)
    assert not dev.depleted


@settings(max_examples=40, deadline=None)
@given(st.floats(1, 5000), st.floats(0, 1), st.floats(0, 50), st.floats(0, 3000), st.floats(0, 200))
def test_device_charge_bounds(cap, frac, panel, limit, consumed):
    dev = DeviceBattery(cap, cap * frac, 3.7, panel_peak=panel, max_charge_current=limit)
    before = dev.charge
    tick_device(dev, T0, 60, consumed, constant_trace(1000, 1, start=T0))
    assert 0 <= dev.charge <= cap
    assert dev.charge - before <= limit * 60 / 3600 + 1e-9
