"""Datacenter energy controllers and solar-charged IoT device batteries.

Datacenter demand is constant at the controller's average draw, sized from a
year of PV production and the target RES utilization. Each energy tick splits
that demand and the tick's PV output between direct use, battery, grid import
and grid export according to the controller's policy. Energy quantities in the
ledger are Wh; power is kW unless a name says otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from datetime import datetime
from typing import Optional

from .traces import IrradianceTrace, annual_energy, hours_in_year


class EnergyConfigError(ValueError):
    pass


class EnergyPolicy(str, enum.Enum):
    GRID_ONLY = "GridOnly"
    ON_GRID = "OnGrid"
    ON_GRID_STORAGE = "OnGridEnergyStorage"

    @classmethod
    def parse(cls, name: str) -> "EnergyPolicy":
        key = str(name).strip()
        if key.lower().endswith("policy"):
            key = key[: -len("policy")]
        for policy in cls:
            if policy.value.lower() == key.lower():
                return policy
        raise EnergyConfigError(f"unknown energy policy {name!r}; expected one of {[p.value for p in cls]}")


class _Sum:
    """Running sum with Neumaier compensation; ledgers add ~1e5 small terms."""

    __slots__ = ("total", "_comp")

    def __init__(self, value: float = 0.0):
        self.total = float(value)
        self._comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self._comp += (self.total - t) + x
        else:
            self._comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self._comp


@dataclass(frozen=True)
class PowerGrid:
    cost_per_kwh: float = 0.0
    low_carbon_fraction: float = 0.0
    res_fraction: float = 0.0

    def __post_init__(self):
        if self.cost_per_kwh < 0:
            raise EnergyConfigError(f"cost_per_kwh must be >= 0, got {self.cost_per_kwh}")
        if not 0 <= self.res_fraction <= self.low_carbon_fraction <= 1:
            raise EnergyConfigError(
                "grid fractions need 0 <= res_fraction <= low_carbon_fraction <= 1, "
                f"got res={self.res_fraction}, low={self.low_carbon_fraction}"
            )


@dataclass(frozen=True)
class SolarInstallation:
    peak_power: float
    trace: IrradianceTrace
    latitude: float = 0.0
    longitude: float = 0.0
    tilt: Optional[float] = None
    azimuth: Optional[float] = None

    def __post_init__(self):
        if not self.peak_power > 0:
            raise EnergyConfigError(f"solar peak_power must be > 0 kWp, got {self.peak_power}")


@dataclass
class BatteryStore:
    capacity: float
    charge: float = 0.0
    max_charge_power: float = math.inf
    efficiency: float = 1.0

    def __post_init__(self):
        if self.capacity < 0:
            raise EnergyConfigError("battery capacity must be >= 0 Wh")
        if not 0 <= self.charge <= self.capacity:
            raise EnergyConfigError(f"battery charge {self.charge} Wh outside [0, {self.capacity}]")
        if self.max_charge_power < 0:
            raise EnergyConfigError("battery max_charge_power must be >= 0 W")
        if not 0 < self.efficiency <= 1:
            raise EnergyConfigError("battery efficiency must be in (0, 1]")


LEDGER_FIELDS = ("pv_produced", "demand", "from_pv_direct", "from_battery", "from_grid",
                 "to_battery", "to_grid_export", "grid_cost")


@dataclass
class EnergyLedger:
    """Cumulative (or per-tick) energy flows in Wh; ``grid_cost`` in currency."""

    pv_produced: float = 0.0
    demand: float = 0.0
    from_pv_direct: float = 0.0
    from_battery: float = 0.0
    from_grid: float = 0.0
    to_battery: float = 0.0
    to_grid_export: float = 0.0
    grid_cost: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class _LedgerTotals:
    def __init__(self):
        self._sums = {name: _Sum() for name in LEDGER_FIELDS}

    def add(self, delta: EnergyLedger) -> None:
        for name, s in self._sums.items():
            s.add(getattr(delta, name))

    def snapshot(self) -> EnergyLedger:
        return EnergyLedger(**{name: s.value for name, s in self._sums.items()})


def compute_avg_draw(s_ann: float, e_u: float, hours: int = 8760) -> float:
    """Constant datacenter draw (kW) from annual PV yield ``s_ann`` (kWh) and RES utilization."""
    if not e_u > 0 or e_u > 1:
        raise EnergyConfigError(f"RES utilization must be in (0, 1], got {e_u}")
    if s_ann < 0:
        raise EnergyConfigError(f"annual energy must be >= 0, got {s_ann}")
    return s_ann / e_u / hours


@dataclass
class EnergyController:
    grid: PowerGrid
    policy: EnergyPolicy
    avg_draw: float
    solar: Optional[SolarInstallation] = None
    battery: Optional[BatteryStore] = None
    res_utilization: float = 1.0
    _totals: _LedgerTotals = field(default_factory=_LedgerTotals, init=False, repr=False)

    def __post_init__(self):
        self.policy = EnergyPolicy.parse(self.policy) if not isinstance(self.policy, EnergyPolicy) else self.policy
        if self.avg_draw < 0:
            raise EnergyConfigError("avg_draw must be >= 0 kW")
        if self.policy is EnergyPolicy.ON_GRID_STORAGE and self.battery is None:
            raise EnergyConfigError("OnGridEnergyStorage policy needs a battery")

    @classmethod
    def build(
        cls,
        grid: PowerGrid,
        policy,
        solar: Optional[SolarInstallation] = None,
        battery: Optional[BatteryStore] = None,
        res_utilization: float = 1.0,
        year: Optional[int] = None,
        avg_draw_kw: Optional[float] = None,
        annual_pv_kwh: Optional[float] = None,
    ) -> "EnergyController":
        """Size the constant draw from the installation's yearly yield.

        ``avg_draw_kw`` bypasses the sizing; ``annual_pv_kwh`` stands in for a
        trace that does not span a whole calendar year.
        """
        if avg_draw_kw is None:
            if solar is None:
                raise EnergyConfigError("a datacenter without solar needs an explicit avg_draw_kw")
            year = year if year is not None else solar.trace.start.year
            if annual_pv_kwh is None:
                annual_pv_kwh = annual_energy(solar.trace, solar.peak_power, year)
            avg_draw_kw = compute_avg_draw(annual_pv_kwh, res_utilization, hours_in_year(year))
        return cls(grid=grid, policy=policy, avg_draw=avg_draw_kw, solar=solar,
                   battery=battery, res_utilization=res_utilization)

    @property
    def ledger(self) -> EnergyLedger:
        return self._totals.snapshot()

    def record(self, delta: EnergyLedger) -> None:
        self._totals.add(delta)


def pv_power(ctrl: EnergyController, t: datetime) -> float:
    """Renewable power (kW) available at ``t``; zero for grid-only datacenters."""
    if ctrl.solar is None or ctrl.policy is EnergyPolicy.GRID_ONLY:
        return 0.0
    return ctrl.solar.peak_power * ctrl.solar.trace.power_at(t) / 1000.0


def self_consumption(ctrl: EnergyController, t: datetime) -> float:
    if ctrl.avg_draw <= 0:
        return 0.0
    e_re = pv_power(ctrl, t)
    if e_re > ctrl.avg_draw:
        return 1.0
    return e_re / ctrl.avg_draw


def tick_datacenter(ctrl: EnergyController, t: datetime, dt: int) -> EnergyLedger:
    """Advance the controller over ``[t, t + dt)`` and return that tick's flows."""
    if dt <= 0:
        raise ValueError("tick duration must be > 0")
    hours = dt / 3600.0
    demand = ctrl.avg_draw * 1000.0 * hours
    pv = pv_power(ctrl, t) * 1000.0 * hours
    delta = EnergyLedger(pv_produced=pv, demand=demand)

    if ctrl.policy is EnergyPolicy.GRID_ONLY:
        delta.from_grid = demand
    else:
        direct = min(pv, demand)
        surplus = pv - direct
        shortfall = demand - direct
        delta.from_pv_direct = direct
        battery = ctrl.battery if ctrl.policy is EnergyPolicy.ON_GRID_STORAGE else None
        if battery is not None:
            room = (battery.capacity - battery.charge) / battery.efficiency
            to_battery = min(surplus, room, battery.max_charge_power * hours)
            to_battery = max(to_battery, 0.0)
            battery.charge = min(battery.capacity, battery.charge + to_battery * battery.efficiency)
            from_battery = min(shortfall, battery.charge)
            battery.charge = max(0.0, battery.charge - from_battery)
            delta.to_battery = to_battery
            delta.from_battery = from_battery
            surplus -= to_battery
            shortfall -= from_battery
        delta.to_grid_export = surplus
        delta.from_grid = shortfall

    delta.grid_cost = delta.from_grid / 1000.0 * ctrl.grid.cost_per_kwh
    ctrl.record(delta)
    return delta


@dataclass
class DeviceBattery:
    """Solar-charged IoT device battery, tracked in mAh at a nominal voltage."""

    capacity: float
    charge: float
    voltage: float
    panel_peak: float = 0.0
    max_charge_current: float = math.inf
    resume_fraction: float = 0.01
    depleted: bool = False

    def __post_init__(self):
        if self.capacity <= 0 or self.voltage <= 0:
            raise EnergyConfigError("device battery needs positive capacity and voltage")
        if not 0 <= self.charge <= self.capacity:
            raise EnergyConfigError(f"device charge {self.charge} mAh outside [0, {self.capacity}]")
        if self.panel_peak < 0 or self.max_charge_current < 0:
            raise EnergyConfigError("panel_peak and max_charge_current must be >= 0")
        if self.charge == 0:
            self.depleted = True

    @property
    def fraction(self) -> float:
        return self.charge / self.capacity

    def harvest_current(self, power_per_kwp: float) -> float:
        """Charging current (mA) for a trace value, after the charge-current limit."""
        raw = self.panel_peak * (power_per_kwp / 1000.0) / self.voltage * 1000.0
        return min(raw, self.max_charge_current)

    def _settle(self, charge: float) -> None:
        self.charge = min(max(charge, 0.0), self.capacity)
        if self.charge <= 0.0:
            self.depleted = True
        elif self.depleted and self.charge > self.resume_fraction * self.capacity:
            self.depleted = False

    def consume(self, mah: float) -> None:
        if mah < 0:
            raise ValueError("consumption must be >= 0")
        self._settle(self.charge - mah)


def tick_device(dev: DeviceBattery, t: datetime, dt: int, consumed: float,
                trace: Optional[IrradianceTrace]) -> DeviceBattery:
    """Apply ``consumed`` mAh and the panel's harvest over ``[t, t + dt)``."""
    if dt <= 0:
        raise ValueError("tick duration must be > 0")
    if consumed < 0:
        raise ValueError("consumption must be >= 0")
    harvest = dev.harvest_current(trace.power_at(t)) if trace is not None and dev.panel_peak else 0.0
    dev._settle(dev.charge - consumed + harvest * dt / 3600.0)
    return dev
