"""
Solar traces and the datacenter energy controller
=================================================

A day of synthetic clear-sky output drives one edge datacenter under the
three energy policies. The constant draw is sized from a year of the same
profile, so roughly 60 % of the annual consumption can come from the panels.
"""

from datetime import datetime, timedelta, timezone

import numpy as np

from osmores.energy import (BatteryStore, EnergyController, PowerGrid, SolarInstallation, self_consumption,
                            tick_datacenter)
from osmores.traces import annual_energy, synth_clear_sky

# A leap year of half-sine days, peak 900 W per kWp between 05:00 and 20:00 UTC.
start = datetime(2016, 1, 1, tzinfo=timezone.utc)
trace = synth_clear_sky(900, 5, 20, 366, start=start, sampling="mean")
print("hours in trace:", len(trace))
print("yield per kWp: %.1f kWh" % annual_energy(trace, 1.0))

# Size a 20 kWp edge site for 60 % renewable utilization.
solar = SolarInstallation(20.0, trace, 52.52, 13.40)
grid = PowerGrid(cost_per_kwh=0.32, low_carbon_fraction=0.5, res_fraction=0.45)

day = datetime(2016, 6, 21, tzinfo=timezone.utc)
for policy in ("GridOnly", "OnGrid", "OnGridEnergyStorage"):
    battery = BatteryStore(30_000, 0.0, max_charge_power=8_000) if policy == "OnGridEnergyStorage" else None
    ctrl = EnergyController.build(grid, policy, solar, battery, res_utilization=0.6)
    hourly_self = []
    for minute in range(24 * 60):
        t = day + timedelta(minutes=minute)
        tick_datacenter(ctrl, t, 60)
        if minute % 60 == 0:
            hourly_self.append(self_consumption(ctrl, t))
    led = ctrl.ledger
    print()
    print(policy, "avg draw %.2f kW" % ctrl.avg_draw)
    print("  demand %.1f kWh, pv direct %.1f, battery %.1f, grid %.1f, export %.1f, cost %.2f" % (
        led.demand / 1000, led.from_pv_direct / 1000, led.from_battery / 1000, led.from_grid / 1000,
        led.to_grid_export / 1000, led.grid_cost))
    print("  hourly self-consumption:", np.round(hourly_self, 2))
