#!/usr/bin/env python3
"""Regenerate the synthetic year-long traces shipped with the bundled scenarios.

Real PVGIS exports are not redistributed here. These traces combine a simple
solar-elevation clear-sky model for each site with seeded day/hour cloudiness,
then overwrite three showcase days:

* 2016-06-21: Berlin clear until 11:00 UTC then overcast; Paris the reverse.
* 2016-01-15: heavy overcast everywhere.
* 2016-04-12: broken cloud, Berlin and Paris out of phase every few hours.

Usage: python scripts/make_bundled_traces.py [OUT_DIR]
"""

import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from osmores.traces import IrradianceTrace, hours_in_year, write_trace

YEAR = 2016
SITES = {
    "berlin": (52.52, 13.40, 11),
    "paris": (48.8, 2.30, 12),
    "dublin": (53.35, -6.30, 13),
}


def sin_elevation(lat, lon, year):
    """Sine of solar elevation at the middle of every UTC hour of ``year``."""
    hours = np.arange(hours_in_year(year)) + 0.5
    day = hours // 24 + 1
    decl = np.radians(23.44) * np.sin(2 * np.pi * (284 + day) / 365.0)
    solar_time = (hours % 24) + lon / 15.0
    hour_angle = np.radians(15.0 * (solar_time - 12.0))
    phi = np.radians(lat)
    return np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.cos(hour_angle)


def cloudiness(seed, n_hours):
    rng = np.random.default_rng(seed)
    daily = rng.beta(2.2, 1.6, size=n_hours // 24)
    hourly = np.repeat(daily, 24) * rng.uniform(0.75, 1.15, size=n_hours)
    return np.clip(hourly, 0.05, 1.0)


def day_slice(month, day):
    start = datetime(YEAR, month, day, tzinfo=timezone.utc)
    i = int((start - datetime(YEAR, 1, 1, tzinfo=timezone.utc)).total_seconds() // 3600)
    return slice(i, i + 24)


def showcase(site, cloud):
    june = cloud[day_slice(6, 21)]
    if site == "berlin":
        june[:11], june[11:] = 0.95, 0.12
    elif site == "paris":
        june[:11], june[11:] = 0.12, 0.95
    else:
        june[:] = 0.6
    cloud[day_slice(1, 15)] = {"berlin": 0.08, "paris": 0.12, "dublin": 0.1}[site]
    april = cloud[day_slice(4, 12)]
    phase = np.arange(24) // 3 % 2
    if site == "berlin":
        april[:] = np.where(phase == 0, 0.9, 0.3)
    elif site == "paris":
        april[:] = np.where(phase == 0, 0.3, 0.9)
    else:
        april[:] = 0.5


def make(site):
    lat, lon, seed = SITES[site]
    s = np.clip(sin_elevation(lat, lon, YEAR), 0.0, None)
    cloud = cloudiness(seed, s.size)
    showcase(site, cloud)
    pv = 950.0 * s * cloud
    ghi = 1050.0 * s ** 1.15 * cloud
    return IrradianceTrace(f"{site}_{YEAR}", datetime(YEAR, 1, 1, tzinfo=timezone.utc),
                           np.round(pv, 3), np.round(ghi, 3))


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for site in SITES:
        trace = make(site)
        write_trace(trace, out / f"{site}_{YEAR}.csv")
        print(f"{site}: {trace.power.sum() / 1000:.1f} kWh/kWp over {len(trace)} h")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/osmores/scenarios/traces")
