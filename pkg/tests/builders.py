"""Small in-memory scenarios for tests."""

from datetime import datetime, timezone

from osmores.traces import constant_trace, synth_clear_sky

YEAR_START = datetime(2016, 1, 1, tzinfo=timezone.utc)
SUMMER_DAY = datetime(2016, 6, 21, tzinfo=timezone.utc)

BERLIN = (52.52, 13.40)
PARIS = (48.8, 2.30)
DUBLIN = (53.35, -6.30)


def year_clear_sky(peak=800.0, sunrise=6, sunset=18):
    return synth_clear_sky(peak, sunrise, sunset, 366, start=YEAR_START, location_id="clear")


def year_zero():
    return constant_trace(0.0, 8784, start=YEAR_START, location_id="zero")


def camera(dev_id="cam1", trace=None, location=BERLIN, **kw):
    dev = {
        "id": dev_id,
        "location": list(location),
        "battery": {"capacity_mah": 3000, "initial_mah": 2000, "voltage": 3.7, "max_charge_current_ma": 1000},
        "panel_w": 10,
        "trace": trace,
        "transaction_period": 300,
        "mah_per_transaction": 2,
        "idle_ma": 10,
    }
    dev.update(kw)
    return dev


def datacenter(dc_id, location, trace, kind="edge", p_low=0.5, policy="OnGrid", **kw):
    dc = {
        "id": dc_id,
        "kind": kind,
        "location": list(location),
        "policy": policy,
        "res_utilization": 0.6,
        "grid": {"cost_per_kwh": 0.3, "low_carbon_fraction": p_low, "res_fraction": min(p_low, 0.2)},
        "solar": {"trace": trace, "peak_kwp": 20},
    }
    dc.update(kw)
    return dc


def two_edge_scenario(berlin_trace=None, paris_trace=None, cloud_trace=None, start=SUMMER_DAY,
                      duration=86400, algorithm="ALG4", devices=None, **extra):
    """Two edges (Berlin, Paris) and a Dublin cloud, Berlin cameras."""
    berlin_trace = berlin_trace or year_clear_sky()
    paris_trace = paris_trace or year_clear_sky()
    cloud_trace = cloud_trace or year_clear_sky()
    devices = devices if devices is not None else [camera("cam1", berlin_trace)]
    data = {
        "name": "test",
        "sim": {"start": start, "duration": duration, "energy_tick": 60, "mape_period": 3600, "seed": 1},
        "algorithm": algorithm,
        "cooperation": "communicating",
        "datacenters": [
            datacenter("berlin", BERLIN, berlin_trace, p_low=0.5),
            datacenter("paris", PARIS, paris_trace, p_low=0.9),
            datacenter("dublin", DUBLIN, cloud_trace, kind="cloud", p_low=0.45, res_utilization=0.4),
        ],
        "devices": devices,
        "abstract_mels": [{"name": "MEL_EDGE", "processing_time": 5}, {"name": "MEL_CLOUD", "processing_time": 20}],
        "instances": [
            {"id": "MEL_EDGE.1", "host": "berlin"},
            {"id": "MEL_EDGE.2", "host": "paris"},
            {"id": "MEL_CLOUD.1", "host": "dublin"},
        ],
        "flows": [{"id": f"{d['id']}_flow", "source": d["id"], "chain": ["MEL_EDGE.*", "MEL_CLOUD.*"]}
                  for d in devices],
    }
    data.update(extra)
    return data
