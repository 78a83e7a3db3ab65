"""Scenario files: YAML documents describing one simulated experiment.

``parse_scenario`` accepts a path, a bundled scenario name or an already
loaded mapping, validates everything it can and raises a single
:class:`ScenarioError` listing every problem with its field path. Trace paths
are resolved relative to the scenario file; in a mapping, a ``trace`` entry
may also be an :class:`~osmores.traces.IrradianceTrace` object.

See ``docs/scenario-format.md`` for the full grammar.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml

from .agents import Cooperation, known_algorithms
from .energy import EnergyConfigError, EnergyPolicy, PowerGrid
from .flows import MetricSampling, OsmoticFlow
from .simcore import as_utc
from .topology import TopologyError, abstract_of, check_coordinates, normalize_abstract
from .traces import IrradianceTrace, TraceError, covers_year, load_trace

BUNDLED = ("paper_eval", "paper_eval_winter", "paper_eval_spring")


class ScenarioError(ValueError):
    def __init__(self, errors: List[str], source: Optional[str] = None):
        self.errors = list(errors)
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(where + f"{len(self.errors)} validation error(s):\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class SimSettings:
    start: datetime
    duration: int
    energy_tick: int = 60
    mape_period: int = 3600
    seed: int = 0
    metric_sampling: MetricSampling = MetricSampling.HOP_START

    @property
    def end(self) -> datetime:
        return self.start + timedelta(seconds=self.duration)


@dataclass(frozen=True)
class BatterySpec:
    capacity_wh: float
    initial_wh: float = 0.0
    max_charge_power_w: float = math.inf
    efficiency: float = 1.0


@dataclass(frozen=True)
class DatacenterSpec:
    id: str
    kind: str
    location: Tuple[float, float]
    policy: EnergyPolicy
    grid: PowerGrid
    res_utilization: float = 1.0
    trace: Optional[IrradianceTrace] = None
    peak_kwp: Optional[float] = None
    tilt: Optional[float] = None
    azimuth: Optional[float] = None
    battery: Optional[BatterySpec] = None
    avg_draw_kw: Optional[float] = None
    annual_pv_kwh: Optional[float] = None
    neighbours: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class DeviceSpec:
    id: str
    location: Tuple[float, float]
    capacity_mah: float
    initial_mah: float
    voltage: float
    panel_w: float = 0.0
    max_charge_current_ma: float = math.inf
    trace: Optional[IrradianceTrace] = None
    transaction_period: int = 300
    mah_per_transaction: float = 0.0
    idle_ma: float = 0.0
    resume_fraction: float = 0.01
    start_jitter: int = 0


@dataclass(frozen=True)
class MelSpec:
    name: str
    processing_time: float


@dataclass(frozen=True)
class InstanceSpec:
    id: str
    host: str
    processing_time: Optional[float] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    sim: SimSettings
    datacenters: Tuple[DatacenterSpec, ...]
    devices: Tuple[DeviceSpec, ...]
    abstract_mels: Tuple[MelSpec, ...]
    instances: Tuple[InstanceSpec, ...]
    flows: Tuple[OsmoticFlow, ...]
    algorithm: str = "ALG4"
    cooperation: Cooperation = Cooperation.COMMUNICATING
    static_edges: Mapping[str, str] = field(default_factory=dict)
    source: Optional[str] = None

    def with_algorithm(self, algorithm: str) -> "Scenario":
        if algorithm not in known_algorithms():
            raise ScenarioError([f"algorithm: unknown algorithm {algorithm!r}; expected one of {known_algorithms()}"])
        return dataclasses.replace(self, algorithm=algorithm)

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, seed=int(seed)))

    def with_cooperation(self, cooperation: str) -> "Scenario":
        return dataclasses.replace(self, cooperation=Cooperation(cooperation))

    def datacenter(self, dc_id: str) -> DatacenterSpec:
        return next(dc for dc in self.datacenters if dc.id == dc_id)


class _Checker:
    """Field-path aware accessors that record problems instead of raising."""

    def __init__(self, base: Optional[Path]):
        self.errors: List[str] = []
        self.base = base
        self._trace_cache: Dict[Path, IrradianceTrace] = {}

    def error(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def section(self, data: Any, key: str, path: str, kind=dict, required=True):
        value = data.get(key) if isinstance(data, Mapping) else None
        if value is None:
            if required:
                self.error(f"{path}{key}", "missing")
            return kind()
        if not isinstance(value, kind):
            self.error(f"{path}{key}", f"expected a {'mapping' if kind is dict else 'list'}")
            return kind()
        return value

    def number(self, data: Mapping, key: str, path: str, default=None, *, integer=False,
               minimum=None, exclusive_min=None, maximum=None) -> Optional[float]:
        where = f"{path}.{key}" if path else key
        value = data.get(key, default)
        if value is None:
            if default is None:
                self.error(where, "missing")
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            if value in ("inf", ".inf") and not integer:
                value = math.inf
            else:
                self.error(where, f"expected a number, got {value!r}")
                return None
        if integer and (not float(value).is_integer()):
            self.error(where, f"expected whole seconds, got {value!r}")
            return None
        if math.isnan(value):
            self.error(where, "must not be NaN")
            return None
        if minimum is not None and value < minimum:
            self.error(where, f"must be >= {minimum}, got {value}")
        if exclusive_min is not None and not value > exclusive_min:
            self.error(where, f"must be > {exclusive_min}, got {value}")
        if maximum is not None and value > maximum:
            self.error(where, f"must be <= {maximum}, got {value}")
        return int(value) if integer else float(value)

    def identifier(self, data: Mapping, key: str, path: str) -> Optional[str]:
        value = data.get(key)
        if value is None or not str(value).strip():
            self.error(f"{path}.{key}", "missing")
            return None
        return str(value)

    def location(self, data: Mapping, path: str) -> Optional[Tuple[float, float]]:
        loc = data.get("location")
        if loc is None and "latitude" in data:
            loc = (data.get("latitude"), data.get("longitude"))
        try:
            return check_coordinates(tuple(loc))
        except (TypeError, ValueError, IndexError, TopologyError) as exc:
            self.error(f"{path}.location", f"expected [latitude, longitude] in range ({exc})")
            return None

    def trace(self, value: Any, path: str) -> Optional[IrradianceTrace]:
        if value is None:
            return None
        if isinstance(value, IrradianceTrace):
            return value
        p = Path(str(value))
        if not p.is_absolute() and self.base is not None:
            p = self.base / p
        p = p.resolve()
        if p in self._trace_cache:
            return self._trace_cache[p]
        try:
            trace = load_trace(p)
        except FileNotFoundError:
            self.error(path, f"trace file {p} not found")
            return None
        except TraceError as exc:
            self.error(path, str(exc))
            return None
        self._trace_cache[p] = trace
        return trace


def _parse_start(value: Any) -> datetime:
    if isinstance(value, datetime):
        return as_utc(value)
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return as_utc(datetime.fromisoformat(text))


def _parse_sim(ck: _Checker, data: Mapping) -> Optional[SimSettings]:
    sim = ck.section(data, "sim", "")
    start = None
    try:
        start = _parse_start(sim["start"])
    except KeyError:
        ck.error("sim.start", "missing")
    except (TypeError, ValueError):
        ck.error("sim.start", f"expected an ISO 8601 UTC date-time, got {sim.get('start')!r}")
    duration = ck.number(sim, "duration", "sim", integer=True, exclusive_min=0)
    energy_tick = ck.number(sim, "energy_tick", "sim", 60, integer=True, exclusive_min=0)
    mape_period = ck.number(sim, "mape_period", "sim", 3600, integer=True, exclusive_min=0)
    seed = ck.number(sim, "seed", "sim", 0, integer=True)
    sampling = None
    try:
        sampling = MetricSampling(sim.get("metric_sampling", "hop_start"))
    except ValueError:
        ck.error("sim.metric_sampling", "expected hop_start or transaction_start")
    if None in (start, duration, energy_tick, mape_period, seed, sampling):
        return None
    return SimSettings(start, duration, energy_tick, mape_period, seed, sampling)


def _parse_datacenter(ck: _Checker, raw: Mapping, path: str, sim: Optional[SimSettings]) -> Optional[DatacenterSpec]:
    dc_id = ck.identifier(raw, "id", path)
    kind = raw.get("kind", "edge")
    if kind not in ("edge", "cloud"):
        ck.error(f"{path}.kind", f"expected edge or cloud, got {kind!r}")
    location = ck.location(raw, path)
    policy = None
    try:
        policy = EnergyPolicy.parse(raw.get("policy", "OnGrid"))
    except EnergyConfigError as exc:
        ck.error(f"{path}.policy", str(exc))

    grid_raw = ck.section(raw, "grid", f"{path}.", required=False)
    grid = None
    cost = ck.number(grid_raw, "cost_per_kwh", f"{path}.grid", 0.0, minimum=0)
    low = ck.number(grid_raw, "low_carbon_fraction", f"{path}.grid", 0.0, minimum=0, maximum=1)
    res = ck.number(grid_raw, "res_fraction", f"{path}.grid", 0.0, minimum=0, maximum=1)
    if None not in (cost, low, res):
        try:
            grid = PowerGrid(cost, low, res)
        except EnergyConfigError as exc:
            ck.error(f"{path}.grid", str(exc))

    res_util = ck.number(raw, "res_utilization", path, 1.0, exclusive_min=0, maximum=1)
    avg_draw = ck.number(raw, "avg_draw_kw", path, math.nan) if "avg_draw_kw" in raw else None
    annual = ck.number(raw, "annual_pv_kwh", path, math.nan, minimum=0) if "annual_pv_kwh" in raw else None
    if avg_draw is not None and avg_draw < 0:
        ck.error(f"{path}.avg_draw_kw", "must be >= 0")

    solar = ck.section(raw, "solar", f"{path}.", required=False)
    trace = peak = tilt = azimuth = None
    if solar:
        trace = ck.trace(solar.get("trace"), f"{path}.solar.trace")
        if solar.get("trace") is None:
            ck.error(f"{path}.solar.trace", "missing")
        peak = ck.number(solar, "peak_kwp", f"{path}.solar", exclusive_min=0)
        angles = solar.get("angles") or {}
        tilt = angles.get("tilt") if isinstance(angles, Mapping) else None
        azimuth = angles.get("azimuth") if isinstance(angles, Mapping) else None

    if avg_draw is None:
        if not solar:
            ck.error(f"{path}", "needs either a solar section or avg_draw_kw")
        elif trace is not None and sim is not None and annual is None and not covers_year(trace, sim.start.year):
            ck.error(f"{path}.solar.trace",
                     f"does not cover the full year {sim.start.year}; give annual_pv_kwh or avg_draw_kw")

    battery = None
    if raw.get("battery"):
        b = ck.section(raw, "battery", f"{path}.")
        cap = ck.number(b, "capacity_wh", f"{path}.battery", minimum=0)
        init = ck.number(b, "initial_wh", f"{path}.battery", 0.0, minimum=0)
        mcp = ck.number(b, "max_charge_power_w", f"{path}.battery", math.inf, minimum=0)
        eff = ck.number(b, "efficiency", f"{path}.battery", 1.0, exclusive_min=0, maximum=1)
        if cap is not None and init is not None and init > cap:
            ck.error(f"{path}.battery.initial_wh", f"exceeds capacity {cap}")
        if None not in (cap, init, mcp, eff):
            battery = BatterySpec(cap, init, mcp, eff)
    if policy is EnergyPolicy.ON_GRID_STORAGE and not raw.get("battery"):
        ck.error(f"{path}.battery", "required by the OnGridEnergyStorage policy")

    neighbours = raw.get("neighbours")
    if neighbours is not None:
        neighbours = tuple(str(n) for n in neighbours)

    if None in (dc_id, location, policy, grid, res_util) or kind not in ("edge", "cloud"):
        return None
    return DatacenterSpec(dc_id, kind, location, policy, grid, res_util, trace, peak, tilt, azimuth,
                          battery, avg_draw, annual, neighbours)


def _parse_device(ck: _Checker, raw: Mapping, path: str) -> Optional[DeviceSpec]:
    dev_id = ck.identifier(raw, "id", path)
    location = ck.location(raw, path)
    b = ck.section(raw, "battery", f"{path}.")
    cap = ck.number(b, "capacity_mah", f"{path}.battery", exclusive_min=0)
    init = ck.number(b, "initial_mah", f"{path}.battery", cap if cap is not None else 0.0, minimum=0)
    voltage = ck.number(b, "voltage", f"{path}.battery", exclusive_min=0)
    mcc = ck.number(b, "max_charge_current_ma", f"{path}.battery", math.inf, minimum=0)
    resume = ck.number(b, "resume_fraction", f"{path}.battery", 0.01, minimum=0, maximum=1)
    if cap is not None and init is not None and init > cap:
        ck.error(f"{path}.battery.initial_mah", f"exceeds capacity {cap}")
    panel = ck.number(raw, "panel_w", path, 0.0, minimum=0)
    trace = ck.trace(raw.get("trace"), f"{path}.trace")
    period = ck.number(raw, "transaction_period", path, 300, integer=True, exclusive_min=0)
    per_txn = ck.number(raw, "mah_per_transaction", path, 0.0, minimum=0)
    idle = ck.number(raw, "idle_ma", path, 0.0, minimum=0)
    jitter = ck.number(raw, "start_jitter", path, 0, integer=True, minimum=0)
    values = (dev_id, location, cap, init, voltage, mcc, resume, panel, period, per_txn, idle, jitter)
    if None in values:
        return None
    return DeviceSpec(dev_id, location, cap, init, voltage, panel, mcc, trace, period, per_txn, idle, resume, jitter)


def _check_coverage(ck: _Checker, trace: Optional[IrradianceTrace], path: str, sim: SimSettings, slack: float):
    if trace is None:
        return
    end = sim.end + timedelta(seconds=math.ceil(slack))
    if not trace.covers(sim.start, end):
        first, last = trace.coverage
        ck.error(path, f"trace covers {first:%Y-%m-%d %H:%M} .. {last:%Y-%m-%d %H:%M} UTC (hourly), "
                       f"run needs {sim.start:%Y-%m-%d %H:%M} .. {end:%Y-%m-%d %H:%M}")


def build_scenario(data: Mapping, base: Optional[Path] = None, source: Optional[str] = None) -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError(["<root>: expected a mapping"], source)
    ck = _Checker(base)
    name = str(data.get("name") or (Path(source).stem if source else "scenario"))
    sim = _parse_sim(ck, data)

    datacenters = []
    seen = set()
    for i, raw in enumerate(ck.section(data, "datacenters", "", list)):
        path = f"datacenters[{i}]"
        if not isinstance(raw, Mapping):
            ck.error(path, "expected a mapping")
            continue
        dc = _parse_datacenter(ck, raw, path, sim)
        if dc is not None:
            if dc.id in seen:
                ck.error(f"{path}.id", f"duplicate datacenter id {dc.id!r}")
            seen.add(dc.id)
            datacenters.append(dc)
    if not datacenters and not any(e.startswith("datacenters") for e in ck.errors):
        ck.error("datacenters", "at least one datacenter is required")

    devices = []
    seen_dev = set()
    for i, raw in enumerate(ck.section(data, "devices", "", list)):
        path = f"devices[{i}]"
        if not isinstance(raw, Mapping):
            ck.error(path, "expected a mapping")
            continue
        dev = _parse_device(ck, raw, path)
        if dev is not None:
            if dev.id in seen_dev:
                ck.error(f"{path}.id", f"duplicate device id {dev.id!r}")
            seen_dev.add(dev.id)
            devices.append(dev)

    mels = []
    for i, raw in enumerate(ck.section(data, "abstract_mels", "", list)):
        path = f"abstract_mels[{i}]"
        name_ = ck.identifier(raw, "name", path) if isinstance(raw, Mapping) else None
        ptime = ck.number(raw, "processing_time", path, exclusive_min=0) if isinstance(raw, Mapping) else None
        if name_ is None or ptime is None:
            continue
        name_ = normalize_abstract(name_)
        if "." in name_ or "*" in name_:
            ck.error(f"{path}.name", f"abstract MEL name {name_!r} must not contain '.' or '*'")
            continue
        if any(m.name == name_ for m in mels):
            ck.error(f"{path}.name", f"duplicate abstract MEL {name_}.*")
            continue
        mels.append(MelSpec(name_, ptime))
    mel_names = {m.name for m in mels}

    instances = []
    dc_ids = {dc.id for dc in datacenters}
    for i, raw in enumerate(ck.section(data, "instances", "", list)):
        path = f"instances[{i}]"
        if not isinstance(raw, Mapping):
            ck.error(path, "expected a mapping")
            continue
        inst_id = ck.identifier(raw, "id", path)
        host = ck.identifier(raw, "host", path)
        override = ck.number(raw, "processing_time", path, math.nan, exclusive_min=0) if "processing_time" in raw else None
        if inst_id is None or host is None:
            continue
        try:
            family = abstract_of(inst_id)
        except TopologyError as exc:
            ck.error(f"{path}.id", str(exc))
            continue
        if family not in mel_names:
            ck.error(f"{path}.id", f"instance of unknown abstract MEL {family}.*")
        if host not in dc_ids:
            ck.error(f"{path}.host", f"unknown datacenter {host!r}")
        if any(x.id == inst_id for x in instances):
            ck.error(f"{path}.id", f"duplicate instance {inst_id!r}")
        instances.append(InstanceSpec(inst_id, host, override))
    deployed = {abstract_of(x.id) for x in instances}

    flows = []
    dev_ids = {d.id for d in devices}
    for i, raw in enumerate(ck.section(data, "flows", "", list)):
        path = f"flows[{i}]"
        if not isinstance(raw, Mapping):
            ck.error(path, "expected a mapping")
            continue
        flow_id = ck.identifier(raw, "id", path)
        source = ck.identifier(raw, "source", path)
        chain = raw.get("chain")
        if not isinstance(chain, list) or not chain:
            ck.error(f"{path}.chain", "expected a non-empty list of abstract MEL names")
            continue
        if flow_id is None or source is None:
            continue
        if source not in dev_ids:
            ck.error(f"{path}.source", f"flow {flow_id!r} references unknown device {source!r}")
        chain = [normalize_abstract(c) for c in chain]
        for j, name_ in enumerate(chain):
            if name_ not in mel_names:
                ck.error(f"{path}.chain[{j}]", f"flow {flow_id!r} references unknown abstract MEL {name_}.*")
            elif name_ not in deployed:
                ck.error(f"{path}.chain[{j}]", f"flow {flow_id!r}: no instance of {name_}.* is deployed")
        if any(f.id == flow_id for f in flows):
            ck.error(f"{path}.id", f"duplicate flow id {flow_id!r}")
        flows.append(OsmoticFlow(flow_id, source, tuple(chain)))

    algorithm = str(data.get("algorithm", "ALG4"))
    if algorithm not in known_algorithms():
        ck.error("algorithm", f"unknown algorithm {algorithm!r}; expected one of {known_algorithms()}")
    cooperation = Cooperation.COMMUNICATING
    try:
        cooperation = Cooperation(data.get("cooperation", "communicating"))
    except ValueError:
        ck.error("cooperation", "expected independent, communicating or central")

    edges = [dc.id for dc in datacenters if dc.kind == "edge"]
    static = dict(data.get("static_edges") or {})
    for alg, position in (("ALG1", 0), ("ALG2", 1)):
        if alg not in static and len(edges) > position:
            static[alg] = edges[position]
    for alg, edge in static.items():
        if edge not in edges:
            ck.error(f"static_edges.{alg}", f"{edge!r} is not an edge datacenter")
    if algorithm in ("ALG1", "ALG2") and algorithm not in static:
        ck.error("static_edges", f"{algorithm} needs a static edge datacenter")

    for i, dc in enumerate(datacenters):
        for n in dc.neighbours or ():
            if n not in dev_ids:
                ck.error(f"datacenters[{i}].neighbours", f"unknown device {n!r}")

    if sim is not None:
        mel_time = {m.name: m.processing_time for m in mels}
        slack = max((sum(mel_time.get(c, 0.0) for c in f.chain) for f in flows), default=0.0)
        slack += max((x.processing_time or 0.0 for x in instances), default=0.0)
        for i, dc in enumerate(datacenters):
            _check_coverage(ck, dc.trace, f"datacenters[{i}].solar.trace", sim, slack)
        for i, dev in enumerate(devices):
            _check_coverage(ck, dev.trace, f"devices[{i}].trace", sim, sim.energy_tick)

    if ck.errors:
        raise ScenarioError(ck.errors, source)
    return Scenario(name, sim, tuple(datacenters), tuple(devices), tuple(mels), tuple(instances),
                    tuple(flows), algorithm, cooperation, static, source)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("osmores") / "scenarios" / f"{name}.yaml"))


def locate(spec: Union[str, Path]) -> Path:
    """A scenario path, or the name of a bundled scenario."""
    path = Path(spec)
    if path.exists():
        return path
    bundled = bundled_path(str(spec))
    if bundled.exists():
        return bundled
    raise ScenarioError([f"<file>: no scenario file or bundled scenario named {str(spec)!r}"], str(spec))


def parse_scenario(spec: Union[str, Path, Mapping]) -> Scenario:
    if isinstance(spec, Mapping):
        return build_scenario(spec)
    path = locate(spec)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError([f"<file>: not valid YAML ({exc})"], str(path)) from None
    return build_scenario(data, base=path.parent, source=str(path))
