"""Datacenters, devices, abstract MELs and their deployed instances.

An abstract MEL ``NAME`` (written ``NAME.*``) is a stateless functionality;
``NAME.k`` is one deployed instance of it on a particular datacenter. Each
device keeps a routing table with at most one rule per abstract MEL. When no
rule exists, instances are picked round-robin in lexicographic id order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .energy import DeviceBattery, EnergyController

EARTH_RADIUS_KM = 6371.0

_INSTANCE_RE = re.compile(r"^(?P<name>[A-Za-z0-9_\-]+(?:\.[A-Za-z0-9_\-]+)*)\.(?P<k>[A-Za-z0-9_\-]+)$")

LatLon = Tuple[float, float]


class TopologyError(ValueError):
    pass


class UnroutableError(TopologyError):
    """No live instance exists for an abstract MEL."""


def abstract_of(instance_id: str) -> str:
    """``MEL_B.2`` -> ``MEL_B``."""
    match = _INSTANCE_RE.match(instance_id or "")
    if match is None:
        raise TopologyError(f"malformed MEL instance id {instance_id!r}; expected NAME.k")
    return match.group("name")


def normalize_abstract(name: str) -> str:
    """Accept ``MEL_B`` or ``MEL_B.*``."""
    name = str(name)
    return name[:-2] if name.endswith(".*") else name


def check_coordinates(point: LatLon) -> LatLon:
    lat, lon = float(point[0]), float(point[1])
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise TopologyError(f"coordinates out of range: ({lat}, {lon})")
    return lat, lon


def haversine_km(a: LatLon, b: LatLon) -> float:
    lat1, lon1 = map(math.radians, check_coordinates(a))
    lat2, lon2 = map(math.radians, check_coordinates(b))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


@dataclass
class Datacenter:
    id: str
    kind: str
    location: LatLon
    energy: Optional[EnergyController] = None
    deployed_mels: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("edge", "cloud"):
            raise TopologyError(f"datacenter {self.id!r}: kind must be 'edge' or 'cloud', got {self.kind!r}")
        self.location = check_coordinates(self.location)


@dataclass(frozen=True)
class AbstractMel:
    name: str
    processing_time: float

    def __post_init__(self):
        object.__setattr__(self, "name", normalize_abstract(self.name))
        if not self.processing_time > 0:
            raise TopologyError(f"abstract MEL {self.name!r}: processing_time must be > 0")

    @property
    def pattern(self) -> str:
        return f"{self.name}.*"


@dataclass(frozen=True)
class MelInstance:
    id: str
    host: str
    processing_time_override: Optional[float] = None

    @property
    def abstract_of(self) -> str:
        return abstract_of(self.id)


@dataclass
class IoTDevice:
    id: str
    location: LatLon
    battery: Optional[DeviceBattery] = None
    transaction_period: int = 300
    routing_table: Dict[str, str] = field(default_factory=dict)
    rr_cursor: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.location = check_coordinates(self.location)

    @property
    def depleted(self) -> bool:
        return self.battery is not None and self.battery.depleted


class Topology:
    def __init__(self):
        self.datacenters: Dict[str, Datacenter] = {}
        self.abstract_mels: Dict[str, AbstractMel] = {}
        self.instances: Dict[str, MelInstance] = {}
        self.devices: Dict[str, IoTDevice] = {}

    def add_datacenter(self, dc: Datacenter) -> Datacenter:
        if dc.id in self.datacenters:
            raise TopologyError(f"duplicate datacenter id {dc.id!r}")
        self.datacenters[dc.id] = dc
        return dc

    def add_abstract(self, mel: AbstractMel) -> AbstractMel:
        if mel.name in self.abstract_mels:
            raise TopologyError(f"duplicate abstract MEL {mel.pattern!r}")
        self.abstract_mels[mel.name] = mel
        return mel

    def deploy(self, instance: MelInstance) -> MelInstance:
        family = abstract_of(instance.id)
        if family not in self.abstract_mels:
            raise TopologyError(f"instance {instance.id!r}: unknown abstract MEL {family}.*")
        if instance.host not in self.datacenters:
            raise TopologyError(f"instance {instance.id!r}: unknown host datacenter {instance.host!r}")
        if instance.id in self.instances:
            raise TopologyError(f"duplicate MEL instance {instance.id!r}")
        self.instances[instance.id] = instance
        self.datacenters[instance.host].deployed_mels.append(instance.id)
        self.datacenters[instance.host].deployed_mels.sort()
        return instance

    def add_device(self, device: IoTDevice) -> IoTDevice:
        if device.id in self.devices:
            raise TopologyError(f"duplicate device id {device.id!r}")
        self.devices[device.id] = device
        return device

    def instances_of(self, abstract: str) -> List[str]:
        abstract = normalize_abstract(abstract)
        return sorted(i for i in self.instances if abstract_of(i) == abstract)

    def host_of(self, instance_id: str) -> Datacenter:
        return self.datacenters[self.instances[instance_id].host]

    def processing_time(self, instance_id: str) -> float:
        inst = self.instances[instance_id]
        if inst.processing_time_override is not None:
            return inst.processing_time_override
        return self.abstract_mels[abstract_of(instance_id)].processing_time

    def edges(self) -> List[Datacenter]:
        return [dc for _, dc in sorted(self.datacenters.items()) if dc.kind == "edge"]

    def resolve(self, device: IoTDevice, abstract: str) -> str:
        return resolve(self, device, abstract)

    def routing_add(self, device: IoTDevice, abstract: str, instance_id: str) -> None:
        routing_add(self, device, abstract, instance_id)


def resolve(topology: Topology, device: IoTDevice, abstract: str) -> str:
    """Instance serving ``abstract`` for ``device``: explicit rule, else round-robin."""
    abstract = normalize_abstract(abstract)
    rule = device.routing_table.get(abstract)
    if rule is not None and rule in topology.instances:
        return rule
    candidates = topology.instances_of(abstract)
    if not candidates:
        raise UnroutableError(f"no instance of {abstract}.* is deployed")
    cursor = device.rr_cursor.get(abstract, 0) % len(candidates)
    device.rr_cursor[abstract] = (cursor + 1) % len(candidates)
    return candidates[cursor]


def routing_add(topology: Topology, device: IoTDevice, abstract: str, instance_id: str) -> None:
    abstract = normalize_abstract(abstract)
    if instance_id not in topology.instances:
        raise TopologyError(f"routing rule targets unknown instance {instance_id!r}")
    if abstract_of(instance_id) != abstract:
        raise TopologyError(f"instance {instance_id!r} is not an instance of {abstract}.*")
    device.routing_table[abstract] = instance_id


def routing_clear(device: IoTDevice) -> None:
    device.routing_table.clear()
