"""Osmotic flows and the transactions that run through them.

A flow is a linear chain of abstract MELs fed by one device. Every
transaction resolves each chain element to an instance at execution time and
records, per hop, the host datacenter, the processing time and the host's
self-consumption. MELs have unlimited capacity and hops are back to back, so a
transaction executes synchronously inside its arrival event.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from .simcore import EventKind, Scheduler
from .topology import IoTDevice, Topology, UnroutableError, normalize_abstract


class MetricSampling(str, enum.Enum):
    HOP_START = "hop_start"
    TRANSACTION_START = "transaction_start"


@dataclass(frozen=True)
class OsmoticFlow:
    id: str
    source_device: str
    chain: tuple

    def __post_init__(self):
        chain = tuple(normalize_abstract(c) for c in self.chain)
        if not chain:
            raise ValueError(f"flow {self.id!r} has an empty chain")
        object.__setattr__(self, "chain", chain)


@dataclass(frozen=True)
class Hop:
    dc_id: str
    instance_id: str
    processing_time: float
    self_consumption: float
    start_time: float


@dataclass
class Transaction:
    id: int
    flow: str
    start_time: int
    source_device: str = ""
    hops: List[Hop] = field(default_factory=list)
    status: str = "pending"

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def total_time(self) -> float:
        return sum(h.processing_time for h in self.hops)


SelfConsumptionFn = Callable[[str, float], float]


def execute_transaction(
    txn: Transaction,
    flow: OsmoticFlow,
    topology: Topology,
    device: IoTDevice,
    self_consumption: SelfConsumptionFn,
    sampling: MetricSampling = MetricSampling.HOP_START,
) -> Transaction:
    """Run ``txn`` hop by hop; an unroutable hop drops it with partial hops kept.

    ``self_consumption(dc_id, t)`` gives the host's self-consumption at
    simulation time ``t`` (seconds).
    """
    sampling = MetricSampling(sampling)
    hop_start = float(txn.start_time)
    for abstract in flow.chain:
        try:
            instance_id = topology.resolve(device, abstract)
        except UnroutableError:
            txn.status = "dropped"
            return txn
        dc_id = topology.instances[instance_id].host
        ptime = topology.processing_time(instance_id)
        sample_at = hop_start if sampling is MetricSampling.HOP_START else float(txn.start_time)
        txn.hops.append(Hop(dc_id, instance_id, ptime, self_consumption(dc_id, sample_at), hop_start))
        hop_start += ptime
    txn.status = "completed"
    return txn


def emission_times(period: int, horizon: int, offset: int = 0) -> List[int]:
    """Arrival instants ``offset, offset + period, ...`` strictly before ``horizon``."""
    if period <= 0:
        raise ValueError("transaction_period must be > 0")
    return list(range(int(offset), int(horizon), int(period)))


@dataclass
class Emission:
    flow: OsmoticFlow
    device: IoTDevice
    horizon: int
    mah_per_transaction: float = 0.0


def emit_transactions(scheduler: Scheduler, device: IoTDevice, flow: OsmoticFlow,
                      horizon: int, mah_per_transaction: float = 0.0,
                      offset: int = 0) -> Optional[Emission]:
    """Schedule the first arrival of ``flow``; :func:`next_arrival` chains the rest.

    Arrivals are chained one at a time to keep the queue short over long
    horizons.
    """
    if device.transaction_period <= 0:
        raise ValueError(f"device {device.id!r}: transaction_period must be > 0")
    if offset >= horizon:
        return None
    emission = Emission(flow, device, int(horizon), mah_per_transaction)
    scheduler.schedule(offset, EventKind.TRANSACTION_ARRIVAL, emission)
    return emission


def next_arrival(scheduler: Scheduler, emission: Emission) -> None:
    t = scheduler.now + emission.device.transaction_period
    if t < emission.horizon:
        scheduler.schedule(t, EventKind.TRANSACTION_ARRIVAL, emission)


def should_emit(emission: Emission) -> bool:
    """Depleted devices skip arrivals; otherwise the transaction's charge is debited."""
    battery = emission.device.battery
    if battery is None:
        return True
    if battery.depleted:
        return False
    battery.consume(emission.mah_per_transaction)
    return True
