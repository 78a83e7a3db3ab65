"""Osmotic agents: a MAPE loop per datacenter and device, coordinated by a broker.

Every broker tick runs Monitor and Analyze on all agents, routes the messages
published during Analyze according to the cooperation model, then runs Plan
and Execute. Agents are always visited in agent-id order.

DC agents publish their current solar reading and deployed MEL instances.
Device agents turn the messages they receive into routing rules. The
adaptive algorithms (ALG4, ALG5) live in the device agent's planner; the
static and round-robin ones (ALG1-ALG3) only install rules once at start-up.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .energy import EnergyPolicy, pv_power, self_consumption
from .simcore import SimClock
from .topology import Datacenter, IoTDevice, Topology, abstract_of, haversine_km, routing_add, routing_clear

log = logging.getLogger(__name__)

ALGORITHM_NAMES = ("ALG1", "ALG2", "ALG3", "ALG4", "ALG5")
REASONS = ("static", "round_robin", "max_res", "low_carbon_night", "nearest_night", "tie_distance", "tie_id")


class AgentConfigError(ValueError):
    pass


class Cooperation(str, enum.Enum):
    INDEPENDENT = "independent"
    COMMUNICATING = "communicating"
    CENTRAL = "central"


@dataclass(frozen=True)
class MessageContent:
    irradiance: float = 0.0
    mel_list: Tuple[str, ...] = ()
    payload: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class AgentMessage:
    sender: str
    destinations: Tuple[str, ...]
    content: MessageContent
    sent_at: int = 0

    def __post_init__(self):
        if not self.destinations:
            raise ValueError(f"message from {self.sender!r} has no destinations")


class Decision(NamedTuple):
    instance: str
    reason: str


class DecisionRow(NamedTuple):
    time: int
    agent_id: str
    abstract_mel: str
    selected_instance: str
    reason: str


class OsmoticAgent:
    """Base MAPE agent; every phase is a no-op unless overridden."""

    role = "agent"

    def __init__(self, agent_id: str):
        self.id = agent_id
        self.inbox: List[AgentMessage] = []

    def monitor(self, t: int) -> None:
        pass

    def analyze(self, t: int) -> List[AgentMessage]:
        return []

    def plan(self, t: int, inbox: Sequence[AgentMessage]) -> List[AgentMessage]:
        return []

    def execute(self, t: int) -> None:
        pass


def dc_agent_id(dc_id: str) -> str:
    return f"dc:{dc_id}"


def device_agent_id(device_id: str) -> str:
    return f"dev:{device_id}"


class DcAgent(OsmoticAgent):
    role = "dc-agent"

    def __init__(self, dc: Datacenter, clock: SimClock, neighbours: Sequence[str]):
        super().__init__(dc_agent_id(dc.id))
        self.dc = dc
        self.clock = clock
        self.neighbours = tuple(sorted(neighbours))
        self.r = 0.0
        self.mels: Tuple[str, ...] = ()
        self._extra: Dict = {}

    def monitor(self, t):
        when = self.clock.datetime_at(t)
        ctrl = self.dc.energy
        r = e_re = sc = 0.0
        if ctrl is not None:
            e_re = pv_power(ctrl, when)
            sc = self_consumption(ctrl, when)
            if ctrl.solar is not None and ctrl.policy is not EnergyPolicy.GRID_ONLY:
                ghi = ctrl.solar.trace.ghi_at(when)
                r = ghi if ghi is not None else ctrl.solar.trace.power_at(when)
        self.r = r
        self.mels = tuple(self.dc.deployed_mels)
        self._extra = {
            "dc_id": self.dc.id,
            "kind": self.dc.kind,
            "e_re": e_re,
            "self_consumption": sc,
            "p_low": ctrl.grid.low_carbon_fraction if ctrl is not None else 0.0,
            "location": self.dc.location,
        }

    def analyze(self, t):
        if not self.neighbours:
            return []
        content = MessageContent(self.r, self.mels, dict(self._extra))
        return [AgentMessage(self.id, self.neighbours, content, t)]


def device_agent_plan(inbox: Sequence[AgentMessage]) -> Dict[str, str]:
    """Keep, per abstract MEL, the instance from the message with the highest r.

    The comparison is strict, so among equal readings the first message seen
    wins.
    """
    best: Dict[str, str] = {}
    best_r: Dict[str, float] = {}
    for message in inbox:
        r = message.content.irradiance
        for instance in message.content.mel_list:
            family = abstract_of(instance)
            if family not in best or best_r[family] < r:
                best_r[family] = r
                best[family] = instance
    return best


Planner = Callable[[Sequence[AgentMessage], IoTDevice, Topology], Dict[str, Decision]]


class _Candidate(NamedTuple):
    instance: str
    e_re: float
    self_consumption: float
    p_low: float
    distance: float


def _edge_candidates(inbox, device) -> Dict[str, List[_Candidate]]:
    found: Dict[str, List[_Candidate]] = {}
    for message in inbox:
        info = message.content.payload
        if info.get("kind") != "edge":
            continue
        distance = haversine_km(device.location, info["location"])
        for instance in message.content.mel_list:
            found.setdefault(abstract_of(instance), []).append(
                _Candidate(instance, info["e_re"], info["self_consumption"], info["p_low"], distance))
    return found


def _pick(cands: List[_Candidate], key, reason: str) -> Decision:
    """Lowest ``key`` wins; a tie at the top falls back to instance id."""
    ranked = sorted(cands, key=lambda c: (key(c), c.instance))
    if len(ranked) > 1 and key(ranked[0]) == key(ranked[1]):
        reason = "tie_id"
    return Decision(ranked[0].instance, reason)


def _adaptive_plan(inbox, device, night: str) -> Dict[str, Decision]:
    plan: Dict[str, Decision] = {}
    for family, cands in sorted(_edge_candidates(inbox, device).items()):
        if all(c.e_re <= 0 for c in cands):
            if night == "low_carbon":
                plan[family] = _pick(cands, lambda c: -c.p_low, "low_carbon_night")
            else:
                plan[family] = _pick(cands, lambda c: c.distance, "nearest_night")
            continue
        full = [c for c in cands if c.self_consumption >= 1.0]
        if len(full) > 1:
            plan[family] = _pick(full, lambda c: c.distance, "tie_distance")
        else:
            plan[family] = _pick(cands, lambda c: -c.e_re, "max_res")
    return plan


def plan_alg4(inbox, device, topology=None) -> Dict[str, Decision]:
    """Most renewable power; closest among fully powered; greenest grid at night."""
    return _adaptive_plan(inbox, device, night="low_carbon")


def plan_alg5(inbox, device, topology=None) -> Dict[str, Decision]:
    """As ALG4, but the closest edge when no candidate has PV output."""
    return _adaptive_plan(inbox, device, night="nearest")


def plan_max_r(inbox, device=None, topology=None) -> Dict[str, Decision]:
    return {k: Decision(v, "max_res") for k, v in device_agent_plan(inbox).items()}


PLANNERS: Dict[str, Planner] = {"ALG4": plan_alg4, "ALG5": plan_alg5}


def register_planner(name: str, planner: Planner) -> None:
    """Make a custom adaptive algorithm selectable by name."""
    if name in ("ALG1", "ALG2", "ALG3"):
        raise AgentConfigError(f"{name} is a built-in non-adaptive algorithm")
    PLANNERS[name] = planner


def known_algorithms() -> List[str]:
    return sorted(set(ALGORITHM_NAMES) | set(PLANNERS))


class DeviceAgent(OsmoticAgent):
    role = "device-agent"

    def __init__(self, device: IoTDevice, topology: Topology, planner: Optional[Planner],
                 decisions: List[DecisionRow]):
        super().__init__(device_agent_id(device.id))
        self.device = device
        self.topology = topology
        self.planner = planner
        self.decisions = decisions
        self.pending: Dict[str, Decision] = {}

    def plan(self, t, inbox):
        directives = [m for m in inbox if "routes" in m.content.payload]
        if directives:
            self.pending = dict(directives[-1].content.payload["routes"])
        elif self.planner is not None:
            self.pending = self.planner(inbox, self.device, self.topology)
        else:
            self.pending = {}
        return []

    def execute(self, t):
        for family, decision in sorted(self.pending.items()):
            decision = Decision(*decision)
            routing_add(self.topology, self.device, family, decision.instance)
            self.decisions.append(DecisionRow(t, self.id, family, decision.instance, decision.reason))
        self.pending = {}


class CentralAgent(OsmoticAgent):
    """Receives every message and plans on behalf of all device agents."""

    role = "central-agent"

    def __init__(self, agent_id: str, devices: Mapping[str, IoTDevice], topology: Topology,
                 planner: Optional[Planner]):
        super().__init__(agent_id)
        self.devices = dict(devices)
        self.topology = topology
        self.planner = planner

    def plan(self, t, inbox):
        if self.planner is None:
            return []
        directives = []
        for agent_id, device in sorted(self.devices.items()):
            visible = [m for m in inbox if agent_id in m.destinations]
            routes = self.planner(visible, device, self.topology)
            directives.append(AgentMessage(self.id, (agent_id,), MessageContent(payload={"routes": routes}), t))
        return directives


class AgentBroker:
    """Owns the agents, runs their MAPE phases and delivers their messages."""

    def __init__(self, cooperation: Cooperation = Cooperation.COMMUNICATING, central_id: str = "central"):
        self.cooperation = Cooperation(cooperation)
        self.central_id = central_id
        self.agents: Dict[str, OsmoticAgent] = {}
        self.delivered = 0
        self.discarded = 0

    def register(self, agent: OsmoticAgent) -> OsmoticAgent:
        if agent.id in self.agents:
            raise AgentConfigError(f"duplicate agent id {agent.id!r}")
        self.agents[agent.id] = agent
        return agent

    def _ordered(self) -> List[OsmoticAgent]:
        return [self.agents[k] for k in sorted(self.agents)]

    def _deliver(self, messages: Sequence[AgentMessage]) -> None:
        for message in sorted(messages, key=lambda m: m.sender):
            for dest in message.destinations:
                agent = self.agents.get(dest)
                if agent is None:
                    log.warning("dropping message from %s to unknown agent %s", message.sender, dest)
                    self.discarded += 1
                    continue
                agent.inbox.append(message)
                self.delivered += 1

    def dispatch(self, t: int) -> None:
        agents = self._ordered()
        for agent in agents:
            agent.inbox = []
        for agent in agents:
            agent.monitor(t)
        published: List[AgentMessage] = []
        for agent in agents:
            published.extend(agent.analyze(t))

        central = None
        if self.cooperation is Cooperation.INDEPENDENT:
            self.discarded += sum(len(m.destinations) for m in published)
        elif self.cooperation is Cooperation.COMMUNICATING:
            self._deliver(published)
        else:
            central = self.agents.get(self.central_id)
            if central is None:
                raise AgentConfigError(f"central cooperation needs an agent with id {self.central_id!r}")
            central.inbox = sorted(published, key=lambda m: m.sender)
            self.delivered += len(published)
            self._deliver(central.plan(t, central.inbox))

        for agent in agents:
            if agent is central:
                continue
            self._deliver(agent.plan(t, agent.inbox))
        for agent in agents:
            agent.execute(t)


def install_static(topology: Topology, device: IoTDevice, edge_id: str,
                   decisions: List[DecisionRow], agent_id: str, t: int = 0) -> None:
    """Pin every abstract MEL that has an instance on ``edge_id`` to that instance."""
    if edge_id not in topology.datacenters:
        raise AgentConfigError(f"static edge {edge_id!r} is not a datacenter")
    chosen: Dict[str, str] = {}
    for instance in sorted(topology.datacenters[edge_id].deployed_mels):
        chosen.setdefault(abstract_of(instance), instance)
    for family, instance in sorted(chosen.items()):
        routing_add(topology, device, family, instance)
        decisions.append(DecisionRow(t, agent_id, family, instance, "static"))


def install_round_robin(topology: Topology, device: IoTDevice, decisions: List[DecisionRow],
                        agent_id: str, t: int = 0) -> None:
    routing_clear(device)
    families = sorted({abstract_of(i) for i in topology.instances})
    for family in families:
        decisions.append(DecisionRow(t, agent_id, family, "", "round_robin"))
