"""Wire a :class:`~osmores.scenario.Scenario` into a runnable simulation."""

from __future__ import annotations

import itertools
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .agents import (PLANNERS, AgentBroker, CentralAgent, Cooperation, DcAgent, DecisionRow, DeviceAgent,
                     device_agent_id, install_round_robin, install_static)
from .energy import (BatteryStore, DeviceBattery, EnergyController, SolarInstallation, self_consumption,
                     tick_datacenter, tick_device)
from .flows import Emission, Transaction, emit_transactions, execute_transaction, next_arrival, should_emit
from .metrics import MetricsReport, emit_comparison, emit_report
from .scenario import Scenario
from .simcore import EventKind, Scheduler, SimulationSummary
from .topology import AbstractMel, Datacenter, IoTDevice, MelInstance, Topology

log = logging.getLogger(__name__)

CENTRAL_AGENT_ID = "central"


class Simulation:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        sim = scenario.sim
        self.scheduler = Scheduler(epoch=sim.start, seed=sim.seed)
        self.clock = self.scheduler.clock
        self.topology = Topology()
        self.controllers: Dict[str, EnergyController] = {}
        self.device_specs = {d.id: d for d in scenario.devices}
        self.transactions: List[Transaction] = []
        self.battery_timeline: List[tuple] = []
        self.decisions: List[DecisionRow] = []
        self.broker = AgentBroker(scenario.cooperation, CENTRAL_AGENT_ID)
        self.summary: Optional[SimulationSummary] = None
        self._txn_ids = itertools.count()
        self._build_topology()
        self._build_agents()
        self._schedule()

    def _build_topology(self) -> None:
        sc = self.scenario
        for spec in sc.datacenters:
            solar = None
            if spec.trace is not None:
                solar = SolarInstallation(spec.peak_kwp, spec.trace, spec.location[0], spec.location[1],
                                          spec.tilt, spec.azimuth)
            battery = None
            if spec.battery is not None:
                battery = BatteryStore(spec.battery.capacity_wh, spec.battery.initial_wh,
                                       spec.battery.max_charge_power_w, spec.battery.efficiency)
            ctrl = EnergyController.build(spec.grid, spec.policy, solar=solar, battery=battery,
                                          res_utilization=spec.res_utilization, year=sc.sim.start.year,
                                          avg_draw_kw=spec.avg_draw_kw, annual_pv_kwh=spec.annual_pv_kwh)
            self.controllers[spec.id] = ctrl
            self.topology.add_datacenter(Datacenter(spec.id, spec.kind, spec.location, ctrl))
        for mel in sc.abstract_mels:
            self.topology.add_abstract(AbstractMel(mel.name, mel.processing_time))
        for inst in sc.instances:
            self.topology.deploy(MelInstance(inst.id, inst.host, inst.processing_time))
        for spec in sc.devices:
            battery = DeviceBattery(spec.capacity_mah, spec.initial_mah, spec.voltage, spec.panel_w,
                                    spec.max_charge_current_ma, spec.resume_fraction)
            self.topology.add_device(IoTDevice(spec.id, spec.location, battery, spec.transaction_period))

    def _build_agents(self) -> None:
        sc = self.scenario
        alg = sc.algorithm
        devices = self.topology.devices
        if alg in ("ALG1", "ALG2"):
            for dev in devices.values():
                install_static(self.topology, dev, sc.static_edges[alg], self.decisions, device_agent_id(dev.id))
            return
        if alg == "ALG3":
            for dev in devices.values():
                install_round_robin(self.topology, dev, self.decisions, device_agent_id(dev.id))
            return

        planner = PLANNERS[alg]
        central = sc.cooperation is Cooperation.CENTRAL
        all_devices = [device_agent_id(d) for d in devices]
        for spec in sc.datacenters:
            neighbours = all_devices if spec.neighbours is None else [device_agent_id(d) for d in spec.neighbours]
            self.broker.register(DcAgent(self.topology.datacenters[spec.id], self.clock, neighbours))
        for dev in devices.values():
            self.broker.register(DeviceAgent(dev, self.topology, None if central else planner, self.decisions))
        if central:
            by_agent = {device_agent_id(d.id): d for d in devices.values()}
            self.broker.register(CentralAgent(CENTRAL_AGENT_ID, by_agent, self.topology, planner))

    def _schedule(self) -> None:
        sc = self.scenario
        s = self.scheduler
        duration = sc.sim.duration
        s.on(EventKind.MAPE_TICK, self._on_mape)
        s.on(EventKind.ENERGY_TICK, self._on_energy)
        s.on(EventKind.TRANSACTION_ARRIVAL, self._on_arrival)
        # MAPE ticks go in first so they precede any same-instant arrival.
        if self.broker.agents:
            for t in range(0, duration, sc.sim.mape_period):
                s.schedule(t, EventKind.MAPE_TICK)
        self._record_batteries(0)
        s.schedule(0, EventKind.ENERGY_TICK)
        for flow in sc.flows:
            spec = self.device_specs[flow.source_device]
            offset = s.rng.randrange(spec.start_jitter + 1) if spec.start_jitter else 0
            emit_transactions(s, self.topology.devices[flow.source_device], flow, duration,
                              spec.mah_per_transaction, offset)
        s.schedule(duration, EventKind.SIM_END)

    def _on_mape(self, event) -> None:
        self.broker.dispatch(event.fire_time)

    def _record_batteries(self, t: int) -> None:
        for dev_id, dev in sorted(self.topology.devices.items()):
            b = dev.battery
            self.battery_timeline.append((t, dev_id, b.charge, b.fraction))

    def _on_energy(self, event) -> None:
        t = event.fire_time
        dt = min(self.scenario.sim.energy_tick, self.scenario.sim.duration - t)
        when = self.clock.datetime_at(t)
        for dc_id, ctrl in sorted(self.controllers.items()):
            tick_datacenter(ctrl, when, dt)
        for dev_id, dev in sorted(self.topology.devices.items()):
            spec = self.device_specs[dev_id]
            tick_device(dev.battery, when, dt, spec.idle_ma * dt / 3600.0, spec.trace)
        self._record_batteries(t + dt)
        if t + dt < self.scenario.sim.duration:
            self.scheduler.schedule(t + dt, EventKind.ENERGY_TICK)

    def self_consumption_at(self, dc_id: str, t: float) -> float:
        return self_consumption(self.controllers[dc_id], self.clock.datetime_at(t))

    def _on_arrival(self, event) -> None:
        emission: Emission = event.payload
        if should_emit(emission):
            txn = Transaction(next(self._txn_ids), emission.flow.id, event.fire_time, emission.device.id)
            execute_transaction(txn, emission.flow, self.topology, emission.device, self.self_consumption_at,
                                self.scenario.sim.metric_sampling)
            self.transactions.append(txn)
        next_arrival(self.scheduler, emission)

    def run(self) -> MetricsReport:
        self.summary = self.scheduler.run_until(self.scenario.sim.duration)
        p_low = {dc_id: c.grid.low_carbon_fraction for dc_id, c in self.controllers.items()}
        ledgers = {dc_id: (c.ledger, c.battery.charge if c.battery is not None else None)
                   for dc_id, c in self.controllers.items()}
        return MetricsReport.build(self.scenario.algorithm, self.transactions, self.topology, p_low,
                                   self.battery_timeline, ledgers, self.decisions)


def run(scenario: Scenario, out_dir=None) -> MetricsReport:
    """Run one scenario; write the report files when ``out_dir`` is given."""
    report = Simulation(scenario).run()
    if out_dir is not None:
        emit_report(report, out_dir)
    return report


def compare(scenario: Scenario, algorithms: Sequence[str], out_dir=None) -> List[MetricsReport]:
    """Run each algorithm on an otherwise identical, freshly built simulation."""
    reports = []
    for alg in algorithms:
        variant = scenario.with_algorithm(alg)
        reports.append(run(variant, None if out_dir is None else Path(out_dir) / alg))
    if out_dir is not None:
        emit_comparison(reports, Path(out_dir) / "comparison.csv")
    return reports
