"""Sustainability metrics over executed transactions, and the CSV report writer.

For one transaction the self-consumption score is the processing-time
weighted mean of its hosts' self-consumption; the low-emission score also
credits the grid's low-carbon share for the part not covered by PV. The
per-transaction scores are averaged over all completed transactions (the
plain sum is reported alongside as ``*_raw``). Dropped transactions are left
out of every metric.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .agents import DecisionRow
from .energy import EnergyLedger
from .flows import Transaction
from .topology import Topology, abstract_of, haversine_km

NA = "n/a"

SUMMARY_HEADER = ["algorithm", "m_self", "m_self_raw", "m_low", "m_low_raw", "nearest_edge_ratio",
                  "n_completed", "n_dropped", "grid_cost_total"]
TRANSACTIONS_HEADER = ["txn_id", "flow_id", "start_time", "status", "hop_index", "dc_id",
                       "proc_time_s", "self_consumption"]
BATTERY_HEADER = ["time", "device_id", "charge_mAh", "charge_fraction"]
LEDGER_HEADER = ["dc_id", "pv_produced_wh", "demand_wh", "from_pv_direct_wh", "from_battery_wh",
                 "from_grid_wh", "to_battery_wh", "to_grid_export_wh", "grid_cost", "battery_charge_wh"]
DECISIONS_HEADER = ["time", "agent_id", "abstract_mel", "selected_instance", "reason"]
COMPARISON_HEADER = ["algorithm", "m_self", "m_low", "nearest_edge_ratio", "n_completed", "n_dropped"]

REPORT_FILES = ("metrics_summary.csv", "transactions.csv", "battery_timeline.csv",
                "energy_ledger.csv", "agent_decisions.csv")


class ReportError(OSError):
    pass


def transaction_self(txn: Transaction) -> float:
    total = math.fsum(h.processing_time for h in txn.hops)
    return math.fsum(h.processing_time * h.self_consumption for h in txn.hops) / total


def transaction_low(txn: Transaction, p_low: Mapping[str, float]) -> float:
    total = math.fsum(h.processing_time for h in txn.hops)
    green = math.fsum(
        h.processing_time * h.self_consumption + h.processing_time * p_low[h.dc_id] * (1.0 - h.self_consumption)
        for h in txn.hops
    )
    return green / total


def _completed(transactions: Iterable[Transaction]) -> List[Transaction]:
    return [t for t in transactions if t.completed]


def m_self_raw(transactions: Iterable[Transaction]) -> Optional[float]:
    done = _completed(transactions)
    return math.fsum(transaction_self(t) for t in done) if done else None


def m_self(transactions: Iterable[Transaction]) -> Optional[float]:
    """Mean time-weighted self-consumption; ``None`` when nothing completed."""
    done = _completed(transactions)
    return m_self_raw(done) / len(done) if done else None


def m_low_raw(transactions: Iterable[Transaction], p_low: Mapping[str, float]) -> Optional[float]:
    done = _completed(transactions)
    return math.fsum(transaction_low(t, p_low) for t in done) if done else None


def m_low(transactions: Iterable[Transaction], p_low: Mapping[str, float]) -> Optional[float]:
    done = _completed(transactions)
    return m_low_raw(done, p_low) / len(done) if done else None


def nearest_edge(topology: Topology, device_id: str, abstract: str) -> Optional[str]:
    """Edge datacenter closest to the device among those hosting ``abstract``."""
    device = topology.devices[device_id]
    hosts = {topology.instances[i].host for i in topology.instances_of(abstract)}
    edges = [topology.datacenters[h] for h in hosts if topology.datacenters[h].kind == "edge"]
    if not edges:
        return None
    return min(edges, key=lambda dc: (haversine_km(device.location, dc.location), dc.id)).id


def nearest_edge_ratio(transactions: Iterable[Transaction], topology: Topology) -> Optional[float]:
    """Share of completed transactions whose first edge hop ran on the nearest edge."""
    hits = total = 0
    for txn in _completed(transactions):
        hop = next((h for h in txn.hops if topology.datacenters[h.dc_id].kind == "edge"), None)
        if hop is None:
            continue
        total += 1
        if hop.dc_id == nearest_edge(topology, txn.source_device, abstract_of(hop.instance_id)):
            hits += 1
    return hits / total if total else None


@dataclass
class MetricsReport:
    algorithm: str
    m_self: Optional[float]
    m_self_raw: Optional[float]
    m_low: Optional[float]
    m_low_raw: Optional[float]
    nearest_edge_ratio: Optional[float]
    n_completed: int
    n_dropped: int
    grid_cost_total: float
    transactions: List[Transaction] = field(default_factory=list)
    battery_timeline: List[Tuple[int, str, float, float]] = field(default_factory=list)
    ledgers: Dict[str, Tuple[EnergyLedger, Optional[float]]] = field(default_factory=dict)
    decisions: List[DecisionRow] = field(default_factory=list)

    @classmethod
    def build(cls, algorithm: str, transactions: Sequence[Transaction], topology: Topology,
              p_low: Mapping[str, float], battery_timeline=(), ledgers=None, decisions=()) -> "MetricsReport":
        ledgers = dict(ledgers or {})
        done = _completed(transactions)
        return cls(
            algorithm=algorithm,
            m_self=m_self(done),
            m_self_raw=m_self_raw(done),
            m_low=m_low(done, p_low),
            m_low_raw=m_low_raw(done, p_low),
            nearest_edge_ratio=nearest_edge_ratio(done, topology),
            n_completed=len(done),
            n_dropped=sum(1 for t in transactions if t.status == "dropped"),
            grid_cost_total=math.fsum(led.grid_cost for led, _ in ledgers.values()),
            transactions=sorted(transactions, key=lambda t: t.id),
            battery_timeline=list(battery_timeline),
            ledgers=ledgers,
            decisions=list(decisions),
        )

    def summary_row(self) -> List[str]:
        return [self.algorithm, fmt(self.m_self), fmt(self.m_self_raw), fmt(self.m_low), fmt(self.m_low_raw),
                fmt(self.nearest_edge_ratio), str(self.n_completed), str(self.n_dropped),
                fmt(self.grid_cost_total)]

    def comparison_row(self) -> List[str]:
        return [self.algorithm, fmt(self.m_self), fmt(self.m_low), fmt(self.nearest_edge_ratio),
                str(self.n_completed), str(self.n_dropped)]


def fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return NA
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _transaction_rows(transactions: Sequence[Transaction]):
    for txn in transactions:
        if not txn.hops:
            yield [txn.id, txn.flow, txn.start_time, txn.status, "", "", "", ""]
        for index, hop in enumerate(txn.hops):
            yield [txn.id, txn.flow, txn.start_time, txn.status, index, hop.dc_id,
                   fmt(hop.processing_time), fmt(hop.self_consumption)]


def emit_report(report: MetricsReport, out_dir) -> List[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / name for name in REPORT_FILES]
        _write(paths[0], SUMMARY_HEADER, [report.summary_row()])
        _write(paths[1], TRANSACTIONS_HEADER, _transaction_rows(report.transactions))
        _write(paths[2], BATTERY_HEADER,
               ([t, dev, fmt(charge), fmt(frac)] for t, dev, charge, frac in report.battery_timeline))
        ledger_rows = []
        for dc_id, (led, battery_charge) in sorted(report.ledgers.items()):
            ledger_rows.append([dc_id, fmt(led.pv_produced), fmt(led.demand), fmt(led.from_pv_direct),
                                fmt(led.from_battery), fmt(led.from_grid), fmt(led.to_battery),
                                fmt(led.to_grid_export), fmt(led.grid_cost), fmt(battery_charge)])
        _write(paths[3], LEDGER_HEADER, ledger_rows)
        _write(paths[4], DECISIONS_HEADER, (list(row) for row in report.decisions))
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return paths


def emit_comparison(reports: Sequence[MetricsReport], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _write(path, COMPARISON_HEADER, [r.comparison_row() for r in reports])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path
