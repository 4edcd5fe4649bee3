"""Shared scenario wiring: one simulator + pool + conductor + energy
ledger, with a queueing station per compute node feeding the power model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..conductor import Conductor, Hierarchy, PlacementPolicy
from ..kernel import Simulator, Station
from ..metrics import EnergyLedger
from ..topology import ComputeNode, PowerState, Topology
from ..virtual import ResourcePool


@dataclass
class ScenarioContext:
    sim: Simulator
    topo: Topology
    pool: ResourcePool
    conductor: Conductor
    ledger: EnergyLedger
    stations: dict[str, Station] = field(default_factory=dict)


def build_context(
    topo: Topology,
    seed: int,
    policy: Optional[PlacementPolicy] = None,
    hierarchy: Optional[Hierarchy] = None,
    k_violations: int = 1,
    migration_downtime_s: float = 0.05,
    trace: bool = True,
) -> ScenarioContext:
    """Wire up a fresh simulation over a topology.

    Every compute node gets a station (per-server rate = capacity/servers)
    whose busy count drives the node's power draw; RIEs start at their
    awake draw.
    """
    sim = Simulator(seed=seed, trace=trace)
    sim.completed_tasks = []
    pool = ResourcePool(topo)
    conductor = Conductor(
        sim,
        topo,
        pool,
        policy=policy,
        hierarchy=hierarchy,
        k_violations=k_violations,
        migration_downtime_s=migration_downtime_s,
    )
    ledger = EnergyLedger()
    conductor.on_power_change = lambda node, watts: ledger.set_power(node, sim.clock_ns, watts)
    stations: dict[str, Station] = {}
    for node in topo.nodes.values():
        if isinstance(node, ComputeNode):
            station = Station(
                node.id,
                servers=node.servers,
                rate_wups=node.rate_per_server_wups,
                accel_factor=node.accel_factor,
            )
            static, per_util, servers = node.power_static_w, node.power_per_util_w, node.servers
            station.power_hook = (
                lambda now_ns, busy, nid=node.id, st=static, pu=per_util, c=servers: ledger.set_power(
                    nid, now_ns, st + pu * busy / c
                )
            )
            ledger.set_power(node.id, 0, static)
            stations[node.id] = station
            conductor.register_station(node.id, station)
    for rie in topo.ries():
        watts = rie.power_awake_w if rie.power_state is PowerState.AWAKE else rie.power_sleep_w
        ledger.set_power(rie.id, 0, watts)
    return ScenarioContext(
        sim=sim, topo=topo, pool=pool, conductor=conductor, ledger=ledger, stations=stations
    )
