"""Centralized-vs-localized processing tradeoff as a running workload:
per-site Poisson task streams placed by the configured policy onto local
stations or the central pool across a fronthaul delay.

Builds its own symmetric topology from the parameters so a sweep over the
fronthaul delay needs no hand-written topology section; mirrors the
closed-form placement model for cross-checks."""

from __future__ import annotations

from dataclasses import dataclass

from ..conductor import Rejection
from ..errors import ConfigError
from ..kernel import TaskClass, exponential_demand, s_to_ns
from ..topology import ComputeNode, ComputeTier, PhysLink, RieNode, Topology
from .base import ScenarioContext


@dataclass
class PlacementScenarioConfig:
    n_sites: int = 4
    site_rate_per_s: float = 1000.0
    local_capacity_wups: float = 2000.0
    local_servers: int = 1
    central_capacity_wups: float = 40000.0
    central_servers: int = 4
    fronthaul_one_way_s: float = 0.0
    demand_mean_wu: float = 1.0
    deadline_offset_s: float | None = None
    stop_t_s: float = 1e9  # arrivals run for the whole simulation by default

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ConfigError("n_sites must be >= 1")
        if self.fronthaul_one_way_s < 0:
            raise ConfigError("fronthaul delay must be non-negative")


def build_placement_topology(cfg: PlacementScenarioConfig) -> Topology:
    """n identical sites (RIE + local compute) linked to one central pool
    across links whose propagation delay is the fronthaul parameter."""
    topo = Topology()
    topo.add_node(
        ComputeNode(
            id="pool0", tier=ComputeTier.CENTRAL_POOL,
            capacity_wups=cfg.central_capacity_wups, servers=cfg.central_servers,
            position=(0.0, 50_000.0),
        )
    )
    for i in range(cfg.n_sites):
        pos = (float(i) * 1000.0, 0.0)
        topo.add_node(RieNode(id=f"rie{i}", position=pos))
        topo.add_node(
            ComputeNode(
                id=f"local{i}", tier=ComputeTier.LOCAL,
                capacity_wups=cfg.local_capacity_wups, servers=cfg.local_servers,
                position=pos,
            )
        )
        topo.add_link(
            PhysLink(id=f"l-site{i}", endpoints=(f"rie{i}", f"local{i}"), capacity_bps=100e9)
        )
        topo.add_link(
            PhysLink(
                id=f"l-fh{i}", endpoints=(f"rie{i}", "pool0"), capacity_bps=100e9,
                prop_delay_s=cfg.fronthaul_one_way_s,
            )
        )
    return topo


def run_placement(ctx: ScenarioContext, cfg: PlacementScenarioConfig, duration_s: float) -> dict:
    """Drive per-site arrivals through the placement policy; central tasks
    pay the fronthaul both ways."""
    sim = ctx.sim
    cond = ctx.conductor
    rejected = [0]

    for i in range(cfg.n_sites):
        rie_id = f"rie{i}"

        def route(task, site=rie_id):
            res = cond.lcm_assign_task(task)
            if isinstance(res, Rejection):
                rejected[0] += 1
                task.dropped_reason = res.reason.value
                return None
            if res.node_id == "pool0":
                one_way = cond.fronthaul_delay_s(site, "pool0")
                task.on_done = lambda s, t, d=one_way: s.deliver(
                    d, "placement-return", t, lambda s2, t2: s2.complete_task(t2)
                )
                return ("pool0", one_way)
            return (res.node_id, 0.0)

        # route decision happens at creation; the task then arrives at the
        # chosen station after its transport leg
        src = _RoutedSource(
            name=f"site{i}", rate_per_s=cfg.site_rate_per_s,
            demand_mean=cfg.demand_mean_wu, stop_t_s=min(cfg.stop_t_s, duration_s),
            rie_id=rie_id, ctx=ctx, route=route,
            deadline_offset_s=cfg.deadline_offset_s,
        )
        src.start(sim)

    sim.run_until(duration_s)
    sim.run_to_drain(limit_s=duration_s + 60.0)

    from ..metrics import sample_from_task, summarize

    samples = [sample_from_task(t) for t in (sim.completed_tasks or [])]
    summary = {
        "scenario": "placement",
        "policy": cond.policy.mode.value,
        "fronthaul_one_way_s": cfg.fronthaul_one_way_s,
        "tasks_completed": len(samples),
        "tasks_rejected": rejected[0],
    }
    if samples:
        summary["latency"] = summarize(samples)
    return {"summary": summary}


class _RoutedSource:
    """Poisson source whose per-task destination comes from the placement
    policy at creation time."""

    def __init__(self, name, rate_per_s, demand_mean, stop_t_s, rie_id, ctx, route,
                 deadline_offset_s=None):
        self.name = name
        self.rate = rate_per_s
        self.demand_dist = exponential_demand(demand_mean)
        self.stop_ns = s_to_ns(stop_t_s)
        self.rie_id = rie_id
        self.ctx = ctx
        self.route = route
        self.deadline_offset_ns = (
            None if deadline_offset_s is None else s_to_ns(deadline_offset_s)
        )
        self._last_created_ns = 0

    def start(self, sim) -> None:
        self._last_created_ns = sim.clock_ns
        self._schedule_next(sim, sim.clock_ns)

    def _schedule_next(self, sim, now_ns) -> None:
        from ..kernel import EventKind

        gap = sim.rng.substream("arrivals").expovariate(self.rate)
        t = self._last_created_ns + s_to_ns(gap)
        if t >= self.stop_ns:
            return
        self._last_created_ns = t
        demand = self.demand_dist(sim.rng.substream("services"))
        task = sim.new_task(
            created_ns=t, demand_wu=demand, klass=TaskClass.GENERIC, src_node=self.rie_id
        )
        if self.deadline_offset_ns is not None:
            task.deadline_ns = t + self.deadline_offset_ns
        sim._schedule_ns(
            t,
            EventKind.SCENARIO_ACTION,
            (f"place site={self.rie_id}", lambda s, tk=task: self._place(s, tk)),
        )

    def _place(self, sim, task) -> None:
        dest = self.route(task)
        self._schedule_next(sim, sim.clock_ns)
        if dest is None:
            sim.dropped += 1
            return
        node_id, transport = dest
        station = self.ctx.stations[node_id]
        if transport > 0.0:
            self.ctx.conductor.note_dispatch(
                node_id, sim.clock_ns + s_to_ns(transport), station.service_time_ns(task)
            )
        sim.offer(station, task, delay_s=transport)
