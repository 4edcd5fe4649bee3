"""The logically centralized control plane.

Southbound functions: radio interfacing management (block assignment,
power, sleep), wired networking management (path selection and bandwidth
admission), and location-aware computing management (task placement).
Northbound it ingests network-context reports and reacts to QoS breaches
by migrating VMs. Optionally split into a two-level hierarchy, modeled
purely as differing control latencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import NoComputeNode, NoPath, UnknownNode, UnknownReporter
from .kernel import EventKind, Simulator, Station, Task, s_to_ns
from .topology import ComputeNode, ComputeTier, RieNode, SwitchNode, Topology, k_candidate_paths, nearest_node, path_metrics
from .virtual import ResourcePool, VirtualLink, VirtualMachine, VirtualRadioBlock, VLinkClass, VmState


class DirectiveAction(Enum):
    ASSIGN_BLOCKS = "AssignBlocks"
    SET_POWER = "SetPower"
    SLEEP = "Sleep"
    WAKE = "Wake"
    INSTALL_RESERVATION = "InstallReservation"
    RELEASE_RESERVATION = "ReleaseReservation"
    PLACE_TASK = "PlaceTask"
    START_VM = "StartVm"
    STOP_VM = "StopVm"
    MIGRATE_VM = "MigrateVm"


# Which node kinds may receive each action.
_ACTION_TARGETS = {
    DirectiveAction.ASSIGN_BLOCKS: (RieNode,),
    DirectiveAction.SET_POWER: (RieNode,),
    DirectiveAction.SLEEP: (RieNode,),
    DirectiveAction.WAKE: (RieNode,),
    DirectiveAction.INSTALL_RESERVATION: (RieNode, SwitchNode, ComputeNode),
    DirectiveAction.RELEASE_RESERVATION: (RieNode, SwitchNode, ComputeNode),
    DirectiveAction.PLACE_TASK: (ComputeNode,),
    DirectiveAction.START_VM: (ComputeNode,),
    DirectiveAction.STOP_VM: (ComputeNode,),
    DirectiveAction.MIGRATE_VM: (ComputeNode,),
}


@dataclass
class Directive:
    target: str
    issued_at_s: float
    action: DirectiveAction
    parameters: dict = field(default_factory=dict)

    def summary(self) -> str:
        return f"{self.action.value} target={self.target}"


class NciKind(Enum):
    LINK_DELAY_SAMPLE = "LinkDelaySample"
    QUEUE_DEPTH = "QueueDepth"
    USER_POSITION = "UserPosition"
    RIE_POWER_STATE = "RiePowerState"


@dataclass
class NciReport:
    reporter: str
    at_time_s: float
    kind: NciKind
    value: object


class PolicyMode(Enum):
    ALWAYS_LOCAL = "AlwaysLocal"
    ALWAYS_CENTRAL = "AlwaysCentral"
    HYBRID_THRESHOLD = "HybridThreshold"
    DEADLINE_AWARE = "DeadlineAware"


@dataclass
class PlacementPolicy:
    mode: PolicyMode = PolicyMode.ALWAYS_LOCAL
    q_star: int = 0
    control_latency_s: float = 0.0

    def __post_init__(self) -> None:
        if self.q_star < 0:
            raise ValueError("q_star must be >= 0")
        if self.control_latency_s < 0:
            raise ValueError("control latency must be >= 0")


class HierarchyMode(Enum):
    FLAT = "Flat"
    TWO_LEVEL = "TwoLevel"


@dataclass
class Hierarchy:
    mode: HierarchyMode = HierarchyMode.FLAT
    regions: dict[str, str] = field(default_factory=dict)
    regional_latency_s: float = 1e-4
    global_latency_s: float = 1e-3


@dataclass
class TaskAssignment:
    node_id: str


class RejectionReason(Enum):
    DEADLINE_INFEASIBLE = "DeadlineInfeasible"
    ADMISSION_DENIED = "AdmissionDenied"


@dataclass
class Rejection:
    reason: RejectionReason
    detail: str = ""


@dataclass
class Conflict:
    blocks: list[tuple[int, int]]


@dataclass
class VlinkRequest:
    vlink_id: str
    owner_service: str
    endpoints: tuple[str, str]
    bw_bps: float
    delay_s: float
    klass: VLinkClass = VLinkClass.CLOUD


@dataclass
class _Session:
    """Control-plane binding between a user, its serving site, the VM
    doing the work, and the wired vlink carrying the traffic."""

    user: str
    vlink_id: str
    vm_id: str
    serving_node: str


class Conductor:
    """Single logical control-plane actor inside the simulation thread."""

    def __init__(
        self,
        sim: Simulator,
        topo: Topology,
        pool: ResourcePool,
        policy: Optional[PlacementPolicy] = None,
        hierarchy: Optional[Hierarchy] = None,
        k_violations: int = 1,
        migration_downtime_s: float = 0.05,
        k_paths: int = 8,
    ):
        self.sim = sim
        self.topo = topo
        self.pool = pool
        self.policy = policy or PlacementPolicy()
        self.hierarchy = hierarchy or Hierarchy()
        self.k_violations = k_violations
        self.migration_downtime_s = migration_downtime_s
        self.k_paths = k_paths
        # data-plane instrumentation the LCM/WNM databases point at
        self.stations: dict[str, Station] = {}
        self.link_delay_db: dict[str, float] = {}
        self.queue_depth_db: dict[str, int] = {}
        self.rie_power_db: dict[str, str] = {}
        self._violations: dict[str, int] = {}
        self.violation_log: list[str] = []
        self.sessions: dict[str, _Session] = {}
        self._vlink_session: dict[str, _Session] = {}
        self.directive_log: list[Directive] = []
        self.migrations_started = 0
        self.migration_downtime_total_s = 0.0
        # tasks addressed to a VM while it migrates wait here
        self._migration_buffers: dict[str, list[Task]] = {}
        self.on_power_change: Optional[Callable[[str, float], None]] = None
        self._fronthaul_cache: dict[tuple[str, str], float] = {}
        # (arrival_ns, service_ns) of tasks dispatched but not yet arrived
        self._inflight: dict[str, list[tuple[int, int]]] = {}

    # -- stations / vm submission ------------------------------------------

    def register_station(self, node_id: str, station: Station) -> None:
        self.stations[node_id] = station

    def station_of(self, node_id: str) -> Station:
        try:
            return self.stations[node_id]
        except KeyError:
            raise UnknownNode(f"no station registered for {node_id}") from None

    def submit_to_vm(self, vm_id: str, task: Task) -> None:
        """Offer a task to the station hosting a VM; buffered during
        migration downtime instead of being dropped."""
        vm = self.pool.vms.get(vm_id)
        if vm is None:
            raise UnknownNode(f"vm {vm_id}")
        if vm.state is VmState.MIGRATING:
            self._migration_buffers.setdefault(vm_id, []).append(task)
            return
        self.sim.offer(self.station_of(vm.host), task)

    # -- control routing -----------------------------------------------------

    def route_control(self, directive: Directive) -> float:
        """Delivery latency for a directive under the configured hierarchy."""
        if self.hierarchy.mode is HierarchyMode.FLAT:
            return self.policy.control_latency_s
        scope = directive.parameters.get("scope_nodes") or [directive.target]
        regions = {self.hierarchy.regions.get(nid) for nid in scope}
        if len(regions) == 1 and None not in regions:
            return self.hierarchy.regional_latency_s
        return self.hierarchy.regional_latency_s + self.hierarchy.global_latency_s

    def issue(
        self, directive: Directive, apply_fn: Optional[Callable[[Simulator], None]] = None
    ) -> float:
        """Log a directive and schedule its delivery; returns delivery time."""
        target = self.topo.node(directive.target)
        if not isinstance(target, _ACTION_TARGETS[directive.action]):
            raise UnknownNode(
                f"{directive.action.value} not valid for node kind of {directive.target}"
            )
        self.directive_log.append(directive)
        latency = self.route_control(directive)
        deliver_at = self.sim.now_s + latency
        fn = apply_fn if apply_fn is not None else (lambda sim: None)
        self.sim._schedule_ns(
            s_to_ns(deliver_at), EventKind.CONTROL_DIRECTIVE, (directive.summary(), fn)
        )
        return deliver_at

    # -- LCM: task placement ---------------------------------------------------

    def _nearest_local(self, src_node: str) -> Optional[ComputeNode]:
        src = self.topo.node(src_node)
        pos = getattr(src, "position", (0.0, 0.0))
        return nearest_node(self.topo, pos, self.topo.compute_nodes(ComputeTier.LOCAL))

    def _central(self) -> Optional[ComputeNode]:
        pools = self.topo.compute_nodes(ComputeTier.CENTRAL_POOL)
        return min(pools, key=lambda n: n.id) if pools else None

    def fronthaul_delay_s(self, src_node: str, dst_node: str) -> float:
        """Best one-way path delay between two sites, cached."""
        key = (src_node, dst_node)
        if key not in self._fronthaul_cache:
            paths = k_candidate_paths(self.topo, src_node, dst_node, 1)
            self._fronthaul_cache[key] = path_metrics(self.topo, paths[0])[0]
        return self._fronthaul_cache[key]

    def lcm_assign_task(self, task: Task) -> TaskAssignment | Rejection:
        """Pick a compute node for a task under the configured policy."""
        if task.src_node is None or task.src_node not in self.topo.nodes:
            raise UnknownNode(f"task source {task.src_node!r}")
        mode = self.policy.mode
        local = self._nearest_local(task.src_node)
        central = self._central()
        if mode is PolicyMode.ALWAYS_LOCAL:
            if local is None:
                raise NoComputeNode("no Local-tier node")
            return TaskAssignment(local.id)
        if mode is PolicyMode.ALWAYS_CENTRAL:
            if central is None:
                raise NoComputeNode("no CentralPool node")
            return TaskAssignment(central.id)
        if mode is PolicyMode.HYBRID_THRESHOLD:
            if local is None or central is None:
                raise NoComputeNode("hybrid policy needs both tiers")
            depth = self.station_of(local.id).queue_depth()
            return TaskAssignment(local.id if depth <= self.policy.q_star else central.id)
        if mode is PolicyMode.DEADLINE_AWARE:
            if task.deadline_ns is None:
                raise ValueError("DeadlineAware placement needs a task deadline")
            if local is None and central is None:
                raise NoComputeNode("no compute nodes")
            now = self.sim.clock_ns
            if local is not None:
                done = self.station_of(local.id).predict_completion_ns(
                    now, task, pending=self._pending(local.id, now)
                )
                if done <= task.deadline_ns:
                    return TaskAssignment(local.id)
            if central is not None:
                fronthaul_ns = s_to_ns(self.fronthaul_delay_s(task.src_node, central.id))
                done = self.station_of(central.id).predict_completion_ns(
                    now,
                    task,
                    arrival_ns=now + fronthaul_ns,
                    pending=self._pending(central.id, now),
                )
                if done + fronthaul_ns <= task.deadline_ns:
                    return TaskAssignment(central.id)
            return Rejection(RejectionReason.DEADLINE_INFEASIBLE)
        raise ValueError(f"unknown policy mode {mode}")

    def note_dispatch(self, node_id: str, arrival_ns: int, service_ns: int) -> None:
        """Record a task sent toward a station but not yet arrived, so
        deadline predictions see work that is still on the wire."""
        self._inflight.setdefault(node_id, []).append((arrival_ns, service_ns))

    def _pending(self, node_id: str, now_ns: int) -> tuple[tuple[int, int], ...]:
        entries = self._inflight.get(node_id)
        if not entries:
            return ()
        live = [e for e in entries if e[0] > now_ns]
        self._inflight[node_id] = live
        return tuple(live)

    # -- WNM: virtual link admission --------------------------------------------

    def wnm_provision_vlink(self, request: VlinkRequest) -> VirtualLink | Rejection:
        """Admit the request on the first candidate path meeting both the
        delay bound and the bandwidth residual; all-or-nothing."""
        src, dst = request.endpoints
        paths = k_candidate_paths(self.topo, src, dst, self.k_paths)
        delay_met = False
        for path in paths:
            delay, residual = path_metrics(self.topo, path)
            if delay > request.delay_s:
                continue
            delay_met = True
            if residual < request.bw_bps:
                continue
            vlink = self.pool.install_vlink(
                VirtualLink(
                    id=request.vlink_id,
                    owner_service=request.owner_service,
                    endpoints=request.endpoints,
                    bw_guarantee_bps=request.bw_bps,
                    delay_guarantee_s=request.delay_s,
                    mapped_path=list(path),
                    klass=request.klass,
                )
            )
            for nid in self._path_switches(path):
                self.issue(
                    Directive(
                        target=nid,
                        issued_at_s=self.sim.now_s,
                        action=DirectiveAction.INSTALL_RESERVATION,
                        parameters={"vlink": vlink.id, "scope_nodes": [src, dst]},
                    )
                )
            return vlink
        constraint = "bandwidth" if delay_met else "delay"
        return Rejection(RejectionReason.ADMISSION_DENIED, constraint)

    def _path_switches(self, path: list[str]) -> list[str]:
        from .topology import walk_nodes

        nodes = walk_nodes(self.topo, path)
        out = [n for n in nodes if isinstance(self.topo.nodes.get(n), SwitchNode)]
        return out or [nodes[0]]

    def release_vlink(self, vlink_id: str) -> None:
        vlink = self.pool.vlinks.get(vlink_id)
        if vlink is None:
            self.pool.release(vlink_id)  # raises the right error
            return
        switches = self._path_switches(vlink.mapped_path)
        self.pool.release(vlink_id)
        for nid in switches:
            self.issue(
                Directive(
                    target=nid,
                    issued_at_s=self.sim.now_s,
                    action=DirectiveAction.RELEASE_RESERVATION,
                    parameters={"vlink": vlink_id},
                )
            )

    # -- RIM: radio blocks and sleep ------------------------------------------------

    def rim_assign_blocks(
        self,
        owner_vbs: str,
        rie_id: str,
        cells: list[tuple[int, int]],
        tx_power_dbm: float,
    ) -> list[VirtualRadioBlock] | Conflict:
        """All-or-nothing block assignment; conflicts come back in-band."""
        rie = self.topo.rie(rie_id)
        clashes = self.pool.conflicting_blocks(rie_id, cells)
        if clashes:
            return Conflict(clashes)
        blocks = self.pool.assign_blocks(owner_vbs, rie_id, cells, tx_power_dbm)
        self.issue(
            Directive(
                target=rie_id,
                issued_at_s=self.sim.now_s,
                action=DirectiveAction.ASSIGN_BLOCKS,
                parameters={"owner": owner_vbs, "cells": list(cells)},
            )
        )
        return blocks

    def rim_set_sleep(self, rie_id: str, asleep: bool) -> list[str]:
        """Toggle RIE power state; sleeping reclaims its live blocks.

        Idempotent; waking does not restore previously reclaimed blocks.
        Returns the reclaimed block ids (empty when waking or no-op).
        """
        from .topology import PowerState

        rie = self.topo.rie(rie_id)
        target_state = PowerState.ASLEEP if asleep else PowerState.AWAKE
        if rie.power_state is target_state:
            return []
        reclaimed: list[str] = []
        if asleep:
            reclaimed = self.pool.release_blocks_on_rie(rie_id)
            rie.power_state = PowerState.ASLEEP
            watts = rie.power_sleep_w
            action = DirectiveAction.SLEEP
        else:
            rie.power_state = PowerState.AWAKE
            watts = rie.power_awake_w
            action = DirectiveAction.WAKE
        if self.on_power_change:
            self.on_power_change(rie_id, watts)
        self.issue(Directive(target=rie_id, issued_at_s=self.sim.now_s, action=action))
        return reclaimed

    # -- NCI ingestion and migration -------------------------------------------------

    def register_session(self, user: str, vlink_id: str, vm_id: str, serving_node: str) -> None:
        session = _Session(user=user, vlink_id=vlink_id, vm_id=vm_id, serving_node=serving_node)
        self.sessions[user] = session
        self._vlink_session[vlink_id] = session

    def _known_reporter(self, reporter: str) -> bool:
        return (
            reporter in self.topo.nodes
            or reporter in self.pool.vlinks
            or reporter in self.sessions
        )

    def ingest_nci(self, report: NciReport) -> list[Directive]:
        """Update WNM/LCM databases; a delay sample breaching a live vlink
        guarantee for K consecutive reports triggers a migration directive."""
        if not self._known_reporter(report.reporter):
            raise UnknownReporter(report.reporter)
        if report.kind is NciKind.QUEUE_DEPTH:
            self.queue_depth_db[report.reporter] = int(report.value)
            return []
        if report.kind is NciKind.RIE_POWER_STATE:
            self.rie_power_db[report.reporter] = str(report.value)
            return []
        if report.kind is NciKind.USER_POSITION:
            session = self.sessions.get(report.reporter)
            if session is not None:
                serving = self._serving_site(report.value)
                if serving is not None:
                    session.serving_node = serving
            return []
        # LinkDelaySample
        measured = float(report.value)
        self.link_delay_db[report.reporter] = measured
        vlink = self.pool.vlinks.get(report.reporter)
        if vlink is None:
            return []
        if measured <= vlink.delay_guarantee_s:
            self._violations[vlink.id] = 0
            return []
        count = self._violations.get(vlink.id, 0) + 1
        self._violations[vlink.id] = count
        if count < self.k_violations:
            return []
        return self._migration_directive(vlink, measured)

    def _serving_site(self, position) -> Optional[str]:
        from .topology import PowerState

        awake = [r for r in self.topo.ries() if r.power_state is PowerState.AWAKE]
        node = nearest_node(self.topo, tuple(position), awake)
        return node.id if node else None

    def _migration_directive(self, vlink: VirtualLink, measured: float) -> list[Directive]:
        session = self._vlink_session.get(vlink.id)
        if session is None:
            self.violation_log.append(f"{vlink.id}: breach {measured}s with no bound VM")
            return []
        vm = self.pool.vms.get(session.vm_id)
        if vm is None or vm.state is not VmState.RUNNING:
            return []  # mid-migration or gone; let it settle
        anchor = session.serving_node
        best: Optional[tuple[float, str]] = None
        for host in self.topo.compute_nodes():
            if host.id == vm.host:
                continue
            reserved = self.pool.host_reserved_wups.get(host.id, 0.0)
            if reserved + vm.demand_wups > host.capacity_wups:
                continue
            try:
                delay = self.fronthaul_delay_s(anchor, host.id)
            except NoPath:
                continue
            key = (delay, host.id)
            if best is None or key < best:
                best = key
        if best is None:
            self.violation_log.append(
                f"{vlink.id}: breach {measured}s, no feasible alternative host"
            )
            return []
        directive = Directive(
            target=best[1],
            issued_at_s=self.sim.now_s,
            action=DirectiveAction.MIGRATE_VM,
            parameters={"vm": vm.id, "from": vm.host, "scope_nodes": [vm.host, best[1]]},
        )
        self._violations[vlink.id] = 0
        self.issue(directive, lambda sim, v=vm.id, h=best[1]: self.migrate_vm(v, h))
        return [directive]

    def migrate_vm(self, vm_id: str, new_host: str) -> None:
        """Freeze the VM for the downtime window, then resume on new_host.

        Tasks addressed to the VM meanwhile are buffered; dependent vlinks
        are re-provisioned toward the new host once the VM is back up.
        """
        vm = self.pool.vms.get(vm_id)
        if vm is None:
            raise UnknownNode(f"vm {vm_id}")
        old_host = vm.host
        self.pool.vm_begin_migration(vm_id, new_host)  # CapacityExceeded/IllegalState
        self.migrations_started += 1
        self.migration_downtime_total_s += self.migration_downtime_s
        self._migration_buffers.setdefault(vm_id, [])
        done_at = self.sim.now_s + self.migration_downtime_s
        self.sim._schedule_ns(
            s_to_ns(done_at),
            EventKind.CONTROL_DIRECTIVE,
            (
                f"MigrationComplete vm={vm_id} host={new_host}",
                lambda sim: self._finish_migration(vm_id, old_host, new_host),
            ),
        )

    def _finish_migration(self, vm_id: str, old_host: str, new_host: str) -> None:
        self.pool.vm_complete_migration(vm_id)
        buffered = self._migration_buffers.pop(vm_id, [])
        station = self.stations.get(new_host)
        for task in buffered:
            if station is None:
                raise UnknownNode(f"no station on {new_host} for buffered tasks")
            self.sim.offer(station, task)
        for session in self.sessions.values():
            if session.vm_id != vm_id:
                continue
            self._reanchor_vlink(session, old_host, new_host)

    def _reanchor_vlink(self, session: _Session, old_host: str, new_host: str) -> None:
        vlink = self.pool.vlinks.get(session.vlink_id)
        if vlink is None:
            return
        a, b = vlink.endpoints
        endpoints = (a if a != old_host else new_host, b if b != old_host else new_host)
        request = VlinkRequest(
            vlink_id=f"{vlink.id}+m{self.migrations_started}",
            owner_service=vlink.owner_service,
            endpoints=endpoints,
            bw_bps=vlink.bw_guarantee_bps,
            delay_s=vlink.delay_guarantee_s,
            klass=vlink.klass,
        )
        self.release_vlink(vlink.id)
        result = self.wnm_provision_vlink(request)
        if isinstance(result, Rejection):
            self.violation_log.append(
                f"{vlink.id}: re-provision toward {new_host} denied ({result.detail})"
            )
            del self._vlink_session[session.vlink_id]
            return
        del self._vlink_session[session.vlink_id]
        session.vlink_id = result.id
        self._vlink_session[result.id] = session
