"""Real-time cloud gaming: session setup signaling, streaming at a fixed
frame rate, user mobility feeding network-context reports, and QoS-driven
migration of the game-engine VM.

Setup emits six messages in order (request, wireless negotiation,
conductor request, provisioning, user acknowledgment, link up); a
provisioning rejection aborts the session before the user is ever
acknowledged."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..conductor import Conflict, Rejection, VlinkRequest
from ..errors import CapacityExceeded
from ..kernel import Task, TaskClass
from ..virtual import VirtualMachine, VLinkClass
from .base import ScenarioContext


class GamingPhase(Enum):
    REQUESTED = "Requested"
    NEGOTIATING = "Negotiating"
    PROVISIONED = "Provisioned"
    STREAMING = "Streaming"
    MIGRATING = "Migrating"
    CLOSED = "Closed"


SETUP_MESSAGES = (
    "UserRequest",
    "WirelessNegotiation",
    "ConductorRequest",
    "ConductorProvision",
    "UserAck",
    "LinkUp",
)


@dataclass
class GamingSession:
    id: str
    user: str
    gm_vm_id: str
    engine_vm_id: Optional[str] = None
    wireless_block_ids: list[str] = field(default_factory=list)
    wired_vlink_id: Optional[str] = None
    phase: GamingPhase = GamingPhase.REQUESTED
    aborted: bool = False
    abort_reason: str = ""
    setup_log: list[str] = field(default_factory=list)


@dataclass
class GamingConfig:
    gm_host: str
    engine_host: str
    user_waypoints: list[tuple[float, float, float]]  # (at_s, x, y)
    gm_demand_wups: float = 10.0
    engine_demand_wups: float = 100.0
    render_demand_wu: float = 2.0
    input_demand_wu: float = 0.05
    fps: float = 60.0
    input_rate_per_s: float = 20.0
    wireless_delay_s: float = 1e-3
    wired_bw_bps: float = 50e6
    wired_delay_guarantee_s: float = 5e-3
    signaling_latency_s: float = 1e-3
    session_start_s: float = 1.0
    nci_period_s: float = 1.0
    user_cells: list[tuple[int, int]] = field(default_factory=lambda: [(9, 99)])
    user_tx_power_dbm: float = 20.0
    user_id: str = "user0"


def _position_at(waypoints: list[tuple[float, float, float]], t: float) -> tuple[float, float]:
    if t <= waypoints[0][0]:
        return waypoints[0][1], waypoints[0][2]
    for (t0, x0, y0), (t1, x1, y1) in zip(waypoints, waypoints[1:]):
        if t <= t1:
            frac = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
            return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
    return waypoints[-1][1], waypoints[-1][2]


def run_gaming(ctx: ScenarioContext, cfg: GamingConfig, duration_s: float) -> dict:
    sim = ctx.sim
    cond = ctx.conductor
    pool = ctx.pool
    sig = cfg.signaling_latency_s

    gm = VirtualMachine(
        id="vm-gm", owner_service="gaming", demand_wups=cfg.gm_demand_wups,
        host=cfg.gm_host, realtime=True,
    )
    pool.place_vm(gm)
    pool.vm_to_running(gm.id)
    session = GamingSession(id="session0", user=cfg.user_id, gm_vm_id=gm.id)
    frame_tasks: list[Task] = []
    input_tasks: list[Task] = []

    def user_pos(t: float) -> tuple[float, float]:
        return _position_at(cfg.user_waypoints, t)

    def serving_site(t: float) -> str:
        site = cond._serving_site(user_pos(t))
        if site is None:
            raise CapacityExceeded("no awake RIE to serve the user")
        return site

    def log_step(s, name: str) -> None:
        session.setup_log.append(name)

    def abort(reason: str) -> None:
        session.aborted = True
        session.abort_reason = reason
        session.phase = GamingPhase.CLOSED

    def step_user_request(s) -> None:
        log_step(s, "UserRequest")
        session.phase = GamingPhase.NEGOTIATING
        s.call_at(s.now_s + sig, "WirelessNegotiation", step_wireless)

    def step_wireless(s) -> None:
        log_step(s, "WirelessNegotiation")
        site = serving_site(s.now_s)
        res = cond.rim_assign_blocks("gaming", site, cfg.user_cells, cfg.user_tx_power_dbm)
        if isinstance(res, Conflict):
            abort(f"wireless blocks busy: {res.blocks}")
            return
        session.wireless_block_ids = [b.id for b in res]
        s.call_at(s.now_s + sig, "ConductorRequest", step_conductor_request)

    def step_conductor_request(s) -> None:
        log_step(s, "ConductorRequest")
        engine = VirtualMachine(
            id="vm-engine", owner_service="gaming", demand_wups=cfg.engine_demand_wups,
            host=cfg.engine_host, realtime=True,
        )
        try:
            pool.place_vm(engine)
        except CapacityExceeded as exc:
            abort(f"engine VM denied: {exc}")
            return
        site = serving_site(s.now_s)
        res = cond.wnm_provision_vlink(
            VlinkRequest(
                vlink_id="vl-game", owner_service="gaming",
                endpoints=(site, cfg.engine_host),
                bw_bps=cfg.wired_bw_bps, delay_s=cfg.wired_delay_guarantee_s,
                klass=VLinkClass.CLOUD,
            )
        )
        if isinstance(res, Rejection):
            pool.release(engine.id)
            abort(f"wired vlink denied: {res.detail}")
            return
        pool.vm_to_running(engine.id)
        session.engine_vm_id = engine.id
        session.wired_vlink_id = res.id
        cond.register_session(cfg.user_id, res.id, engine.id, site)
        s.call_at(s.now_s + sig, "ConductorProvision", step_provisioned)

    def step_provisioned(s) -> None:
        log_step(s, "ConductorProvision")
        session.phase = GamingPhase.PROVISIONED
        s.call_at(s.now_s + sig, "UserAck", step_user_ack)

    def step_user_ack(s) -> None:
        log_step(s, "UserAck")
        s.call_at(s.now_s + sig, "LinkUp", step_link_up)

    def step_link_up(s) -> None:
        log_step(s, "LinkUp")
        session.phase = GamingPhase.STREAMING
        s.call_at(s.now_s, "Streaming", lambda s2: None)
        schedule_frame(s, s.now_s + 1.0 / cfg.fps)
        schedule_input(s, s.now_s + 1.0 / cfg.input_rate_per_s)
        s.call_at(s.now_s + cfg.nci_period_s, "NciReport", nci_tick)

    def wired_delay_now() -> float:
        vm = pool.vms[session.engine_vm_id]
        binding = cond.sessions[cfg.user_id]
        return cond.fronthaul_delay_s(binding.serving_node, vm.host)

    def schedule_frame(s, at: float) -> None:
        if at < duration_s and not session.aborted:
            s.call_at(at, "FrameTick", frame_tick)

    def frame_tick(s) -> None:
        task = s.new_task(
            created_ns=s.clock_ns, demand_wu=cfg.render_demand_wu, klass=TaskClass.GAMING_FRAME,
        )
        task.on_done = frame_rendered
        frame_tasks.append(task)
        cond.submit_to_vm(session.engine_vm_id, task)
        schedule_frame(s, s.now_s + 1.0 / cfg.fps)

    def frame_rendered(s, task: Task) -> None:
        delay = wired_delay_now() + cfg.wireless_delay_s
        s.deliver(delay, "frame-delivery", task, lambda s2, t: s2.complete_task(t))

    def schedule_input(s, at: float) -> None:
        if at < duration_s and not session.aborted:
            s.call_at(at, "InputTick", input_tick)

    def input_tick(s) -> None:
        task = s.new_task(
            created_ns=s.clock_ns, demand_wu=cfg.input_demand_wu, klass=TaskClass.GAMING_INPUT,
        )
        task.on_done = lambda s2, t: s2.complete_task(t)
        input_tasks.append(task)
        cond.submit_to_vm(session.engine_vm_id, task)
        schedule_input(s, s.now_s + 1.0 / cfg.input_rate_per_s)

    def nci_tick(s) -> None:
        from ..conductor import NciKind, NciReport
        from ..virtual import VmState

        if session.aborted:
            return
        pos = user_pos(s.now_s)
        cond.ingest_nci(NciReport(cfg.user_id, s.now_s, NciKind.USER_POSITION, pos))
        vm = pool.vms[session.engine_vm_id]
        binding = cond.sessions[cfg.user_id]
        measured = cond.fronthaul_delay_s(binding.serving_node, vm.host)
        cond.ingest_nci(
            NciReport(binding.vlink_id, s.now_s, NciKind.LINK_DELAY_SAMPLE, measured)
        )
        session.wired_vlink_id = binding.vlink_id
        session.phase = (
            GamingPhase.MIGRATING if vm.state is VmState.MIGRATING else GamingPhase.STREAMING
        )
        if s.now_s + cfg.nci_period_s < duration_s:
            s.call_at(s.now_s + cfg.nci_period_s, "NciReport", nci_tick)

    sim.call_at(cfg.session_start_s, "UserRequest", step_user_request)
    sim.run_until(duration_s)
    sim.run_to_drain(limit_s=duration_s + 10.0)

    from ..metrics import sample_from_task, summarize

    frame_samples = [sample_from_task(t) for t in frame_tasks if t.finished_ns is not None]
    summary = {
        "scenario": "gaming",
        "aborted": session.aborted,
        "abort_reason": session.abort_reason,
        "setup_messages": list(session.setup_log),
        "frames_sent": len(frame_tasks),
        "frames_delivered": len(frame_samples),
        "frames_lost": sum(1 for t in frame_tasks if t.finished_ns is None and t.dropped_reason),
        "inputs_sent": len(input_tasks),
        "migrations": cond.migrations_started,
        "migration_downtime_s": cond.migration_downtime_total_s,
        "qos_violation_log": list(cond.violation_log),
    }
    if frame_samples:
        summary["frame_latency"] = summarize(frame_samples)
    return {"summary": summary, "session": session, "frame_tasks": frame_tasks}
