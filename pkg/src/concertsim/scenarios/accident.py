"""Vehicle accident reporting over a highway deployment.

Pipeline: the involved vehicle repeats its uplink report until decoded
successfully; decoding runs on compute local to the serving vBS (or is
forced across the fronthaul to the central pool for comparison); a
successful decode triggers an immediate local downlink broadcast, a
forwarded record to every far vBS (whose downlink processing runs on the
central pool), and a copy to the emergency center."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..conductor import Rejection, VlinkRequest
from ..errors import ConfigError
from ..kernel import Task, TaskClass
from ..topology import path_metrics
from .base import ScenarioContext


@dataclass
class AccidentEvent:
    at_time_s: float
    position: tuple[float, float]
    reporting_vehicle: str
    decode_deadline_s: float
    warned_at_s: dict[str, float] = field(default_factory=dict)
    remote_informed_at_s: dict[str, float] = field(default_factory=dict)


@dataclass
class AccidentConfig:
    vbs1_rie: str
    vbs1_compute: str
    central: str
    emergency: str
    far_ries: list[str] = field(default_factory=list)
    decode_placement: str = "local"  # local | central
    uplink_s: float = 0.2e-3
    decode_demand_wu: float = 0.3
    far_downlink_demand_wu: float = 0.1
    downlink_s: float = 0.2e-3
    report_interval_s: float = 0.5e-3
    decode_success_prob: float = 1.0
    max_attempts: int = 50
    warn_budget_s: float = 1e-3
    accident_at_s: float = 0.001
    accident_position: tuple[float, float] = (0.0, 0.0)
    nearby_vehicles: list[str] = field(default_factory=lambda: ["veh1", "veh2"])
    forward_bw_bps: float = 100e6
    forward_delay_guarantee_s: float = 50e-3

    def __post_init__(self) -> None:
        if self.decode_placement not in ("local", "central"):
            raise ConfigError(f"decode_placement must be local|central, got {self.decode_placement!r}")
        if not (0.0 <= self.decode_success_prob <= 1.0):
            raise ConfigError("decode_success_prob must be within [0, 1]")


def run_accident(ctx: ScenarioContext, cfg: AccidentConfig, duration_s: float) -> dict:
    sim = ctx.sim
    cond = ctx.conductor
    rng = sim.rng.substream("decode")
    decode_node = cfg.vbs1_compute if cfg.decode_placement == "local" else cfg.central
    decode_station = ctx.stations[decode_node]
    central_station = ctx.stations[cfg.central]
    fronthaul_s = (
        cond.fronthaul_delay_s(cfg.vbs1_rie, cfg.central) if cfg.decode_placement == "central" else 0.0
    )

    # one forwarding vlink per far vBS, provisioned up front
    forward_delay: dict[str, float] = {}
    for i, rie in enumerate(cfg.far_ries):
        res = cond.wnm_provision_vlink(
            VlinkRequest(
                vlink_id=f"vl-fwd{i}", owner_service="accident-report",
                endpoints=(cfg.vbs1_rie, rie),
                bw_bps=cfg.forward_bw_bps, delay_s=cfg.forward_delay_guarantee_s,
            )
        )
        if isinstance(res, Rejection):
            raise ConfigError(f"forward vlink to {rie} denied: {res.detail}")
        forward_delay[rie] = path_metrics(ctx.topo, res.mapped_path)[0]
    vbs1_to_central_s = cond.fronthaul_delay_s(cfg.vbs1_rie, cfg.central)
    emergency_path_s = cond.fronthaul_delay_s(cfg.vbs1_rie, cfg.emergency)

    event = AccidentEvent(
        at_time_s=cfg.accident_at_s,
        position=cfg.accident_position,
        reporting_vehicle="veh0",
        decode_deadline_s=cfg.accident_at_s + cfg.warn_budget_s,
    )
    stats = {
        "attempts": 0,
        "decode_failures": 0,
        "decoded_at_s": None,
        "result_at_vbs1_s": None,
        "emergency_at_s": None,
    }

    def on_decode_end(s, task: Task) -> None:
        s.complete_task(task)
        if stats["decoded_at_s"] is not None:
            return  # a duplicate in-flight attempt landed after success
        if rng.random() >= cfg.decode_success_prob:
            stats["decode_failures"] += 1
            if stats["attempts"] < cfg.max_attempts:
                next_at = max(
                    s.now_s, cfg.accident_at_s + stats["attempts"] * cfg.report_interval_s
                )
                s.call_at(next_at, "AccidentUplink", send_report)
            return
        stats["decoded_at_s"] = s.now_s
        result_at = s.now_s + fronthaul_s  # result returns to the serving vBS
        stats["result_at_vbs1_s"] = result_at
        s.call_at(result_at + cfg.downlink_s, "AccidentBroadcast", broadcast)
        for rie in cfg.far_ries:
            s.call_at(
                result_at + vbs1_to_central_s,
                f"AccidentForward rie={rie}",
                lambda s2, r=rie: far_downlink(s2, r),
            )
        s.call_at(
            result_at + emergency_path_s,
            "AccidentEmergencyCopy",
            lambda s2: stats.__setitem__("emergency_at_s", s2.now_s),
        )

    def broadcast(s) -> None:
        for veh in cfg.nearby_vehicles:
            event.warned_at_s.setdefault(veh, s.now_s)

    def far_downlink(s, rie: str) -> None:
        # downlink frames for far cells are generated on the central pool
        task = s.new_task(
            created_ns=s.clock_ns, demand_wu=cfg.far_downlink_demand_wu,
            klass=TaskClass.BASEBAND, src_node=rie,
        )

        def done(s2, t, r=rie):
            s2.complete_task(t)
            central_to_far = cond.fronthaul_delay_s(cfg.central, r)
            s2.call_at(
                s2.now_s + central_to_far + cfg.downlink_s,
                f"AccidentFarInformed rie={r}",
                lambda s3: event.remote_informed_at_s.setdefault(r, s3.now_s),
            )

        task.on_done = done
        s.offer(central_station, task)

    def send_report(s) -> None:
        stats["attempts"] += 1
        task = s.new_task(
            created_ns=s.clock_ns, demand_wu=cfg.decode_demand_wu,
            klass=TaskClass.BASEBAND, src_node=cfg.vbs1_rie,
        )
        task.on_done = on_decode_end
        s.offer(decode_station, task, delay_s=cfg.uplink_s + fronthaul_s)

    sim.call_at(cfg.accident_at_s, "AccidentUplink", send_report)
    sim.run_until(duration_s)
    sim.run_to_drain(limit_s=duration_s + 10.0)

    warn_latency = None
    if event.warned_at_s:
        warn_latency = min(event.warned_at_s.values()) - cfg.accident_at_s
    summary = {
        "scenario": "accident",
        "attempts": stats["attempts"],
        "retries": max(stats["attempts"] - 1, 0),
        "decoded": stats["decoded_at_s"] is not None,
        "decode_placement": cfg.decode_placement,
        "warn_latency_s": warn_latency,
        "warn_budget_s": cfg.warn_budget_s,
        "budget_met": (warn_latency is not None and warn_latency <= cfg.warn_budget_s),
        "stage_latencies_s": {
            "uplink": cfg.uplink_s,
            "fronthaul_one_way": fronthaul_s,
            "decode": (
                None
                if stats["decoded_at_s"] is None
                else stats["decoded_at_s"]
                - (cfg.accident_at_s + (stats["attempts"] - 1) * cfg.report_interval_s + cfg.uplink_s + fronthaul_s)
            ),
            "downlink": cfg.downlink_s,
        },
        "warned_counts": {veh: 1 for veh in event.warned_at_s},
        "far_informed_at_s": dict(sorted(event.remote_informed_at_s.items())),
        "emergency_latency_s": (
            None if stats["emergency_at_s"] is None else stats["emergency_at_s"] - cfg.accident_at_s
        ),
    }
    return {"summary": summary, "event": event}
