"""Hyper-cellular air interface: a wide-coverage control base station
coordinating small-coverage data base stations, all running as VMs in the
central pool with radio blocks at designated RIE sites.

Sleeping a DBS reclaims its radio blocks, powers its RIE down when no
other vBS shares it, and re-schedules its users onto a neighbouring awake
DBS, or parks them on the always-on control layer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..conductor import Conflict
from ..errors import NotADbs
from ..kernel import s_to_ns
from ..virtual import VirtualLink, VirtualMachine, VLinkClass
from .base import ScenarioContext


class VbsKind(Enum):
    CBS = "CBS"
    DBS = "DBS"
    PLAIN = "Plain"


@dataclass
class VbsInstance:
    id: str
    kind: VbsKind
    vm_id: str
    rie: str
    cells: list[tuple[int, int]]
    block_ids: list[str] = field(default_factory=list)
    coverage_radius_m: float = 300.0
    tx_power_dbm: float = 30.0
    asleep: bool = False


CONTROL_LAYER = "control-layer"


@dataclass
class HcnState:
    ctx: ScenarioContext
    cbs: VbsInstance
    dbs: list[VbsInstance]
    vlink_ids: list[str]
    users: dict[str, tuple[float, float]]
    association: dict[str, str] = field(default_factory=dict)
    data_degraded: set[str] = field(default_factory=set)
    reassociations: int = 0

    def vbs_by_id(self, vbs_id: str) -> VbsInstance:
        if vbs_id == self.cbs.id:
            return self.cbs
        for d in self.dbs:
            if d.id == vbs_id:
                return d
        raise KeyError(vbs_id)


@dataclass
class HcnConfig:
    cbs_rie: str
    dbs_ries: list[str]
    cbs_host: str
    dbs_host: str
    cbs_power_dbm: float = 43.0
    dbs_power_dbm: float = 30.0
    cbs_coverage_m: float = 2000.0
    dbs_coverage_m: float = 300.0
    blocks_per_vbs: int = 4
    vm_demand_wups: float = 50.0
    vlink_bw_bps: float = 10e9
    vlink_delay_s: float = 1e-3
    users: list[tuple[float, float]] = field(default_factory=list)
    toggles: list[dict] = field(default_factory=list)  # {at_s, dbs, asleep}

    def __post_init__(self) -> None:
        if self.cbs_coverage_m < self.dbs_coverage_m:
            raise ValueError("CBS coverage must cover every DBS it coordinates")
        if self.cbs_power_dbm <= self.dbs_power_dbm:
            raise ValueError("coverage split needs CBS power above DBS power")


def _distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def build_hcn(ctx: ScenarioContext, cfg: HcnConfig) -> HcnState:
    """Instantiate the control/data split: one CBS VM plus one DBS VM per
    designated RIE, wired with intra-datacenter vlinks, and mutually
    orthogonal radio blocks with differentiated transmit power."""
    cond = ctx.conductor
    pool = ctx.pool
    vbs_list: list[VbsInstance] = []

    def provision_vbs(vbs_id, kind, rie, host, power, coverage, cell_base) -> VbsInstance:
        vm = VirtualMachine(
            id=f"vm-{vbs_id}", owner_service=vbs_id, demand_wups=cfg.vm_demand_wups,
            host=host, realtime=True,
        )
        pool.place_vm(vm)
        pool.vm_to_running(vm.id)
        cells = [(s, cell_base) for s in range(cfg.blocks_per_vbs)]
        res = cond.rim_assign_blocks(vbs_id, rie, cells, power)
        if isinstance(res, Conflict):
            raise ValueError(f"{vbs_id}: radio blocks conflict at {res.blocks}")
        return VbsInstance(
            id=vbs_id, kind=kind, vm_id=vm.id, rie=rie, cells=cells,
            block_ids=[b.id for b in res],
            coverage_radius_m=coverage, tx_power_dbm=power,
        )

    cbs = provision_vbs(
        "cbs0", VbsKind.CBS, cfg.cbs_rie, cfg.cbs_host, cfg.cbs_power_dbm, cfg.cbs_coverage_m, 0
    )
    vbs_list.append(cbs)
    for i, rie in enumerate(cfg.dbs_ries):
        vbs_list.append(
            provision_vbs(
                f"dbs{i}", VbsKind.DBS, rie, cfg.dbs_host, cfg.dbs_power_dbm,
                cfg.dbs_coverage_m, i + 1,
            )
        )
    vlink_ids = []
    for d in vbs_list[1:]:
        vlink_id = f"vl-{cbs.id}-{d.id}"
        if cfg.cbs_host == cfg.dbs_host:
            # co-located VMs: an intra-host link with no transport mapping
            pool.install_vlink(
                VirtualLink(
                    id=vlink_id, owner_service=cbs.id, endpoints=(cfg.cbs_host, cfg.dbs_host),
                    bw_guarantee_bps=cfg.vlink_bw_bps, delay_guarantee_s=cfg.vlink_delay_s,
                    mapped_path=[], klass=VLinkClass.CLOUD,
                )
            )
        else:
            from ..conductor import Rejection, VlinkRequest

            res = cond.wnm_provision_vlink(
                VlinkRequest(
                    vlink_id=vlink_id, owner_service=cbs.id,
                    endpoints=(cfg.cbs_host, cfg.dbs_host),
                    bw_bps=cfg.vlink_bw_bps, delay_s=cfg.vlink_delay_s,
                )
            )
            if isinstance(res, Rejection):
                raise ValueError(f"intra-datacenter vlink denied: {res.detail}")
        vlink_ids.append(vlink_id)
    users = {f"user{i}": tuple(pos) for i, pos in enumerate(cfg.users)}
    state = HcnState(ctx=ctx, cbs=cbs, dbs=vbs_list[1:], vlink_ids=vlink_ids, users=users)
    for user in users:
        _associate(state, user)
    return state


def _associate(state: HcnState, user: str) -> None:
    """Nearest awake in-range DBS, else the always-on control layer."""
    pos = state.users[user]
    best: Optional[tuple[float, str]] = None
    for d in state.dbs:
        if d.asleep:
            continue
        rie = state.ctx.topo.rie(d.rie)
        dist = _distance(pos, rie.position)
        if dist <= d.coverage_radius_m and (best is None or (dist, d.id) < best):
            best = (dist, d.id)
    previous = state.association.get(user)
    if best is not None:
        state.association[user] = best[1]
        state.data_degraded.discard(user)
    else:
        state.association[user] = CONTROL_LAYER
        state.data_degraded.add(user)
    if previous is not None and previous != state.association[user]:
        state.reassociations += 1


def hcn_toggle_dbs(state: HcnState, dbs_id: str, asleep: bool) -> None:
    """Sleep or wake one data base station.

    The control base station refuses the toggle: the control layer is
    always on.
    """
    vbs = state.vbs_by_id(dbs_id)
    if vbs.kind is not VbsKind.DBS:
        raise NotADbs(dbs_id)
    if vbs.asleep == asleep:
        return
    cond = state.ctx.conductor
    pool = state.ctx.pool
    if asleep:
        for bid in vbs.block_ids:
            pool.release(bid)
        vbs.block_ids = []
        vbs.asleep = True
        rie_shared = any(
            other.rie == vbs.rie and not other.asleep
            for other in [state.cbs, *state.dbs]
            if other.id != vbs.id
        )
        if not rie_shared:
            cond.rim_set_sleep(vbs.rie, True)
    else:
        cond.rim_set_sleep(vbs.rie, False)
        vbs.asleep = False
        res = cond.rim_assign_blocks(vbs.id, vbs.rie, vbs.cells, vbs.tx_power_dbm)
        if isinstance(res, Conflict):
            raise ValueError(f"wake of {dbs_id} found occupied cells {res.blocks}")
        vbs.block_ids = [b.id for b in res]
    for user in state.users:
        _associate(state, user)


def run_hcn(ctx: ScenarioContext, cfg: HcnConfig, duration_s: float) -> dict:
    """Build the split, apply the configured sleep/wake toggles, and report
    energy plus association outcomes."""
    state = build_hcn(ctx, cfg)
    sim = ctx.sim
    for toggle in cfg.toggles:
        at = float(toggle["at_s"])
        dbs = str(toggle["dbs"])
        asleep = bool(toggle["asleep"])
        label = f"hcn-{'sleep' if asleep else 'wake'} {dbs}"
        sim.call_at(at, label, lambda s, d=dbs, a=asleep: hcn_toggle_dbs(state, d, a))
    sim.run_until(duration_s)
    end_ns = s_to_ns(duration_s)
    conflicts = ctx.pool.audit()
    summary = {
        "scenario": "hcn",
        "energy_j": ctx.ledger.per_node_j(end_ns),
        "energy_total_j": ctx.ledger.total_j(end_ns),
        "associations": dict(sorted(state.association.items())),
        "users_on_control_layer_only": sorted(state.data_degraded),
        "unassociated_users": [u for u in state.users if u not in state.association],
        "reassociations": state.reassociations,
        "live_radio_blocks": len(ctx.pool.blocks),
        "audit_problems": conflicts,
    }
    return {"summary": summary, "state": state}
