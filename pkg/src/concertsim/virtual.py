"""Northbound virtual resources: VMs, virtual links, and virtual radio
blocks, each mapped onto physical resources with QoS guarantees.

The ResourcePool owns all reservation bookkeeping: compute work-units per
host, bandwidth per physical link, and the conflict-free live radio-block
set. All mutation happens on the single simulation thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import (
    CapacityExceeded,
    DoubleRelease,
    IllegalState,
    PowerExceeded,
    RieAsleep,
    UnknownResource,
)
from .topology import AXC_RATE_BPS_DEFAULT, PowerState, Topology, path_metrics, rie_conflict


class VmState(Enum):
    PROVISIONING = "Provisioning"
    RUNNING = "Running"
    MIGRATING = "Migrating"
    RELEASED = "Released"


_VM_TRANSITIONS = {
    VmState.PROVISIONING: {VmState.RUNNING, VmState.RELEASED},
    VmState.RUNNING: {VmState.MIGRATING, VmState.RELEASED},
    VmState.MIGRATING: {VmState.RUNNING},
    VmState.RELEASED: set(),
}


class VLinkClass(Enum):
    BASEBAND = "BasebandClass"
    CLOUD = "CloudClass"


# Sanity bounds one order of magnitude above the nominal delay level of
# each class; admission policy proper lives in the control plane.
VLINK_CLASS_DELAY_BOUND_S = {
    VLinkClass.BASEBAND: 1e-3,
    VLinkClass.CLOUD: 100e-3,
}

# Radio block grid per RIE frame (slots x frequency indices).
DEFAULT_GRID_SLOTS = 10
DEFAULT_GRID_FREQS = 100


@dataclass
class VirtualMachine:
    id: str
    owner_service: str
    demand_wups: float
    host: str
    realtime: bool = False
    state: VmState = VmState.PROVISIONING

    def transition(self, new_state: VmState) -> None:
        if new_state not in _VM_TRANSITIONS[self.state]:
            raise IllegalState(f"{self.id}: {self.state.value} -> {new_state.value}")
        self.state = new_state


@dataclass
class VirtualLink:
    id: str
    owner_service: str
    endpoints: tuple[str, str]
    bw_guarantee_bps: float
    delay_guarantee_s: float
    mapped_path: list[str]
    klass: VLinkClass = VLinkClass.CLOUD


@dataclass(frozen=True)
class VirtualRadioBlock:
    id: str
    owner_vbs: str
    rie: str
    block: tuple[int, int]  # (frame-slot index, frequency index)
    tx_power_dbm: float
    sinr_guarantee_db: float = 0.0


@dataclass
class QosViolation:
    resource_id: str
    observed: float
    guaranteed: float
    at_time_s: float
    consecutive_count: int = 1

    def __str__(self) -> str:
        return (
            f"QosViolation({self.resource_id}: observed {self.observed} vs "
            f"guaranteed {self.guaranteed} at t={self.at_time_s}s x{self.consecutive_count})"
        )


def fronthaul_demand(n_axc: int, axc_rate_bps: float = AXC_RATE_BPS_DEFAULT) -> float:
    """Bandwidth needed to carry n antenna-carrier streams."""
    if n_axc < 0:
        raise ValueError("n_axc must be non-negative")
    return n_axc * axc_rate_bps


def check_vlink_qos(
    vlink: VirtualLink,
    measured_delay_s: float,
    measured_bps: Optional[float] = None,
    offered_bps: Optional[float] = None,
) -> Optional[QosViolation]:
    """Boundary-inclusive QoS check; returns None when the link is Ok.

    Throughput below the guarantee only counts as a violation while the
    offered load is at or above the guarantee (a lightly loaded link is
    allowed to deliver less).
    """
    if measured_delay_s > vlink.delay_guarantee_s:
        return QosViolation(
            resource_id=vlink.id,
            observed=measured_delay_s,
            guaranteed=vlink.delay_guarantee_s,
            at_time_s=0.0,
        )
    if measured_bps is not None:
        offered = offered_bps if offered_bps is not None else vlink.bw_guarantee_bps
        if offered >= vlink.bw_guarantee_bps and measured_bps < vlink.bw_guarantee_bps:
            return QosViolation(
                resource_id=vlink.id,
                observed=measured_bps,
                guaranteed=vlink.bw_guarantee_bps,
                at_time_s=0.0,
            )
    return None


class ResourcePool:
    """Live virtual-resource inventory plus reservation accounting."""

    def __init__(
        self,
        topo: Topology,
        grid_slots: int = DEFAULT_GRID_SLOTS,
        grid_freqs: int = DEFAULT_GRID_FREQS,
    ):
        self.topo = topo
        self.grid_slots = grid_slots
        self.grid_freqs = grid_freqs
        self.vms: dict[str, VirtualMachine] = {}
        self.vlinks: dict[str, VirtualLink] = {}
        self.blocks: dict[str, VirtualRadioBlock] = {}
        self.host_reserved_wups: dict[str, float] = {}
        # (slot, freq) -> block ids live on that grid cell anywhere
        self._cell_index: dict[tuple[int, int], list[str]] = {}
        self._released_ids: set[str] = set()
        self._block_seq = 0
        self.transition_log: list[tuple[str, str, str]] = []

    # -- virtual machines -------------------------------------------------

    def place_vm(self, vm: VirtualMachine) -> VirtualMachine:
        host = self.topo.compute(vm.host)
        reserved = self.host_reserved_wups.get(host.id, 0.0)
        if reserved + vm.demand_wups > host.capacity_wups:
            raise CapacityExceeded(
                f"host {host.id}: {reserved} + {vm.demand_wups} > {host.capacity_wups}"
            )
        if vm.id in self.vms or vm.id in self._released_ids:
            raise ValueError(f"duplicate vm id {vm.id!r}")
        self.host_reserved_wups[host.id] = reserved + vm.demand_wups
        self.vms[vm.id] = vm
        self._log_transition(vm.id, None, vm.state)
        return vm

    def vm_to_running(self, vm_id: str) -> None:
        vm = self._live_vm(vm_id)
        old = vm.state
        vm.transition(VmState.RUNNING)
        self._log_transition(vm_id, old, vm.state)

    def vm_begin_migration(self, vm_id: str, new_host: str) -> None:
        """Move the reservation to the target host and freeze the VM.

        The target slot is claimed for the whole downtime so concurrent
        placements cannot over-commit it; the source slot frees at the
        same instant.
        """
        vm = self._live_vm(vm_id)
        if vm.state is not VmState.RUNNING:
            raise IllegalState(f"{vm_id} is {vm.state.value}, not Running")
        target = self.topo.compute(new_host)
        reserved = self.host_reserved_wups.get(target.id, 0.0)
        if reserved + vm.demand_wups > target.capacity_wups:
            raise CapacityExceeded(
                f"host {target.id}: {reserved} + {vm.demand_wups} > {target.capacity_wups}"
            )
        old_host = vm.host
        old_state = vm.state
        vm.transition(VmState.MIGRATING)
        self.host_reserved_wups[old_host] -= vm.demand_wups
        self.host_reserved_wups[target.id] = reserved + vm.demand_wups
        vm.host = target.id
        self._log_transition(vm_id, old_state, vm.state)

    def vm_complete_migration(self, vm_id: str) -> None:
        vm = self._live_vm(vm_id)
        old = vm.state
        vm.transition(VmState.RUNNING)
        self._log_transition(vm_id, old, vm.state)

    def _live_vm(self, vm_id: str) -> VirtualMachine:
        vm = self.vms.get(vm_id)
        if vm is None:
            if vm_id in self._released_ids:
                raise IllegalState(f"vm {vm_id} already released")
            raise UnknownResource(vm_id)
        return vm

    def _log_transition(self, vm_id: str, old, new) -> None:
        self.transition_log.append(
            (vm_id, old.value if old else "-", new.value if hasattr(new, "value") else str(new))
        )

    # -- virtual links ------------------------------------------------------

    def install_vlink(self, vlink: VirtualLink) -> VirtualLink:
        """Reserve bandwidth on every path link atomically."""
        if vlink.id in self.vlinks or vlink.id in self._released_ids:
            raise ValueError(f"duplicate vlink id {vlink.id!r}")
        bound = VLINK_CLASS_DELAY_BOUND_S[vlink.klass]
        if vlink.delay_guarantee_s > bound:
            raise ValueError(
                f"{vlink.klass.value} delay guarantee {vlink.delay_guarantee_s}s "
                f"above the {bound}s class bound"
            )
        delay, residual = path_metrics(self.topo, vlink.mapped_path)
        if delay > vlink.delay_guarantee_s:
            raise ValueError(f"path delay {delay}s breaks guarantee {vlink.delay_guarantee_s}s")
        if residual < vlink.bw_guarantee_bps:
            raise CapacityExceeded(
                f"path residual {residual} below guarantee {vlink.bw_guarantee_bps}"
            )
        for lid in vlink.mapped_path:
            self.topo.links[lid].reserved_bps += vlink.bw_guarantee_bps
        self.vlinks[vlink.id] = vlink
        return vlink

    # -- virtual radio blocks ------------------------------------------------

    def conflicting_blocks(self, rie: str, cells: list[tuple[int, int]]) -> list[tuple[int, int]]:
        """Grid cells of the request that clash with any live block on a
        conflicting RIE."""
        clashes = []
        for cell in cells:
            for bid in self._cell_index.get(cell, ()):
                other = self.blocks[bid]
                if rie_conflict(self.topo, other.rie, rie):
                    clashes.append(cell)
                    break
        return clashes

    def assign_blocks(
        self,
        owner_vbs: str,
        rie_id: str,
        cells: list[tuple[int, int]],
        tx_power_dbm: float,
        sinr_guarantee_db: float = 0.0,
    ) -> list[VirtualRadioBlock]:
        """All-or-nothing assignment of grid cells on one RIE.

        Raises on sleeping RIE / power violation; conflict handling is the
        caller's job via conflicting_blocks (the control plane returns
        conflicts in-band).
        """
        rie = self.topo.rie(rie_id)
        if rie.power_state is PowerState.ASLEEP:
            raise RieAsleep(rie_id)
        if tx_power_dbm > rie.max_tx_power_dbm:
            raise PowerExceeded(f"{tx_power_dbm} dBm > {rie.max_tx_power_dbm} dBm on {rie_id}")
        if len(set(cells)) != len(cells):
            raise ValueError("duplicate blocks in request")
        for slot, freq in cells:
            if not (0 <= slot < self.grid_slots and 0 <= freq < self.grid_freqs):
                raise ValueError(f"block ({slot},{freq}) outside the {self.grid_slots}x{self.grid_freqs} grid")
        clashes = self.conflicting_blocks(rie_id, cells)
        if clashes:
            raise ValueError(f"conflicting blocks {clashes}")
        out = []
        for cell in cells:
            bid = f"vrb{self._block_seq}"
            self._block_seq += 1
            block = VirtualRadioBlock(
                id=bid,
                owner_vbs=owner_vbs,
                rie=rie_id,
                block=cell,
                tx_power_dbm=tx_power_dbm,
                sinr_guarantee_db=sinr_guarantee_db,
            )
            self.blocks[bid] = block
            self._cell_index.setdefault(cell, []).append(bid)
            out.append(block)
        return out

    def blocks_on_rie(self, rie_id: str) -> list[VirtualRadioBlock]:
        return [b for b in self.blocks.values() if b.rie == rie_id]

    # -- release ---------------------------------------------------------------

    def release(self, resource_id: str) -> None:
        """Return the resource's reservations to the free pool atomically."""
        if resource_id in self._released_ids:
            raise DoubleRelease(resource_id)
        if resource_id in self.vms:
            vm = self.vms[resource_id]
            if VmState.RELEASED not in _VM_TRANSITIONS[vm.state]:
                raise IllegalState(f"cannot release {resource_id} while {vm.state.value}")
            del self.vms[resource_id]
            self.host_reserved_wups[vm.host] -= vm.demand_wups
            old = vm.state
            vm.state = VmState.RELEASED
            self._log_transition(resource_id, old, vm.state)
        elif resource_id in self.vlinks:
            vlink = self.vlinks.pop(resource_id)
            for lid in vlink.mapped_path:
                self.topo.links[lid].reserved_bps -= vlink.bw_guarantee_bps
        elif resource_id in self.blocks:
            self._drop_block(resource_id)
        else:
            raise UnknownResource(resource_id)
        self._released_ids.add(resource_id)

    def _drop_block(self, block_id: str) -> None:
        block = self.blocks.pop(block_id)
        cell_list = self._cell_index[block.block]
        cell_list.remove(block_id)
        if not cell_list:
            del self._cell_index[block.block]

    def release_blocks_on_rie(self, rie_id: str) -> list[str]:
        """Reclaim every live block on one RIE (sleep path); released ids
        are recorded so later explicit release raises DoubleRelease."""
        doomed = sorted(bid for bid, b in self.blocks.items() if b.rie == rie_id)
        for bid in doomed:
            self._drop_block(bid)
            self._released_ids.add(bid)
        return doomed

    # -- inventory -----------------------------------------------------------

    def inventory(self) -> dict:
        """Structured dump of all live resources for the run output."""
        return {
            "vms": [
                {
                    "id": vm.id,
                    "type": "vm",
                    "owner": vm.owner_service,
                    "host": vm.host,
                    "demand_wups": vm.demand_wups,
                    "state": vm.state.value,
                    "realtime": vm.realtime,
                }
                for vm in sorted(self.vms.values(), key=lambda v: v.id)
            ],
            "vlinks": [
                {
                    "id": vl.id,
                    "type": "vlink",
                    "owner": vl.owner_service,
                    "endpoints": list(vl.endpoints),
                    "path": list(vl.mapped_path),
                    "bw_guarantee_bps": vl.bw_guarantee_bps,
                    "delay_guarantee_s": vl.delay_guarantee_s,
                    "class": vl.klass.value,
                }
                for vl in sorted(self.vlinks.values(), key=lambda v: v.id)
            ],
            "radio_blocks": [
                {
                    "id": b.id,
                    "type": "radio_block",
                    "owner": b.owner_vbs,
                    "rie": b.rie,
                    "block": list(b.block),
                    "tx_power_dbm": b.tx_power_dbm,
                }
                for b in sorted(self.blocks.values(), key=lambda v: v.id)
            ],
        }

    # -- audits (used by conservation tests) -----------------------------------

    def audit(self) -> list[str]:
        """Recompute every reservation from the live sets; returns
        discrepancies (empty means consistent)."""
        problems = []
        per_host: dict[str, float] = {}
        for vm in self.vms.values():
            per_host[vm.host] = per_host.get(vm.host, 0.0) + vm.demand_wups
        for host, reserved in self.host_reserved_wups.items():
            if abs(reserved - per_host.get(host, 0.0)) > 1e-9:
                problems.append(f"host {host}: ledger {reserved} vs live {per_host.get(host, 0.0)}")
        for host, total in per_host.items():
            cap = self.topo.compute(host).capacity_wups
            if total > cap + 1e-9:
                problems.append(f"host {host} over-committed: {total} > {cap}")
        per_link: dict[str, float] = {}
        for vl in self.vlinks.values():
            for lid in vl.mapped_path:
                per_link[lid] = per_link.get(lid, 0.0) + vl.bw_guarantee_bps
        for lid, link in self.topo.links.items():
            if abs(link.reserved_bps - per_link.get(lid, 0.0)) > 1e-9:
                problems.append(
                    f"link {lid}: ledger {link.reserved_bps} vs live {per_link.get(lid, 0.0)}"
                )
            if link.reserved_bps > link.capacity_bps + 1e-9:
                problems.append(f"link {lid} over-reserved")
        live = sorted(self.blocks.values(), key=lambda b: b.id)
        for i, a in enumerate(live):
            for b in live[i + 1 :]:
                if a.block == b.block and rie_conflict(self.topo, a.rie, b.rie):
                    problems.append(f"blocks {a.id}/{b.id} conflict on {a.block}")
        return problems
