"""Physical data-plane model: nodes, capacitated links, and path queries.

The topology is immutable after load except for per-link bandwidth
reservation counters, which are mutated only by the control plane inside
the single simulation thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import BrokenPath, NoPath, UnknownNode


class PowerState(Enum):
    AWAKE = "Awake"
    ASLEEP = "Asleep"


class SwitchLayer(Enum):
    L0_OPTICAL = "L0_Optical"
    L2L3_PACKET = "L2L3_Packet"


class ComputeTier(Enum):
    LOCAL = "Local"
    REGIONAL = "Regional"
    CENTRAL_POOL = "CentralPool"


# Default per-hop switching delays by layer class; config values, not
# derived from any measured system.
DEFAULT_HOP_DELAY_S = {
    SwitchLayer.L0_OPTICAL: 1e-6,
    SwitchLayer.L2L3_PACKET: 20e-6,
}

AXC_RATE_BPS_DEFAULT = 1.2e9  # one 20 MHz antenna-carrier stream


@dataclass
class RieNode:
    """Radio interfacing equipment at a fixed site."""

    id: str
    position: tuple[float, float]
    radio_blocks: int = 1000
    max_tx_power_dbm: float = 46.0
    power_state: PowerState = PowerState.AWAKE
    power_awake_w: float = 100.0
    power_sleep_w: float = 10.0
    axc_rate_bps: float = AXC_RATE_BPS_DEFAULT


@dataclass
class SwitchNode:
    id: str
    layer: SwitchLayer
    per_hop_delay_s: Optional[float] = None
    switching_capacity_bps: float = 100e9

    def __post_init__(self) -> None:
        if self.per_hop_delay_s is None:
            self.per_hop_delay_s = DEFAULT_HOP_DELAY_S[self.layer]


@dataclass
class ComputeNode:
    """Compute site; capacity_wups is the total across all servers."""

    id: str
    tier: ComputeTier
    capacity_wups: float
    servers: int = 1
    position: tuple[float, float] = (0.0, 0.0)
    power_static_w: float = 50.0
    power_per_util_w: float = 100.0
    accel_factor: float = 1.0

    @property
    def rate_per_server_wups(self) -> float:
        return self.capacity_wups / self.servers


@dataclass
class PhysLink:
    id: str
    endpoints: tuple[str, str]
    capacity_bps: float
    prop_delay_s: float = 0.0
    reserved_bps: float = 0.0

    @property
    def residual_bps(self) -> float:
        return self.capacity_bps - self.reserved_bps


Node = RieNode | SwitchNode | ComputeNode


@dataclass
class Finding:
    """One validation problem; findings are data, not exceptions."""

    code: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.code}({self.subject}){': ' + self.detail if self.detail else ''}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.findings

    def add(self, code: str, subject: str, detail: str = "") -> None:
        self.findings.append(Finding(code, subject, detail))


class Topology:
    """Container for all physical nodes and links, keyed by id."""

    def __init__(self, reuse_distance_m: float = 0.0):
        self.nodes: dict[str, Node] = {}
        self.links: dict[str, PhysLink] = {}
        self.reuse_distance_m = reuse_distance_m
        # link ids incident to each node, in insertion order
        self._incident: dict[str, list[str]] = {}

    def add_node(self, node: Node) -> Node:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        self._incident.setdefault(node.id, [])
        return node

    def add_link(self, link: PhysLink) -> PhysLink:
        if link.id in self.links or link.id in self.nodes:
            raise ValueError(f"duplicate id {link.id!r}")
        self.links[link.id] = link
        for end in link.endpoints:
            self._incident.setdefault(end, []).append(link.id)
        return link

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def rie(self, node_id: str) -> RieNode:
        n = self.node(node_id)
        if not isinstance(n, RieNode):
            raise UnknownNode(f"{node_id} is not an RIE")
        return n

    def compute(self, node_id: str) -> ComputeNode:
        n = self.node(node_id)
        if not isinstance(n, ComputeNode):
            raise UnknownNode(f"{node_id} is not a compute node")
        return n

    def ries(self) -> list[RieNode]:
        return [n for n in self.nodes.values() if isinstance(n, RieNode)]

    def compute_nodes(self, tier: Optional[ComputeTier] = None) -> list[ComputeNode]:
        out = [n for n in self.nodes.values() if isinstance(n, ComputeNode)]
        if tier is not None:
            out = [n for n in out if n.tier is tier]
        return out

    def incident_links(self, node_id: str) -> list[str]:
        return self._incident.get(node_id, [])


def _distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def validate_topology(topo: Topology) -> ValidationReport:
    """Check all per-type invariants plus connectivity of the linked subgraph.

    An empty topology is valid; isolated nodes are allowed.
    """
    report = ValidationReport()
    if topo.reuse_distance_m < 0:
        report.add("NegativeReuseDistance", "topology", f"{topo.reuse_distance_m}")
    for node in topo.nodes.values():
        if isinstance(node, RieNode):
            if node.radio_blocks <= 0:
                report.add("NonPositiveRadioBlocks", node.id, str(node.radio_blocks))
            if node.power_sleep_w > node.power_awake_w:
                report.add(
                    "SleepPowerAboveAwake",
                    node.id,
                    f"{node.power_sleep_w} > {node.power_awake_w}",
                )
            if node.axc_rate_bps <= 0:
                report.add("NonPositiveAxcRate", node.id, str(node.axc_rate_bps))
        elif isinstance(node, SwitchNode):
            if node.per_hop_delay_s < 0:
                report.add("NegativeHopDelay", node.id, str(node.per_hop_delay_s))
            if node.switching_capacity_bps <= 0:
                report.add("NonPositiveSwitchCapacity", node.id)
        elif isinstance(node, ComputeNode):
            if node.capacity_wups <= 0:
                report.add("NonPositiveCapacity", node.id, str(node.capacity_wups))
            if node.servers < 1:
                report.add("NoServers", node.id, str(node.servers))
            if node.accel_factor < 1:
                report.add("AccelBelowOne", node.id, str(node.accel_factor))
    for link in topo.links.values():
        for end in link.endpoints:
            if end not in topo.nodes:
                report.add("MissingEndpoint", end, f"link {link.id}")
        if link.capacity_bps <= 0:
            report.add("NonPositiveLinkCapacity", link.id)
        if link.prop_delay_s < 0:
            report.add("NegativePropDelay", link.id)
        if not (0 <= link.reserved_bps <= link.capacity_bps):
            report.add(
                "ReservationOutOfRange",
                link.id,
                f"{link.reserved_bps} of {link.capacity_bps}",
            )
    _check_linked_connectivity(topo, report)
    return report


def _check_linked_connectivity(topo: Topology, report: ValidationReport) -> None:
    linked = {e for ln in topo.links.values() for e in ln.endpoints if e in topo.nodes}
    if len(linked) <= 1:
        return
    start = next(iter(sorted(linked)))
    seen = {start}
    frontier = [start]
    while frontier:
        nid = frontier.pop()
        for lid in topo.incident_links(nid):
            link = topo.links[lid]
            for other in link.endpoints:
                if other in linked and other not in seen:
                    seen.add(other)
                    frontier.append(other)
    for nid in sorted(linked - seen):
        report.add("Disconnected", nid)


def walk_nodes(topo: Topology, path: list[str]) -> list[str]:
    """Resolve an ordered link-id list into the node sequence it visits.

    Raises BrokenPath when the links do not chain. A single link yields its
    endpoints in declaration order.
    """
    if not path:
        return []
    links = []
    for lid in path:
        if lid not in topo.links:
            raise BrokenPath(f"unknown link {lid!r}")
        links.append(topo.links[lid])
    if len(links) == 1:
        return list(links[0].endpoints)
    # orient the first link so that it chains into the second
    a, b = links[0].endpoints
    nxt = set(links[1].endpoints)
    if b in nxt:
        nodes = [a, b]
    elif a in nxt:
        nodes = [b, a]
    else:
        raise BrokenPath(f"links {links[0].id!r} and {links[1].id!r} do not share a node")
    for prev, link in zip(links, links[1:]):
        cur = nodes[-1]
        a, b = link.endpoints
        if a == cur:
            nodes.append(b)
        elif b == cur:
            nodes.append(a)
        else:
            raise BrokenPath(f"link {link.id!r} does not continue from {cur!r}")
    return nodes


def path_metrics(topo: Topology, path: list[str]) -> tuple[float, float]:
    """Return (delay_s, min_residual_bps) for an ordered link-id walk.

    Delay sums propagation delays plus per-hop delays of interior switches;
    the empty path yields (0.0, +inf).
    """
    if not path:
        return 0.0, math.inf
    nodes = walk_nodes(topo, path)
    delay = sum(topo.links[lid].prop_delay_s for lid in path)
    for nid in nodes[1:-1]:
        node = topo.nodes.get(nid)
        if isinstance(node, SwitchNode):
            delay += node.per_hop_delay_s
    min_residual = min(topo.links[lid].residual_bps for lid in path)
    return delay, min_residual


def k_candidate_paths(topo: Topology, src: str, dst: str, k: int) -> list[list[str]]:
    """Up to k loop-free link-id paths from src to dst, sorted by delay.

    Ties break on the lexicographic link-id sequence. Enumerates simple
    paths by depth-first search, which is intended for scenario-scale
    topologies (tens of nodes).
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    topo.node(src)
    topo.node(dst)
    found: list[tuple[float, tuple[str, ...]]] = []

    def extend(nid: str, visited: set[str], walk: list[str]) -> None:
        for lid in sorted(topo.incident_links(nid)):
            link = topo.links[lid]
            a, b = link.endpoints
            other = b if a == nid else a
            if other in visited:
                continue
            walk.append(lid)
            if other == dst:
                delay, _ = path_metrics(topo, walk)
                found.append((delay, tuple(walk)))
            else:
                visited.add(other)
                extend(other, visited, walk)
                visited.discard(other)
            walk.pop()

    extend(src, {src}, [])
    if not found:
        raise NoPath(f"{src} -> {dst}")
    found.sort(key=lambda item: (item[0], item[1]))
    return [list(seq) for _, seq in found[:k]]


def rie_conflict(topo: Topology, rie_a: str, rie_b: str) -> bool:
    """True iff the two RIEs cannot reuse the same time-frequency block.

    A reuse-distance disc stands in for an interference model: the same
    RIE always conflicts with itself, distinct RIEs conflict when closer
    than reuse_distance_m.
    """
    a = topo.rie(rie_a)
    b = topo.rie(rie_b)
    if a.id == b.id:
        return True
    return _distance(a.position, b.position) < topo.reuse_distance_m


def nearest_node(
    topo: Topology, position: tuple[float, float], candidates: Iterable[Node]
) -> Optional[Node]:
    """Closest candidate to a position; ties break on lowest node id."""
    best = None
    best_key = None
    for node in candidates:
        pos = getattr(node, "position", None)
        if pos is None:
            continue
        key = (_distance(position, pos), node.id)
        if best_key is None or key < best_key:
            best, best_key = node, key
    return best
