import pytest

from concertsim.topology import (
    ComputeNode,
    ComputeTier,
    PhysLink,
    RieNode,
    SwitchLayer,
    SwitchNode,
    Topology,
)


def chain_topology() -> Topology:
    """RIE -- switch -- compute, two links, all capacities positive."""
    topo = Topology(reuse_distance_m=300.0)
    topo.add_node(RieNode(id="rie0", position=(0.0, 0.0)))
    topo.add_node(SwitchNode(id="sw0", layer=SwitchLayer.L2L3_PACKET, per_hop_delay_s=5e-6))
    topo.add_node(
        ComputeNode(id="c0", tier=ComputeTier.LOCAL, capacity_wups=1000.0, position=(10.0, 0.0))
    )
    topo.add_link(PhysLink(id="l0", endpoints=("rie0", "sw0"), capacity_bps=10e9, prop_delay_s=50e-6))
    topo.add_link(PhysLink(id="l1", endpoints=("sw0", "c0"), capacity_bps=10e9, prop_delay_s=100e-6))
    return topo


def diamond_topology() -> Topology:
    """Two disjoint routes a->d: fast (1+1 us) via b, slow (2+2 us) via c."""
    topo = Topology()
    for nid in ("a", "b", "c", "d"):
        topo.add_node(SwitchNode(id=nid, layer=SwitchLayer.L0_OPTICAL, per_hop_delay_s=0.0))
    topo.add_link(PhysLink(id="ab", endpoints=("a", "b"), capacity_bps=1e9, prop_delay_s=1e-6))
    topo.add_link(PhysLink(id="bd", endpoints=("b", "d"), capacity_bps=1e9, prop_delay_s=1e-6))
    topo.add_link(PhysLink(id="ac", endpoints=("a", "c"), capacity_bps=1e9, prop_delay_s=2e-6))
    topo.add_link(PhysLink(id="cd", endpoints=("c", "d"), capacity_bps=1e9, prop_delay_s=2e-6))
    return topo


@pytest.fixture
def chain():
    return chain_topology()


@pytest.fixture
def diamond():
    return diamond_topology()
