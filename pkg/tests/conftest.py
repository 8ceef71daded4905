"""Shared fixtures: hand-built simulated deployments with exact, known layouts.

Tests that need precise ground truth build scenarios host by host instead of
using the randomized generator, so every expected value in an assertion is
readable right next to the topology that produces it.
"""

from __future__ import annotations

import pytest

from resiscan.addrs import parse_address
from resiscan.simnet import Scenario
from resiscan.simnet.scenario import (
    FIREWALL_ALLOW,
    FIREWALL_DENY,
    IID_DHCP_LOW,
    IID_SLAAC_RANDOM,
    SimCpe,
    SimHost,
    SimNet,
    SimService,
    SimSubnet,
    WAN_RANDOM,
)


def make_host(iid, *, mode=IID_DHCP_LOW, extra=0, hop=64, services=None):
    return SimHost(
        iid_mode=mode,
        iid=iid,
        extra_hops=extra,
        initial_hop_limit=hop,
        services=list(services or []),
    )


def make_subnet(
    index,
    *,
    hosts=None,
    firewall=FIREWALL_ALLOW,
    aliased=False,
    base_distance=3,
    cpe_hop=255,
    wan_mode=WAN_RANDOM,
    wan_mac=None,
    wan_iid=None,
    cpe_services=None,
    stub_services=None,
):
    cpe = SimCpe(
        wan_mode=wan_mode,
        firewall=firewall,
        base_distance=base_distance,
        initial_hop_limit=cpe_hop,
        wan_mac=wan_mac,
        wan_iid=wan_iid,
        services=list(cpe_services or []),
    )
    return SimSubnet(
        index=index,
        cpe=cpe,
        aliased=aliased,
        hosts=list(hosts or []),
        stub_services=list(stub_services or []),
    )


def make_net(prefix48_text, subnets, *, asn=64500, as_name="Example Net", country="de", **kw):
    return SimNet(
        prefix48=parse_address(prefix48_text),
        asn=asn,
        as_name=as_name,
        country=country,
        subnets=list(subnets),
        **kw,
    )


def make_scenario(nets, rng_seed=11):
    s = Scenario(rng_seed=rng_seed, nets=list(nets))
    s.finalize()
    return s


@pytest.fixture
def tiny_scenario():
    """One /48, three /56s: allow with 2 hosts, deny with 1 host, aliased."""
    net = make_net(
        "2001:db8:10::",
        [
            make_subnet(
                0x05,
                hosts=[make_host(1, hop=64), make_host(2, extra=1, hop=128)],
                base_distance=4,
            ),
            make_subnet(0x11, hosts=[make_host(1)], firewall=FIREWALL_DENY, base_distance=6),
            make_subnet(0x20, aliased=True, stub_services=[SimService(23, "telnet", {})]),
        ],
    )
    return make_scenario([net])


__all__ = [
    "FIREWALL_ALLOW",
    "FIREWALL_DENY",
    "IID_DHCP_LOW",
    "IID_SLAAC_RANDOM",
    "SimService",
    "make_host",
    "make_net",
    "make_scenario",
    "make_subnet",
]
