"""In-process ICMPv6 transport answering probes from a scenario.

Responses are generated synchronously at send time and queued for poll(), so
a scan over the simulator is fully deterministic: event order equals send
order and timestamps come from a virtual clock, making two identical runs
byte-identical. Hop limits are arithmetic, never guessed: a responder with
initial hop limit H at distance d emits H - d.

Reply rules per probed address:
  * aliased /56              -> echo reply from the probed address itself
  * assigned host, allow FW  -> echo reply from the host
  * assigned host, deny FW   -> dest-unreachable (admin prohibited) from CPE WAN
  * unassigned address       -> dest-unreachable (address unreachable) from CPE WAN
  * /56 with no CPE          -> silence
"""

from __future__ import annotations

import threading
import time
from collections import deque

from ..addrs import IID_MASK, PREFIX48_MASK, SUBNET_SHIFT
from ..probe import ICMP6_DEST_UNREACH, ICMP6_ECHO_REPLY, IcmpEvent
from .scenario import FIREWALL_ALLOW, Scenario

CODE_ADMIN_PROHIBITED = 1
CODE_ADDR_UNREACHABLE = 3

_TICK_US = 100  # virtual microseconds between consecutive sends
_HOP_US = 150  # virtual one-hop round-trip cost


class SimTransport:
    """Scenario-backed Transport implementation (see probe.Transport)."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.sent = 0
        self._events: deque[IcmpEvent] = deque()
        self._lock = threading.Lock()
        # Flatten the scenario into int-keyed lookups for the hot path.
        self._subnets: dict[int, dict[int, _SubnetView]] = {}
        for i, net in enumerate(scenario.nets):
            by_index: dict[int, _SubnetView] = {}
            for j, sub in enumerate(net.subnets):
                hosts = {
                    h.iid: (h.initial_hop_limit, sub.cpe.base_distance + h.extra_hops)
                    for h in sub.hosts
                }
                by_index[sub.index] = _SubnetView(
                    aliased=sub.aliased,
                    allow=sub.cpe.firewall == FIREWALL_ALLOW,
                    wan=scenario.wan_address(i, j),
                    cpe_hop_limit=sub.cpe.initial_hop_limit - sub.cpe.base_distance,
                    hosts=hosts,
                )
            self._subnets[net.prefix48] = by_index

    def send(self, dst: int, ident: int, seq: int, payload: bytes) -> None:
        self.sent += 1
        ts = self.sent * _TICK_US
        by_index = self._subnets.get(dst & PREFIX48_MASK)
        if by_index is None:
            return
        sub = by_index.get((dst >> SUBNET_SHIFT) & 0xFF)
        if sub is None:
            return
        if sub.aliased:
            ev = IcmpEvent(
                source=dst,
                icmp_type=ICMP6_ECHO_REPLY,
                icmp_code=0,
                hop_limit=sub.cpe_hop_limit,
                ident=ident,
                seq=seq,
                payload=payload,
                quoted_target=None,
                timestamp_us=ts + _HOP_US,
            )
        else:
            host = None
            if (dst >> 64) & 0xFF == 0:  # hosts live in the /56's first /64
                host = sub.hosts.get(dst & IID_MASK)
            if host is not None and sub.allow:
                initial, distance = host
                ev = IcmpEvent(
                    source=dst,
                    icmp_type=ICMP6_ECHO_REPLY,
                    icmp_code=0,
                    hop_limit=initial - distance,
                    ident=ident,
                    seq=seq,
                    payload=payload,
                    quoted_target=None,
                    timestamp_us=ts + distance * _HOP_US,
                )
            else:
                code = CODE_ADDR_UNREACHABLE if sub.allow else CODE_ADMIN_PROHIBITED
                ev = IcmpEvent(
                    source=sub.wan,
                    icmp_type=ICMP6_DEST_UNREACH,
                    icmp_code=code,
                    hop_limit=sub.cpe_hop_limit,
                    ident=ident,
                    seq=seq,
                    payload=payload,
                    quoted_target=dst,
                    timestamp_us=ts + _HOP_US,
                )
        with self._lock:
            self._events.append(ev)

    def poll(self, max_wait: float) -> list[IcmpEvent]:
        with self._lock:
            if self._events:
                out = list(self._events)
                self._events.clear()
                return out
        if max_wait > 0:
            time.sleep(min(max_wait, 0.01))
            with self._lock:
                out = list(self._events)
                self._events.clear()
                return out
        return []

    def drained(self) -> bool:
        with self._lock:
            return not self._events

    def inject(self, event: IcmpEvent) -> None:
        """Test hook: feed an arbitrary (possibly forged) inbound event."""
        with self._lock:
            self._events.append(event)


class _SubnetView:
    __slots__ = ("aliased", "allow", "wan", "cpe_hop_limit", "hosts")

    def __init__(self, aliased: bool, allow: bool, wan: int, cpe_hop_limit: int, hosts: dict):
        self.aliased = aliased
        self.allow = allow
        self.wan = wan
        self.cpe_hop_limit = cpe_hop_limit
        self.hosts = hosts
