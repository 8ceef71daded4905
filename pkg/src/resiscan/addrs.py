"""IPv6 address and prefix primitives shared across the pipeline.

Addresses travel through the hot paths as plain 128-bit ints; text form is
only produced at file boundaries and is always the lowercase canonical
(compressed) representation, so parse/format round-trips are exact.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

IID_MASK = (1 << 64) - 1
SELECTOR_SHIFT = 64  # /64 selector byte occupies bits 64..71 (from the low end)
SUBNET_SHIFT = 72  # /56 index byte occupies bits 72..79
PREFIX48_MASK = ((1 << 48) - 1) << 80
PREFIX56_MASK = ((1 << 56) - 1) << 72
PREFIX64_MASK = ((1 << 64) - 1) << 64


def parse_address(text: str) -> int:
    """Parse IPv6 text to its 128-bit integer value."""
    return int(ipaddress.IPv6Address(text.strip()))


def format_address(value: int) -> str:
    """Render the canonical lowercase compressed form."""
    return ipaddress.IPv6Address(value).compressed


def iid_of(value: int) -> int:
    return value & IID_MASK


@dataclass(frozen=True, slots=True)
class Prefix48:
    """A /48 network, stored as the 128-bit network address (low 80 bits zero)."""

    value: int

    def __post_init__(self) -> None:
        if self.value & ~PREFIX48_MASK:
            raise ValueError("prefix has bits set below /48")

    @classmethod
    def from_text(cls, text: str) -> "Prefix48":
        net = ipaddress.IPv6Network(text.strip())
        if net.prefixlen != 48:
            raise ValueError(f"expected a /48, got /{net.prefixlen}")
        return cls(int(net.network_address))

    @property
    def text(self) -> str:
        return f"{format_address(self.value)}/48"

    def child(self, index: int) -> "Prefix56":
        if not 0 <= index <= 255:
            raise ValueError("/56 index out of range")
        return Prefix56(self.value | (index << SUBNET_SHIFT))

    def covers(self, address: int) -> bool:
        return (address & PREFIX48_MASK) == self.value


@dataclass(frozen=True, slots=True)
class Prefix56:
    """A /56 network under some /48, stored as the 128-bit network address."""

    value: int

    def __post_init__(self) -> None:
        if self.value & ~PREFIX56_MASK:
            raise ValueError("prefix has bits set below /56")

    @classmethod
    def from_text(cls, text: str) -> "Prefix56":
        net = ipaddress.IPv6Network(text.strip())
        if net.prefixlen != 56:
            raise ValueError(f"expected a /56, got /{net.prefixlen}")
        return cls(int(net.network_address))

    @property
    def text(self) -> str:
        return f"{format_address(self.value)}/56"

    @property
    def parent(self) -> Prefix48:
        return Prefix48(self.value & PREFIX48_MASK)

    @property
    def index(self) -> int:
        """Position of this /56 among the parent's 256 children (byte 7 of the prefix)."""
        return (self.value >> SUBNET_SHIFT) & 0xFF

    def covers(self, address: int) -> bool:
        return (address & PREFIX56_MASK) == self.value


def prefix48_of(address: int) -> int:
    return address & PREFIX48_MASK


def prefix56_of(address: int) -> int:
    return address & PREFIX56_MASK


class LongestPrefixMap:
    """Longest-prefix-match lookup over IPv6 CIDR entries.

    Entries are bucketed by prefix length; a lookup masks the address at each
    populated length, longest first. Fine for offline datasets of the sizes
    we load (a bucket scan is at most 129 dict probes).
    """

    def __init__(self) -> None:
        self._by_len: dict[int, dict[int, object]] = {}
        self._lens_desc: list[int] = []
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, cidr: str, value: object) -> None:
        net = ipaddress.IPv6Network(cidr.strip())
        bucket = self._by_len.get(net.prefixlen)
        if bucket is None:
            bucket = self._by_len[net.prefixlen] = {}
            self._lens_desc = sorted(self._by_len, reverse=True)
        key = int(net.network_address)
        if key not in bucket:
            self._size += 1
        bucket[key] = value

    def lookup(self, address: int) -> object | None:
        for plen in self._lens_desc:
            if plen == 0:
                hit = self._by_len[0].get(0)
            else:
                mask = ((1 << plen) - 1) << (128 - plen)
                hit = self._by_len[plen].get(address & mask)
            if hit is not None:
                return hit
        return None
