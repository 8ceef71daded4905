"""Seed-prefix ingestion and residential filtering.

BGP-derived seed prefixes are normalized to /48 granularity, then kept only
when the announcing AS is categorized as an Internet Service Provider and the
prefix maps to a residential last-mile connection type (cable/DSL or dialup).
Both datasets are offline snapshot files; no network lookups happen here.
"""

from __future__ import annotations

import csv
import ipaddress
from dataclasses import dataclass, field

from .addrs import PREFIX48_MASK, LongestPrefixMap

RESIDENTIAL_CATEGORY = "internet service provider"
RESIDENTIAL_CONNECTIONS = frozenset({"cable_dsl", "dialup"})
CONNECTION_TYPES = frozenset({"cable_dsl", "dialup", "cellular", "corporate", "other"})

REASON_NO_AS = "no_as_mapping"
REASON_CATEGORY = "category"
REASON_NO_CONNECTION = "no_connection_mapping"
REASON_CONNECTION = "connection_type"


class SeedParseError(ValueError):
    """Malformed seed-list line; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, slots=True)
class AsCategoryRecord:
    asn: int
    primary_category: str
    country: str


@dataclass(frozen=True, slots=True)
class ResidentialDecision:
    residential: bool
    reason: str | None = None


@dataclass(slots=True)
class SeedSet:
    """Ordered, duplicate-free /48 seed prefixes plus provenance counters."""

    prefixes: tuple[int, ...]
    provenance: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.prefixes)

    def __iter__(self):
        return iter(self.prefixes)

    def __contains__(self, value: int) -> bool:
        return value in set(self.prefixes)


def parse_prefix_list(text: str) -> SeedSet:
    """Parse a one-CIDR-per-line seed list into /48 granularity.

    Blank lines and ``#`` comments are skipped. Prefixes longer than /48 are
    truncated to their covering /48 (counted in provenance); prefixes shorter
    than /48 are rejected with a counted reason rather than truncated, since
    widening a seed would invent address space we were never given. Anything
    unparsable raises SeedParseError with its line number. First occurrence
    wins; later duplicates are counted and dropped.
    """
    seen: set[int] = set()
    ordered: list[int] = []
    lines = 0
    duplicates = 0
    truncated = 0
    rejected_short = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lines += 1
        try:
            net = ipaddress.IPv6Network(line, strict=False)
        except ValueError as exc:
            raise SeedParseError(lineno, f"not an IPv6 prefix: {line!r} ({exc})") from None
        if net.prefixlen < 48:
            rejected_short += 1
            continue
        if net.prefixlen > 48:
            truncated += 1
        p48 = int(net.network_address) & PREFIX48_MASK
        if p48 in seen:
            duplicates += 1
            continue
        seen.add(p48)
        ordered.append(p48)
    return SeedSet(
        prefixes=tuple(ordered),
        provenance={
            "lines": lines,
            "prefixes": len(ordered),
            "duplicates": duplicates,
            "truncated": truncated,
            "rejected_short": rejected_short,
        },
    )


def load_as_map(path: str) -> LongestPrefixMap:
    """Load ``prefix,asn,category,country`` rows into an LPM table."""
    table = LongestPrefixMap()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 4:
                raise ValueError(f"as map row needs 4 fields, got {row!r}")
            prefix, asn, category, country = (f.strip() for f in row)
            table.insert(prefix, AsCategoryRecord(int(asn), category, country))
    return table


def load_connection_map(path: str) -> LongestPrefixMap:
    """Load ``prefix,connection_type`` rows into an LPM table."""
    table = LongestPrefixMap()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise ValueError(f"connection map row needs 2 fields, got {row!r}")
            prefix, conn = (f.strip() for f in row)
            conn = conn.casefold().replace("/", "_")
            if conn not in CONNECTION_TYPES:
                raise ValueError(f"unknown connection type {conn!r} for {prefix}")
            table.insert(prefix, conn)
    return table


def classify_residential(
    prefix48: int, as_map: LongestPrefixMap, conn_map: LongestPrefixMap
) -> ResidentialDecision:
    """Decide whether one /48 is residential, with a rejection reason if not.

    Pure lookup against the two snapshots: AS primary category must be
    "Internet Service Provider" (case-insensitive) and the longest matching
    connection-type entry must be cable_dsl or dialup.
    """
    rec = as_map.lookup(prefix48)
    if rec is None:
        return ResidentialDecision(False, REASON_NO_AS)
    assert isinstance(rec, AsCategoryRecord)
    if rec.primary_category.strip().casefold() != RESIDENTIAL_CATEGORY:
        return ResidentialDecision(False, REASON_CATEGORY)
    conn = conn_map.lookup(prefix48)
    if conn is None:
        return ResidentialDecision(False, REASON_NO_CONNECTION)
    if conn not in RESIDENTIAL_CONNECTIONS:
        return ResidentialDecision(False, REASON_CONNECTION)
    return ResidentialDecision(True)


def filter_seeds(
    seeds: SeedSet, as_map: LongestPrefixMap, conn_map: LongestPrefixMap
) -> SeedSet:
    """Apply the two-stage residential filter, preserving input order.

    The returned provenance records the count entering each stage and the
    survivors, mirroring how the filter narrows the seed population:
    ``input`` -> ``after_category`` -> ``after_connection``.
    """
    after_category: list[int] = []
    rejects = {REASON_NO_AS: 0, REASON_CATEGORY: 0, REASON_NO_CONNECTION: 0, REASON_CONNECTION: 0}
    for p48 in seeds.prefixes:
        rec = as_map.lookup(p48)
        if rec is None:
            rejects[REASON_NO_AS] += 1
            continue
        if rec.primary_category.strip().casefold() != RESIDENTIAL_CATEGORY:
            rejects[REASON_CATEGORY] += 1
            continue
        after_category.append(p48)
    survivors: list[int] = []
    for p48 in after_category:
        conn = conn_map.lookup(p48)
        if conn is None:
            rejects[REASON_NO_CONNECTION] += 1
            continue
        if conn not in RESIDENTIAL_CONNECTIONS:
            rejects[REASON_CONNECTION] += 1
            continue
        survivors.append(p48)
    provenance = {
        "input": len(seeds.prefixes),
        "after_category": len(after_category),
        "after_connection": len(survivors),
    }
    provenance.update({f"rejected_{k}": v for k, v in rejects.items()})
    return SeedSet(prefixes=tuple(survivors), provenance=provenance)
