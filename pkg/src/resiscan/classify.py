"""Turn raw probe responses into internal/external/aliased address sets.

An echo reply whose source is the probed low-IID target is a device inside
the customer network ("internal"). An ICMPv6 error from an address we never
probed is the gateway or another middlebox on the path ("external"). A /56
whose random alias probe comes back with an echo reply answers for its whole
address space and is excluded wholesale. Echo replies from a source other
than the probed target are anomalous: logged, flagged, and kept out of every
downstream count.

Hop-limit distance uses the three common initial values: a received hop
limit h infers an initial of 64 if h <= 64, 128 if 64 < h <= 128, and 255
above that; distance is initial minus received (e.g. h=118 -> 128 - 118 = 10
hops).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .addrs import IID_MASK, format_address, parse_address, prefix56_of
from .probe import KIND_ECHO_REPLY, ResponseRecord
from .targetgen import alias_target_for, probed_low_iid

LABEL_INTERNAL = "internal"
LABEL_EXTERNAL = "external"

_PLATEAUS = (64, 128, 255)


def infer_initial_hop_limit(received: int) -> int:
    """Initial hop limit implied by a received value (64/128/255 plateaus)."""
    if not 0 <= received <= 255:
        raise ValueError(f"hop limit out of range: {received}")
    if received <= 64:
        return 64
    if received <= 128:
        return 128
    return 255


def hop_distance(received: int) -> tuple[int, int]:
    """(inferred initial, path distance) for a received hop limit."""
    initial = infer_initial_hop_limit(received)
    return initial, initial - received


@dataclass(frozen=True, slots=True)
class ClassifiedAddress:
    net56: int
    address: int
    label: str
    initial_hop_limit: int
    distance: int

    @property
    def iid(self) -> int:
        return self.address & IID_MASK


@dataclass(frozen=True, slots=True)
class PairDelta:
    """Distance gap between one internal device and one external responder."""

    net56: int
    internal_address: int
    external_address: int
    internal_distance: int
    external_distance: int

    @property
    def delta(self) -> int:
        return self.internal_distance - self.external_distance


@dataclass(slots=True)
class ClassifyResult:
    classified: list[ClassifiedAddress] = field(default_factory=list)
    aliased_nets: set[int] = field(default_factory=set)
    missing_alias_nets: set[int] = field(default_factory=set)  # no alias outcome seen
    anomalous: list[ResponseRecord] = field(default_factory=list)

    def by_label(self, label: str) -> list[ClassifiedAddress]:
        return [c for c in self.classified if c.label == label]


def detect_aliased(records: Iterable[ResponseRecord]) -> bool:
    """True iff the net's alias probe answered with an echo reply from itself.

    ``records`` must already be restricted to one /56. Alias probes are
    recognizable by construction: their IID never falls in 1..10.
    """
    for rec in records:
        if probed_low_iid(rec.probed_target) is not None:
            continue
        if rec.kind == KIND_ECHO_REPLY and rec.source == rec.probed_target:
            return True
    return False


def classify_log(
    records: Iterable[ResponseRecord],
    *,
    seeds: Iterable[int] | None = None,
    rng_seed: int | None = None,
) -> ClassifyResult:
    """Partition a response log into per-/56 classified addresses.

    ``seeds`` and ``rng_seed`` reconstruct the full probed-target set so that
    an error source colliding with some probed address is caught; without
    them the probed set observed in the log is used. Each (net, address,
    label) appears at most once; aliased nets contribute nothing.
    """
    by_net: dict[int, list[ResponseRecord]] = {}
    for rec in records:
        by_net.setdefault(prefix56_of(rec.probed_target), []).append(rec)

    seed_set = set(seeds) if seeds is not None else None

    def was_probed(address: int) -> bool:
        # Low-IID probe shape under a probed seed, or the net's alias target.
        if seed_set is not None:
            if (address & ~((1 << 80) - 1)) in seed_set and probed_low_iid(address):
                return True
            if rng_seed is not None and (address & ~((1 << 80) - 1)) in seed_set:
                return address == alias_target_for(prefix56_of(address), rng_seed)
            return False
        return address in logged_targets

    logged_targets = {rec.probed_target for recs in by_net.values() for rec in recs}

    result = ClassifyResult()
    for net56, recs in sorted(by_net.items()):
        saw_alias_outcome = any(probed_low_iid(r.probed_target) is None for r in recs)
        if not saw_alias_outcome:
            result.missing_alias_nets.add(net56)
        elif detect_aliased(recs):
            result.aliased_nets.add(net56)
            continue
        seen: set[tuple[int, str]] = set()
        for rec in recs:
            if rec.kind == KIND_ECHO_REPLY:
                if rec.source != rec.probed_target:
                    result.anomalous.append(rec)
                    continue
                if probed_low_iid(rec.probed_target) is None:
                    continue  # alias echo without self-source handled above
                label = LABEL_INTERNAL
            elif rec.icmp_type < 128:  # any ICMPv6 error, dest-unreachable or not
                if was_probed(rec.source):
                    result.anomalous.append(rec)
                    continue
                label = LABEL_EXTERNAL
            else:
                continue  # informational ICMPv6 chatter carries no classification
            key = (rec.source if label == LABEL_EXTERNAL else rec.probed_target, label)
            if key in seen:
                continue
            seen.add(key)
            initial, distance = hop_distance(rec.hop_limit)
            result.classified.append(
                ClassifiedAddress(
                    net56=net56,
                    address=key[0],
                    label=label,
                    initial_hop_limit=initial,
                    distance=distance,
                )
            )
    return result


def pair_deltas(classified: Iterable[ClassifiedAddress]) -> list[PairDelta]:
    """Internal-vs-external distance deltas, one per pair within each /56."""
    nets: dict[int, tuple[list[ClassifiedAddress], list[ClassifiedAddress]]] = {}
    for c in classified:
        internal, external = nets.setdefault(c.net56, ([], []))
        (internal if c.label == LABEL_INTERNAL else external).append(c)
    out: list[PairDelta] = []
    for net56 in sorted(nets):
        internal, external = nets[net56]
        for i in internal:
            for e in external:
                out.append(
                    PairDelta(net56, i.address, e.address, i.distance, e.distance)
                )
    return out


# ---------------------------------------------------------------------------
# File form: one line per classified address,
#   prefix56,address,label,initial_hl,distance


def write_classification(classified: Iterable[ClassifiedAddress], fh) -> None:
    rows = sorted(classified, key=lambda c: (c.net56, c.label, c.address))
    for c in rows:
        fh.write(
            f"{format_address(c.net56)}/56,{format_address(c.address)},"
            f"{c.label},{c.initial_hop_limit},{c.distance}\n"
        )


def read_classification(fh) -> list[ClassifiedAddress]:
    out: list[ClassifiedAddress] = []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"classification line {lineno}: expected 5 fields")
        net, address, label, initial, distance = parts
        if label not in (LABEL_INTERNAL, LABEL_EXTERNAL):
            raise ValueError(f"classification line {lineno}: bad label {label!r}")
        net56 = parse_address(net.split("/", 1)[0])
        out.append(
            ClassifiedAddress(
                net56=net56,
                address=parse_address(address),
                label=label,
                initial_hop_limit=int(initial),
                distance=int(distance),
            )
        )
    return out
