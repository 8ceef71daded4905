"""Probe-target expansion and the streaming scan-plan permutation.

Every residential /48 expands to its 256 /56 customer delegations; each /56
receives eleven probes: the ten lowest interface IDs (::1 through ::a, where
DHCPv6 pools start) and one random high-IID address used as an alias check.
A plan over N seeds therefore has a fixed budget of N * 2816 probes.

Probe order is a pseudorandom permutation of the index space [0, budget),
walked with a multiplicative generator over Z_p* for the smallest prime
p > budget.  Successive powers of a primitive root visit every index exactly
once (indices >= budget are skipped), so the whole ordering needs three ints
of state - no shuffled target list is ever materialized, which is what lets
a multi-billion-probe plan run on a small box.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Iterator

from .addrs import IID_MASK, PREFIX56_MASK, SUBNET_SHIFT, format_address

SUBNETS_PER_48 = 256
LOW_IIDS_PER_56 = 10
TARGETS_PER_56 = LOW_IIDS_PER_56 + 1
TARGETS_PER_48 = SUBNETS_PER_48 * TARGETS_PER_56  # 2816
ALIAS_MIN_IID = 0x0B  # alias probes never collide with the ten low-IID targets

KIND_LOW_IID = "low_iid"
KIND_ALIAS = "alias_probe"

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


@dataclass(frozen=True, slots=True)
class ProbeTarget:
    address: int
    net56: int  # network address of the covering /56
    kind: str
    iid_n: int | None = None  # 1..10 for low_iid targets, None for alias probes

    @property
    def address_text(self) -> str:
        return format_address(self.address)

    @property
    def kind_text(self) -> str:
        return f"{KIND_LOW_IID}_{self.iid_n}" if self.kind == KIND_LOW_IID else KIND_ALIAS


def expand_48(prefix48: int) -> list[int]:
    """All 256 /56 network addresses under a /48, in index order."""
    return [prefix48 | (i << SUBNET_SHIFT) for i in range(SUBNETS_PER_48)]


def low_iid_targets(net56: int) -> list[ProbeTarget]:
    """The ten lowest addresses of the /56: net56::1 .. net56::a."""
    return [
        ProbeTarget(net56 | n, net56, KIND_LOW_IID, n) for n in range(1, LOW_IIDS_PER_56 + 1)
    ]


def alias_probe_target(net56: int, rng_seed: int) -> ProbeTarget:
    """The /56's single alias-check probe: a random address high in the IID space.

    Both the /64 selector byte and the IID are drawn from a keyed hash of the
    /56, so the same (rng_seed, net56) pair always yields the same address,
    independent of where the probe lands in the plan. The IID is uniform over
    [0x0b, 2^64), rejection-sampled so it can never shadow a low-IID target.
    """
    key = (rng_seed & ((1 << 64) - 1)).to_bytes(8, "big")
    net_bytes = net56.to_bytes(16, "big")
    counter = 0
    while True:
        digest = hashlib.blake2b(
            net_bytes + counter.to_bytes(2, "big"), key=key, digest_size=9
        ).digest()
        iid = int.from_bytes(digest[1:9], "big")
        if iid >= ALIAS_MIN_IID:
            selector = digest[0]
            address = net56 | (selector << 64) | iid
            return ProbeTarget(address, net56, KIND_ALIAS)
        counter += 1


def _is_probable_prime(n: int) -> bool:
    # Deterministic Miller-Rabin for anything below 3.3 * 10^24.
    if n < 2:
        return False
    for p in _MR_BASES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _next_prime(n: int) -> int:
    candidate = n + 1
    if candidate <= 2:
        return 2
    if candidate % 2 == 0:
        candidate += 1
    while not _is_probable_prime(candidate):
        candidate += 2
    return candidate


def _prime_factors(n: int) -> list[int]:
    factors = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            factors.append(d)
            while n % d == 0:
                n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        factors.append(n)
    return factors


def _find_generator(p: int, rng: random.Random) -> int:
    # g generates Z_p* iff g^((p-1)/q) != 1 for every prime factor q of p-1.
    group_order = p - 1
    checks = [group_order // q for q in _prime_factors(group_order)]
    while True:
        g = rng.randrange(2, p - 1)
        if all(pow(g, c, p) != 1 for c in checks):
            return g


class PlanError(ValueError):
    pass


class ScanPlan:
    """Lazy, seeded permutation of every probe target for a seed set.

    Iterating yields each of the ``budget`` targets exactly once in permuted
    order.  ``target_at`` maps a plan index to its target directly, and
    ``iter_steps`` walks a half-open sub-range of the generator cycle so the
    plan can be partitioned across senders without coordination.
    """

    def __init__(self, seeds: tuple[int, ...], rng_seed: int):
        if not seeds:
            raise PlanError("cannot plan a scan over zero seed prefixes")
        self.seeds = seeds
        self.rng_seed = rng_seed
        self.budget = len(seeds) * TARGETS_PER_48
        rng = random.Random(rng_seed)
        self._modulus = _next_prime(self.budget)
        self._generator = _find_generator(self._modulus, rng)
        self._start = rng.randrange(1, self._modulus)

    def __len__(self) -> int:
        return self.budget

    def target_at(self, index: int) -> ProbeTarget:
        """Decode plan index -> concrete probe target (no permutation applied)."""
        if not 0 <= index < self.budget:
            raise PlanError(f"index {index} outside budget {self.budget}")
        seed = self.seeds[index // TARGETS_PER_48]
        rest = index % TARGETS_PER_48
        net56 = seed | ((rest // TARGETS_PER_56) << SUBNET_SHIFT)
        slot = rest % TARGETS_PER_56
        if slot < LOW_IIDS_PER_56:
            n = slot + 1
            return ProbeTarget(net56 | n, net56, KIND_LOW_IID, n)
        return alias_probe_target(net56, self.rng_seed)

    @property
    def cycle_len(self) -> int:
        return self._modulus - 1

    def iter_steps(self, lo: int, hi: int) -> Iterator[ProbeTarget]:
        """Targets emitted during generator-cycle steps [lo, hi).

        Steps with a skipped index (>= budget) emit nothing; the full range
        [0, cycle_len) emits every target exactly once, so disjoint step
        ranges partition the plan.
        """
        if not 0 <= lo <= hi <= self.cycle_len:
            raise PlanError("step range outside the generator cycle")
        p, g = self._modulus, self._generator
        x = (self._start * pow(g, lo + 1, p)) % p
        for _ in range(hi - lo):
            if x <= self.budget:
                yield self.target_at(x - 1)
            x = (x * g) % p

    def __iter__(self) -> Iterator[ProbeTarget]:
        return self.iter_steps(0, self.cycle_len)

    def dump(self, fh) -> int:
        """Write the permuted order as ``address,kind,prefix56`` lines."""
        count = 0
        for t in self:
            fh.write(f"{t.address_text},{t.kind_text},{format_address(t.net56)}/56\n")
            count += 1
        return count


def build_plan(seeds, rng_seed: int) -> ScanPlan:
    """Build the scan plan for an ordered seed collection.

    ``seeds`` may be a SeedSet or any iterable of /48 network ints. Budget is
    always len(seeds) * 2816; nothing is materialized beyond the seed tuple.
    """
    prefixes = tuple(seeds.prefixes) if hasattr(seeds, "prefixes") else tuple(seeds)
    return ScanPlan(prefixes, rng_seed)


def probed_low_iid(address: int) -> int | None:
    """Return n if ``address`` has the shape of a low-IID probe target (::n)."""
    if address & (0xFF << 64):  # selector byte must be zero
        return None
    iid = address & IID_MASK
    return iid if 1 <= iid <= LOW_IIDS_PER_56 else None


def is_alias_shaped(address: int) -> bool:
    """True if the address's IID sits in the alias-probe range."""
    return (address & IID_MASK) >= ALIAS_MIN_IID or bool(address & (0xFF << 64))


def alias_target_for(net56: int, rng_seed: int) -> int:
    return alias_probe_target(net56 & PREFIX56_MASK, rng_seed).address
