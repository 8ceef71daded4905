"""Single-shot ICMPv6 echo probing with stateless response correlation.

The prober keeps no per-target state. Every echo request carries a keyed
token derived from the destination address and the campaign secret, split
across the ICMP identifier, sequence number, and payload; the payload also
embeds the destination itself. Any inbound packet that fails token
validation is counted as spurious and dropped, so off-path noise and
misdirected replies cannot enter the response log. ICMPv6 errors are
correlated through the quoted invoking packet instead of their source.

Transports are pluggable: the live transport uses raw ICMPv6 sockets, the
simulated transport answers from a scenario in-process. Both surface the
same event type.
"""

from __future__ import annotations

import hashlib
import logging
import queue
import socket
import struct
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

from .addrs import format_address, parse_address

log = logging.getLogger(__name__)

ICMP6_ECHO_REQUEST = 128
ICMP6_ECHO_REPLY = 129
ICMP6_DEST_UNREACH = 1

KIND_ECHO_REPLY = "echo_reply"
KIND_DEST_UNREACH = "dest_unreachable"
KIND_OTHER = "other"

OUTGOING_HOP_LIMIT = 255  # fixed so receivers see maximal distance headroom
TOKEN_LEN = 24  # 16-byte embedded target + 8-byte keyed MAC
DEFAULT_QUIESCENCE_S = 8.0


@dataclass(slots=True)
class IcmpEvent:
    """One inbound ICMPv6 packet, as surfaced by a transport."""

    source: int
    icmp_type: int
    icmp_code: int
    hop_limit: int
    ident: int
    seq: int
    payload: bytes
    quoted_target: int | None = None  # inner destination, errors only
    timestamp_us: int = 0


class Transport(Protocol):
    def send(self, dst: int, ident: int, seq: int, payload: bytes) -> None: ...

    def poll(self, max_wait: float) -> list[IcmpEvent]: ...


def encode_token(target: int, secret: bytes) -> tuple[int, int, bytes]:
    """Derive (identifier, sequence, payload) for a probe to ``target``.

    The MAC covers only the destination address, so validation needs no
    per-probe state; the address goes into the payload in the clear so that
    the probed target is recoverable even when a reply arrives from a
    different source.
    """
    target_bytes = target.to_bytes(16, "big")
    mac = hashlib.blake2b(target_bytes, key=secret, digest_size=12).digest()
    ident = int.from_bytes(mac[0:2], "big")
    seq = int.from_bytes(mac[2:4], "big")
    payload = target_bytes + mac[4:12]
    return ident, seq, payload


def validate_token(ident: int, seq: int, payload: bytes, secret: bytes) -> int | None:
    """Return the probed target if the token checks out, else None."""
    if len(payload) < TOKEN_LEN:
        return None
    target_bytes = payload[:16]
    mac = hashlib.blake2b(target_bytes, key=secret, digest_size=12).digest()
    if (
        ident != int.from_bytes(mac[0:2], "big")
        or seq != int.from_bytes(mac[2:4], "big")
        or payload[16:24] != mac[4:12]
    ):
        return None
    return int.from_bytes(target_bytes, "big")


class RateLimiter:
    """Absolute-schedule pacer: the i-th send happens no earlier than i/pps.

    Credit from slow periods is capped at ``burst`` sends so a stall can
    never be repaid with an unbounded packet burst; over any window of a
    second or more the realized rate stays within a burst of the target.
    """

    def __init__(self, pps: int, burst: int | None = None):
        if pps <= 0:
            raise ValueError("packets-per-second must be positive")
        self.pps = pps
        self.interval = 1.0 / pps
        self.burst = burst if burst is not None else max(1, pps // 100)
        self._next = None

    def wait(self) -> None:
        now = time.monotonic()
        if self._next is None:
            self._next = now
        if now < self._next:
            time.sleep(self._next - now)
            now = self._next
        floor = now - self.burst * self.interval
        if self._next < floor:
            self._next = floor
        self._next += self.interval


@dataclass(slots=True)
class ResponseRecord:
    probed_target: int
    source: int
    kind: str
    icmp_type: int
    icmp_code: int
    hop_limit: int
    timestamp_us: int


@dataclass(slots=True)
class ScanLog:
    """Append-only probe outcome log plus campaign counters."""

    records: list[ResponseRecord] = field(default_factory=list)
    sent: int = 0
    spurious: int = 0
    complete: bool = False
    send_duration_s: float = 0.0


def _record_from_event(ev: IcmpEvent, secret: bytes) -> ResponseRecord | None:
    target = validate_token(ev.ident, ev.seq, ev.payload, secret)
    if target is None:
        return None
    if ev.icmp_type == ICMP6_ECHO_REPLY:
        kind = KIND_ECHO_REPLY
    elif ev.icmp_type == ICMP6_DEST_UNREACH:
        kind = KIND_DEST_UNREACH
        # Errors must quote the probe we actually sent.
        if ev.quoted_target is not None and ev.quoted_target != target:
            return None
    else:
        kind = KIND_OTHER
        if ev.quoted_target is not None and ev.quoted_target != target:
            return None
    return ResponseRecord(
        probed_target=target,
        source=ev.source,
        kind=kind,
        icmp_type=ev.icmp_type,
        icmp_code=ev.icmp_code,
        hop_limit=ev.hop_limit,
        timestamp_us=ev.timestamp_us,
    )


def run_scan(
    plan: Iterable,
    transport: Transport,
    secret: bytes,
    *,
    rate: RateLimiter | None = None,
    quiescence_s: float = DEFAULT_QUIESCENCE_S,
    progress: Callable[[int], None] | None = None,
) -> ScanLog:
    """Send every plan target exactly once and collect validated responses.

    Probes are single-shot (no retransmission); after the send phase the
    receiver drains the transport until no event has arrived for
    ``quiescence_s``. A transport send failure aborts the campaign and the
    partial log comes back with ``complete=False``.
    """
    scan = ScanLog()
    events: queue.Queue[IcmpEvent | None] = queue.Queue()
    stop = threading.Event()
    last_event = [time.monotonic()]

    def receiver() -> None:
        while not stop.is_set():
            batch = transport.poll(0.05)
            if batch:
                last_event[0] = time.monotonic()
                for ev in batch:
                    events.put(ev)
        for ev in transport.poll(0.0):
            events.put(ev)
        events.put(None)

    rx = threading.Thread(target=receiver, name="probe-rx", daemon=True)
    rx.start()

    send_error: Exception | None = None
    t0 = time.monotonic()
    try:
        for target in plan:
            if rate is not None:
                rate.wait()
            ident, seq, payload = encode_token(target.address, secret)
            transport.send(target.address, ident, seq, payload)
            scan.sent += 1
            if progress is not None and scan.sent % 100_000 == 0:
                progress(scan.sent)
    except Exception as exc:  # noqa: BLE001 - any transport failure aborts
        send_error = exc
        log.error("transport failure after %d sends: %s", scan.sent, exc)
    scan.send_duration_s = time.monotonic() - t0

    if send_error is None:
        # Quiesce: wait until the transport has been silent long enough.
        send_end = time.monotonic()
        drained = getattr(transport, "drained", None)
        while True:
            if drained is not None and drained() and events.empty():
                break
            if time.monotonic() >= max(last_event[0], send_end) + quiescence_s:
                break
            time.sleep(0.01)
    stop.set()
    rx.join()

    while True:
        ev = events.get()
        if ev is None:
            break
        rec = _record_from_event(ev, secret)
        if rec is None:
            scan.spurious += 1
        else:
            scan.records.append(rec)
    scan.complete = send_error is None
    return scan


# ---------------------------------------------------------------------------
# Response log file format: one record per line,
#   probed_target,source,kind,code,hop_limit,timestamp_us
# Addresses are canonical lowercase. For echo replies the code column is
# empty; for other ICMPv6 types it is "type:code" so nothing is lost.


def _code_field(rec: ResponseRecord) -> str:
    if rec.kind == KIND_ECHO_REPLY:
        return ""
    if rec.kind == KIND_DEST_UNREACH:
        return str(rec.icmp_code)
    return f"{rec.icmp_type}:{rec.icmp_code}"


def write_response_log(records: Iterable[ResponseRecord], fh) -> None:
    for rec in records:
        fh.write(
            f"{format_address(rec.probed_target)},{format_address(rec.source)},"
            f"{rec.kind},{_code_field(rec)},{rec.hop_limit},{rec.timestamp_us}\n"
        )


def read_response_log(fh) -> list[ResponseRecord]:
    out: list[ResponseRecord] = []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"response log line {lineno}: expected 6 fields")
        target, source, kind, code, hop_limit, ts = parts
        if kind == KIND_ECHO_REPLY:
            itype, icode = ICMP6_ECHO_REPLY, 0
        elif kind == KIND_DEST_UNREACH:
            itype, icode = ICMP6_DEST_UNREACH, int(code)
        elif kind == KIND_OTHER:
            t, _, c = code.partition(":")
            itype, icode = int(t), int(c)
        else:
            raise ValueError(f"response log line {lineno}: unknown kind {kind!r}")
        out.append(
            ResponseRecord(
                probed_target=parse_address(target),
                source=parse_address(source),
                kind=kind,
                icmp_type=itype,
                icmp_code=icode,
                hop_limit=int(hop_limit),
                timestamp_us=int(ts),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Live transport: raw ICMPv6 sockets. Requires CAP_NET_RAW; never used by the
# test suite, but the packet codecs below are pure and tested directly.


def build_echo_request(ident: int, seq: int, payload: bytes) -> bytes:
    # Checksum is left zero: the kernel fills it in for ICMPv6 raw sockets.
    return struct.pack("!BBHHH", ICMP6_ECHO_REQUEST, 0, 0, ident, seq) + payload


def parse_icmp6_packet(data: bytes, source: int, hop_limit: int, ts_us: int) -> IcmpEvent | None:
    """Decode a raw ICMPv6 message (header + body, no IPv6 header) to an event.

    Echo replies carry ident/seq/payload directly. For error types the body
    quotes the invoking IPv6 packet, so the original destination and our echo
    header are recovered from the quote at offsets 24 and 40.
    """
    if len(data) < 8:
        return None
    itype, icode = data[0], data[1]
    if itype == ICMP6_ECHO_REPLY:
        ident, seq = struct.unpack_from("!HH", data, 4)
        return IcmpEvent(source, itype, icode, hop_limit, ident, seq, data[8:], None, ts_us)
    if itype < 128:  # error message: 4 bytes unused, then the invoking packet
        inner = data[8:]
        if len(inner) < 40 + 8:
            return None
        quoted_dst = int.from_bytes(inner[24:40], "big")
        if inner[40] != ICMP6_ECHO_REQUEST:
            return None
        ident, seq = struct.unpack_from("!HH", inner, 44)
        return IcmpEvent(
            source, itype, icode, hop_limit, ident, seq, inner[48:], quoted_dst, ts_us
        )
    return None


class LiveTransport:
    """Raw-socket ICMPv6 transport (echo out, everything relevant in)."""

    def __init__(self) -> None:
        self._sock = socket.socket(socket.AF_INET6, socket.SOCK_RAW, socket.IPPROTO_ICMPV6)
        self._sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_UNICAST_HOPS, OUTGOING_HOP_LIMIT)
        self._sock.setsockopt(socket.IPPROTO_IPV6, socket.IPV6_RECVHOPLIMIT, 1)
        self._sock.setblocking(False)

    def send(self, dst: int, ident: int, seq: int, payload: bytes) -> None:
        packet = build_echo_request(ident, seq, payload)
        self._sock.sendto(packet, (format_address(dst), 0, 0, 0))

    def poll(self, max_wait: float) -> list[IcmpEvent]:
        import select

        out: list[IcmpEvent] = []
        deadline = time.monotonic() + max_wait
        while True:
            remaining = deadline - time.monotonic()
            r, _, _ = select.select([self._sock], [], [], max(0.0, remaining))
            if not r:
                return out
            data, ancdata, _flags, addr = self._sock.recvmsg(65535, 1024)
            hop_limit = 0
            for level, ctype, cdata in ancdata:
                if level == socket.IPPROTO_IPV6 and ctype == socket.IPV6_HOPLIMIT:
                    hop_limit = int.from_bytes(cdata[:4], sys.byteorder)
            ev = parse_icmp6_packet(
                data, parse_address(addr[0]), hop_limit, time.time_ns() // 1000
            )
            if ev is not None:
                out.append(ev)
            if remaining <= 0:
                return out

    def close(self) -> None:
        self._sock.close()
