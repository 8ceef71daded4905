"""Application-layer service grabbing for responsive addresses.

One grab is one connection, one request at most, one bounded read, close.
Banners are capped at 64 KiB, every socket operation sits under a single
per-connection timeout, and nothing is ever retried except the one sanctioned
case: a "web" port that answers plaintext HTTP with a TLS handshake record
gets a second connection speaking TLS, because some gateways serve their
admin UI that way on port 80.

Grabbers treat the address as an opaque endpoint string, so IPv4 targets
work identically - only the Host header bracketing cares about the family.
"""

from __future__ import annotations

import base64
import csv
import logging
import socket
import ssl
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .services import (
    KIND_BANNER,
    KIND_HTTP,
    KIND_LINE,
    KIND_LOCKDOWN,
    KIND_MQTT,
    KIND_NTP,
    KIND_TLS_HTTP,
    ServiceSpec,
)

log = logging.getLogger(__name__)

BANNER_CAP = 64 * 1024
LOCKDOWN_REPLY_CAP = 1 << 20  # anything larger is hostile or broken
DEFAULT_TIMEOUT_S = 5.0
DEFAULT_PARALLELISM = 256
USER_AGENT = "resiscan/0.1"

OUTCOME_RESPONDED = "responded"
OUTCOME_REFUSED = "refused"
OUTCOME_TIMEOUT = "timeout"
OUTCOME_ERROR = "error"


@dataclass(slots=True)
class GrabRecord:
    address: str
    service: str
    outcome: str
    detail: str = ""
    banner: bytes = b""
    http_server_header: str | None = None
    tls_subject_cn: str | None = None
    mqtt_return_code: int | None = None
    lockdown_product_version: str | None = None


def live_connector(address: str, port: int, timeout: float = DEFAULT_TIMEOUT_S, udp: bool = False):
    """Real-socket connector; family chosen by the address text."""
    if udp:
        family = socket.AF_INET6 if ":" in address else socket.AF_INET
        sock = socket.socket(family, socket.SOCK_DGRAM)
        sock.settimeout(timeout)
        sock.connect((address, port))
        return sock
    return socket.create_connection((address, port), timeout=timeout)


def _read_until_close(sock, cap: int) -> bytes:
    """Read at most cap bytes; timeouts after the first byte end the read."""
    buf = b""
    while len(buf) < cap:
        try:
            data = sock.recv(min(8192, cap - len(buf)))
        except (socket.timeout, TimeoutError):
            if buf:
                return buf
            raise
        except ssl.SSLError:
            return buf
        except OSError:
            return buf
        if not data:
            return buf
        buf += data
    return buf


def _http_request(address: str) -> bytes:
    host = f"[{address}]" if ":" in address else address
    return (
        f"GET / HTTP/1.1\r\nHost: {host}\r\nUser-Agent: {USER_AGENT}\r\n"
        f"Accept: */*\r\nConnection: close\r\n\r\n"
    ).encode()


def parse_http_response(raw: bytes) -> tuple[int | None, dict[str, str], bytes]:
    """(status, lowercase-keyed headers, body); None status when unparsable."""
    head, sep, body = raw.partition(b"\r\n\r\n")
    if not sep:
        return None, {}, b""
    lines = head.split(b"\r\n")
    parts = lines[0].split(None, 2)
    if len(parts) < 2 or not parts[0].startswith(b"HTTP/"):
        return None, {}, b""
    try:
        status = int(parts[1])
    except ValueError:
        return None, {}, b""
    headers: dict[str, str] = {}
    for line in lines[1:]:
        name, colon, value = line.partition(b":")
        if colon:
            headers[name.strip().decode("latin-1").lower()] = value.strip().decode("latin-1")
    return status, headers, body


def _looks_like_tls(data: bytes) -> bool:
    # TLS record layer: alert (0x15) or handshake (0x16) then version 3.x
    return len(data) >= 3 and data[0] in (0x15, 0x16) and data[1] == 0x03


def _tls_client_context() -> ssl.SSLContext:
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    return ctx


def _peer_common_name(tls_sock) -> str | None:
    der = tls_sock.getpeercert(binary_form=True)
    if not der:
        return None
    from cryptography import x509
    from cryptography.x509.oid import NameOID

    cert = x509.load_der_x509_certificate(der)
    attrs = cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)
    return str(attrs[0].value) if attrs else None


def _grab_banner(sock, rec: GrabRecord, cap: int) -> None:
    data = _read_until_close(sock, cap)
    if not data:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    rec.outcome = OUTCOME_RESPONDED
    rec.banner = data


def _grab_line(sock, rec: GrabRecord, request: bytes, cap: int) -> None:
    sock.sendall(request)
    _grab_banner(sock, rec, cap)


def _finish_http(rec: GrabRecord, raw: bytes) -> None:
    rec.banner = raw
    status, headers, _body = parse_http_response(raw)
    if status is None:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "http_malformed"
        return
    rec.outcome = OUTCOME_RESPONDED
    rec.http_server_header = headers.get("server")


def _grab_http(sock, rec: GrabRecord, address: str, cap: int, connector, port, timeout) -> None:
    sock.sendall(_http_request(address))
    raw = _read_until_close(sock, cap)
    if not raw:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    if _looks_like_tls(raw):
        # Gateway wants TLS on a plaintext web port; one TLS retry, then done.
        sock.close()
        retry = connector(address, port, timeout)
        try:
            _grab_tls_http(retry, rec, address, cap)
        finally:
            retry.close()
        if rec.outcome == OUTCOME_RESPONDED:
            rec.detail = "tls_on_plain_port"
        return
    _finish_http(rec, raw)


def _grab_tls_http(sock, rec: GrabRecord, address: str, cap: int) -> None:
    try:
        tls = _tls_client_context().wrap_socket(sock)
    except (ssl.SSLError, OSError):
        rec.outcome = OUTCOME_ERROR
        rec.detail = "tls_handshake"
        return
    rec.tls_subject_cn = _peer_common_name(tls)
    tls.sendall(_http_request(address))
    raw = _read_until_close(tls, cap)
    if not raw:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    _finish_http(rec, raw)


def _recv_exact(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        data = sock.recv(n - len(buf))
        if not data:
            return buf
        buf += data
    return buf


def _grab_mqtt(sock, rec: GrabRecord) -> None:
    # CONNECT, protocol level 4, clean session, no credentials, generated id.
    client_id = b"rs-probe"
    var = b"\x00\x04MQTT\x04\x02\x00\x3c" + struct.pack(">H", len(client_id)) + client_id
    sock.sendall(bytes([0x10, len(var)]) + var)
    reply = _recv_exact(sock, 4)
    if len(reply) < 4:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    if reply[0] != 0x20 or reply[1] != 0x02:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "not_connack"
        return
    rec.outcome = OUTCOME_RESPONDED
    rec.mqtt_return_code = reply[3]
    rec.banner = reply


def _grab_lockdown(sock, rec: GrabRecord, label: str) -> None:
    import plistlib

    request = plistlib.dumps(
        {"Label": label, "Key": "ProductVersion", "Request": "GetValue"},
        fmt=plistlib.FMT_XML,
    )
    sock.sendall(struct.pack(">I", len(request)) + request)
    head = _recv_exact(sock, 4)
    if len(head) < 4:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    (length,) = struct.unpack(">I", head)
    if length == 0 or length > LOCKDOWN_REPLY_CAP:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "bounds"
        return
    body = _recv_exact(sock, length)
    if len(body) < length:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "connection_closed"
        return
    try:
        reply = plistlib.loads(body)
    except Exception:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "plist_malformed"
        return
    rec.outcome = OUTCOME_RESPONDED
    rec.banner = body
    value = reply.get("Value") if isinstance(reply, dict) else None
    rec.lockdown_product_version = str(value) if value is not None else None


def _grab_ntp(sock, rec: GrabRecord) -> None:
    query = bytearray(48)
    query[0] = 0x23  # v4 client
    sock.sendall(bytes(query))
    reply = sock.recv(512)
    if len(reply) < 48 or reply[0] & 0x07 != 4:
        rec.outcome = OUTCOME_ERROR
        rec.detail = "protocol"
        return
    rec.outcome = OUTCOME_RESPONDED
    rec.banner = bytes(reply)


def grab(
    address: str,
    spec: ServiceSpec,
    *,
    connector=live_connector,
    timeout: float = DEFAULT_TIMEOUT_S,
    cap: int = BANNER_CAP,
    label: str = USER_AGENT,
) -> GrabRecord:
    """Run one service check against one address."""
    rec = GrabRecord(address=address, service=spec.name, outcome=OUTCOME_ERROR)
    sock = None
    try:
        sock = connector(address, spec.port, timeout, udp=spec.transport == "udp")
        sock.settimeout(timeout)
        if spec.probe_kind == KIND_BANNER:
            _grab_banner(sock, rec, cap)
        elif spec.probe_kind == KIND_HTTP:
            _grab_http(sock, rec, address, cap, connector, spec.port, timeout)
        elif spec.probe_kind == KIND_TLS_HTTP:
            _grab_tls_http(sock, rec, address, cap)
        elif spec.probe_kind == KIND_MQTT:
            _grab_mqtt(sock, rec)
        elif spec.probe_kind == KIND_LOCKDOWN:
            _grab_lockdown(sock, rec, label)
        elif spec.probe_kind == KIND_NTP:
            _grab_ntp(sock, rec)
        elif spec.probe_kind == KIND_LINE:
            _grab_line(sock, rec, spec.request, cap)
    except ConnectionRefusedError:
        rec.outcome = OUTCOME_REFUSED
        rec.detail = ""
    except (socket.timeout, TimeoutError):
        rec.outcome = OUTCOME_TIMEOUT
        rec.detail = ""
    except OSError as exc:
        rec.outcome = OUTCOME_ERROR
        rec.detail = exc.__class__.__name__
    finally:
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass
    if len(rec.banner) > cap:
        rec.banner = rec.banner[:cap]
    return rec


def run_grab_campaign(
    addresses,
    specs,
    *,
    connector=live_connector,
    parallelism: int = DEFAULT_PARALLELISM,
    timeout: float = DEFAULT_TIMEOUT_S,
    cap: int = BANNER_CAP,
    label: str = USER_AGENT,
) -> list[GrabRecord]:
    """Grab every (address, service) pair exactly once; order-stable output.

    Failures are per-pair: one hung or broken endpoint can't sink the
    campaign, and results come back sorted by (address, service).
    """
    addresses = list(dict.fromkeys(addresses))
    specs = list(specs)
    tasks = [(a, s) for a in addresses for s in specs]
    if not tasks:
        return []
    workers = max(1, min(parallelism, len(tasks)))

    def one(task):
        a, s = task
        try:
            return grab(a, s, connector=connector, timeout=timeout, cap=cap, label=label)
        except Exception as exc:  # noqa: BLE001 - isolate per-pair failures
            log.warning("grab %s/%s failed: %s", a, s.name, exc)
            return GrabRecord(address=a, service=s.name, outcome=OUTCOME_ERROR, detail=repr(exc))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(one, tasks))
    records.sort(key=lambda r: (r.address, r.service))
    return records


# ---------------------------------------------------------------------------
# Grab log: one CSV row per record, banner base64-encoded in the last field.

_LOG_FIELDS = (
    "address",
    "service",
    "outcome",
    "detail",
    "http_server_header",
    "tls_subject_cn",
    "mqtt_return_code",
    "lockdown_product_version",
    "banner_b64",
)


def write_grab_log(records, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_LOG_FIELDS)
    for r in records:
        writer.writerow(
            [
                r.address,
                r.service,
                r.outcome,
                r.detail,
                r.http_server_header or "",
                r.tls_subject_cn or "",
                "" if r.mqtt_return_code is None else r.mqtt_return_code,
                r.lockdown_product_version or "",
                base64.b64encode(r.banner).decode("ascii"),
            ]
        )


def read_grab_log(fh) -> list[GrabRecord]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != list(_LOG_FIELDS):
        raise ValueError("grab log header mismatch")
    out: list[GrabRecord] = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(_LOG_FIELDS):
            raise ValueError(f"grab log row has {len(row)} fields")
        out.append(
            GrabRecord(
                address=row[0],
                service=row[1],
                outcome=row[2],
                detail=row[3],
                http_server_header=row[4] or None,
                tls_subject_cn=row[5] or None,
                mqtt_return_code=int(row[6]) if row[6] else None,
                lockdown_product_version=row[7] or None,
                banner=base64.b64decode(row[8]),
            )
        )
    return out
