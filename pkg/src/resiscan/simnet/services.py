"""Connectable application-layer endpoints for simulated scenarios.

Each configured service is reachable through a connector with the same shape
as the live one: ``connect(address, port, timeout, udp=False) -> socket``.
A connection hands the caller one end of a socketpair while a short-lived
thread speaks the service behavior on the other end, so grabbers exercise
real socket I/O (including genuine TLS handshakes with generated
certificates) without touching the network. Firewalls apply to connections
exactly as they do to probes: services behind a default-deny CPE refuse.

Every byte a behavior reads from a client is recorded in a transcript, which
is how the tests enforce that grabs stay minimal.
"""

from __future__ import annotations

import datetime
import os
import plistlib
import socket
import ssl
import struct
import tempfile
import threading
from dataclasses import dataclass, field

from ..addrs import PREFIX56_MASK, parse_address
from .scenario import FIREWALL_ALLOW, Scenario, SimService

TLS_ALERT_HANDSHAKE_FAILURE = b"\x15\x03\x01\x00\x02\x02\x28"
TELNET_NEGOTIATION = b"\xff\xfd\x18\xff\xfd\x20\xff\xfd\x23\xff\xfd\x27"


@dataclass(slots=True)
class Transcript:
    address: str
    port: int
    chunks: list[bytes] = field(default_factory=list)

    @property
    def data(self) -> bytes:
        return b"".join(self.chunks)


class _Conn:
    """Socket wrapper that records everything the service reads."""

    def __init__(self, sock: socket.socket, transcript: Transcript):
        self.sock = sock
        self.transcript = transcript

    def recv(self, n: int) -> bytes:
        data = self.sock.recv(n)
        if data:
            self.transcript.chunks.append(data)
        return data

    def sendall(self, data: bytes) -> None:
        self.sock.sendall(data)

    def settimeout(self, t: float | None) -> None:
        self.sock.settimeout(t)

    def close(self) -> None:
        # Orderly teardown: EOF the peer first, then absorb whatever it sent
        # that the behavior never read (recording it - those bytes are part
        # of what the client transmitted). Closing a stream socket with
        # unread peer data surfaces as ECONNRESET on the other side, which
        # would make grab outcomes depend on thread timing.
        try:
            if self.sock.type == socket.SOCK_STREAM:
                self.sock.shutdown(socket.SHUT_WR)
                self.settimeout(1.0)
                while self.recv(4096):
                    pass
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass

    def rewrap(self, sock: socket.socket) -> "_Conn":
        """Same transcript, new underlying socket (post-TLS-wrap)."""
        return _Conn(sock, self.transcript)


class _CertStore:
    """Self-signed certificate cache, one per requested common name."""

    def __init__(self) -> None:
        self._contexts: dict[str, ssl.SSLContext] = {}
        self._dir: str | None = None
        self._lock = threading.Lock()

    def context_for(self, common_name: str) -> ssl.SSLContext:
        with self._lock:
            ctx = self._contexts.get(common_name)
            if ctx is not None:
                return ctx
            if self._dir is None:
                self._dir = tempfile.mkdtemp(prefix="simnet-tls-")
            from cryptography import x509
            from cryptography.hazmat.primitives import hashes, serialization
            from cryptography.hazmat.primitives.asymmetric import ec
            from cryptography.x509.oid import NameOID

            key = ec.generate_private_key(ec.SECP256R1())
            name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, common_name)])
            cert = (
                x509.CertificateBuilder()
                .subject_name(name)
                .issuer_name(name)
                .public_key(key.public_key())
                .serial_number(x509.random_serial_number())
                .not_valid_before(datetime.datetime(2020, 1, 1))
                .not_valid_after(datetime.datetime(2045, 1, 1))
                .sign(key, hashes.SHA256())
            )
            base = os.path.join(self._dir, f"cn{len(self._contexts)}")
            with open(base + ".crt", "wb") as fh:
                fh.write(cert.public_bytes(serialization.Encoding.PEM))
            with open(base + ".key", "wb") as fh:
                fh.write(
                    key.private_bytes(
                        serialization.Encoding.PEM,
                        serialization.PrivateFormat.PKCS8,
                        serialization.NoEncryption(),
                    )
                )
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            ctx.load_cert_chain(base + ".crt", base + ".key")
            self._contexts[common_name] = ctx
            return ctx


_certs = _CertStore()


# ---------------------------------------------------------------------------
# Behaviors. Each takes the recording connection and its params dict.


def _drain_until_close(conn: _Conn, limit: float = 5.0) -> None:
    conn.settimeout(limit)
    try:
        while conn.recv(4096):
            pass
    except OSError:
        pass


def _read_http_request(conn: _Conn, limit: int = 16384) -> bytes:
    buf = b""
    conn.settimeout(5.0)
    try:
        while b"\r\n\r\n" not in buf and len(buf) < limit:
            data = conn.recv(4096)
            if not data:
                break
            buf += data
    except OSError:
        pass
    return buf


def _http_payload(params: dict, default_server: str | None = None) -> bytes:
    status = int(params.get("status", 200))
    body = params.get("body", "").encode()
    server = params.get("server", default_server)
    head = [f"HTTP/1.1 {status} OK".encode()]
    if server:
        head.append(b"Server: " + str(server).encode())
    head.append(b"Content-Type: text/html")
    head.append(b"Content-Length: " + str(len(body)).encode())
    head.append(b"Connection: close")
    return b"\r\n".join(head) + b"\r\n\r\n" + body


def h_greeting(conn: _Conn, params: dict) -> None:
    conn.sendall(str(params.get("text", "220 ready\r\n")).encode())
    conn.close()


def h_banner(conn: _Conn, params: dict) -> None:
    conn.sendall(bytes.fromhex(params.get("data_hex", "00")))
    conn.close()


def h_big_banner(conn: _Conn, params: dict) -> None:
    conn.sendall(b"B" * int(params.get("size", 1 << 20)))
    conn.close()


def h_silent(conn: _Conn, params: dict) -> None:
    _drain_until_close(conn, limit=float(params.get("hold_s", 10.0)))
    conn.close()


def h_ssh(conn: _Conn, params: dict) -> None:
    conn.sendall(f"SSH-2.0-{params.get('version', 'OpenSSH_9.6')}\r\n".encode())
    _drain_until_close(conn, 1.0)
    conn.close()


def h_telnet(conn: _Conn, params: dict) -> None:
    conn.sendall(TELNET_NEGOTIATION + str(params.get("banner", "login: ")).encode())
    _drain_until_close(conn, 1.0)
    conn.close()


def h_http(conn: _Conn, params: dict) -> None:
    if _read_http_request(conn):
        conn.sendall(_http_payload(params))
    conn.close()


def h_hp_printer_http(conn: _Conn, params: dict) -> None:
    model = params.get("model", "HP DeskJet 2700 series")
    serial = params.get("serial", "CN00000000")
    built = params.get("built")
    server = f"HP HTTP Server; {model}; Serial Number: {serial}"
    if built:
        server += f"; Built: {built}"
    if _read_http_request(conn):
        conn.sendall(_http_payload({**params, "server": server, "body": "<html>printer</html>"}))
    conn.close()


def h_dahua_http(conn: _Conn, params: dict) -> None:
    body = '<script>var appname="cameraNewConfig";</script>'
    if _read_http_request(conn):
        conn.sendall(_http_payload({"server": "webserver", "body": body}))
    conn.close()


def h_nanoleaf_http(conn: _Conn, params: dict) -> None:
    body = '<html><a href="/upgrade">Upload New Firmware</a></html>'
    if _read_http_request(conn):
        conn.sendall(_http_payload({"server": "nanoleaf/1.0", "body": body}))
    conn.close()


def h_tls_http(conn: _Conn, params: dict) -> None:
    """HTTPS endpoint; a plaintext client gets a TLS alert and nothing else."""
    conn.settimeout(5.0)
    first = conn.sock.recv(1, socket.MSG_PEEK)
    if not first:
        conn.close()
        return
    if first[0] != 0x16:  # not a TLS ClientHello: scold and hang up
        _read_http_request(conn)
        conn.sendall(TLS_ALERT_HANDSHAKE_FAILURE)
        conn.close()
        return
    ctx = _certs.context_for(str(params.get("common_name", "simnet test")))
    try:
        tls = ctx.wrap_socket(conn.sock, server_side=True)
    except (ssl.SSLError, OSError):
        conn.close()
        return
    h_http(conn.rewrap(tls), params)


def h_mqtt_broker(conn: _Conn, params: dict) -> None:
    if params.get("close_immediately"):
        conn.close()
        return
    conn.settimeout(5.0)
    try:
        head = conn.recv(1)
        if not head or head[0] >> 4 != 1:  # only CONNECT is acceptable first
            conn.close()
            return
        remaining = 0
        shift = 0
        while True:
            b = conn.recv(1)
            if not b:
                conn.close()
                return
            remaining |= (b[0] & 0x7F) << shift
            if not b[0] & 0x80:
                break
            shift += 7
        got = b""
        while len(got) < remaining:
            data = conn.recv(remaining - len(got))
            if not data:
                conn.close()
                return
            got += data
        if not got.startswith(b"\x00\x04MQTT"):
            conn.close()
            return
        rc = int(params.get("return_code", 0))
        conn.sendall(bytes([0x20, 0x02, 0x00, rc]))
    except OSError:
        pass
    conn.close()


def h_lockdown(conn: _Conn, params: dict) -> None:
    conn.settimeout(5.0)
    try:
        raw_len = b""
        while len(raw_len) < 4:
            data = conn.recv(4 - len(raw_len))
            if not data:
                conn.close()
                return
            raw_len += data
        (length,) = struct.unpack(">I", raw_len)
        if length > 1 << 20:
            conn.close()
            return
        body = b""
        while len(body) < length:
            data = conn.recv(length - len(body))
            if not data:
                conn.close()
                return
            body += data
        request = plistlib.loads(body)
        mode = params.get("mode", "normal")
        if mode == "hostile_length":
            conn.sendall(struct.pack(">I", 0x7FFFFFFF) + b"\x00" * 16)
            conn.close()
            return
        reply: dict = {"Request": request.get("Request", "GetValue"), "Key": request.get("Key", "")}
        if mode != "no_value" and request.get("Key") == "ProductVersion":
            reply["Value"] = str(params.get("product_version", "18.2"))
        payload = plistlib.dumps(reply, fmt=plistlib.FMT_XML)
        conn.sendall(struct.pack(">I", len(payload)) + payload)
    except (OSError, plistlib.InvalidFileException, ValueError):
        pass
    conn.close()


def h_ntp(conn: _Conn, params: dict) -> None:
    conn.settimeout(5.0)
    try:
        query = conn.recv(512)
        if len(query) < 48 or query[0] & 0x07 != 3:  # client mode only
            conn.close()
            return
        reply = bytearray(48)
        reply[0] = (query[0] & 0x38) | 0x04  # same version, server mode
        reply[1] = 2  # stratum
        conn.sendall(bytes(reply))
    except OSError:
        pass
    conn.close()


BEHAVIORS = {
    "greeting": h_greeting,
    "banner": h_banner,
    "big_banner": h_big_banner,
    "silent": h_silent,
    "ssh": h_ssh,
    "telnet": h_telnet,
    "http": h_http,
    "hp_printer_http": h_hp_printer_http,
    "dahua_http": h_dahua_http,
    "nanoleaf_http": h_nanoleaf_http,
    "tls_http": h_tls_http,
    "mqtt_broker": h_mqtt_broker,
    "lockdown": h_lockdown,
    "ntp": h_ntp,
}


class SimServices:
    """Endpoint registry + connector for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.transcripts: list[Transcript] = []
        self._lock = threading.Lock()
        self._endpoints: dict[tuple[str, int], SimService] = {}
        self._deny_hosts: set[int] = set()
        self._alias_stubs: dict[int, dict[int, SimService]] = {}
        for i, net in enumerate(scenario.nets):
            for j, sub in enumerate(net.subnets):
                net56 = scenario.net56(net, sub)
                if sub.aliased:
                    self._alias_stubs[net56] = {s.port: s for s in sub.stub_services}
                    continue
                wan = scenario.wan_address(i, j)
                for svc in sub.cpe.services:
                    self._register(wan, svc)
                allow = sub.cpe.firewall == FIREWALL_ALLOW
                for host in sub.hosts:
                    address = scenario.host_address(net, sub, host)
                    if not allow:
                        self._deny_hosts.add(address)
                    for svc in host.services:
                        self._register(address, svc)

    def _register(self, address: int | str, svc: SimService) -> None:
        key = _canonical(address if isinstance(address, str) else _v6_text(address))
        self._endpoints[(key, svc.port)] = svc

    def add_endpoint(self, address: str, port: int, behavior: str, params: dict | None = None) -> None:
        """Register an extra endpoint directly (tests; either address family)."""
        self._endpoints[(_canonical(address), port)] = SimService(port, behavior, params or {})

    def lookup(self, address: str, port: int) -> SimService | None:
        key = _canonical(address)
        svc = self._endpoints.get((key, port))
        if svc is not None:
            return svc
        if ":" in key:
            try:
                value = parse_address(key)
            except ValueError:
                return None
            stub = self._alias_stubs.get(value & PREFIX56_MASK)
            if stub is not None:
                return stub.get(port)
        return None

    def connect(self, address: str, port: int, timeout: float = 5.0, udp: bool = False):
        """Connector with live-socket semantics against the scenario."""
        key = _canonical(address)
        if ":" in key:
            try:
                value = parse_address(key)
            except ValueError:
                value = None
            if value is not None and value in self._deny_hosts:
                raise ConnectionRefusedError(f"{address}:{port} filtered")
        svc = self.lookup(address, port)
        if svc is None:
            raise ConnectionRefusedError(f"{address}:{port} closed")
        handler = BEHAVIORS.get(svc.behavior)
        if handler is None:
            raise ConnectionRefusedError(f"{address}:{port} unknown behavior {svc.behavior!r}")
        kind = socket.SOCK_DGRAM if udp else socket.SOCK_STREAM
        client, server = socket.socketpair(socket.AF_UNIX, kind)
        transcript = Transcript(key, port)
        with self._lock:
            self.transcripts.append(transcript)
        conn = _Conn(server, transcript)
        t = threading.Thread(
            target=_run_handler, args=(handler, conn, svc.params), daemon=True
        )
        t.start()
        client.settimeout(timeout)
        return client

    def connector(self):
        return self.connect

    def transcripts_for(self, address: str, port: int | None = None) -> list[Transcript]:
        key = _canonical(address)
        return [
            t for t in self.transcripts if t.address == key and (port is None or t.port == port)
        ]


def _run_handler(handler, conn: _Conn, params: dict) -> None:
    try:
        handler(conn, params)
    except OSError:
        pass
    finally:
        conn.close()


def _v6_text(value: int) -> str:
    from ..addrs import format_address

    return format_address(value)


def _canonical(address: str) -> str:
    text = address.strip().strip("[]")
    if ":" in text:
        try:
            return _v6_text(parse_address(text))
        except ValueError:
            return text
    return text
