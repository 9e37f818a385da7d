"""Encryptor service and decryptor client over plain HTTP/1.1.

The server plays the device role: it generates the deterministic payload,
encrypts it at the requested level and answers with one envelope per request.
The client plays the cloud role: it asks for ``packet_quantity`` packets one
after another, decrypts each locally and checks it against the same
deterministic payload before accepting any timing.
"""

import hashlib
import hmac
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import requests

from . import hostinfo
from .envelope import (
    KEY_MAP,
    PUBLIC_SLOTS,
    SLOT_LENGTHS,
    EnvelopeMeta,
    TestRequest,
    decode_envelope,
    encode_envelope,
)
from .errors import (
    AuthenticationError,
    IntegrityError,
    LayercryptError,
    SchemaError,
    TransportError,
)
from .levels import LevelKeySet, SecurityLevel, canonical_stack, keyset_generate, level_decrypt, level_encrypt
from .rng import system_rng
from .workload import UNIT_MULTIPLIERS, make_packet

log = logging.getLogger(__name__)


def _ms(seconds: float) -> float:
    return seconds * 1000.0


def preshared_keyset(level, psk: bytes, packet_index: int) -> LevelKeySet:
    """Secret slots derived from a pre-shared secret, one fresh set per packet."""
    level = SecurityLevel(level)
    slots = {}
    for slot in KEY_MAP[level]:
        if slot in PUBLIC_SLOTS:
            continue
        info = f"{slot}|{packet_index}".encode()
        slots[slot] = hmac.new(psk, info, hashlib.sha256).digest()[:SLOT_LENGTHS[slot]]
    return LevelKeySet(slots)


@dataclass
class ServerConfig:
    seed: int = 42
    max_size_mb: int = 64
    units_mode: str = "binary"
    keys_on_wire: bool = True
    psk: Optional[bytes] = None

    @property
    def max_size_bytes(self) -> int:
        return self.max_size_mb * UNIT_MULTIPLIERS[self.units_mode]["MB"]


class EncryptorServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, config: ServerConfig):
        if not config.keys_on_wire and not config.psk:
            raise ValueError("keys_on_wire=False needs a pre-shared secret")
        self.config = config
        self.metrics = []
        self._metrics_lock = threading.Lock()
        super().__init__(address, _Handler)

    def record(self, entry: dict):
        with self._metrics_lock:
            self.metrics.append(entry)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def encrypt_packet(self, req: TestRequest, packet_index: int, seed: int, started: float) -> bytes:
        cfg = self.config
        size = req.size_bytes(cfg.units_mode)
        payload = make_packet(seed, packet_index, size)
        stack = canonical_stack(req.level)
        keys = keyset_generate(stack, system_rng)
        if not cfg.keys_on_wire:
            shared = preshared_keyset(req.level, cfg.psk, packet_index)
            keys = LevelKeySet({**keys.slots, **shared.slots}, keys.ivs)
        t0 = time.perf_counter()
        ct = level_encrypt(stack, keys, payload)
        encrypt_ms = _ms(time.perf_counter() - t0)
        process_ms = _ms(time.perf_counter() - started)
        meta = EnvelopeMeta(encrypt_ms, process_ms, packet_index)
        body = encode_envelope(req.level, keys, ct, meta, keys_on_wire=cfg.keys_on_wire)
        self.record({
            "packet_index": packet_index,
            "level": req.test_type,
            "size_bytes": size,
            "server_encrypt_ms": encrypt_ms,
            "server_process_ms": process_ms,
        })
        return body.encode("ascii")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: EncryptorServer

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes, content_type="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status, exc):
        body = json.dumps({"error": type(exc).__name__, "detail": str(exc)}).encode()
        self._send(status, body)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, b'{"status":"ok"}')
        elif self.path == "/sysinfo":
            self._send(200, json.dumps(hostinfo.sysinfo()).encode())
        else:
            self._send(404, b'{"error":"not found"}')

    def do_POST(self):
        started = time.perf_counter()
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        if self.path != "/encrypt":
            self._send(404, b'{"error":"not found"}')
            return
        try:
            obj = json.loads(raw or b"null")
            req = TestRequest.from_dict(obj)
            packet_index = obj.get("packet_index", 0)
            seed = obj.get("seed", self.server.config.seed)
            for name, value in (("packet_index", packet_index), ("seed", seed)):
                if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** 64:
                    raise SchemaError(f"{name} must be a non-negative integer")
        except json.JSONDecodeError as exc:
            self._error(400, SchemaError(f"request is not JSON: {exc}"))
            return
        except SchemaError as exc:
            self._error(400, exc)
            return
        if req.size_bytes(self.server.config.units_mode) > self.server.config.max_size_bytes:
            self._error(413, SchemaError(
                f"{req.custom_size} {req.unit} exceeds the {self.server.config.max_size_mb} MB cap"
            ))
            return
        try:
            body = self.server.encrypt_packet(req, packet_index, seed, started)
        except LayercryptError as exc:
            self._error(500, exc)
            return
        self._send(200, body)


def serve(bind_address, config: ServerConfig = None):
    """Run the encryptor service until interrupted."""
    server = EncryptorServer(bind_address, config or ServerConfig())
    log.info("encryptor listening on %s", server.url)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background_server(bind_address=("127.0.0.1", 0), config: ServerConfig = None):
    """Start a server on a daemon thread; returns the server (call ``shutdown``)."""
    server = EncryptorServer(bind_address, config or ServerConfig())
    thread = threading.Thread(target=server.serve_forever, name="encryptor", daemon=True)
    thread.start()
    return server


@dataclass
class PacketRecord:
    packet_index: int
    encrypt_ms: float
    decrypt_ms: float
    bytes: int
    server_process_ms: float
    roundtrip_ms: float


@dataclass
class SessionResult:
    request: TestRequest
    records: list = field(default_factory=list)
    client_process_ms: float = 0.0
    server_process_ms: float = 0.0
    transfer_bytes: int = 0
    envelope_fields: tuple = ()

    @property
    def encrypt_ms(self) -> float:
        return sum(r.encrypt_ms for r in self.records)

    @property
    def decrypt_ms(self) -> float:
        return sum(r.decrypt_ms for r in self.records)


def run_session(server_url: str, req: TestRequest, seed: int = 42, *,
                psk: Optional[bytes] = None, units_mode: str = "binary",
                timeout: float = 120.0, session: Optional[requests.Session] = None) -> SessionResult:
    """Request, decrypt and verify ``req.packet_quantity`` packets in sequence."""
    url = server_url.rstrip("/") + "/encrypt"
    size = req.size_bytes(units_mode)
    own_session = session is None
    http = session or requests.Session()
    result = SessionResult(request=req)
    start = time.perf_counter()
    try:
        for index in range(req.packet_quantity):
            body = {**req.to_dict(), "packet_index": index, "seed": seed}
            t_send = time.perf_counter()
            try:
                resp = http.post(url, json=body, timeout=timeout)
            except requests.RequestException as exc:
                raise TransportError(f"packet {index}: {exc}", packet_index=index) from exc
            roundtrip_ms = _ms(time.perf_counter() - t_send)
            if resp.status_code != 200:
                raise TransportError(
                    f"packet {index}: HTTP {resp.status_code}: {resp.text[:200]}",
                    packet_index=index, status=resp.status_code,
                )
            raw = resp.content
            shared = preshared_keyset(req.level, psk, index) if psk else None
            env = decode_envelope(raw, shared_keys=shared)
            if env.level is not req.level:
                raise IntegrityError(
                    f"packet {index}: asked for {req.test_type}, got {env.level.name}",
                    packet_index=index,
                )
            if index == 0:
                result.envelope_fields = tuple(sorted(json.loads(raw)))
            t0 = time.perf_counter()
            try:
                plain = level_decrypt(canonical_stack(env.level), env.keys, env.ciphertext)
            except AuthenticationError as exc:
                raise AuthenticationError(
                    f"packet {index}: authentication failed", packet_index=index
                ) from exc
            decrypt_ms = _ms(time.perf_counter() - t0)
            if plain != make_packet(seed, index, size):
                raise IntegrityError(f"packet {index}: payload mismatch", packet_index=index)
            result.records.append(PacketRecord(
                packet_index=index,
                encrypt_ms=env.meta.server_encrypt_ms,
                decrypt_ms=decrypt_ms,
                bytes=len(raw),
                server_process_ms=env.meta.server_process_ms,
                roundtrip_ms=roundtrip_ms,
            ))
            result.transfer_bytes += len(raw)
            result.server_process_ms += env.meta.server_process_ms
    finally:
        if own_session:
            http.close()
    result.client_process_ms = _ms(time.perf_counter() - start)
    return result


def fetch_json(server_url: str, path: str, timeout: float = 10.0) -> dict:
    try:
        resp = requests.get(server_url.rstrip("/") + path, timeout=timeout)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise TransportError(f"GET {path}: {exc}") from exc
    return resp.json()
