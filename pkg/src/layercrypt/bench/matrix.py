"""Named experiment matrices: which stacks, sizes and quantities each runs."""

import logging
from dataclasses import dataclass, replace
from typing import Optional

from ..envelope import TestRequest
from ..errors import TransportError, UnknownNameError
from ..levels import LayerKind, LayerSpec, LayerStack, SecurityLevel, canonical_stack, variant_stack
from ..transport import ServerConfig, fetch_json, run_session, start_background_server
from ..workload import MB_SWEEP, SizeSpec, grid
from .memory import measure_peak_memory
from .records import BenchRecord
from .timing import time_stack

log = logging.getLogger(__name__)

LEVEL_NAMES = tuple(level.name for level in SecurityLevel)

# Early admin-tier stacks built around ChaCha20 or Blowfish, before AES-CTR
# and XChaCha20 took those positions.
_INITIAL_ADMIN = {
    name: LayerStack(name, (
        LayerSpec(LayerKind.Aes256Cbc, "key_aes256"),
        LayerSpec(LayerKind.AesCtr, "key_aesCtr"),
        LayerSpec(LayerKind.HmacSha256, "key_hmacSha256"),
        LayerSpec(kind, slot),
    ))
    for name, kind, slot in (
        ("initial-admin-chacha20", LayerKind.Chacha20, "key_chacha20"),
        ("initial-admin-blowfish", LayerKind.BlowfishCbc, "key_blowfish"),
    )
}

QUICK_MB = (1, 2, 4, 8)
CLOUD_DESK_MB = (1, 2, 4)
CAPACITY_DESK = (100, SizeSpec(1, "MB"))
CAPACITY_FULL = (1000, SizeSpec(20, "MB"))


@dataclass
class BenchConfig:
    seed: int = 42
    repeats: int = 5
    units_mode: str = "binary"
    quick: bool = False
    full_scale: bool = False
    # desk-scale guard: skip cells whose total payload exceeds this
    max_cell_bytes: int = 256 * 1024 ** 2
    server_url: Optional[str] = None
    max_size_mb: int = 64
    retain_packets: bool = True
    sizes: Optional[tuple] = None
    quantities: Optional[tuple] = None


@dataclass(frozen=True)
class Experiment:
    name: str
    kind: str  # "timing", "cloud", "memory" or "capacity"
    stacks: tuple
    grid: str
    description: str = ""
    x_axis: str = "size"


EXPERIMENTS = {
    e.name: e for e in (
        Experiment("initial-model", "timing",
                   ("guest-chacha20", "guest-blowfish", "initial-admin-chacha20",
                    "initial-admin-blowfish"),
                   "mb-sweep", "ChaCha20 vs Blowfish at the guest and admin tiers"),
        Experiment("ctr-substitution", "timing", ("chacha20+ctr", "blowfish+ctr"),
                   "mb-sweep", "ChaCha20 vs Blowfish, each with AES-CTR"),
        Experiment("ecdh-vs-hmac", "timing", ("admin-ecdh", "admin-hmac"),
                   "mb-sweep", "ECDH-keyed CTR vs HMAC-SHA-256 at the admin tier"),
        Experiment("guest-shootout", "timing",
                   ("guest-aes256", "guest-blowfish", "guest-chacha20", "guest-ecc"),
                   "mb-sweep", "single-algorithm guest level"),
        Experiment("quantity-mb", "timing", ("Admin",), "quantity-sweep",
                   "packet quantity vs MB sizes, Admin"),
        Experiment("quantity-kb", "timing", ("Admin",), "kb-sweep",
                   "packet quantity vs KB sizes, Admin"),
        Experiment("cloud-session", "cloud", ("Admin",), "cloud-quantities",
                   "encryptor service + decryptor client"),
        Experiment("memory-probe", "memory", LEVEL_NAMES, "memory-probe",
                   "peak RSS per level", x_axis="quantity"),
        Experiment("capacity-probe", "capacity", ("Admin",), "quantity-sweep",
                   "many packets through the service"),
    )
}

EXPERIMENT_NAMES = tuple(EXPERIMENTS)


def resolve_stack(name: str) -> LayerStack:
    if name in LEVEL_NAMES:
        return canonical_stack(name)
    if name in _INITIAL_ADMIN:
        return _INITIAL_ADMIN[name]
    return variant_stack(name)


def experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise UnknownNameError(
            f"unknown experiment {name!r}; valid: {', '.join(EXPERIMENT_NAMES)}"
        ) from None


def _cells(exp: Experiment, config: BenchConfig):
    g = grid(exp.grid)
    sizes = g.sizes
    quantities = g.quantities
    if exp.kind == "cloud" and not config.full_scale:
        sizes = tuple(SizeSpec(v, "MB") for v in CLOUD_DESK_MB)
    if config.quick and sizes == MB_SWEEP:
        sizes = tuple(SizeSpec(v, "MB") for v in QUICK_MB)
    if config.sizes is not None:
        sizes = tuple(config.sizes)
    if config.quantities is not None:
        quantities = tuple(config.quantities)
    for size in sizes:
        for quantity in quantities:
            nbytes = size.nbytes(config.units_mode)
            if (exp.kind in ("timing", "cloud") and not config.full_scale
                    and nbytes * quantity > config.max_cell_bytes):
                log.info("skip %s %s x%d: above the desk-scale cap (use full scale)",
                         exp.name, size, quantity)
                continue
            yield size, quantity


def capacity_plan(full_scale: bool = False):
    """``(packet_quantity, SizeSpec)`` for the capacity probe."""
    return CAPACITY_FULL if full_scale else CAPACITY_DESK


def _session_record(stack_name, size_bytes, quantity, result) -> BenchRecord:
    return BenchRecord(
        stack_name=stack_name, level=stack_name, size_bytes=size_bytes, quantity=quantity,
        repeats=1,
        encrypt_ms=result.encrypt_ms,
        decrypt_ms=result.decrypt_ms,
        client_process_ms=result.client_process_ms,
        server_process_ms=result.server_process_ms,
    )


def _run_sessions(exp, config, url, cells):
    try:
        fetch_json(url, "/health")
    except TransportError as exc:
        raise TransportError(f"{exp.name} needs a reachable server at {url}: {exc}") from exc
    records = []
    for size, quantity in cells:
        req = TestRequest(exp.stacks[0], size.value, size.unit, quantity)
        log.info("%s: %s x%d", exp.name, size, quantity)
        result = run_session(url, req, config.seed, units_mode=config.units_mode)
        records.append(_session_record(exp.stacks[0], size.nbytes(config.units_mode),
                                       quantity, result))
    return records


def run_matrix(experiment_name: str, config: Optional[BenchConfig] = None) -> list:
    config = config or BenchConfig()
    exp = experiment(experiment_name)
    records = []

    if exp.kind == "timing":
        for size, quantity in _cells(exp, config):
            for stack_name in exp.stacks:
                stack = resolve_stack(stack_name)
                log.info("%s: %s %s x%d", exp.name, stack_name, size, quantity)
                records.append(time_stack(stack, size.nbytes(config.units_mode), quantity,
                                          config.repeats, seed=config.seed))
        return records

    if exp.kind == "memory":
        for size, quantity in _cells(exp, config):
            for stack_name in exp.stacks:
                stack = resolve_stack(stack_name)
                nbytes = size.nbytes(config.units_mode)
                peak = measure_peak_memory(stack, nbytes, quantity,
                                           retain=config.retain_packets, seed=config.seed)
                level = stack.level
                records.append(BenchRecord(
                    stack_name=stack_name, level=level.name if level else None,
                    size_bytes=nbytes, quantity=quantity, repeats=1,
                    peak_rss_bytes=peak, memory_unsupported=peak is None,
                ))
        return records

    if exp.kind == "cloud":
        if not config.server_url:
            raise TransportError(f"{exp.name} needs a server URL (start one with `serve`)")
        return _run_sessions(exp, config, config.server_url, list(_cells(exp, config)))

    # capacity probe: one Admin session, through the given server or a private
    # loopback one
    quantity, size = capacity_plan(config.full_scale)
    if config.sizes is not None:
        size = config.sizes[0]
    if config.quantities is not None:
        quantity = config.quantities[0]
    if config.server_url:
        return _run_sessions(exp, config, config.server_url, [(size, quantity)])
    server_cfg = ServerConfig(seed=config.seed, units_mode=config.units_mode,
                              max_size_mb=max(config.max_size_mb, size.nbytes() // 2 ** 20 + 1))
    server = start_background_server(config=server_cfg)
    try:
        return _run_sessions(exp, replace(config, server_url=server.url), server.url,
                             [(size, quantity)])
    finally:
        server.shutdown()
        server.server_close()
