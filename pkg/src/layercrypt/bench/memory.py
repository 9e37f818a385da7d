"""Peak resident memory of a workload run in an isolated child process."""

import contextlib
import logging
import multiprocessing as mp
import os

from ..errors import IntegrityError

log = logging.getLogger(__name__)

try:
    import psutil
except ImportError:  # pragma: no cover - psutil is a declared dependency
    psutil = None

SAMPLE_INTERVAL_S = 0.005  # 200 Hz

# A fixed glibc mmap threshold turns off its dynamic adjustment, so freed
# multi-megabyte buffers go back to the OS and RSS follows live memory
# instead of heap fragmentation.
CHILD_ENV = {"MALLOC_MMAP_THRESHOLD_": "131072"}


def probe_available() -> bool:
    return psutil is not None


def _own_high_water_mark():
    """Peak RSS of this address space in bytes, from ``VmHWM``. Unlike
    ``ru_maxrss`` it is reset by exec, so the spawning parent's footprint
    does not leak into the child's figure. ``None`` without procfs."""
    try:
        with open("/proc/self/status") as fh:
            for line in fh:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    return None


def _child_workload(stack, size_bytes, quantity, retain, seed, conn):
    # imported here so the child pays for its own imports, not the sampler
    from ..levels import keyset_generate, level_decrypt, level_encrypt
    from ..workload import make_packet

    try:
        held = []
        for i in range(quantity):
            plain = make_packet(seed, i, size_bytes)
            keys = keyset_generate(stack)
            ct = level_encrypt(stack, keys, plain)
            if retain:
                held.append((keys, ct))
            else:
                if level_decrypt(stack, keys, ct) != plain:
                    raise IntegrityError("round trip failed", packet_index=i)
            del plain, ct
        for i, (keys, ct) in enumerate(held):
            if level_decrypt(stack, keys, ct) != make_packet(seed, i, size_bytes):
                raise IntegrityError("round trip failed", packet_index=i)
        conn.send(("ok", _own_high_water_mark()))
    except Exception as exc:  # surfaced in the parent
        conn.send(("error", f"{type(exc).__name__}: {exc}"))
    finally:
        conn.close()


@contextlib.contextmanager
def _patched_env(values):
    saved = {k: os.environ.get(k) for k in values}
    os.environ.update(values)
    try:
        yield
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v


def measure_peak_memory(stack, size_bytes: int, quantity: int, retain: bool = True,
                        seed: int = 42, interval: float = SAMPLE_INTERVAL_S):
    """Peak RSS in bytes of a child process that encrypts ``quantity`` packets
    and decrypts them again. Returns ``None`` when no memory probe exists.

    With ``retain`` all ciphertexts are held until every packet is encrypted
    (the server-side batch); otherwise packets are streamed one at a time.
    The result is the larger of the sampled maximum (``interval`` seconds
    between samples) and the child's own kernel high-water mark.
    """
    if not probe_available():
        log.warning("no process memory probe on this platform")
        return None
    ctx = mp.get_context("spawn")
    parent_conn, child_conn = ctx.Pipe(duplex=False)
    proc = ctx.Process(
        target=_child_workload,
        args=(stack, size_bytes, quantity, retain, seed, child_conn),
        daemon=True,
    )
    with _patched_env(CHILD_ENV):
        proc.start()
    child_conn.close()
    peak = 0
    try:
        handle = psutil.Process(proc.pid)
        while proc.is_alive():
            try:
                peak = max(peak, handle.memory_info().rss)
            except psutil.Error:
                break
            if parent_conn.poll(interval):
                break
        status, payload = parent_conn.recv()
    except EOFError:
        proc.join(timeout=30)
        status, payload = "error", f"child exited with code {proc.exitcode}"
    finally:
        proc.join(timeout=30)
        if proc.is_alive():
            proc.kill()
    if status != "ok":
        raise RuntimeError(f"memory workload failed: {payload}")
    if payload:
        peak = max(peak, payload)
    return peak
