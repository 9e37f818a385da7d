"""Repeat-and-median timing of a layer stack."""

import logging
import statistics
import time

import numpy as np

from ..errors import IntegrityError
from ..levels import LayerStack, keyset_generate, level_decrypt, level_encrypt
from ..rng import Rng, system_rng
from ..workload import make_packet
from .records import BenchRecord

log = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

MIN_ORDERING_REPEATS = 5


def _one_repeat(stack, size_bytes, quantity, rng, seed, first_index):
    """Encrypt then decrypt ``quantity`` packets; returns per-phase totals in ms.

    server phase = payload generation + key generation + encryption;
    client phase = decryption + verification.
    """
    enc = dec = server = client = 0.0
    for q in range(quantity):
        t0 = time.perf_counter()
        plain = make_packet(seed, first_index + q, size_bytes)
        keys = keyset_generate(stack, rng)
        t1 = time.perf_counter()
        ct = level_encrypt(stack, keys, plain)
        t2 = time.perf_counter()
        out = level_decrypt(stack, keys, ct)
        t3 = time.perf_counter()
        if out != plain:
            raise IntegrityError(
                f"{stack.name}: round trip failed for packet {first_index + q}",
                packet_index=first_index + q,
            )
        t4 = time.perf_counter()
        enc += t2 - t1
        dec += t3 - t2
        server += t2 - t0
        client += t4 - t2
    return enc * 1e3, dec * 1e3, client * 1e3, server * 1e3


def time_stack(stack: LayerStack, size_bytes: int, quantity: int = 1, repeats: int = 5,
               rng: Rng = system_rng, seed: int = 42) -> BenchRecord:
    """Median timings over ``repeats`` after one untimed single-packet warm-up.

    Packets are streamed: each one is generated, encrypted, decrypted and
    checked before the next, so memory stays flat in ``quantity``. A failed
    round trip raises before any timing is recorded.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if quantity < 1:
        raise ValueError("quantity must be >= 1")
    _one_repeat(stack, size_bytes, 1, rng, seed, 0)

    samples = {"encrypt_ms": [], "decrypt_ms": [], "client_process_ms": [], "server_process_ms": []}
    for r in range(repeats):
        enc, dec, client, server = _one_repeat(stack, size_bytes, quantity, rng, seed, r * quantity)
        samples["encrypt_ms"].append(enc)
        samples["decrypt_ms"].append(dec)
        samples["client_process_ms"].append(client)
        samples["server_process_ms"].append(server)
    level = stack.level
    rec = BenchRecord(
        stack_name=stack.name,
        level=level.name if level is not None else None,
        size_bytes=size_bytes,
        quantity=quantity,
        repeats=repeats,
        **{name: statistics.median(vals) for name, vals in samples.items()},
    )
    rec.samples = samples
    log.debug("%s %d B x%d: enc %.3f ms dec %.3f ms", stack.name, size_bytes, quantity,
              rec.encrypt_ms, rec.decrypt_ms)
    return rec


def iqr(samples):
    q1, q3 = np.percentile(np.asarray(samples, dtype=float), [25, 75])
    return float(q1), float(q3)


def compare_faster(fast, slow) -> str:
    """Check the claim "``fast`` beats ``slow``" on two timing sample lists.

    ``pass`` needs at least five samples each, a strictly lower median and
    interquartile ranges that do not overlap; the reversed separation is a
    ``fail``; anything else is ``inconclusive``.
    """
    if min(len(fast), len(slow)) < MIN_ORDERING_REPEATS:
        return INCONCLUSIVE
    f_lo, f_hi = iqr(fast)
    s_lo, s_hi = iqr(slow)
    if f_hi < s_lo and statistics.median(fast) < statistics.median(slow):
        return PASS
    if s_hi < f_lo:
        return FAIL
    return INCONCLUSIVE
