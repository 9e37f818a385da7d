"""End-to-end acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL/SKIP line in the "acceptance criteria" section of
the pytest terminal summary. Set ``LAYERCRYPT_QUICK=1`` to run the
chacha20+ctr vs blowfish+ctr ordering at 8 MiB instead of 50 MiB.
"""

import json
import random
import statistics
import time
from dataclasses import replace

import pytest

from layercrypt import levels as L
from layercrypt import primitives as P
from layercrypt.bench import memory
from layercrypt.bench.matrix import BenchConfig, capacity_plan, run_matrix
from layercrypt.bench.records import CSV_HEADER, read_csv
from layercrypt.bench.report import write_report
from layercrypt.bench.timing import PASS, compare_faster, iqr, time_stack
from layercrypt.cli import main as cli_main
from layercrypt.envelope import KEY_MAP
from layercrypt.errors import AuthenticationError
from layercrypt.levels import (
    VARIANT_NAMES,
    LayerKind,
    SecurityLevel,
    canonical_stack,
    keyset_generate,
    level_decrypt,
    level_encrypt,
    stack_by_name,
    variant_stack,
)
from layercrypt.rng import seeded_rng
from layercrypt.transport import ServerConfig, start_background_server

import test_primitives as V
from conftest import quick_mode
from fixtures.make_golden import GOLDEN_DIR, golden_envelope
from test_bench import EXACT_HEADER, FIXTURES

pytestmark = pytest.mark.acceptance

MiB = 1024 ** 2
LEVEL_NAMES = [lv.name for lv in SecurityLevel]


def _vector_checks():
    h = bytes.fromhex
    yield "nist cbc", P.aes256_cbc_encrypt(V.NIST_KEY, V.NIST_CBC_IV, V.NIST_PLAIN)[:64] == V.NIST_CBC_CT
    yield "nist ctr", P.aes_ctr_apply(V.NIST_KEY, V.NIST_CTR_IV, V.NIST_PLAIN) == V.NIST_CTR_CT
    yield "rfc8439 keystream", \
        P.chacha20_apply(V.RFC8439_KEY, V.RFC8439_NONCE, bytes(128), 1) == V.RFC8439_KS
    yield "rfc8439 encryption", P.chacha20_apply(
        V.RFC8439_KEY, V.RFC8439_NONCE, V.RFC8439_SUNSCREEN, 1) == V.RFC8439_SUNSCREEN_CT
    yield "rfc8439 zero block", P.chacha20_apply(bytes(32), bytes(12), bytes(64)) == V.RFC8439_ZERO_BLOCK
    yield "hchacha20", P.hchacha20(V.HCHACHA_KEY, V.HCHACHA_NONCE) == V.HCHACHA_OUT
    yield "xchacha20", P.xchacha20_apply(
        V.XCHACHA_KEY, V.XCHACHA_NONCE, bytes(len(V.XCHACHA_KS_PREFIX)), 1) == V.XCHACHA_KS_PREFIX
    for key, plain, cipher in V.BLOWFISH_VECTORS:
        yield f"blowfish {key}", P.blowfish_ecb_block(h(key), h(plain)) == h(cipher)
    for key, data, tag in V.RFC4231:
        yield f"rfc4231 {data[:8]!r}", P.hmac_sha256_raw(key, data) == h(tag)
    yield "rfc7748 scalar", P.kex_shared(V.X25519_SCALAR, V.X25519_U) == V.X25519_OUT
    yield "rfc7748 dh", (P.kex_public(V.ALICE_PRIV) == V.ALICE_PUB
                         and P.kex_public(V.BOB_PRIV) == V.BOB_PUB
                         and P.kex_shared(V.ALICE_PRIV, V.BOB_PUB) == V.SHARED
                         and P.kex_shared(V.BOB_PRIV, V.ALICE_PUB) == V.SHARED)


def test_01_vector_conformance(criterion):
    with criterion(1, "published vectors for every primitive, < 5 s") as note:
        t0 = time.perf_counter()
        results = list(_vector_checks())
        elapsed = time.perf_counter() - t0
        failed = [name for name, ok in results if not ok]
        note["detail"] = f"{len(results) - len(failed)}/{len(results)} vectors in {elapsed:.2f} s"
        assert not failed, f"failed vectors: {failed}"
        assert elapsed < 5.0


def test_02_round_trip_suite(criterion):
    with criterion(2, "round trip, 12 stacks x 7 sizes x 10 seeds, < 60 s") as note:
        sizes = (0, 1, 15, 16, 17, 1024, MiB)
        names = LEVEL_NAMES + list(VARIANT_NAMES)
        t0 = time.perf_counter()
        failures, total = [], 0
        for name in names:
            stack = stack_by_name(name)
            for n in sizes:
                for seed in range(10):
                    rng = seeded_rng(seed * 1000 + n)
                    plain = rng(n)
                    keys = keyset_generate(stack, rng)
                    total += 1
                    if level_decrypt(stack, keys, level_encrypt(stack, keys, plain)) != plain:
                        failures.append((name, n, seed))
        elapsed = time.perf_counter() - t0
        note["detail"] = f"{total - len(failures)}/{total} in {elapsed:.1f} s"
        assert len(names) == 12 and total == 12 * 7 * 10
        assert not failures
        assert elapsed < 60.0


def _spy_inner_layers(monkeypatch, calls):
    for kind in (LayerKind.Aes256Cbc, LayerKind.AesCtr):
        info = L._CIPHERS[kind]

        def spy(key, iv, data, _f=info.decrypt, _k=kind):
            calls.append(_k)
            return _f(key, iv, data)
        monkeypatch.setitem(L._CIPHERS, kind, replace(info, decrypt=spy))


def test_03_tamper_suite(criterion, monkeypatch):
    with criterion(3, "100 single-byte corruptions per Advanced/Admin rejected") as note:
        rng = random.Random(2024)
        summary = []
        for level in ("Advanced", "Admin"):
            stack = canonical_stack(level)
            keys = keyset_generate(stack, seeded_rng(99))
            ct = level_encrypt(stack, keys, seeded_rng(7)(4096))
            parts = ("body", "tag") if ct.tag is not None else ("body", "nonce")
            rejected, leaked = 0, 0
            for _ in range(100):
                part = rng.choice(parts)
                field = {"body": "body", "tag": "tag", "nonce": "outer_nonce"}[part]
                value = bytearray(getattr(ct, field))
                value[rng.randrange(len(value))] ^= rng.randrange(1, 256)
                calls = []
                with monkeypatch.context() as m:
                    _spy_inner_layers(m, calls)
                    try:
                        level_decrypt(stack, keys, replace(ct, **{field: bytes(value)}))
                    except AuthenticationError:
                        rejected += 1
                if calls:
                    leaked += 1
            summary.append(f"{level} {rejected}/100 rejected, {leaked} reached inner layers")
            assert rejected == 100 and leaked == 0, summary[-1]
        note["detail"] = "; ".join(summary)


def test_04_golden_envelopes(criterion):
    with criterion(4, "seeded envelopes byte-match frozen fixtures; slot sets exact"):
        for level in SecurityLevel:
            frozen = (GOLDEN_DIR / f"{level.name.lower()}.json").read_text().rstrip("\n")
            assert golden_envelope(level) == frozen, level.name
            slots = set(json.loads(frozen)) - {"encrypted_data", "server_encrypt_ms",
                                                "server_process_ms", "packet_index"}
            assert slots == set(KEY_MAP[level])
        assert list(KEY_MAP[SecurityLevel.Admin]) == [
            "key_aes256", "key_aesCtr", "key_hmacSha256", "key_xchacha20", "nonce"]


def _ordering(fast, slow, metric):
    return compare_faster(fast.samples[metric], slow.samples[metric])


def _fmt_iqr(rec, metric):
    lo, hi = iqr(rec.samples[metric])
    return f"{statistics.median(rec.samples[metric]):.1f} [{lo:.1f}, {hi:.1f}]"


def test_05_chacha_ctr_beats_blowfish_ctr(criterion):
    size_mb = 8 if quick_mode() else 50
    with criterion(5, f"chacha20+ctr faster than blowfish+ctr at {size_mb} MiB, IQR-separated") \
            as note:
        fast = time_stack(variant_stack("chacha20+ctr"), size_mb * MiB, 1, 5)
        slow = time_stack(variant_stack("blowfish+ctr"), size_mb * MiB, 1, 5)
        enc, dec = _ordering(fast, slow, "encrypt_ms"), _ordering(fast, slow, "decrypt_ms")
        note["detail"] = (
            f"encrypt {enc} ({_fmt_iqr(fast, 'encrypt_ms')} vs {_fmt_iqr(slow, 'encrypt_ms')} ms), "
            f"decrypt {dec} ({_fmt_iqr(fast, 'decrypt_ms')} vs {_fmt_iqr(slow, 'decrypt_ms')} ms)")
        assert enc == PASS and dec == PASS


def test_06_guest_aes_beats_blowfish(criterion):
    with criterion(6, "guest-aes256 median encrypt below guest-blowfish at 50 MiB") as note:
        aes = time_stack(variant_stack("guest-aes256"), 50 * MiB, 1, 5)
        bf = time_stack(variant_stack("guest-blowfish"), 50 * MiB, 1, 5)
        note["detail"] = f"{aes.encrypt_ms:.1f} ms vs {bf.encrypt_ms:.1f} ms"
        assert aes.encrypt_ms < bf.encrypt_ms


@pytest.fixture(scope="module")
def level_sweep():
    """Median timings for every canonical level over the MB sweep, one run."""
    out = {}
    for mb in (1, 5, 10, 20, 50):
        for level in LEVEL_NAMES:
            out[(level, mb)] = time_stack(canonical_stack(level), mb * MiB, 1, 5)
    return out


def test_07_scaling_shape(criterion, level_sweep):
    with criterion(7, "encrypt(50 MiB)/encrypt(5 MiB) in [5, 20]; Admin >= Guest at each size") \
            as note:
        ratios = {lv: level_sweep[(lv, 50)].encrypt_ms / level_sweep[(lv, 5)].encrypt_ms
                  for lv in LEVEL_NAMES}
        below = [mb for mb in (1, 5, 10, 20, 50)
                 if level_sweep[("Admin", mb)].encrypt_ms < level_sweep[("Guest", mb)].encrypt_ms]
        note["detail"] = "ratios " + ", ".join(f"{lv} {r:.2f}" for lv, r in ratios.items())
        if below:
            note["detail"] += f"; Admin below Guest at {below} MiB"
        assert all(5 <= r <= 20 for r in ratios.values())
        assert not below


def test_median_monotone_over_size(level_sweep):
    # at most one inversion per stack, and only by less than twice the noise floor
    sizes = (1, 5, 10, 20, 50)
    for level in LEVEL_NAMES:
        inversions = 0
        for a, b in zip(sizes, sizes[1:]):
            ra, rb = level_sweep[(level, a)], level_sweep[(level, b)]
            if rb.encrypt_ms < ra.encrypt_ms:
                inversions += 1
                noise = max(hi - lo for lo, hi in (iqr(ra.samples["encrypt_ms"]),
                                                   iqr(rb.samples["encrypt_ms"])))
                assert ra.encrypt_ms - rb.encrypt_ms < 2 * noise, (level, a, b)
        assert inversions <= 1, level


def test_08_cloud_session_loopback(criterion):
    with criterion(8, "loopback cloud grid, 3 sizes x 7 quantities verified, < 10 min") as note:
        server = start_background_server(config=ServerConfig())
        try:
            t0 = time.perf_counter()
            records = run_matrix("cloud-session", BenchConfig(server_url=server.url))
            elapsed = time.perf_counter() - t0
        finally:
            server.shutdown()
            server.server_close()
        cells = {(r.size_bytes // MiB, r.quantity) for r in records}
        packets = sum(r.quantity for r in records)
        note["detail"] = f"{len(records)} sessions, {packets} packets verified in {elapsed:.0f} s"
        assert cells == {(mb, q) for mb in (1, 2, 4) for q in (1, 5, 10, 15, 20, 25, 30)}
        for r in records:
            assert r.client_process_ms > 0 and r.server_process_ms > 0
            assert r.client_process_ms >= r.decrypt_ms
        assert len(server.metrics) == packets
        assert elapsed < 600


def test_09_memory_ordering(criterion):
    with criterion(9, "peak RSS Guest <= Basic <= Advanced <= Admin at 20 MiB x 10, 5%") as note:
        if not memory.probe_available():
            note["detail"] = "memory_unsupported"
            pytest.skip("memory_unsupported: no process memory probe on this platform")
        peaks = {lv: memory.measure_peak_memory(canonical_stack(lv), 20 * MiB, 10)
                 for lv in LEVEL_NAMES}
        note["detail"] = ", ".join(f"{lv} {p / MiB:.1f} MiB" for lv, p in peaks.items())
        for lo, hi in zip(LEVEL_NAMES, LEVEL_NAMES[1:]):
            assert peaks[lo] <= peaks[hi] * 1.05, (lo, hi)


def test_10_capacity_probe(criterion):
    with criterion(10, "capacity probe 100 x 1 MiB Admin completes; full scale is 1000 x 20 MiB") \
            as note:
        t0 = time.perf_counter()
        (rec,) = run_matrix("capacity-probe", BenchConfig())
        note["detail"] = f"{rec.quantity} packets of {rec.size_bytes // MiB} MiB in " \
                         f"{time.perf_counter() - t0:.1f} s"
        assert (rec.stack_name, rec.quantity, rec.size_bytes) == ("Admin", 100, MiB)
        q, size = capacity_plan(full_scale=True)
        assert (q, size.nbytes()) == (1000, 20 * MiB)


def test_11_csv_and_report_contract(criterion, tmp_path):
    with criterion(11, "bench CSV header exact; report merges two hosts (golden)"):
        assert cli_main(["bench", "--experiment", "ecdh-vs-hmac", "--quick", "--repeats", "3",
                         "--output-dir", str(tmp_path)]) == 0
        csv_path = tmp_path / "ecdh-vs-hmac.csv"
        assert csv_path.read_text().splitlines()[0] == EXACT_HEADER == CSV_HEADER
        assert {r.stack_name for r in read_csv(csv_path)} == {"admin-ecdh", "admin-hmac"}
        assert (tmp_path / "ecdh-vs-hmac.svg").exists()
        out, _ = write_report([FIXTURES / "host_a.csv", FIXTURES / "host_b.csv"], tmp_path / "rep")
        assert out.read_text() == (FIXTURES / "host_comparison.csv").read_text()
