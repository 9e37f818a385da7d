import base64
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layercrypt.envelope import (
    KEY_MAP,
    EnvelopeMeta,
    TestRequest,
    decode_envelope,
    encode_envelope,
)
from layercrypt.errors import EncodingError, LengthError, SchemaError
from layercrypt.levels import (
    LevelKeySet,
    SecurityLevel,
    canonical_stack,
    keyset_generate,
    level_decrypt,
    level_encrypt,
)
from layercrypt.rng import seeded_rng
from layercrypt.transport import preshared_keyset

from fixtures.make_golden import GOLDEN_DIR, GOLDEN_PLAINTEXT, golden_envelope
import oracle

LEVELS = [lv.name for lv in SecurityLevel]
META = ("packet_index", "server_encrypt_ms", "server_process_ms")


def _envelope(level, plain=b"hello envelope", seed=1, meta=EnvelopeMeta()):
    stack = canonical_stack(level)
    keys = keyset_generate(stack, seeded_rng(seed))
    ct = level_encrypt(stack, keys, plain)
    return keys, ct, encode_envelope(level, keys, ct, meta)


def test_key_map_matches_wire_names():
    assert KEY_MAP[SecurityLevel.Guest] == ("key",)
    assert KEY_MAP[SecurityLevel.Basic] == ("key_aes256", "key_aesCtr")
    assert KEY_MAP[SecurityLevel.Admin] == (
        "key_aes256", "key_aesCtr", "key_hmacSha256", "key_xchacha20", "nonce")


@pytest.mark.parametrize("level", LEVELS)
def test_envelope_field_set(level):
    _, _, text = _envelope(level)
    fields = set(json.loads(text))
    assert fields == {"encrypted_data", *KEY_MAP[SecurityLevel[level]], *META}


def test_guest_field_set_exact():
    _, _, text = _envelope("Guest")
    assert set(json.loads(text)) == {
        "encrypted_data", "key", "server_encrypt_ms", "server_process_ms", "packet_index"}


@settings(max_examples=40, deadline=None)
@given(level=st.sampled_from(LEVELS), plain=st.binary(max_size=200), seed=st.integers(0, 2**32),
       enc=st.floats(0, 1e6), proc=st.floats(0, 1e6), index=st.integers(0, 10**6))
def test_codec_round_trip(level, plain, seed, enc, proc, index):
    meta = EnvelopeMeta(enc, proc, index)
    keys, ct, text = _envelope(level, plain, seed, meta)
    env = decode_envelope(text)
    assert env.level is SecurityLevel[level]
    assert dict(env.keys.slots) == dict(keys.slots)
    assert env.ciphertext == ct
    assert env.meta == meta
    assert encode_envelope(level, env.keys, env.ciphertext, env.meta) == text
    assert level_decrypt(canonical_stack(level), env.keys, env.ciphertext) == plain


def test_encoding_is_canonical():
    _, _, text = _envelope("Admin")
    assert " " not in text
    assert list(json.loads(text)) == sorted(json.loads(text))


@pytest.mark.parametrize("level", LEVELS)
def test_level_inferred_from_slots(level):
    _, _, text = _envelope(level)
    assert decode_envelope(text).level is SecurityLevel[level]


@pytest.mark.parametrize("level", LEVELS)
def test_golden_envelopes(level):
    path = GOLDEN_DIR / f"{level.lower()}.json"
    frozen = path.read_text().rstrip("\n")
    assert golden_envelope(SecurityLevel[level]) == frozen
    # the fixture decrypts through the hand-written reference too
    obj = json.loads(frozen)
    slots = {k: base64.b64decode(obj[k]) for k in KEY_MAP[SecurityLevel[level]]}
    body = base64.b64decode(obj["encrypted_data"])
    assert oracle.peel_envelope(level, slots, body) == GOLDEN_PLAINTEXT


def _mutate(text, **changes):
    obj = json.loads(text)
    for k, v in changes.items():
        if v is None:
            obj.pop(k)
        else:
            obj[k] = v
    return json.dumps(obj)


def test_extra_field_rejected():
    _, _, text = _envelope("Basic")
    with pytest.raises(SchemaError):
        decode_envelope(_mutate(text, debug="1"))


def test_missing_slot_rejected():
    _, _, text = _envelope("Admin")
    with pytest.raises(SchemaError):
        decode_envelope(_mutate(text, nonce=None))


def test_missing_meta_rejected():
    _, _, text = _envelope("Guest")
    with pytest.raises(SchemaError):
        decode_envelope(_mutate(text, packet_index=None))


def test_mixed_slot_set_rejected():
    _, _, text = _envelope("Guest")
    with pytest.raises(SchemaError):
        decode_envelope(_mutate(text, key_aesCtr=base64.b64encode(bytes(32)).decode()))


def test_truncated_base64_nonce():
    _, _, text = _envelope("Admin")
    nonce = json.loads(text)["nonce"]
    with pytest.raises(EncodingError):
        decode_envelope(_mutate(text, nonce=nonce[:-1]))


def test_non_base64_characters():
    _, _, text = _envelope("Basic")
    with pytest.raises(EncodingError):
        decode_envelope(_mutate(text, key_aes256="!!!!" * 11))


def test_wrong_decoded_length():
    _, _, text = _envelope("Basic")
    with pytest.raises(LengthError):
        decode_envelope(_mutate(text, key_aes256=base64.b64encode(bytes(31)).decode()))


def test_short_body():
    _, _, text = _envelope("Advanced")
    with pytest.raises(LengthError):
        decode_envelope(_mutate(text, encrypted_data=base64.b64encode(bytes(40)).decode()))


def test_not_json():
    with pytest.raises(SchemaError):
        decode_envelope("{not json")
    with pytest.raises(SchemaError):
        decode_envelope("[1, 2]")


def test_slot_level_mismatch_on_encode():
    keys = keyset_generate(canonical_stack("Basic"))
    ct = level_encrypt(canonical_stack("Basic"), keys, b"x")
    with pytest.raises(SchemaError):
        encode_envelope("Guest", keys, ct)


def test_preshared_mode():
    level = SecurityLevel.Admin
    stack = canonical_stack(level)
    psk = b"p" * 32
    shared = preshared_keyset(level, psk, 3)
    fresh = keyset_generate(stack)
    keys = LevelKeySet({**shared.slots, "nonce": fresh["nonce"]}, fresh.ivs)
    ct = level_encrypt(stack, keys, b"no keys on the wire")
    text = encode_envelope(level, keys, ct, keys_on_wire=False)
    obj = json.loads(text)
    assert set(obj) == {"encrypted_data", "nonce", "test_type", *META}
    with pytest.raises(SchemaError):
        decode_envelope(text)
    env = decode_envelope(text, shared_keys=preshared_keyset(level, psk, 3))
    assert level_decrypt(stack, env.keys, env.ciphertext) == b"no keys on the wire"


def test_request_validation():
    assert TestRequest("Admin", 1, "MB", 5).size_bytes() == 1024 ** 2
    assert TestRequest("Guest", 1, "KB", 1).size_bytes("decimal") == 1000
    for bad in (("Root", 1, "MB", 1), ("Guest", 0, "MB", 1), ("Guest", 1, "GB", 1),
                ("Guest", 1, "MB", 0), ("Guest", True, "MB", 1)):
        with pytest.raises(SchemaError):
            TestRequest(*bad)
    req = TestRequest("Basic", 2, "KB", 3)
    assert TestRequest.from_dict(req.to_dict()) == req
    with pytest.raises(SchemaError):
        TestRequest.from_dict({"test_type": "Basic"})


def test_fixture_files_exist():
    assert sorted(p.name for p in Path(GOLDEN_DIR).glob("*.json")) == [
        "admin.json", "advanced.json", "basic.json", "guest.json"]
