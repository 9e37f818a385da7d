"""JSON wire format for requests and encrypted responses.

Response object (keys sorted, compact separators)::

    {"encrypted_data": <b64>, <key slots as b64>...,
     "packet_index": int, "server_encrypt_ms": float, "server_process_ms": float}

The key slots present identify the level. Inner IVs and the Advanced tag ride
inside ``encrypted_data``; the Admin XChaCha20 nonce rides in ``nonce``.

When keys are pre-shared (``keys_on_wire=False``) the secret slots are
dropped, ``test_type`` names the level explicitly and only ``nonce`` remains.
"""

import base64
import binascii
import json
from dataclasses import dataclass
from typing import Optional

from . import primitives as P
from .errors import EncodingError, LengthError, SchemaError
from .levels import LayeredCiphertext, LevelKeySet, SecurityLevel, canonical_stack
from .workload import UNIT_MULTIPLIERS

KEY_MAP = {
    SecurityLevel.Guest: ("key",),
    SecurityLevel.Basic: ("key_aes256", "key_aesCtr"),
    SecurityLevel.Advanced: ("key_aes256", "key_aesCtr", "key_hmacSha256"),
    SecurityLevel.Admin: ("key_aes256", "key_aesCtr", "key_hmacSha256", "key_xchacha20", "nonce"),
}

SLOT_LENGTHS = {
    "key": P.KEY_BYTES,
    "key_aes256": P.KEY_BYTES,
    "key_aesCtr": P.KEY_BYTES,
    "key_hmacSha256": P.KEY_BYTES,
    "key_xchacha20": P.KEY_BYTES,
    "nonce": P.NONCE24,
}

# Slots that are not secret and stay on the wire when keys are pre-shared.
PUBLIC_SLOTS = frozenset({"nonce"})

META_FIELDS = ("server_encrypt_ms", "server_process_ms", "packet_index")

_LEVEL_BY_SLOTS = {frozenset(slots): level for level, slots in KEY_MAP.items()}


@dataclass(frozen=True)
class EnvelopeMeta:
    server_encrypt_ms: float = 0.0
    server_process_ms: float = 0.0
    packet_index: int = 0


@dataclass(frozen=True)
class WireEnvelope:
    level: SecurityLevel
    keys: LevelKeySet
    ciphertext: LayeredCiphertext
    meta: EnvelopeMeta


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(name, text):
    if not isinstance(text, str):
        raise EncodingError(f"field {name!r} must be a base64 string")
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise EncodingError(f"field {name!r} is not valid base64: {exc}") from exc


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def envelope_dict(level, keys: LevelKeySet, ct: LayeredCiphertext,
                  meta: EnvelopeMeta = EnvelopeMeta(), keys_on_wire: bool = True) -> dict:
    level = SecurityLevel.parse(level) if isinstance(level, str) else SecurityLevel(level)
    expected = KEY_MAP[level]
    if set(keys.slots) != set(expected):
        raise SchemaError(
            f"{level.name} needs slots {sorted(expected)}, key set has {sorted(keys.slots)}"
        )
    stack = canonical_stack(level)
    if stack.detached_tag != (ct.tag is not None):
        raise SchemaError(f"{level.name} ciphertext tag presence does not match the stack")
    body = ct.body + ct.tag if ct.tag is not None else ct.body
    out = {"encrypted_data": _b64(body)}
    for slot in expected:
        if keys_on_wire or slot in PUBLIC_SLOTS:
            out[slot] = _b64(keys.slots[slot])
    if not keys_on_wire:
        out["test_type"] = level.name
    out["server_encrypt_ms"] = float(meta.server_encrypt_ms)
    out["server_process_ms"] = float(meta.server_process_ms)
    out["packet_index"] = int(meta.packet_index)
    return out


def encode_envelope(level, keys: LevelKeySet, ct: LayeredCiphertext,
                    meta: EnvelopeMeta = EnvelopeMeta(), keys_on_wire: bool = True) -> str:
    return canonical_json(envelope_dict(level, keys, ct, meta, keys_on_wire))


def decode_envelope(text, shared_keys: Optional[LevelKeySet] = None) -> WireEnvelope:
    """Parse and strictly validate an envelope.

    ``shared_keys`` supplies the secret slots for envelopes produced with
    ``keys_on_wire=False``.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    try:
        obj = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise SchemaError(f"envelope is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("envelope must be a JSON object")

    fields = set(obj)
    missing_meta = [f for f in ("encrypted_data",) + META_FIELDS if f not in fields]
    if missing_meta:
        raise SchemaError(f"envelope missing fields {missing_meta}")
    slot_fields = fields - {"encrypted_data", "test_type"} - set(META_FIELDS)

    if "test_type" in obj:
        try:
            level = SecurityLevel.parse(obj["test_type"])
        except LookupError as exc:
            raise SchemaError(str(exc)) from exc
        public = {s for s in KEY_MAP[level] if s in PUBLIC_SLOTS}
        if slot_fields != public:
            raise SchemaError(
                f"pre-shared {level.name} envelope must carry exactly {sorted(public)}, "
                f"got {sorted(slot_fields)}"
            )
        if shared_keys is None:
            raise SchemaError("envelope omits keys; pre-shared keys required")
    else:
        level = _LEVEL_BY_SLOTS.get(frozenset(slot_fields))
        if level is None:
            raise SchemaError(f"slot set {sorted(slot_fields)} matches no security level")

    slots = {}
    for slot in KEY_MAP[level]:
        if slot in obj:
            value = _unb64(slot, obj[slot])
        else:
            value = shared_keys[slot]
        if len(value) != SLOT_LENGTHS[slot]:
            raise LengthError(
                f"slot {slot!r} decodes to {len(value)} bytes, expected {SLOT_LENGTHS[slot]}"
            )
        slots[slot] = value

    body = _unb64("encrypted_data", obj["encrypted_data"])
    stack = canonical_stack(level)
    if len(body) < stack.body_length(0):
        raise LengthError(
            f"encrypted_data is {len(body)} bytes, {level.name} needs at least "
            f"{stack.body_length(0)}"
        )
    tag = None
    if stack.detached_tag:
        body, tag = body[:-P.TAG_BYTES], body[-P.TAG_BYTES:]
    ct = LayeredCiphertext(body=body, tag=tag, outer_nonce=slots.get("nonce"))

    try:
        meta = EnvelopeMeta(
            server_encrypt_ms=float(obj["server_encrypt_ms"]),
            server_process_ms=float(obj["server_process_ms"]),
            packet_index=int(obj["packet_index"]),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad timing/index field: {exc}") from exc
    return WireEnvelope(level, LevelKeySet(slots), ct, meta)


@dataclass(frozen=True)
class TestRequest:
    test_type: str
    custom_size: int
    unit: str
    packet_quantity: int

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.test_type not in SecurityLevel.__members__:
            raise SchemaError(
                f"test_type must be one of {list(SecurityLevel.__members__)}, "
                f"got {self.test_type!r}"
            )
        if isinstance(self.custom_size, bool) or not isinstance(self.custom_size, int) \
                or self.custom_size < 1:
            raise SchemaError("custom_size must be a positive integer")
        if self.unit not in ("KB", "MB"):
            raise SchemaError("unit must be 'KB' or 'MB'")
        if isinstance(self.packet_quantity, bool) or not isinstance(self.packet_quantity, int) \
                or self.packet_quantity < 1:
            raise SchemaError("packet_quantity must be a positive integer")

    @property
    def level(self) -> SecurityLevel:
        return SecurityLevel[self.test_type]

    def size_bytes(self, units_mode: str = "binary") -> int:
        return self.custom_size * UNIT_MULTIPLIERS[units_mode][self.unit]

    def to_dict(self) -> dict:
        return {
            "test_type": self.test_type,
            "custom_size": self.custom_size,
            "unit": self.unit,
            "packet_quantity": self.packet_quantity,
        }

    @classmethod
    def from_dict(cls, obj) -> "TestRequest":
        if not isinstance(obj, dict):
            raise SchemaError("request must be a JSON object")
        try:
            return cls(obj["test_type"], obj["custom_size"], obj["unit"], obj["packet_quantity"])
        except KeyError as exc:
            raise SchemaError(f"request missing field {exc.args[0]!r}") from None
