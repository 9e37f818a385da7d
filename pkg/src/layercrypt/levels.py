"""Layer stacks: ordered inner-to-outer compositions of ciphers and a MAC.

Wire layout produced by :func:`level_encrypt`:

* each encrypting layer prepends its own IV/nonce to its output, except a
  layer bound to a ``nonce_slot`` (the Admin XChaCha20 layer), whose nonce
  travels in the key set;
* the HMAC layer tags the current ciphertext (encrypt-then-MAC). If it is the
  outermost transforming layer the tag is returned separately, otherwise the
  tag is appended and the outer layers encrypt data and tag together;
* the ECDH layer transforms nothing. It replaces the key of the layer just
  inside it with ``SHA-256(X25519(ephemeral, static))``; the slot of that
  inner layer carries the ephemeral public key.
"""

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

from . import primitives as P
from .errors import ArgumentError, AuthenticationError, KeySlotError, UnknownNameError
from .rng import Rng, system_rng


class SecurityLevel(enum.IntEnum):
    Guest = 1
    Basic = 2
    Advanced = 3
    Admin = 4

    @classmethod
    def parse(cls, name: str) -> "SecurityLevel":
        try:
            return cls[name]
        except KeyError:
            raise UnknownNameError(
                f"unknown security level {name!r}; expected one of "
                f"{[lv.name for lv in cls]}"
            ) from None


class LayerKind(enum.Enum):
    Aes256Cbc = "aes256-cbc"
    AesCtr = "aes-ctr"
    Chacha20 = "chacha20"
    XChacha20 = "xchacha20"
    BlowfishCbc = "blowfish-cbc"
    HmacSha256 = "hmac-sha256"
    EcdhKeyAgreement = "ecdh"


@dataclass(frozen=True)
class _CipherInfo:
    key_len: int
    iv_len: int
    encrypt: object
    decrypt: object


_CIPHERS = {
    LayerKind.Aes256Cbc: _CipherInfo(32, 16, P.aes256_cbc_encrypt, P.aes256_cbc_decrypt),
    LayerKind.AesCtr: _CipherInfo(32, 16, P.aes_ctr_apply, P.aes_ctr_apply),
    LayerKind.Chacha20: _CipherInfo(32, 12, P.chacha20_apply, P.chacha20_apply),
    LayerKind.XChacha20: _CipherInfo(32, 24, P.xchacha20_apply, P.xchacha20_apply),
    LayerKind.BlowfishCbc: _CipherInfo(16, 8, P.blowfish_cbc_encrypt, P.blowfish_cbc_decrypt),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    slot: str
    nonce_slot: Optional[str] = None

    @property
    def encrypts(self) -> bool:
        return self.kind in _CIPHERS

    @property
    def key_len(self) -> int:
        if self.kind in _CIPHERS:
            return _CIPHERS[self.kind].key_len
        return P.KEY_BYTES

    @property
    def iv_len(self) -> int:
        return _CIPHERS[self.kind].iv_len if self.kind in _CIPHERS else 0


# Slot holding the encryptor's ephemeral X25519 private key for ECDH layers.
EPHEMERAL_SUFFIX = "_ephemeral"


@dataclass(frozen=True)
class LayerStack:
    name: str
    layers: tuple

    def __post_init__(self):
        kinds = [layer.kind for layer in self.layers]
        if not self.layers:
            raise ArgumentError("a stack needs at least one layer")
        if kinds.count(LayerKind.HmacSha256) > 1:
            raise ArgumentError("at most one HMAC layer per stack")
        if kinds.count(LayerKind.EcdhKeyAgreement) > 1:
            raise ArgumentError("at most one ECDH layer per stack")
        for i, layer in enumerate(self.layers):
            if layer.kind is LayerKind.EcdhKeyAgreement and (
                i == 0 or not self.layers[i - 1].encrypts
            ):
                raise ArgumentError("ECDH must directly wrap an encrypting layer")

    def __len__(self):
        return len(self.layers)

    @property
    def kinds(self) -> tuple:
        return tuple(layer.kind for layer in self.layers)

    @property
    def level(self) -> Optional[SecurityLevel]:
        try:
            return SecurityLevel[self.name]
        except KeyError:
            return None

    def key_slots(self) -> tuple:
        """Names of every slot a key set for this stack holds, in layer order."""
        slots = []
        for layer in self.layers:
            slots.append(layer.slot)
            if layer.kind is LayerKind.EcdhKeyAgreement:
                slots.append(layer.slot + EPHEMERAL_SUFFIX)
            if layer.nonce_slot:
                slots.append(layer.nonce_slot)
        return tuple(slots)

    def _outermost_transform(self) -> int:
        return max(i for i, layer in enumerate(self.layers)
                   if layer.kind is not LayerKind.EcdhKeyAgreement)

    @property
    def detached_tag(self) -> bool:
        """True when the HMAC layer is outermost, so its tag travels separately."""
        i = self._outermost_transform()
        return self.layers[i].kind is LayerKind.HmacSha256

    def body_length(self, n: int) -> int:
        """Closed-form body length for an ``n``-byte plaintext."""
        length = n
        for i, layer in enumerate(self.layers):
            if layer.kind in (LayerKind.Aes256Cbc, LayerKind.BlowfishCbc):
                block = P.AES_BLOCK if layer.kind is LayerKind.Aes256Cbc else P.BLOWFISH_BLOCK
                length = (length // block + 1) * block
            if layer.encrypts and not layer.nonce_slot:
                length += layer.iv_len
            if layer.kind is LayerKind.HmacSha256 and not self.detached_tag:
                length += P.TAG_BYTES
        return length


def _stack(name, *layers):
    return LayerStack(name, tuple(layers))


_L = LayerSpec
_K = LayerKind

_CANONICAL = {
    SecurityLevel.Guest: _stack("Guest", _L(_K.Aes256Cbc, "key")),
    SecurityLevel.Basic: _stack(
        "Basic", _L(_K.Aes256Cbc, "key_aes256"), _L(_K.AesCtr, "key_aesCtr")
    ),
    SecurityLevel.Advanced: _stack(
        "Advanced",
        _L(_K.Aes256Cbc, "key_aes256"),
        _L(_K.AesCtr, "key_aesCtr"),
        _L(_K.HmacSha256, "key_hmacSha256"),
    ),
    SecurityLevel.Admin: _stack(
        "Admin",
        _L(_K.Aes256Cbc, "key_aes256"),
        _L(_K.AesCtr, "key_aesCtr"),
        _L(_K.HmacSha256, "key_hmacSha256"),
        _L(_K.XChacha20, "key_xchacha20", nonce_slot="nonce"),
    ),
}

_VARIANTS = {
    "blowfish+ctr": _stack(
        "blowfish+ctr", _L(_K.BlowfishCbc, "key_blowfish"), _L(_K.AesCtr, "key_aesCtr")
    ),
    "chacha20+ctr": _stack(
        "chacha20+ctr", _L(_K.Chacha20, "key_chacha20"), _L(_K.AesCtr, "key_aesCtr")
    ),
    "admin-ecdh": _stack(
        "admin-ecdh",
        _L(_K.Aes256Cbc, "key_aes256"),
        _L(_K.AesCtr, "key_aesCtr"),
        _L(_K.EcdhKeyAgreement, "key_ecdh"),
    ),
    "admin-hmac": _stack(
        "admin-hmac",
        _L(_K.Aes256Cbc, "key_aes256"),
        _L(_K.AesCtr, "key_aesCtr"),
        _L(_K.HmacSha256, "key_hmacSha256"),
    ),
    "guest-aes256": _stack("guest-aes256", _L(_K.Aes256Cbc, "key")),
    "guest-blowfish": _stack("guest-blowfish", _L(_K.BlowfishCbc, "key")),
    "guest-chacha20": _stack("guest-chacha20", _L(_K.Chacha20, "key")),
    "guest-ecc": _stack(
        "guest-ecc", _L(_K.Aes256Cbc, "key"), _L(_K.EcdhKeyAgreement, "key_ecdh")
    ),
}

VARIANT_NAMES = tuple(_VARIANTS)


def canonical_stack(level) -> LayerStack:
    if isinstance(level, str):
        level = SecurityLevel.parse(level)
    return _CANONICAL[SecurityLevel(level)]


def variant_stack(name: str) -> LayerStack:
    try:
        return _VARIANTS[name]
    except KeyError:
        raise UnknownNameError(
            f"unknown variant stack {name!r}; expected one of {list(_VARIANTS)}"
        ) from None


def stack_by_name(name: str) -> LayerStack:
    """Canonical level name or variant name."""
    if name in SecurityLevel.__members__:
        return canonical_stack(name)
    return variant_stack(name)


@dataclass(frozen=True)
class LevelKeySet:
    """Named key material for one encryption.

    ``slots`` holds the wire-visible key slots (and the Admin ``nonce``);
    ``ivs`` maps layer index to the fresh IV for in-band layers and is only
    needed by the encryptor.
    """

    slots: Mapping[str, bytes]
    ivs: Mapping[int, bytes] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "slots", MappingProxyType(dict(self.slots)))
        object.__setattr__(self, "ivs", MappingProxyType(dict(self.ivs)))

    def __getitem__(self, slot):
        try:
            return self.slots[slot]
        except KeyError:
            raise KeySlotError(f"key set has no slot {slot!r}") from None

    def __eq__(self, other):
        if not isinstance(other, LevelKeySet):
            return NotImplemented
        return dict(self.slots) == dict(other.slots) and dict(self.ivs) == dict(other.ivs)

    def __hash__(self):
        return hash(tuple(sorted(self.slots.items())))


@dataclass(frozen=True)
class LayeredCiphertext:
    body: bytes
    tag: Optional[bytes] = None
    outer_nonce: Optional[bytes] = None


def keyset_generate(stack: LayerStack, rng: Rng = system_rng) -> LevelKeySet:
    slots = {}
    ivs = {}
    for i, layer in enumerate(stack.layers):
        if layer.kind is LayerKind.EcdhKeyAgreement:
            static = P.kex_generate(rng)
            ephemeral = P.kex_generate(rng)
            slots[layer.slot] = static.private
            slots[layer.slot + EPHEMERAL_SUFFIX] = ephemeral.private
            # the wrapped layer's slot carries the ephemeral public key
            slots[stack.layers[i - 1].slot] = ephemeral.public
            continue
        slots[layer.slot] = rng(layer.key_len)
        if layer.nonce_slot:
            slots[layer.nonce_slot] = rng(layer.iv_len)
        elif layer.encrypts:
            ivs[i] = rng(layer.iv_len)
    return LevelKeySet(slots, ivs)


def _ecdh_owner(stack):
    for i, layer in enumerate(stack.layers):
        if layer.kind is LayerKind.EcdhKeyAgreement:
            return i - 1, layer
    return None, None


def _layer_keys(stack, keys, encrypting):
    out = {}
    for layer in stack.layers:
        if layer.kind is not LayerKind.EcdhKeyAgreement:
            out[layer.slot] = keys[layer.slot]
    owner, ecdh = _ecdh_owner(stack)
    if ecdh is not None:
        static_priv = keys[ecdh.slot]
        if encrypting:
            secret = P.kex_shared(keys[ecdh.slot + EPHEMERAL_SUFFIX], P.kex_public(static_priv))
        else:
            secret = P.kex_shared(static_priv, keys[stack.layers[owner].slot])
        out[stack.layers[owner].slot] = P.kex_derive_key(secret)
    return out


def level_encrypt(stack: LayerStack, keys: LevelKeySet, plaintext: bytes) -> LayeredCiphertext:
    layer_keys = _layer_keys(stack, keys, encrypting=True)
    data = plaintext
    tag = None
    outer_nonce = None
    detached = stack.detached_tag
    for i, layer in enumerate(stack.layers):
        if layer.kind is LayerKind.EcdhKeyAgreement:
            continue
        key = layer_keys[layer.slot]
        if layer.kind is LayerKind.HmacSha256:
            t = P.hmac_sha256_tag(key, data)
            if detached:
                tag = t
            else:
                data = data + t
            continue
        cipher = _CIPHERS[layer.kind]
        if layer.nonce_slot:
            outer_nonce = keys[layer.nonce_slot]
            data = cipher.encrypt(key, outer_nonce, data)
        else:
            try:
                iv = keys.ivs[i]
            except KeyError:
                raise KeySlotError(f"key set has no IV for layer {i}") from None
            data = iv + cipher.encrypt(key, iv, data)
    return LayeredCiphertext(body=data, tag=tag, outer_nonce=outer_nonce)


def level_decrypt(stack: LayerStack, keys: LevelKeySet, ct: LayeredCiphertext) -> bytes:
    layer_keys = _layer_keys(stack, keys, encrypting=False)
    # memoryview slices avoid copying multi-megabyte bodies at every layer
    data = memoryview(ct.body)
    detached = stack.detached_tag
    for layer in reversed(stack.layers):
        if layer.kind is LayerKind.EcdhKeyAgreement:
            continue
        key = layer_keys[layer.slot]
        if layer.kind is LayerKind.HmacSha256:
            if detached:
                tag = ct.tag
                if tag is None:
                    raise AuthenticationError("missing authentication tag")
            else:
                if len(data) < P.TAG_BYTES:
                    raise AuthenticationError("ciphertext too short to hold a tag")
                data, tag = data[:-P.TAG_BYTES], bytes(data[-P.TAG_BYTES:])
            if not P.hmac_sha256_verify(key, data, tag):
                raise AuthenticationError()
            continue
        cipher = _CIPHERS[layer.kind]
        if layer.nonce_slot:
            nonce = ct.outer_nonce if ct.outer_nonce is not None else keys[layer.nonce_slot]
            data = memoryview(cipher.decrypt(key, nonce, data))
        else:
            if len(data) < cipher.iv_len:
                raise ArgumentError("ciphertext shorter than its IV")
            iv, data = bytes(data[:cipher.iv_len]), data[cipher.iv_len:]
            data = memoryview(cipher.decrypt(key, iv, data))
    return _unwrap(data)


def _unwrap(view: memoryview) -> bytes:
    base = view.obj
    if isinstance(base, bytes) and len(base) == view.nbytes:
        return base
    return view.tobytes()
