"""Fixed-size wrappers around the symmetric ciphers, MAC and key agreement.

Every function validates key/IV lengths up front and raises
:class:`~layercrypt.errors.ArgumentError` on mismatch. Ciphers are backed by
OpenSSL through ``cryptography``; HChaCha20 (the XChaCha20 subkey step) is
computed here because OpenSSL does not expose it.
"""

import hashlib
import hmac
import struct
from dataclasses import dataclass

from cryptography.hazmat.decrepit.ciphers.algorithms import Blowfish
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import ArgumentError, DecodeError, KeyExchangeError, PaddingError
from .rng import Rng

KEY_BYTES = 32
BLOWFISH_KEY_BYTES = 16
AES_BLOCK = 16
BLOWFISH_BLOCK = 8
IV16 = 16
IV8 = 8
NONCE12 = 12
NONCE24 = 24
TAG_BYTES = 32


def _check(name, value, size):
    if not isinstance(value, (bytes, bytearray, memoryview)):
        raise ArgumentError(f"{name} must be bytes, got {type(value).__name__}")
    if len(value) != size:
        raise ArgumentError(f"{name} must be {size} bytes, got {len(value)}")


def _cbc_encrypt(algorithm, block, iv, plaintext):
    pad = block - len(plaintext) % block
    padded = b"".join((plaintext, bytes((pad,)) * pad))
    enc = Cipher(algorithm, modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def _cbc_decrypt(algorithm, block, iv, ciphertext):
    if len(ciphertext) == 0 or len(ciphertext) % block:
        raise ArgumentError(
            f"CBC ciphertext length must be a positive multiple of {block}, "
            f"got {len(ciphertext)}"
        )
    dec = Cipher(algorithm, modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    pad = padded[-1]
    if not 1 <= pad <= block or padded[-pad:] != bytes((pad,)) * pad:
        raise PaddingError("invalid PKCS#7 padding")
    return padded[:-pad]


def aes256_cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    """AES-256-CBC with PKCS#7; output length is ``(len(plaintext) // 16 + 1) * 16``."""
    _check("key", key, KEY_BYTES)
    _check("iv", iv, IV16)
    return _cbc_encrypt(algorithms.AES(key), AES_BLOCK, iv, plaintext)


def aes256_cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    _check("key", key, KEY_BYTES)
    _check("iv", iv, IV16)
    return _cbc_decrypt(algorithms.AES(key), AES_BLOCK, iv, ciphertext)


def aes_ctr_apply(key: bytes, iv: bytes, data: bytes) -> bytes:
    """AES-256-CTR keystream XOR. ``iv`` is the full initial counter block,
    incremented as a 128-bit big-endian integer."""
    _check("key", key, KEY_BYTES)
    _check("iv", iv, IV16)
    ctx = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return ctx.update(data) + ctx.finalize()


def blowfish_cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    _check("key", key, BLOWFISH_KEY_BYTES)
    _check("iv", iv, IV8)
    return _cbc_encrypt(Blowfish(key), BLOWFISH_BLOCK, iv, plaintext)


def blowfish_cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    _check("key", key, BLOWFISH_KEY_BYTES)
    _check("iv", iv, IV8)
    return _cbc_decrypt(Blowfish(key), BLOWFISH_BLOCK, iv, ciphertext)


def blowfish_ecb_block(key: bytes, block: bytes) -> bytes:
    """Single-block Blowfish encryption with a variable-length key (4..56
    bytes). Exposed for checking the core cipher against published vectors."""
    _check("block", block, BLOWFISH_BLOCK)
    if not 4 <= len(key) <= 56:
        raise ArgumentError(f"Blowfish key must be 4..56 bytes, got {len(key)}")
    enc = Cipher(Blowfish(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def chacha20_apply(key: bytes, nonce: bytes, data: bytes, counter: int = 0) -> bytes:
    """IETF ChaCha20 (96-bit nonce, 32-bit block counter starting at ``counter``)."""
    _check("key", key, KEY_BYTES)
    _check("nonce", nonce, NONCE12)
    if not 0 <= counter < 2**32:
        raise ArgumentError("counter must fit in 32 bits")
    full_nonce = struct.pack("<I", counter) + bytes(nonce)
    ctx = Cipher(algorithms.ChaCha20(key, full_nonce), mode=None).encryptor()
    return ctx.update(data) + ctx.finalize()


_SIGMA = struct.unpack("<4I", b"expand 32-byte k")
_MASK = 0xFFFFFFFF


def _rotl(v, c):
    return ((v << c) & _MASK) | (v >> (32 - c))


def _quarter(s, a, b, c, d):
    s[a] = (s[a] + s[b]) & _MASK
    s[d] = _rotl(s[d] ^ s[a], 16)
    s[c] = (s[c] + s[d]) & _MASK
    s[b] = _rotl(s[b] ^ s[c], 12)
    s[a] = (s[a] + s[b]) & _MASK
    s[d] = _rotl(s[d] ^ s[a], 8)
    s[c] = (s[c] + s[d]) & _MASK
    s[b] = _rotl(s[b] ^ s[c], 7)


def hchacha20(key: bytes, nonce16: bytes) -> bytes:
    """HChaCha20 subkey derivation: 20 ChaCha rounds without the final
    feed-forward, returning state words 0..3 and 12..15."""
    _check("key", key, KEY_BYTES)
    _check("nonce", nonce16, 16)
    s = list(_SIGMA) + list(struct.unpack("<8I", key)) + list(struct.unpack("<4I", nonce16))
    for _ in range(10):
        _quarter(s, 0, 4, 8, 12)
        _quarter(s, 1, 5, 9, 13)
        _quarter(s, 2, 6, 10, 14)
        _quarter(s, 3, 7, 11, 15)
        _quarter(s, 0, 5, 10, 15)
        _quarter(s, 1, 6, 11, 12)
        _quarter(s, 2, 7, 8, 13)
        _quarter(s, 3, 4, 9, 14)
    return struct.pack("<8I", *(s[0:4] + s[12:16]))


def xchacha20_apply(key: bytes, nonce: bytes, data: bytes, counter: int = 0) -> bytes:
    """XChaCha20: HChaCha20 over the first 16 nonce bytes gives a subkey, then
    ChaCha20 runs with nonce ``0x00000000 || nonce[16:24]``."""
    _check("key", key, KEY_BYTES)
    _check("nonce", nonce, NONCE24)
    subkey = hchacha20(key, bytes(nonce[:16]))
    return chacha20_apply(subkey, b"\x00" * 4 + bytes(nonce[16:]), data, counter)


def hmac_sha256_raw(key: bytes, data: bytes) -> bytes:
    """HMAC-SHA-256 with any key length."""
    return hmac.new(bytes(key), data, hashlib.sha256).digest()


def hmac_sha256_tag(key: bytes, data: bytes) -> bytes:
    _check("key", key, KEY_BYTES)
    return hmac_sha256_raw(key, data)


def hmac_sha256_verify(key: bytes, data: bytes, tag: bytes) -> bool:
    _check("key", key, KEY_BYTES)
    if len(tag) != TAG_BYTES:
        return False
    return hmac.compare_digest(hmac_sha256_raw(key, data), bytes(tag))


@dataclass(frozen=True)
class KexKeyPair:
    private: bytes
    public: bytes


def kex_public(private: bytes) -> bytes:
    _check("private key", private, KEY_BYTES)
    priv = X25519PrivateKey.from_private_bytes(bytes(private))
    return priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


def kex_generate(rng: Rng) -> KexKeyPair:
    private = rng(KEY_BYTES)
    return KexKeyPair(private=private, public=kex_public(private))


def kex_shared(private: bytes, peer_public: bytes) -> bytes:
    """Raw X25519 shared secret."""
    _check("private key", private, KEY_BYTES)
    try:
        peer = X25519PublicKey.from_public_bytes(bytes(peer_public))
    except (ValueError, TypeError) as exc:
        raise DecodeError(f"invalid X25519 public key: {exc}") from exc
    try:
        return X25519PrivateKey.from_private_bytes(bytes(private)).exchange(peer)
    except ValueError as exc:
        raise KeyExchangeError("all-zero shared secret from small-order point") from exc


def kex_derive_key(secret: bytes) -> bytes:
    """SHA-256 of the raw shared secret, used as a 32-byte symmetric key."""
    return hashlib.sha256(secret).digest()
