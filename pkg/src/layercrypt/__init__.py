"""Layered symmetric encryption at four security levels, with an HTTP
encryptor service, a verifying client and a benchmark harness."""

from .errors import (
    AuthenticationError,
    IntegrityError,
    LayercryptError,
    TransportError,
)
from .levels import (
    LayerStack,
    LayeredCiphertext,
    LevelKeySet,
    SecurityLevel,
    canonical_stack,
    keyset_generate,
    level_decrypt,
    level_encrypt,
    stack_by_name,
    variant_stack,
)

__version__ = "0.1.0"

__all__ = [
    "AuthenticationError",
    "IntegrityError",
    "LayerStack",
    "LayercryptError",
    "LayeredCiphertext",
    "LevelKeySet",
    "SecurityLevel",
    "TransportError",
    "canonical_stack",
    "keyset_generate",
    "level_decrypt",
    "level_encrypt",
    "stack_by_name",
    "variant_stack",
]
