"""Exception hierarchy shared by every layercrypt module."""


class LayercryptError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(LayercryptError, ValueError):
    """Wrong key, IV, nonce or buffer length handed to a primitive."""


class PaddingError(LayercryptError):
    """PKCS#7 padding did not validate after CBC decryption."""


class AuthenticationError(LayercryptError):
    """An HMAC tag did not verify. Raised before any inner layer runs."""

    def __init__(self, message="authentication tag mismatch", packet_index=None):
        super().__init__(message)
        self.packet_index = packet_index


class DecodeError(LayercryptError, ValueError):
    """A public key or other encoded value could not be parsed."""


class KeyExchangeError(LayercryptError):
    """X25519 produced an all-zero shared secret (small-order peer point)."""


class KeySlotError(LayercryptError, KeyError):
    """A layer stack needs a key slot that the key set does not hold."""


class SchemaError(LayercryptError, ValueError):
    """Envelope or request fields do not match the expected schema."""


class EncodingError(LayercryptError, ValueError):
    """A base64 field failed to decode."""


class LengthError(LayercryptError, ValueError):
    """A decoded binary field has the wrong length."""


class UnknownNameError(LayercryptError, LookupError):
    """Unknown stack, grid or experiment name."""


class TransportError(LayercryptError):
    """Network failure or unexpected HTTP status during a session."""

    def __init__(self, message, packet_index=None, status=None):
        super().__init__(message)
        self.packet_index = packet_index
        self.status = status


class IntegrityError(LayercryptError):
    """A decrypted payload differs from the deterministic reference payload."""

    def __init__(self, message, packet_index=None):
        super().__init__(message)
        self.packet_index = packet_index
