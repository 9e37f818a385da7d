"""Injectable randomness.

Every function that needs random bytes takes an ``rng`` callable with the
signature ``rng(n) -> bytes``. Production code passes :func:`os.urandom`;
tests and golden fixtures pass :func:`seeded_rng` so output is reproducible.
"""

import os
import random
from typing import Callable

Rng = Callable[[int], bytes]

system_rng: Rng = os.urandom


def seeded_rng(seed: int) -> Rng:
    """Deterministic byte source. Not cryptographically secure."""
    gen = random.Random(seed)

    def draw(n: int) -> bytes:
        return gen.randbytes(n)

    return draw
