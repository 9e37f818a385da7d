"""Deterministic payloads and the size/quantity grids used by the experiments."""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, UnknownNameError

UNIT_MULTIPLIERS = {
    "binary": {"KB": 1024, "MB": 1024 ** 2},
    "decimal": {"KB": 1000, "MB": 1000 ** 2},
}


@dataclass(frozen=True, order=True)
class SizeSpec:
    value: int
    unit: str

    def __post_init__(self):
        if self.value < 1:
            raise ArgumentError(f"size must be positive, got {self.value}")
        if self.unit not in ("KB", "MB"):
            raise ArgumentError(f"unit must be KB or MB, got {self.unit!r}")

    def nbytes(self, units_mode: str = "binary") -> int:
        return self.value * UNIT_MULTIPLIERS[units_mode][self.unit]

    @property
    def bytes(self) -> int:
        return self.nbytes()

    def __str__(self):
        return f"{self.value} {self.unit}"


def size_bytes(value: int, unit: str, units_mode: str = "binary") -> int:
    return SizeSpec(value, unit).nbytes(units_mode)


def make_packet(seed: int, packet_index: int, size_bytes: int) -> bytes:
    """Pseudorandom payload from a Philox counter generator keyed by
    ``(seed, packet_index)``. Output is serialized little-endian so every
    platform yields the same bytes."""
    if size_bytes < 0:
        raise ArgumentError("size_bytes must be >= 0")
    if not (0 <= seed < 2 ** 64 and 0 <= packet_index < 2 ** 64):
        raise ArgumentError("seed and packet_index must be in [0, 2**64)")
    if size_bytes == 0:
        return b""
    gen = np.random.Philox(key=(seed << 64) | packet_index)
    words = gen.random_raw((size_bytes + 7) // 8)
    return words.astype("<u8", copy=False).tobytes()[:size_bytes]


@dataclass(frozen=True)
class Grid:
    name: str
    sizes: tuple
    quantities: tuple

    def __post_init__(self):
        if not self.sizes or not self.quantities:
            raise ArgumentError(f"grid {self.name!r} must be non-empty")
        byte_sizes = [s.bytes for s in self.sizes]
        if any(b >= a for a, b in zip(byte_sizes[1:], byte_sizes)):
            raise ArgumentError(f"grid {self.name!r} sizes must be strictly increasing")
        if any(q < 1 for q in self.quantities):
            raise ArgumentError("quantities must be positive")


def _mb(*values):
    return tuple(SizeSpec(v, "MB") for v in values)


def _kb(*values):
    return tuple(SizeSpec(v, "KB") for v in values)


MB_SWEEP = _mb(1, 5, 10, 20, 50)
KB_SWEEP = _kb(1, 5, *range(10, 121, 5))


def sweep_grids() -> list:
    return [
        Grid("mb-sweep", MB_SWEEP, (1,)),
        Grid("kb-sweep", KB_SWEEP, (1, 10, 100, 1000)),
        Grid("quantity-sweep", MB_SWEEP, (1, 10, 100, 1000)),
        Grid("cloud-quantities", MB_SWEEP, (1, 5, 10, 15, 20, 25, 30)),
        Grid("memory-probe", _mb(20), (10, 20, 30)),
    ]


def grid(name: str) -> Grid:
    for g in sweep_grids():
        if g.name == name:
            return g
    raise UnknownNameError(f"unknown grid {name!r}")
