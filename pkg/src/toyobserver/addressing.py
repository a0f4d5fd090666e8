"""Model constants and the fixed pseudo-random structure of the orbit.

Every random choice of the model (branch targets, slots inside a register
subset, cascade witness draws) is a pure function of ``(seed, tag,
indices)``. Nothing is materialised; the same question always gets the
same answer.

Orbital points live in subsets labelled by a register of the last ``T``
branch choices. Jumping from a point with register ``[s1, ..., sT]`` along
branch ``s`` lands in the subset ``[(s2 mod B) + 1, s3, ..., sT, s]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .errors import ConfigError

Register = tuple  # tuple[int, ...], entries in 1..B


@dataclass(frozen=True)
class ModelParams:
    B: int = 2
    W: int = 32
    T: int = 10
    seed: int = 0
    subset_capacity: int = 1 << 32
    max_age: int | None = None
    branch_cap: int = 1 << 24
    compact: bool = False

    def __post_init__(self):
        for name in ("B", "W", "T", "seed", "subset_capacity", "branch_cap"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(name, f"must be an integer, got {getattr(self, name)!r}")
        if self.B < 2:
            raise ConfigError("B", "branching requires B >= 2")
        if self.B >= 1 << 32:
            raise ConfigError("B", "must be below 2**32")
        if self.W < 2 or self.W % 2:
            raise ConfigError("W", "witness-set size must be even and >= 2")
        if self.W >= 1 << 31:
            raise ConfigError("W", "must be below 2**31")
        if self.T < 1:
            raise ConfigError("T", "lifetime must be >= 1")
        if self.T >= 1 << 56:
            raise ConfigError("T", "must be below 2**56 so neuron counts fit 64 bits")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not 1 <= self.subset_capacity < 1 << 64:
            raise ConfigError("subset_capacity", "must be in [1, 2**64)")
        if self.max_age is not None and self.max_age < 1:
            raise ConfigError("max_age", "must be >= 1")
        if self.branch_cap < 1:
            raise ConfigError("branch_cap", "must be >= 1")

    @property
    def max_generation(self) -> int:
        """Generation cap of a cascade: one generation per element of a witness set."""
        return self.W

    @property
    def half(self) -> int:
        return self.W // 2


@dataclass(frozen=True, order=True)
class OrbitalAddress:
    register: Register
    slot: int

    def key(self) -> tuple:
        return (*self.register, self.slot)


@dataclass(frozen=True, order=True)
class WitnessAddress:
    owner: "Address"
    index: int

    def in_half(self, W: int) -> int:
        """1 if the witness belongs to the first-created half, else 2."""
        return 1 if self.index < W // 2 else 2


# micro topologies of the dense oracle address orbital records by plain ints
Address = Union[OrbitalAddress, int]


def address_key(addr: Address) -> tuple:
    if isinstance(addr, int):
        return (addr,)
    return addr.key()


def derive_value(seed: int, stream_tag: str, indices: Iterable[int]) -> int:
    """Counter-based keyed hash: a pure function of its arguments, 64-bit output."""
    return kernels.derive(seed, stream_tag, indices)


def validate_register(register: Sequence[int], params: ModelParams) -> None:
    if len(register) != params.T:
        raise ConfigError("register", f"length {len(register)} != T={params.T}")
    if any(not 1 <= s <= params.B for s in register):
        raise ConfigError("register", f"entries must lie in 1..{params.B}: {tuple(register)}")


def jump_register(register: Register, s: int, B: int) -> Register:
    """Register of the subset reached from ``register`` along branch ``s``.

    The shifted register has its first entry advanced cyclically. When that
    still reproduces the source register (sources of the form
    ``[c+1, c, ..., c]`` with ``s = c``) the first entry is advanced once
    more, so a jump never stays inside one subset.
    """
    shifted = (*register[1:], s)
    first = shifted[0] % B + 1
    new = (first, *shifted[1:])
    if new == tuple(register):
        new = (first % B + 1, *shifted[1:])
    return new


def _slot(seed: int, tag: str, indices, capacity: int) -> int:
    return kernels.mulhi(derive_value(seed, tag, indices), capacity)


class RegisterTopology:
    """Orbital structure of the full model, built on the register scheme."""

    def __init__(self, params: ModelParams):
        self.params = params

    def root(self) -> OrbitalAddress:
        p = self.params
        return OrbitalAddress((1,) * p.T, _slot(p.seed, "root", (), p.subset_capacity))

    def targets(self, k: OrbitalAddress) -> tuple:
        return branch_targets(k, self.params)


def branch_targets(k: OrbitalAddress, params: ModelParams) -> tuple:
    """The ``B`` points the orbit may continue to from ``k``, in branch order ``s = 1..B``."""
    out = []
    for s in range(1, params.B + 1):
        reg = jump_register(k.register, s, params.B)
        slot = _slot(params.seed, "branch", (*k.key(), s), params.subset_capacity)
        out.append(OrbitalAddress(reg, slot))
    return tuple(out)


def witness_halves(k: Address, params_or_W) -> tuple:
    """``(W1, W2)``: first- and second-created halves of the witness set of ``k``."""
    W = params_or_W.W if isinstance(params_or_W, ModelParams) else int(params_or_W)
    if W < 2 or W % 2:
        raise ConfigError("W", "witness-set size must be even and >= 2")
    first = tuple(WitnessAddress(k, i) for i in range(W // 2))
    second = tuple(WitnessAddress(k, i) for i in range(W // 2, W))
    return first, second


def cascade_key(generation: int, records: Iterable[Address]) -> tuple:
    """Canonical integer encoding of a cascade address set: generation, size, sorted record keys."""
    keys = sorted(address_key(r) for r in records)
    flat = [k for key in keys for k in key]
    return (generation, len(keys), *flat)


def cascade_witness_index(seed: int, W: int, g_key: Sequence[int], j: int) -> int:
    return kernels.mulhi(derive_value(seed, "cascade", (*g_key, j)), W)


def draw_cascade_witness(g_key: Sequence[int], j: int, k: Address, params: ModelParams) -> WitnessAddress:
    """Witness of record ``k`` (the ``j``-th element of ``g``, 0-based) probed by cascade set ``g``."""
    return WitnessAddress(k, cascade_witness_index(params.seed, params.W, g_key, j))


def cascade_witness_indices(seed: int, W: int, g_keys) -> np.ndarray:
    """Vectorised draws for a 2-D array whose rows are ``(*g_key, j)``."""
    h = kernels.derive_rows(seed, "cascade", g_keys)
    return kernels.mulhi_array(h, W).astype(np.int64)
