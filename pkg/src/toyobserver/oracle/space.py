"""Truncated state space of the brute-force oracle.

Every subsystem is a digit. Records (orbital and witnessing) take values
``0 = blank`` and ``1 + m`` for age ``m`` in ``0..M-1``; neurons take
``0 = rest`` and ``1 = fire``. A basis index is the mixed-radix number
formed by the record digits (orbital records first, then witnesses grouped
by owner) followed by the neuron bits, most significant first.

Two neuron layouts are supported: ``full`` attaches a neuron to every
witnessing record, ``reduced`` attaches one neuron to each orbital record
and lets cascades rotate the neuron of the addressed record instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ConfigError, InputError

BLANK = 0
REST, FIRE = 0, 1
DEFAULT_MAX_DIM = 1 << 22


@dataclass(frozen=True)
class RingTopology:
    """``n`` records on a ring; record ``k`` branches to ``k+1, ..., k+B`` (mod ``n``)."""

    n: int
    B: int

    def __post_init__(self):
        if self.n < self.B + 1:
            raise ConfigError("orbital_count", f"a ring with B={self.B} needs at least {self.B + 1} records")

    def root(self) -> int:
        return 0

    def targets(self, k: int) -> tuple:
        return tuple((k + s) % self.n for s in range(1, self.B + 1))


@dataclass(frozen=True)
class TreeTopology:
    """Complete ``B``-ary tree of the given depth in level order.

    Leaves point back into the first levels, whose records are never blank
    by the time a leaf could branch, so the tree stays loop-free for
    ``depth`` steps.
    """

    B: int
    depth: int

    @property
    def n(self) -> int:
        return (self.B ** (self.depth + 1) - 1) // (self.B - 1)

    def root(self) -> int:
        return 0

    def targets(self, k: int) -> tuple:
        first = k * self.B + 1
        if first < self.n:
            return tuple(range(first, first + self.B))
        return tuple(r for r in range(self.B + 1) if r != k)[: self.B]


@dataclass(frozen=True)
class TruncatedSpace:
    orbital_count: int = 3
    W: int = 2
    M: int = 3
    B: int = 2
    T: int | None = None
    seed: int = 0
    variant: str = "reduced"
    topology: object = None

    def __post_init__(self):
        if self.orbital_count < 1:
            raise ConfigError("orbital_count", "must be >= 1")
        if self.W < 2 or self.W % 2:
            raise ConfigError("W", "witness-set size must be even and >= 2")
        if self.M < 2:
            raise ConfigError("M", "age modulus must be >= 2")
        if self.B < 2:
            raise ConfigError("B", "branching requires B >= 2")
        if self.variant not in ("reduced", "full"):
            raise ConfigError("variant", f"unknown neuron layout {self.variant!r}")
        if self.T is None:
            object.__setattr__(self, "T", self.M - 1)
        if self.topology is None:
            object.__setattr__(self, "topology", RingTopology(self.orbital_count, self.B))
        if self.topology.n != self.orbital_count:
            raise ConfigError("orbital_count", "topology size disagrees with orbital_count")

    # -- layout

    @property
    def n_witnesses(self) -> int:
        return self.orbital_count * self.W

    @property
    def n_records(self) -> int:
        return self.orbital_count + self.n_witnesses

    @property
    def n_neurons(self) -> int:
        return self.orbital_count if self.variant == "reduced" else self.n_witnesses

    @property
    def n_configs(self) -> int:
        return (self.M + 1) ** self.n_records

    @property
    def dim(self) -> int:
        return self.n_configs * 2 ** self.n_neurons

    @property
    def shape(self) -> tuple:
        return (self.M + 1,) * self.n_records + (2,) * self.n_neurons

    def orb_axis(self, k: int) -> int:
        return k

    def wit_axis(self, k: int, i: int) -> int:
        return self.orbital_count + k * self.W + i

    def neuron_of(self, k: int, i: int) -> int:
        """Neuron (0-based among neurons) rotated when witness ``i`` of ``k`` is addressed."""
        return k if self.variant == "reduced" else k * self.W + i

    def half(self, i: int) -> int:
        return 1 if i < self.W // 2 else 2

    # -- basis bijection

    def index(self, digits) -> int:
        if len(digits) != len(self.shape):
            raise InputError(f"expected {len(self.shape)} digits, got {len(digits)}")
        idx = 0
        for d, r in zip(digits, self.shape):
            if not 0 <= d < r:
                raise InputError(f"digit {d} out of range {r}")
            idx = idx * r + int(d)
        return idx

    def digits(self, index: int) -> tuple:
        if not 0 <= index < self.dim:
            raise InputError(f"index {index} outside 0..{self.dim - 1}")
        out = []
        for r in reversed(self.shape):
            index, d = divmod(index, r)
            out.append(d)
        return tuple(reversed(out))

    def preferred_initial_digits(self) -> tuple:
        """Root record and its witnesses at age 0, everything else blank, neurons at rest."""
        k0 = self.topology.root()
        d = [BLANK] * len(self.shape)
        d[self.orb_axis(k0)] = 1
        for i in range(self.W):
            d[self.wit_axis(k0, i)] = 1
        return tuple(d)

    @cached_property
    def config_digits(self) -> np.ndarray:
        """``(n_configs, n_records)`` uint8 table of record digits for every config index."""
        base = self.M + 1
        idx = np.arange(self.n_configs, dtype=np.int64)
        out = np.empty((self.n_configs, self.n_records), dtype=np.uint8)
        for ax in range(self.n_records - 1, -1, -1):
            idx, out[:, ax] = np.divmod(idx, base)
        return out

    def check_dim(self, max_dim: int = DEFAULT_MAX_DIM) -> None:
        from ..errors import CapacityError

        if self.dim > max_dim:
            raise CapacityError(f"oracle dimension {self.dim} exceeds max_dim={max_dim}")


def canonical_space(**overrides) -> TruncatedSpace:
    """Smallest canonical configuration: three records on a ring, B=2, W=2, M=3."""
    kw = dict(orbital_count=3, W=2, M=3, B=2, variant="reduced")
    kw.update(overrides)
    return TruncatedSpace(**kw)


def tree_space(B: int, steps: int, W: int = 2, *, seed: int = 0, variant: str = "reduced",
               T: int | None = None) -> TruncatedSpace:
    """Space on a ``B``-ary tree deep enough for ``steps`` steps, ages modulo ``steps + 2``."""
    topo = TreeTopology(B, max(steps, 1))
    M = steps + 2
    return TruncatedSpace(topo.n, W, M, B, T if T is not None else M - 1, seed, variant, topo)
