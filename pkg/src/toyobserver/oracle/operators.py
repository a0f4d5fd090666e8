"""Evolution factors on the truncated space, dense (matrix-free) and sparse.

The dense backend works on full amplitude vectors. Ageing, witnessing and
the cascade factor are signed permutations of the basis and are applied as
a single gather; orbital branching mixes ``B + 1`` slices of the state
tensor with the branching matrix. Nothing of size ``dim x dim`` is built.

The sparse backend holds ``{digits: amplitude}`` and applies the same
factors basis state by basis state. It reaches spaces far too large to
store densely, as long as the state has small support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..addressing import cascade_key, cascade_witness_index
from ..cascade import generation_ages
from ..errors import InputError
from .space import BLANK, DEFAULT_MAX_DIM, TruncatedSpace

FACTORS = ("age", "orb", "wit1", "wit2", "con")
# right to left: ageing first, second witness half last
FULL_ORDER = ("age", "orb", "wit1", "con", "wit2")


@dataclass(frozen=True)
class BranchingMatrix:
    B: int
    S: np.ndarray

    def deviation(self) -> float:
        """``max |S^dagger S - I|``."""
        return float(np.abs(self.S.conj().T @ self.S - np.eye(self.B + 1)).max())


@lru_cache(maxsize=None)
def _branching(B: int) -> np.ndarray:
    S = np.zeros((B + 1, B + 1), dtype=complex)
    j = np.arange(B)
    F = [np.exp(2j * np.pi * m * j / B) / math.sqrt(B) for m in range(B)]
    S[0, 1] = 1.0
    S[1:, 0] = F[0]
    for n in range(2, B + 1):
        S[1:, n] = F[n - 1]
    S.setflags(write=False)
    return S


def build_branching_matrix(B: int) -> BranchingMatrix:
    """``(B+1) x (B+1)`` unitary sending the all-blank target state to the equal superposition."""
    if B < 2:
        raise InputError("B must be >= 2")
    return BranchingMatrix(B, _branching(B))


# ---------------------------------------------------------------- cascade plan

def _age(d: int) -> int:
    # blank counts as age 0 for the age operator
    return d - 1 if d > BLANK else 0


class CascadePlan:
    """Cascade structure as a function of orbital digits and the age eigenvalue.

    For each generation: the witness digits that must hold for the test to be
    positive, and the neurons rotated when it is. The plan stops at the first
    generation whose age set is not carried by exactly one orbital record per
    age; no projector of that generation can then be positive.
    """

    def __init__(self, space: TruncatedSpace):
        self.space = space
        self._cache = {}

    def generations(self, orb_digits: tuple, A: int) -> list:
        key = (orb_digits, A)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._build(orb_digits, A)
        return hit

    def _build(self, orb_digits, A):
        sp = self.space
        out = []
        for l in range(1, sp.W + 1):
            ages = generation_ages(A, l)
            owner = {}
            ok = True
            for k, d in enumerate(orb_digits):
                if d > BLANK and d - 1 in ages:
                    if d - 1 in owner:
                        ok = False
                        break
                    owner[d - 1] = k
            if not ok or len(owner) != len(ages):
                break
            g = sorted(owner.values())
            g_key = cascade_key(l, g)
            conds, neurons = [], []
            for j, k in enumerate(g):
                i = cascade_witness_index(sp.seed, sp.W, g_key, j)
                conds.append((sp.wit_axis(k, i), orb_digits[k]))
                neurons.append(sp.neuron_of(k, i))
            out.append((tuple(conds), tuple(neurons)))
        return out

    def rotations(self, record_digits) -> np.ndarray:
        """Rotation count per neuron for one record configuration."""
        sp = self.space
        r = np.zeros(sp.n_neurons, dtype=np.int64)
        A = max(_age(d) for d in record_digits)
        if A < 1 or A > sp.T:
            return r
        for conds, neurons in self.generations(tuple(record_digits[: sp.orbital_count]), A):
            if any(record_digits[ax] != want for ax, want in conds):
                break
            for q in neurons:
                r[q] += 1
        return r


def sigma_power(bit: int, r: int) -> tuple:
    """``sigma**r |bit>`` as ``(new_bit, sign)``; sigma: rest -> fire, fire -> -rest."""
    r %= 4
    if r == 0:
        return bit, 1
    if r == 2:
        return bit, -1
    if r == 1:
        return (1, 1) if bit == 0 else (0, -1)
    return (1, -1) if bit == 0 else (0, 1)


# ---------------------------------------------------------------- dense backend

class DenseOracle:
    """Matrix-free dense application of the evolution factors on ``space``."""

    def __init__(self, space: TruncatedSpace, *, max_dim: int = DEFAULT_MAX_DIM, cyclic: bool = True):
        space.check_dim(max_dim)
        self.space = space
        self.cyclic = cyclic
        self.plan = CascadePlan(space)
        self.S = _branching(space.B)
        self._nb = 2 ** space.n_neurons
        self._gathers = {}

    @property
    def dim(self) -> int:
        return self.space.dim

    def _check(self, v):
        v = np.asarray(v)
        if v.shape != (self.dim,):
            raise InputError(f"state has shape {v.shape}, expected ({self.dim},)")
        return v

    # -- signed gathers on configurations

    def _expand(self, src_cfg):
        # config-level source map -> basis-level source map (neurons untouched)
        nb = np.arange(self._nb, dtype=np.int64)
        return (src_cfg[:, None] * self._nb + nb[None, :]).reshape(-1)

    def _gather(self, name):
        g = self._gathers.get(name)
        if g is None:
            g = self._gathers[name] = getattr(self, f"_build_{name}")()
        return g

    def _build_age(self):
        sp = self.space
        D = sp.config_digits
        M = sp.M
        nxt = np.where(D == BLANK, BLANK, D % M + 1).astype(np.int64)
        fwd = self._cfg_index(nxt)
        if not self.cyclic:
            # truncating increment: records at the top age fall off the space
            keep = ~(D == M).any(axis=1)
        else:
            keep = np.ones(len(D), dtype=bool)
        src = np.full(len(D), -1, dtype=np.int64)
        src[fwd[keep]] = np.nonzero(keep)[0]
        return self._expand_src(src), None

    def _expand_src(self, src_cfg):
        full = self._expand(np.where(src_cfg < 0, 0, src_cfg))
        if (src_cfg < 0).any():
            dead = np.repeat(src_cfg < 0, self._nb)
            full[dead] = -1
        return full

    def _cfg_index(self, digits: np.ndarray) -> np.ndarray:
        base = self.space.M + 1
        idx = np.zeros(len(digits), dtype=np.int64)
        for ax in range(digits.shape[1]):
            idx = idx * base + digits[:, ax]
        return idx

    def _build_wit(self, h):
        sp = self.space
        D = sp.config_digits.astype(np.int64)
        new = D.copy()
        for k in range(sp.orbital_count):
            cond = D[:, sp.orb_axis(k)] == 1
            for i in range(sp.W):
                if sp.half(i) != h:
                    continue
                ax = sp.wit_axis(k, i)
                col = D[:, ax]
                sw = np.where(col == BLANK, 1, np.where(col == 1, BLANK, col))
                new[:, ax] = np.where(cond, sw, col)
        # the map is an involution, so it is its own source map
        return self._expand(self._cfg_index(new)), None

    def _build_wit1(self):
        return self._build_wit(1)

    def _build_wit2(self):
        return self._build_wit(2)

    def rotation_table(self) -> np.ndarray:
        """``(n_configs, n_neurons)`` cascade rotation counts, vectorised over witness digits."""
        sp = self.space
        base = sp.M + 1
        n_orb_cfg = base ** sp.orbital_count
        n_wit_cfg = base ** sp.n_witnesses
        D = sp.config_digits
        Wd = D[:n_wit_cfg, sp.orbital_count:]  # witness digits cycle fastest
        wit_age = np.where(Wd > BLANK, Wd.astype(np.int64) - 1, 0).max(axis=1)
        R = np.zeros((sp.n_configs, sp.n_neurons), dtype=np.int64)
        for oc in range(n_orb_cfg):
            orb = tuple(int(x) for x in D[oc * n_wit_cfg, : sp.orbital_count])
            orb_age = max(_age(d) for d in orb)
            A_all = np.maximum(wit_age, orb_age)
            block = R[oc * n_wit_cfg:(oc + 1) * n_wit_cfg]
            for A in range(1, min(sp.T, sp.M - 1) + 1):
                alive = A_all == A
                if not alive.any():
                    continue
                for conds, neurons in self.plan.generations(orb, A):
                    for ax, want in conds:
                        alive &= D[:n_wit_cfg, ax] == want
                    if not alive.any():
                        break
                    for q in neurons:
                        block[alive, q] += 1
        return R

    def _build_con(self):
        sp = self.space
        R = self.rotation_table() % 4
        nn = sp.n_neurons
        bits = np.arange(self._nb, dtype=np.int64)
        # neuron q is bit (nn - 1 - q) of the neuron index
        flip = np.zeros(sp.n_configs, dtype=np.int64)
        for q in range(nn):
            flip |= (R[:, q] & 1) << (nn - 1 - q)
        src_bits = bits[None, :] ^ flip[:, None]
        sign = np.ones((sp.n_configs, self._nb), dtype=np.int8)
        for q in range(nn):
            b = (src_bits >> (nn - 1 - q)) & 1
            r = R[:, q][:, None]
            neg = (r == 2) | ((r == 1) & (b == 1)) | ((r == 3) & (b == 0))
            sign[neg] *= -1
        cfg = np.arange(sp.n_configs, dtype=np.int64)[:, None]
        src = (cfg * self._nb + src_bits).reshape(-1)
        return src, sign.reshape(-1)

    def _apply_gather(self, v, name):
        src, sign = self._gather(name)
        if (src < 0).any():
            out = np.where(src >= 0, v[np.maximum(src, 0)], 0)
        else:
            out = v[src]
        if sign is not None:
            out = out * sign
        return out

    # -- orbital branching on the state tensor

    def _apply_orb(self, v):
        sp = self.space
        out = np.array(v, dtype=complex, copy=True)
        t = out.reshape((sp.M + 1,) * sp.n_records + (self._nb,))
        B = sp.B
        for k in range(sp.orbital_count):
            targets = sp.topology.targets(k)
            views = []
            for n in range(B + 1):
                idx = [slice(None)] * t.ndim
                idx[sp.orb_axis(k)] = 2  # age 1
                for m, tgt in enumerate(targets):
                    idx[sp.orb_axis(tgt)] = 1 if m + 1 == n else BLANK
                views.append(tuple(idx))
            comps = [t[ix].copy() for ix in views]
            for n in range(B + 1):
                t[views[n]] = sum(self.S[n, m] * comps[m] for m in range(B + 1) if self.S[n, m] != 0)
        return out

    def apply(self, v, factor: str):
        v = self._check(v)
        if factor == "full":
            for f in FULL_ORDER:
                v = self.apply(v, f)
            return v
        if factor == "orb":
            return self._apply_orb(v)
        if factor in ("age", "wit1", "wit2", "con"):
            return self._apply_gather(v, factor)
        raise InputError(f"unknown factor {factor!r}")

    def basis_state(self, digits) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.space.index(digits)] = 1.0
        return v


@lru_cache(maxsize=4)
def _dense_for(space: TruncatedSpace, max_dim: int, cyclic: bool) -> DenseOracle:
    return DenseOracle(space, max_dim=max_dim, cyclic=cyclic)


def apply_factor(v, factor: str, space: TruncatedSpace, *, max_dim: int = DEFAULT_MAX_DIM,
                 cyclic: bool = True) -> np.ndarray:
    """Apply one factor (``age``, ``orb``, ``wit1``, ``wit2``, ``con`` or ``full``) to a dense state."""
    return _dense_for(space, max_dim, cyclic).apply(v, factor)


# ---------------------------------------------------------------- sparse backend

class SparseOracle:
    """Same factors on ``{digits: amplitude}`` states."""

    def __init__(self, space: TruncatedSpace, *, cyclic: bool = True):
        self.space = space
        self.cyclic = cyclic
        self.plan = CascadePlan(space)
        self.S = _branching(space.B)
        self.back_transitions = 0  # witness 0 -> blank moves actually taken

    def apply(self, state: dict, factor: str) -> dict:
        if factor == "full":
            for f in FULL_ORDER:
                state = self.apply(state, f)
            return state
        fn = {"age": self._age, "orb": self._orb, "wit1": lambda s: self._wit(s, 1),
              "wit2": lambda s: self._wit(s, 2), "con": self._con}.get(factor)
        if fn is None:
            raise InputError(f"unknown factor {factor!r}")
        return fn(state)

    @staticmethod
    def _add(out, d, a):
        out[d] = out.get(d, 0) + a

    def _age(self, state):
        sp = self.space
        nr, M = sp.n_records, sp.M
        out = {}
        for d, a in state.items():
            if not self.cyclic and any(x == M for x in d[:nr]):
                continue
            new = tuple(x if x == BLANK else x % M + 1 for x in d[:nr]) + d[nr:]
            self._add(out, new, a)
        return out

    def _wit(self, state, h):
        sp = self.space
        out = {}
        for d, a in state.items():
            new = list(d)
            for k in range(sp.orbital_count):
                if d[sp.orb_axis(k)] != 1:
                    continue
                for i in range(sp.W):
                    if sp.half(i) != h:
                        continue
                    ax = sp.wit_axis(k, i)
                    if d[ax] == BLANK:
                        new[ax] = 1
                    elif d[ax] == 1:
                        new[ax] = BLANK
                        self.back_transitions += 1
            self._add(out, tuple(new), a)
        return out

    def _orb(self, state):
        sp = self.space
        B = sp.B
        for k in range(sp.orbital_count):
            targets = [sp.orb_axis(t) for t in sp.topology.targets(k)]
            out = {}
            for d, a in state.items():
                tv = [d[ax] for ax in targets]
                n_src = None
                if d[sp.orb_axis(k)] == 2:
                    if all(x == BLANK for x in tv):
                        n_src = 0
                    elif sorted(tv) == [BLANK] * (B - 1) + [1]:
                        n_src = tv.index(1) + 1
                if n_src is None:
                    self._add(out, d, a)
                    continue
                for n in range(B + 1):
                    c = self.S[n, n_src]
                    if c == 0:
                        continue
                    new = list(d)
                    for m, ax in enumerate(targets):
                        new[ax] = 1 if m + 1 == n else BLANK
                    self._add(out, tuple(new), c * a)
            state = {d: a for d, a in out.items() if a != 0}
        return state

    def _con(self, state):
        sp = self.space
        nr = sp.n_records
        out = {}
        for d, a in state.items():
            r = self.plan.rotations(d[:nr])
            bits = list(d[nr:])
            sign = 1
            for q, rq in enumerate(r):
                bits[q], s = sigma_power(bits[q], int(rq))
                sign *= s
            self._add(out, d[:nr] + tuple(bits), sign * a)
        return out


def sparse_to_dense(state: dict, space: TruncatedSpace) -> np.ndarray:
    v = np.zeros(space.dim, dtype=complex)
    for d, a in state.items():
        v[space.index(d)] += a
    return v


def sparse_norm(state: dict) -> float:
    return math.sqrt(sum(abs(a) ** 2 for a in state.values()))


def phase_of(r: int) -> int:
    """Amplitude factor picked up by ``sigma**r |rest>``."""
    return sigma_power(0, r)[1]
