"""Verification routines built on the oracle backends."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from ..addressing import ModelParams, cascade_key, cascade_witness_index
from ..branching import check_properties, evolve
from ..cascade import generation_ages
from ..errors import CapacityError, InputError
from .operators import FACTORS, DenseOracle, SparseOracle, sigma_power, sparse_norm
from .space import BLANK, REST, DEFAULT_MAX_DIM, TruncatedSpace, canonical_space, tree_space


def random_state(dim: int, rng) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- unitarity

@dataclass(frozen=True)
class UnitarityReport:
    factor: str
    trials: int
    max_norm_dev: float
    max_inner_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_norm_dev < self.tol and self.max_inner_dev < self.tol

    def __bool__(self):
        return self.passed


def unitarity_check(factor: str, trials: int = 100, tol: float = 1e-10, *,
                    space: TruncatedSpace | None = None, oracle: DenseOracle | None = None,
                    seed: int = 0, max_dim: int = DEFAULT_MAX_DIM, cyclic: bool = True) -> UnitarityReport:
    """Norm and inner-product preservation on ``trials`` random state pairs."""
    if oracle is None:
        oracle = DenseOracle(space or canonical_space(), max_dim=max_dim, cyclic=cyclic)
    rng = np.random.default_rng([seed, trials])
    dn = di = 0.0
    for _ in range(trials):
        u, v = random_state(oracle.dim, rng), random_state(oracle.dim, rng)
        Uu, Uv = oracle.apply(u, factor), oracle.apply(v, factor)
        dn = max(dn, abs(np.linalg.norm(Uu) - 1.0), abs(np.linalg.norm(Uv) - 1.0))
        di = max(di, abs(np.vdot(Uu, Uv) - np.vdot(u, v)))
    return UnitarityReport(factor, trials, float(dn), float(di), tol)


def unitarity_suite(trials: int = 100, tol: float = 1e-10, *, space=None, seed: int = 0,
                    max_dim: int = DEFAULT_MAX_DIM) -> list:
    oracle = DenseOracle(space or canonical_space(), max_dim=max_dim)
    return [unitarity_check(f, trials, tol, oracle=oracle, seed=seed) for f in (*FACTORS, "full")]


# ---------------------------------------------------------------- projectors

@dataclass(frozen=True)
class Projector:
    """Age test of one address set ``g`` against one age assignment ``alpha``.

    ``records`` are the orbital records of ``g`` in ascending order, ``witnesses``
    the drawn witness of each and ``alpha`` the tested ages. Positive when every
    drawn witness and its record carry the assigned age and no other orbital
    record carries one of the tested ages.
    """

    l: int
    records: tuple
    witnesses: tuple
    alpha: tuple

    def mask(self, space: TruncatedSpace) -> np.ndarray:
        D = space.config_digits
        ok = np.ones(len(D), dtype=bool)
        tested = {a + 1 for a in self.alpha}
        for k, i, a in zip(self.records, self.witnesses, self.alpha):
            ok &= D[:, space.wit_axis(k, i)] == a + 1
            ok &= D[:, space.orb_axis(k)] == a + 1
        for k in range(space.orbital_count):
            if k not in self.records:
                ok &= ~np.isin(D[:, space.orb_axis(k)], list(tested))
        return np.repeat(ok, 2 ** space.n_neurons)


def projector_family(space: TruncatedSpace, l: int) -> list:
    """Every distinct ``P(g, alpha)`` of generation ``l`` over the ages the space can hold."""
    seen = {}
    for a in range(1, min(space.T, space.M - 1) + 1):
        ages = generation_ages(a, l)
        for g in itertools.combinations(range(space.orbital_count), len(ages)):
            g_key = cascade_key(l, g)
            wit = tuple(cascade_witness_index(space.seed, space.W, g_key, j) for j in range(len(g)))
            for alpha in itertools.permutations(ages):
                p = Projector(l, g, wit, alpha)
                seen.setdefault((g, alpha), p)
    return list(seen.values())


@dataclass(frozen=True)
class ProjectorReport:
    l: int
    n_projectors: int
    n_pairs: int
    max_product_norm: float
    max_idempotence_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_product_norm < self.tol and self.max_idempotence_dev < self.tol

    def __bool__(self):
        return self.passed


def projector_orthogonality_check(l: int = 1, samples: int = 2, *, space: TruncatedSpace | None = None,
                                  tol: float = 1e-12, seed: int = 0, max_pairs: int | None = None,
                                  max_dim: int = DEFAULT_MAX_DIM) -> ProjectorReport:
    """All pairs (or the first ``max_pairs``) of distinct projectors annihilate random states."""
    space = space or canonical_space()
    space.check_dim(max_dim)
    family = projector_family(space, l)
    masks = [p.mask(space) for p in family]
    rng = np.random.default_rng([seed, l])
    states = [random_state(space.dim, rng) for _ in range(samples)]
    prod = idem = 0.0
    pairs = list(itertools.combinations(range(len(family)), 2))
    if max_pairs is not None:
        pairs = pairs[:max_pairs]
    for v in states:
        projected = [np.where(m, v, 0) for m in masks]
        for i, m in enumerate(masks):
            idem = max(idem, float(np.linalg.norm(np.where(m, projected[i], 0) - projected[i])))
        for i, j in pairs:
            prod = max(prod, float(np.linalg.norm(np.where(masks[j], projected[i], 0))),
                       float(np.linalg.norm(np.where(masks[i], projected[j], 0))))
    return ProjectorReport(l, len(family), len(pairs), prod, idem, tol)


# ---------------------------------------------------------------- symbolic agreement

@dataclass(frozen=True)
class ComparisonReport:
    steps: int
    n_branches: int
    support_size: int
    max_amplitude_dev: float
    residual_norm: float
    total_norm: float
    factorised: bool
    max_age_seen: int
    back_transitions: int
    properties_ok: bool
    tol: float
    predicted: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return (self.max_amplitude_dev < self.tol and self.residual_norm < self.tol
                and self.support_size == self.n_branches and self.factorised
                and self.back_transitions == 0 and self.properties_ok)

    def __bool__(self):
        return self.passed


def branch_digits(branch, space: TruncatedSpace) -> tuple:
    """Basis state and amplitude sign of a symbolic branch."""
    d = [BLANK] * len(space.shape)
    for age, k in branch.history:
        d[space.orb_axis(k)] = age + 1
        for i in range(space.W):
            d[space.wit_axis(k, i)] = age + 1
    rot = Counter()
    for w, n in branch.activated.items():
        rot[space.neuron_of(w.owner, w.index)] += n
    sign = 1
    nr = space.n_records
    for q, r in rot.items():
        d[nr + q], s = sigma_power(REST, r)
        sign *= s
    return tuple(d), sign


def compare_with_symbolic(steps: int, params: ModelParams | None = None, tol: float = 1e-9, *,
                          variant: str = "reduced", max_support: int = 1 << 16) -> ComparisonReport:
    """Evolve the preferred initial state with the oracle and match it against the branch engine.

    Uses a tree of micro records deep enough for ``steps`` steps, ages modulo
    ``steps + 2`` and the sparse backend (the tree space is far too large for
    dense vectors, the evolved state is not).
    """
    params = params or ModelParams(B=2, W=2, T=max(steps, 1))
    if steps < 0:
        raise InputError("steps must be >= 0")
    if params.B ** steps > max_support:
        raise CapacityError(f"{params.B ** steps} branches exceed max_support={max_support}")
    space = tree_space(params.B, steps, params.W, seed=params.seed, variant=variant, T=params.T)
    oracle = SparseOracle(space)
    state = {space.preferred_initial_digits(): 1.0 + 0j}
    max_age = 0
    for _ in range(steps):
        state = oracle.apply(state, "full")
        for d in state:
            max_age = max(max_age, max(x - 1 for x in d[: space.n_records]))
    if max_age >= space.M - 1:
        raise AssertionError(f"age {max_age} reached the wraparound boundary of M={space.M}")

    props = True
    s = None
    for s in evolve(params, steps, space.topology):
        props = props and check_properties(s, params).passed
    amp = params.B ** (-steps / 2)
    predicted = {}
    for b in s.branches:
        d, sign = branch_digits(b, space)
        predicted[d] = predicted.get(d, 0) + sign * amp

    dev = max((abs(state.get(d, 0) - a) for d, a in predicted.items()), default=0.0)
    support = {d for d, a in state.items() if abs(a) > tol}
    residual = math.sqrt(sum(abs(a) ** 2 for d, a in state.items() if d not in predicted))
    nr = space.n_records
    per_records = Counter(d[:nr] for d in support)
    factorised = all(c == 1 for c in per_records.values())
    return ComparisonReport(
        steps, len(s.branches), len(support), float(dev), residual, sparse_norm(state),
        factorised, max_age, oracle.back_transitions, props, tol, predicted,
    )


def dense_sparse_agreement(space: TruncatedSpace | None = None, trials: int = 5, support: int = 6,
                           seed: int = 0) -> float:
    """Max deviation between the two backends on random sparse states, over every factor."""
    space = space or canonical_space()
    dense, sparse = DenseOracle(space), SparseOracle(space)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        idx = rng.choice(space.dim, size=support, replace=False)
        amps = rng.standard_normal(support) + 1j * rng.standard_normal(support)
        st = {space.digits(int(i)): complex(a) for i, a in zip(idx, amps)}
        v = np.zeros(space.dim, dtype=complex)
        v[idx] = amps
        for f in (*FACTORS, "full"):
            out = sparse.apply(st, f)
            w = dense.apply(v, f)
            nz = np.nonzero(np.abs(w) > 0)[0]
            keys = {space.index(d): a for d, a in out.items()}
            worst = max(worst, max((abs(w[i] - keys.get(int(i), 0)) for i in nz), default=0.0),
                        max((abs(a - w[i]) for i, a in keys.items()), default=0.0))
    return float(worst)


# ---------------------------------------------------------------- rebasing

@dataclass(frozen=True)
class RebaseReport:
    move_to: int
    transformed: tuple
    basis_changes: tuple
    max_step_dev: float
    max_product_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_step_dev < self.tol and self.max_product_dev < self.tol

    def __bool__(self):
        return self.passed


def _is_unitary(U: np.ndarray, tol: float = 1e-10) -> bool:
    return U.ndim == 2 and U.shape[0] == U.shape[1] and np.allclose(
        U.conj().T @ U, np.eye(U.shape[0]), atol=tol, rtol=0)


def _compose(mats, d):
    P = np.eye(d, dtype=complex)
    for U in mats:
        P = U @ P  # later steps act on the left
    return P


def rebase_demo(step_unitaries, move_to: int, tol: float = 1e-12) -> RebaseReport:
    """Move all the rotation of a step sequence to step ``move_to`` (1-based) by basis changes.

    With ``V_t`` the basis used after step ``t`` (``V_0 = V_n = 1``), step ``t``
    becomes ``V_t U_t V_{t-1}^dagger``. Choosing ``V_t`` as the inverse partial
    product before ``move_to`` and the remaining product after it leaves every
    step trivial except ``move_to``, which carries the whole product.
    """
    mats = [np.asarray(U, dtype=complex) for U in step_unitaries]
    if not mats:
        raise InputError("sequence must be nonempty")
    d = mats[0].shape[0]
    for t, U in enumerate(mats, 1):
        if U.shape != (d, d) or not _is_unitary(U):
            raise InputError(f"step {t} is not a {d}x{d} unitary")
    n = len(mats)
    if not 1 <= move_to <= n:
        raise InputError(f"move_to must lie in 1..{n}")
    P = _compose(mats, d)
    V = [np.eye(d, dtype=complex)]
    for t in range(1, n + 1):
        if t < move_to:
            V.append(_compose(mats[:t], d).conj().T)
        else:
            V.append(_compose(mats[t:], d))
    new = [V[t] @ mats[t - 1] @ V[t - 1].conj().T for t in range(1, n + 1)]
    ideal = [P if t == move_to else np.eye(d) for t in range(1, n + 1)]
    step_dev = max(float(np.abs(a - b).max()) for a, b in zip(new, ideal))
    prod_dev = float(np.abs(_compose(new, d) - P).max())
    return RebaseReport(move_to, tuple(new), tuple(V), step_dev, prod_dev, tol)


def random_unitary(d: int, rng) -> np.ndarray:
    """Haar-random ``d x d`` unitary."""
    return unitary_group.rvs(d, random_state=rng)
