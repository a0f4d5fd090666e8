"""World-tree statistics: ensembles of cascade draws and their order statistics.

Two ensemble sources produce the neuron counts ``X`` of a world tree:

* ``exact``: every point of the tree is enumerated by the branch engine;
* ``mc``: virtual points are sampled directly from the cascade law, each
  point's age drawn from the depth law of the tree. Cascades at distinct
  points are independent, which is what licenses this shortcut.

A continuous Pareto(1) reference (``P(X > x) = 1/x``) stands in for the
idealised power law when checking the separation of the top two draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy import stats

from . import kernels
from .addressing import ModelParams, derive_value
from .branching import check_properties, evolve
from .errors import CapacityError, ConfigError, InputError, InvariantError, RangeError

MC_CHUNK = 1 << 20


def world_tree_size(B: int, T: int, max_bits: int | None = None) -> int:
    """Number of orbital points on a world tree of height ``T``: ``(B**(T+1) - 1) / (B - 1)``."""
    if B < 2:
        raise ConfigError("B", "branching requires B >= 2")
    if T < 0:
        raise ConfigError("T", "must be >= 0")
    n = (B ** (T + 1) - 1) // (B - 1)
    if max_bits is not None and n >= 1 << max_bits:
        raise RangeError(f"world tree of B={B}, T={T} has more than 2**{max_bits} points")
    return n


def threshold_levels(L: int) -> np.ndarray:
    """CCDF thresholds ``2**(l+1) - 2`` for ``l = 0..L`` (clipped to stay inside int64)."""
    return np.array([(1 << (l + 1)) - 2 for l in range(min(L, 60) + 1)], dtype=np.int64)


# ---------------------------------------------------------------- ensembles

@dataclass(frozen=True)
class PointRecord:
    point_id: int
    age: int
    generations: int
    neurons: int
    capped: bool


def exact_records(params: ModelParams, *, check: bool = False) -> Iterator[PointRecord]:
    """Every point of the world tree in level order; children ordered by (parent, branch).

    With ``check`` the branch properties are verified after every step.
    """
    N = world_tree_size(params.B, params.T)
    if N > params.branch_cap:
        raise CapacityError(f"exact tree of {N} points exceeds branch_cap={params.branch_cap}")
    pid = 0
    for s in evolve(params, params.T):
        if check:
            rep = check_properties(s, params)
            if not rep:
                raise InvariantError(
                    f"property {rep.property} fails on branch {rep.branch_index} at age {s.global_age}: {rep.detail}"
                )
        for b in s.branches:
            o = b.cascade_log[-1] if b.cascade_log else None
            if o is None:
                yield PointRecord(pid, s.global_age, 0, 0, False)
            else:
                yield PointRecord(pid, s.global_age, o.generations_survived, o.neurons_activated, o.capped)
            pid += 1


def mc_records(params: ModelParams, N: int, *, fixed_age: int = -1, start: int = 0) -> Iterator[PointRecord]:
    for lo in range(start, start + N, MC_CHUNK):
        n = min(MC_CHUNK, start + N - lo)
        ages, gens, xs, caps = kernels.mc_cascades(
            params.seed, lo, n, B=params.B, T=params.T, W=params.W,
            L=params.max_generation, fixed_age=fixed_age,
        )
        for i in range(n):
            yield PointRecord(lo + i, int(ages[i]), int(gens[i]), int(xs[i]), bool(caps[i]))


def mc_arrays(params: ModelParams, N: int, *, fixed_age: int = -1, start: int = 0):
    """``(ages, generations, neurons, capped)`` arrays for ``N`` virtual points."""
    return kernels.mc_cascades(
        params.seed, start, N, B=params.B, T=params.T, W=params.W,
        L=params.max_generation, fixed_age=fixed_age,
    )


def sample_ensemble(params: ModelParams, N: int | None = None, mode: str = "mc", *,
                    fixed_age: int = -1) -> Iterator[int]:
    """Stream of neuron counts ``X``, one per (actual or virtual) world-tree point."""
    if mode == "exact":
        size = world_tree_size(params.B, params.T)
        if N is not None and N != size:
            raise ConfigError("N", f"exact mode enumerates the whole tree ({size} points)")
        return (r.neurons for r in exact_records(params))
    if mode == "mc":
        if N is None:
            N = world_tree_size(params.B, params.T)
        return (r.neurons for r in mc_records(params, N, fixed_age=fixed_age))
    raise ConfigError("mode", f"unknown ensemble mode {mode!r}")


@dataclass
class StreamStats:
    """Mergeable constant-memory summary of an ensemble."""

    n: int
    x1: int
    x2: int
    thresholds: np.ndarray
    count_gt: np.ndarray
    survive: np.ndarray  # survive[l] = number of cascades with at least l generations
    n_capped: int

    def merge(self, other: "StreamStats") -> "StreamStats":
        x1, x2 = kernels.merge_top_two((self.x1, self.x2), (other.x1, other.x2))
        return StreamStats(
            self.n + other.n, x1, x2, self.thresholds,
            self.count_gt + other.count_gt, self.survive + other.survive,
            self.n_capped + other.n_capped,
        )


def _stream_chunk(args) -> StreamStats:
    params, lo, hi, fixed_age = args
    thr = threshold_levels(params.max_generation)
    x1, x2, cg, sv, nc = kernels.mc_stream_stats(
        params.seed, lo, hi, B=params.B, T=params.T, W=params.W,
        L=params.max_generation, thresholds=thr, fixed_age=fixed_age,
    )
    return StreamStats(hi - lo, x1, x2, thr, cg, sv, nc)


def _pmap(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def mc_stream_stats(params: ModelParams, N: int, *, fixed_age: int = -1, workers: int = 1,
                    chunk: int = 1 << 22) -> StreamStats:
    """Reduce ``N`` virtual points without storing them. Partitioning does not affect the result."""
    if N < 1:
        raise InputError("N must be >= 1")
    tasks = [(params, lo, min(lo + chunk, N), fixed_age) for lo in range(0, N, chunk)]
    parts = _pmap(_stream_chunk, tasks, workers)
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out


# ---------------------------------------------------------------- order statistics

class TopTwo:
    """Streaming maximum and runner-up (ties kept), mergeable."""

    __slots__ = ("x1", "x2", "n")

    def __init__(self):
        self.x1 = self.x2 = None
        self.n = 0

    def push(self, v) -> None:
        self.n += 1
        if self.x1 is None or v > self.x1:
            self.x2, self.x1 = self.x1, v
        elif self.x2 is None or v > self.x2:
            self.x2 = v

    def merge(self, other: "TopTwo") -> "TopTwo":
        out = TopTwo()
        for v in (self.x1, self.x2, other.x1, other.x2):
            if v is not None:
                out.push(v)
        out.n = self.n + other.n
        return out

    def result(self) -> tuple:
        if self.n < 2:
            raise InputError("top_two needs at least two draws")
        return self.x1, self.x2


def top_two(stream: Iterable) -> tuple:
    """``(X1, X2)``: largest and second-largest value of a stream, single pass."""
    if isinstance(stream, np.ndarray):
        if stream.ndim != 1 or stream.shape[0] < 2:
            raise InputError("top_two needs at least two draws")
        return kernels.top_two_array(stream)
    acc = TopTwo()
    for v in stream:
        acc.push(v)
    return acc.result()


@dataclass(frozen=True)
class EnsembleSummary:
    N: int
    X1: float
    X2: float
    gap: float
    tie: bool
    log2N: float
    dominant: bool
    seed: int = 0
    params: ModelParams | None = field(default=None, compare=False)


def summarize(x1, x2, N: int, seed: int = 0, params: ModelParams | None = None) -> EnsembleSummary:
    if x2 > x1:
        raise InputError("X1 must be >= X2")
    gap = x1 - x2
    log2n = math.log2(N)
    # 2**X1 > N * 2**X2  <=>  gap > log2 N; a tie is never dominant
    return EnsembleSummary(N, x1, x2, gap, gap == 0, log2n, gap > 0 and gap > log2n, seed, params)


# ---------------------------------------------------------------- Pareto reference

def pareto_reference_sample(N: int, seed) -> np.ndarray:
    """``N`` iid draws with ``P(X > x) = 1/x`` for ``x >= 1`` (inverse transform)."""
    if N < 1:
        raise InputError("N must be >= 1")
    rng = np.random.default_rng(seed)
    return 1.0 / (1.0 - rng.random(N))


# ---------------------------------------------------------------- experiments

@dataclass(frozen=True)
class GapRow:
    N: int
    rep: int
    gap: float
    gap_over_N: float
    tie: bool
    X1: float
    X2: float


def ensemble_seed(seed: int, N: int, rep: int) -> int:
    return derive_value(seed, "ensemble", (N, rep))


def _gap_task(args) -> GapRow:
    source, N, rep, seed, params = args
    if source == "pareto":
        x1, x2 = kernels.top_two_array(pareto_reference_sample(N, [seed, N, rep]))
    else:
        p = _with_seed(params, ensemble_seed(seed, N, rep))
        st = mc_stream_stats(p, N)
        x1, x2 = st.x1, st.x2
    gap = x1 - x2
    return GapRow(N, rep, gap, gap / N, gap == 0, x1, x2)


def _with_seed(params: ModelParams, seed: int) -> ModelParams:
    from dataclasses import replace

    return replace(params, seed=seed)


def gap_rows(Ns: Iterable[int], reps: int, source: str = "pareto", *, seed: int = 0,
             params: ModelParams | None = None, workers: int = 1) -> list[GapRow]:
    if source not in ("pareto", "cascade"):
        raise ConfigError("source", f"unknown source {source!r}")
    if reps < 1:
        raise ConfigError("reps", "must be >= 1")
    params = params or ModelParams(seed=seed)
    tasks = [(source, int(N), rep, seed, params) for N in Ns for rep in range(reps)]
    for _, N, *_ in tasks:
        if N < 2:
            raise ConfigError("Ns", "ensembles need at least two draws")
    return _pmap(_gap_task, tasks, workers)


@dataclass(frozen=True)
class GapScaling:
    N: int
    median_gap_over_N: float
    tie_fraction: float
    reps: int


def gap_scaling_experiment(Ns: Iterable[int], reps: int, source: str = "pareto", *, seed: int = 0,
                           params: ModelParams | None = None, workers: int = 1) -> list[GapScaling]:
    """Median of ``(X1 - X2) / N`` and the tie fraction for each ensemble size."""
    rows = gap_rows(Ns, reps, source, seed=seed, params=params, workers=workers)
    out = []
    for N in dict.fromkeys(r.N for r in rows):
        sel = [r for r in rows if r.N == N]
        out.append(GapScaling(
            N,
            float(np.median([r.gap_over_N for r in sel])),
            sum(r.tie for r in sel) / len(sel),
            len(sel),
        ))
    return out


def relative_spread(values: Iterable[float]) -> float:
    """``(max - min) / median``, the stability measure of a gap-scaling table."""
    v = np.asarray(list(values), dtype=float)
    return float((v.max() - v.min()) / np.median(v))


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


@dataclass(frozen=True)
class DominanceResult:
    N: int
    reps: int
    fraction: float
    ci_low: float
    ci_high: float
    tie_fraction: float


def dominance_fraction(params: ModelParams | None, N: int, reps: int, source: str = "cascade", *,
                       seed: int | None = None, workers: int = 1) -> DominanceResult:
    """Fraction of ensembles in which ``2**X1 > N * 2**X2``."""
    params = params or ModelParams()
    seed = params.seed if seed is None else seed
    rows = gap_rows([N], reps, source, seed=seed, params=params, workers=workers)
    dom = sum(summarize(r.X1, r.X2, N).dominant for r in rows)
    lo, hi = wilson_interval(dom, len(rows))
    return DominanceResult(N, len(rows), dom / len(rows), lo, hi, sum(r.tie for r in rows) / len(rows))


# ---------------------------------------------------------------- CCDF

@dataclass(frozen=True)
class CcdfTable:
    rows: tuple  # (threshold_n, ccdf, count_gt)
    n_total: int
    slope: float

    @classmethod
    def from_counts(cls, thresholds, count_gt, n_total: int, *, n_min: int = 6,
                    min_count: int = 30, n_max: int | None = None) -> "CcdfTable":
        t = [int(x) for x in thresholds]
        c = [int(x) for x in count_gt]
        keep = [i for i in range(len(t)) if 0 < c[i] < n_total]
        full = [i for i in range(len(t)) if c[i] == n_total]
        if full:
            keep = [full[-1]] + keep
        if not keep:
            keep = [0]
        rows = tuple((t[i], c[i] / n_total, c[i]) for i in keep)
        fit = [(n, p) for n, p, k in rows
               if n >= max(n_min, 1) and k >= min_count and (n_max is None or n <= n_max)]
        if len(fit) >= 2:
            xs, ys = np.log([f[0] for f in fit]), np.log([f[1] for f in fit])
            slope = float(np.polyfit(xs, ys, 1)[0])
        else:
            slope = float("nan")
        return cls(rows, n_total, slope)

    def nonincreasing(self) -> bool:
        ps = [r[1] for r in self.rows]
        return all(a >= b for a, b in zip(ps, ps[1:]))


def unsaturated_limit(min_age: int) -> int:
    """Largest threshold ``2**(l+1) - 2`` below which every generation has its full ``2**l`` records.

    A generation addresses ``min(2**l, a + 1)`` records, so levels up to
    ``l = floor(log2(a + 1))`` follow the pure doubling for every age ``>= min_age``.
    """
    l = (max(min_age, 0) + 1).bit_length() - 1
    return (1 << (l + 1)) - 2


def ccdf_table(draws, *, levels: int = 60, **fit) -> CcdfTable:
    """Empirical ``P(X > n)`` at ``n = 2**(l+1) - 2`` with a log-log slope over the tail."""
    x = np.asarray(list(draws) if not isinstance(draws, np.ndarray) else draws)
    if x.size == 0:
        raise InputError("ccdf_table needs at least one draw")
    thr = threshold_levels(levels)
    xs = np.sort(x)
    counts = x.size - np.searchsorted(xs, thr, side="right")
    return CcdfTable.from_counts(thr, counts, int(x.size), **fit)


def exact_vs_mc_ks(params: ModelParams) -> float:
    """KS p-value between the exact tree's X values and an equally sized MC ensemble."""
    exact = np.fromiter(sample_ensemble(params, mode="exact"), dtype=np.int64)
    mc = mc_arrays(_with_seed(params, derive_value(params.seed, "ks-mc", ())), exact.size)[2]
    return float(stats.ks_2samp(exact, mc).pvalue)


def survival_table(st: StreamStats, upto: int) -> list[tuple]:
    """``(l, empirical P(gen >= l), binomial sigma, 2**-l)`` for ``l = 1..upto``."""
    out = []
    for l in range(1, upto + 1):
        p = 2.0 ** -l
        out.append((l, st.survive[l] / st.n, math.sqrt(p * (1 - p) / st.n), p))
    return out
