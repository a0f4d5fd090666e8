"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension ``toyobserver._kernels`` is used when importable;
otherwise the vectorised numpy implementations below take over. Both
produce bit-identical results. ``use_backend`` switches explicitly, which
the benchmarks and the cross-backend tests rely on.

Hash construction (shared by every route)::

    h0 = mix64(seed ^ tag_key)
    h  = mix64(h ^ mix64(x + GOLDEN))   for each index x

``mix64`` is the splitmix64 finaliser.
"""
from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U64 = np.uint64
_LOW32 = _U64(0xFFFFFFFF)
_S32 = _U64(32)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


@lru_cache(maxsize=None)
def tag_key(tag: str) -> int:
    """64-bit key of a stream tag (blake2b, so it is stable across runs and platforms)."""
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def derive_scalar(seed: int, tag: str, indices) -> int:
    """Reference implementation in plain integers."""
    h = _mix((seed & MASK) ^ tag_key(tag))
    for x in indices:
        h = _mix(h ^ _mix((x + GOLDEN) & MASK))
    return h


def mulhi(h: int, n: int) -> int:
    """``floor(h * n / 2**64)``: maps a 64-bit hash uniformly onto ``range(n)``."""
    return (h * n) >> 64


def n_ages(a: int, l: int) -> int:
    """Closed form for the number of distinct ages addressed by generation ``l`` at age ``a``."""
    return 1 << l if (1 << l) <= a else a + 1


# ---------------------------------------------------------------- numpy twins

def _mix_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # wrap-around is the point
        z = (z ^ (z >> _U64(30))) * _U64(_M1)
        z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def _absorb_np(h, x):
    with np.errstate(over="ignore"):
        return _mix_np(h ^ _mix_np(x + _U64(GOLDEN)))


def _mulhi_np(h: np.ndarray, n: int) -> np.ndarray:
    n = _U64(n)
    with np.errstate(over="ignore"):
        return ((h >> _S32) * n + (((h & _LOW32) * n) >> _S32)) >> _S32


def _h0(seed: int, tkey: int) -> np.uint64:
    return _U64(_mix((seed & MASK) ^ tkey))


def _derive_rows_np(seed, tkey, rows):
    h = np.full(rows.shape[0], _h0(seed, tkey), dtype=np.uint64)
    for j in range(rows.shape[1]):
        h = _absorb_np(h, rows[:, j])
    return h


def _n_ages_np(a: np.ndarray, l: int) -> np.ndarray:
    if l < 62:
        return np.where((1 << l) <= a, np.int64(1 << l), a + 1)
    return a + 1


def _sample_depth_np(hbase, B, T):
    n = hbase.shape[0]
    d = np.zeros(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    pending = np.arange(n)
    c = 0
    while pending.size:
        h = _absorb_np(hbase[pending], _U64(c))
        c += 1
        stop = _mulhi_np(h, B) != 0
        done = pending[stop]
        out[done] = T - d[done]
        pending = pending[~stop]
        d[pending] += 1
        d[pending[d[pending] > T]] = 0
    return out


def _mc_cascades_np(seed, tag_depth, tag_coin, start, n, B, T, W, L, fixed_age):
    p = np.arange(start, start + n, dtype=np.int64).astype(np.uint64)
    if fixed_age >= 0:
        ages = np.full(n, fixed_age, dtype=np.int64)
    else:
        ages = _sample_depth_np(_absorb_np(_h0(seed, tag_depth), p), B, T)
    gens = np.zeros(n, dtype=np.int64)
    xs = np.zeros(n, dtype=np.int64)
    caps = np.zeros(n, dtype=np.uint8)
    hc = _absorb_np(_h0(seed, tag_coin), p)
    alive = np.flatnonzero((ages >= 1) & (ages <= T))
    half = W // 2
    for l in range(1, L + 1):
        if not alive.size:
            break
        ok = _mulhi_np(_absorb_np(hc[alive], _U64(l)), W) < _U64(half)
        alive = alive[ok]
        gens[alive] += 1
        xs[alive] += _n_ages_np(ages[alive], l)
    caps[alive] = 1
    return ages, gens, xs, caps


def _mc_stream_stats_np(seed, tag_depth, tag_coin, start, stop, B, T, W, L, fixed_age,
                        thresholds, chunk=1 << 18):
    count_gt = np.zeros(len(thresholds), dtype=np.int64)
    survive = np.zeros(L + 2, dtype=np.int64)
    x1 = x2 = -1
    n_capped = 0
    for lo in range(start, stop, chunk):
        n = min(chunk, stop - lo)
        _, gens, xs, caps = _mc_cascades_np(seed, tag_depth, tag_coin, lo, n, B, T, W, L, fixed_age)
        n_capped += int(caps.sum())
        survive += np.bincount(gens, minlength=L + 2)[::-1].cumsum()[::-1][: L + 2]
        count_gt += (xs[:, None] > thresholds[None, :]).sum(axis=0)
        c1, c2 = _top_two_np(xs) if n >= 2 else (int(xs[0]), -1)
        x1, x2 = merge_top_two((x1, x2), (c1, c2))
    return x1, x2, count_gt, survive, n_capped


def _top_two_np(values):
    if values.shape[0] == 2:
        a, b = values[0], values[1]
        return (a, b) if a >= b else (b, a)
    part = np.partition(values, values.shape[0] - 2)
    return part[-1], part[-2]


def merge_top_two(a, b):
    """Associative merge of two (max, second-max) pairs."""
    vals = sorted((*a, *b), reverse=True)
    return vals[0], vals[1]


# ---------------------------------------------------------------- dispatch

_BACKEND = "compiled" if _compiled is not None else "numpy"


def available_backends() -> list[str]:
    return ["compiled", "numpy"] if _compiled is not None else ["numpy"]


def backend() -> str:
    return _BACKEND


def use_backend(name: str) -> str:
    """Select ``"compiled"`` or ``"numpy"``; returns the previous backend name."""
    global _BACKEND
    if name not in available_backends():
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    prev, _BACKEND = _BACKEND, name
    return prev


def derive(seed: int, tag: str, indices) -> int:
    """Scalar keyed hash through the active backend; equals ``derive_scalar``."""
    if _BACKEND == "compiled":
        return _compiled.derive_seq(seed & MASK, tag_key(tag), indices)
    return derive_scalar(seed, tag, indices)


def mulhi_array(h: np.ndarray, n: int) -> np.ndarray:
    return _mulhi_np(h, n)


def derive_rows(seed: int, tag: str, rows) -> np.ndarray:
    """Hash every row of a 2-D integer array; row ``r`` gives ``derive_scalar(seed, tag, r)``."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError("rows must be two-dimensional")
    if rows.dtype != np.uint64:
        rows = rows.astype(np.int64).astype(np.uint64)
    rows = np.ascontiguousarray(rows)
    tkey = tag_key(tag)
    if _BACKEND == "compiled":
        return _compiled.derive_rows(seed & MASK, tkey, rows)
    return _derive_rows_np(seed, tkey, rows)


def mc_cascades(seed, start, n, *, B, T, W, L, fixed_age=-1):
    """Cascade outcomes for virtual points ``start .. start+n-1``.

    Returns ``(ages, generations, neurons, capped)`` arrays. With
    ``fixed_age < 0`` each point's age is drawn from the depth law of a
    ``B``-ary world tree of height ``T``.
    """
    args = (seed & MASK, tag_key("mc-depth"), tag_key("mc-cascade"), int(start), int(n),
            int(B), int(T), int(W), int(L), int(fixed_age))
    if _BACKEND == "compiled":
        return _compiled.mc_cascades(*args)
    return _mc_cascades_np(*args)


def mc_stream_stats(seed, start, stop, *, B, T, W, L, thresholds, fixed_age=-1):
    """Constant-memory reduction: top two X, counts of X above each threshold,
    counts of survival ``>= l`` for ``l = 0..L+1``, and number of capped cascades."""
    thresholds = np.ascontiguousarray(thresholds, dtype=np.int64)
    args = (seed & MASK, tag_key("mc-depth"), tag_key("mc-cascade"), int(start), int(stop),
            int(B), int(T), int(W), int(L), int(fixed_age), thresholds)
    if _BACKEND == "compiled":
        x1, x2, cg, sv, nc = _compiled.mc_stream_stats(*args)
    else:
        x1, x2, cg, sv, nc = _mc_stream_stats_np(*args)
    return int(x1), int(x2), cg, sv, int(nc)


def top_two_array(values) -> tuple:
    """Largest and second-largest entry of a 1-D array (ties kept)."""
    values = np.ascontiguousarray(values)
    if values.ndim != 1 or values.shape[0] < 2:
        raise ValueError("need a 1-D array with at least two entries")
    if values.dtype.kind in "iu":
        values = values.astype(np.int64, copy=False)
        cast = int
    else:
        values = values.astype(np.float64, copy=False)
        cast = float
    if _BACKEND == "compiled":
        a, b = _compiled.top_two(values)
    else:
        a, b = _top_two_np(values)
    return cast(a), cast(b)
