# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Every function here has a bit-identical numpy twin in kernels.py."""
import numpy as np

from libc.stdint cimport int64_t, uint64_t, uint8_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t LOW32 = 0xFFFFFFFFULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t absorb(uint64_t h, uint64_t x) noexcept nogil:
    return mix64(h ^ mix64(x + GOLDEN))


cdef inline uint64_t mulhi(uint64_t h, uint64_t n) noexcept nogil:
    # floor(h * n / 2**64) for n < 2**32
    return ((h >> 32) * n + (((h & LOW32) * n) >> 32)) >> 32


cdef inline int64_t n_ages(int64_t a, int64_t l) noexcept nogil:
    if l < 62 and (<int64_t>1 << l) <= a:
        return <int64_t>1 << l
    return a + 1


cdef inline int64_t sample_depth(uint64_t hbase, int64_t B, int64_t T) noexcept nogil:
    cdef int64_t d = 0
    cdef uint64_t c = 0
    cdef uint64_t h
    while True:
        h = absorb(hbase, c)
        c += 1
        if mulhi(h, <uint64_t>B) != 0:
            return T - d
        d += 1
        if d > T:
            d = 0


cdef inline void run_one(uint64_t hbase, int64_t a, int64_t T, int64_t W, int64_t L,
                         int64_t* ell, int64_t* x, uint8_t* capped) noexcept nogil:
    cdef int64_t l
    cdef uint64_t half = <uint64_t>(W // 2)
    ell[0] = 0
    x[0] = 0
    capped[0] = 0
    if a < 1 or a > T:
        return
    for l in range(1, L + 1):
        if mulhi(absorb(hbase, <uint64_t>l), <uint64_t>W) >= half:
            return
        ell[0] += 1
        x[0] += n_ages(a, l)
    capped[0] = 1


def derive_rows(uint64_t seed, uint64_t tag_key, const uint64_t[:, :] rows):
    cdef Py_ssize_t n = rows.shape[0], m = rows.shape[1], i, j
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[:] o = out
    cdef uint64_t h0 = mix64(seed ^ tag_key), h
    with nogil:
        for i in range(n):
            h = h0
            for j in range(m):
                h = absorb(h, rows[i, j])
            o[i] = h
    return out


def mc_cascades(uint64_t seed, uint64_t tag_depth, uint64_t tag_coin, int64_t start, int64_t n,
                int64_t B, int64_t T, int64_t W, int64_t L, int64_t fixed_age):
    ages = np.empty(n, dtype=np.int64)
    gens = np.empty(n, dtype=np.int64)
    xs = np.empty(n, dtype=np.int64)
    caps = np.empty(n, dtype=np.uint8)
    cdef int64_t[:] va = ages, vg = gens, vx = xs
    cdef uint8_t[:] vc = caps
    cdef uint64_t hd = mix64(seed ^ tag_depth), hc = mix64(seed ^ tag_coin)
    cdef int64_t i, a
    cdef uint64_t p
    with nogil:
        for i in range(n):
            p = <uint64_t>(start + i)
            if fixed_age >= 0:
                a = fixed_age
            else:
                a = sample_depth(absorb(hd, p), B, T)
            va[i] = a
            run_one(absorb(hc, p), a, T, W, L, &vg[i], &vx[i], &vc[i])
    return ages, gens, xs, caps


def mc_stream_stats(uint64_t seed, uint64_t tag_depth, uint64_t tag_coin, int64_t start, int64_t stop,
                    int64_t B, int64_t T, int64_t W, int64_t L, int64_t fixed_age,
                    const int64_t[:] thresholds):
    """Constant-memory reduction over virtual points [start, stop)."""
    cdef Py_ssize_t nt = thresholds.shape[0], t
    count_gt = np.zeros(nt, dtype=np.int64)
    survive = np.zeros(L + 2, dtype=np.int64)
    cdef int64_t[:] cg = count_gt, sv = survive
    cdef uint64_t hd = mix64(seed ^ tag_depth), hc = mix64(seed ^ tag_coin)
    cdef int64_t i, a, ell = 0, x = 0, k
    cdef uint8_t cap = 0
    cdef int64_t x1 = -1, x2 = -1, n_capped = 0
    cdef uint64_t p
    with nogil:
        for i in range(start, stop):
            p = <uint64_t>i
            if fixed_age >= 0:
                a = fixed_age
            else:
                a = sample_depth(absorb(hd, p), B, T)
            run_one(absorb(hc, p), a, T, W, L, &ell, &x, &cap)
            n_capped += cap
            for k in range(ell + 1):
                sv[k] += 1
            for t in range(nt):
                if x > thresholds[t]:
                    cg[t] += 1
                else:
                    break
            if x > x1:
                x2 = x1
                x1 = x
            elif x > x2:
                x2 = x
    return x1, x2, count_gt, survive, n_capped


ctypedef fused number:
    int64_t
    double


def top_two(const number[:] values):
    cdef Py_ssize_t n = values.shape[0], i
    cdef number x1, x2, v
    x1 = values[0]
    x2 = values[1]
    if x2 > x1:
        x1, x2 = x2, x1
    for i in range(2, n):
        v = values[i]
        if v > x1:
            x2 = x1
            x1 = v
        elif v > x2:
            x2 = v
    return x1, x2


def derive_seq(uint64_t seed, uint64_t tag_key, indices):
    cdef uint64_t h = mix64(seed ^ tag_key)
    for x in indices:
        h = absorb(h, <uint64_t>(x & 0xFFFFFFFFFFFFFFFF))
    return h
