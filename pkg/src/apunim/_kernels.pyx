# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: seeded partition scans and histogram nDFU.

Semantics match apunim._kernels_py exactly; see that module for the contract.
All state lives on the stack or in per-call scratch buffers, so the scan is
safe to run from multiple threads on disjoint item ranges (the GIL is
released for the whole scan).
"""

from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.math cimport NAN

BACKEND_NAME = "c"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t KEY_HIGH = 0xFFFFFFFF00000000ULL
cdef uint64_t IDX_MASK = 0xFFFFFFFFULL


cdef inline uint64_t mix64(uint64_t x) nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline double ndfu_counts(const int64_t* c, int k) nogil:
    # max frequency rise away from the mode / mode frequency, on raw counts
    cdef int64_t peak = 0, best = 0, run_min, rise
    cdef int mode = 0, j
    for j in range(k):
        if c[j] > peak:
            peak = c[j]
            mode = j
    if peak == 0:
        return NAN
    run_min = peak
    for j in range(mode + 1, k):
        rise = c[j] - run_min
        if rise > best:
            best = rise
        if c[j] < run_min:
            run_min = c[j]
    run_min = peak
    for j in range(mode - 1, -1, -1):
        rise = c[j] - run_min
        if rise > best:
            best = rise
        if c[j] < run_min:
            run_min = c[j]
    return (<double> best) / (<double> peak)


cdef inline void siftdown(uint64_t* a, int start, int end) nogil:
    cdef int root = start, child
    cdef uint64_t tmp
    while root * 2 + 1 <= end:
        child = root * 2 + 1
        if child + 1 <= end and a[child] < a[child + 1]:
            child += 1
        if a[root] < a[child]:
            tmp = a[root]
            a[root] = a[child]
            a[child] = tmp
            root = child
        else:
            return


cdef void sort_u64(uint64_t* a, int n) nogil:
    # keys are unique (index in the low bits), so any comparison sort
    # produces the same order as the numpy argsort in the fallback
    cdef int i, j, start, end
    cdef uint64_t v
    if n <= 48:
        for i in range(1, n):
            v = a[i]
            j = i - 1
            while j >= 0 and a[j] > v:
                a[j + 1] = a[j]
                j -= 1
            a[j + 1] = v
        return
    for start in range((n - 2) // 2, -1, -1):
        siftdown(a, start, n - 1)
    for end in range(n - 1, 0, -1):
        v = a[end]
        a[end] = a[0]
        a[0] = v
        siftdown(a, 0, end - 1)


def permutation(uint64_t seed, int iteration, int n):
    """Seeded permutation of range(n); exposed for cross-backend tests."""
    if n <= 0:
        return []
    cdef uint64_t* keys = <uint64_t*> malloc(n * sizeof(uint64_t))
    if keys == NULL:
        raise MemoryError()
    cdef uint64_t iter_seed = seed + (<uint64_t> (iteration + 1)) * GOLDEN
    cdef int j
    out = [0] * n
    with nogil:
        for j in range(n):
            keys[j] = (mix64(iter_seed + (<uint64_t> (j + 1)) * GOLDEN) & KEY_HIGH) | (<uint64_t> j)
        sort_u64(keys, n)
    for j in range(n):
        out[j] = <int> (keys[j] & IDX_MASK)
    free(keys)
    return out


def dim_scan_chunk(const int32_t[::1] vals, const int64_t[::1] val_off,
                   const int32_t[::1] ann_group, const int64_t[::1] item_off,
                   const int64_t[:, ::1] sizes, const uint64_t[::1] seeds,
                   Py_ssize_t lo, Py_ssize_t hi,
                   int k_levels, int n_groups, int t, int min_group,
                   double[:, ::1] out_obs, double[:, ::1] out_apr,
                   double[:, ::1] out_rand):
    """Scan items [lo, hi); see apunim._kernels_py.dim_scan_chunk."""
    cdef Py_ssize_t i, a0, a1, a, v, pos
    cdef int n, g, j, it, pg, npg, nq, max_n = 0
    cdef int64_t psize
    cdef uint64_t iter_seed, state
    cdef double nd, score_acc, score
    cdef bint any_qual

    for i in range(lo, hi):
        if item_off[i + 1] - item_off[i] > max_n:
            max_n = <int> (item_off[i + 1] - item_off[i])
    if max_n == 0:
        max_n = 1

    cdef uint64_t* keys = <uint64_t*> malloc(max_n * sizeof(uint64_t))
    cdef int64_t* gk = <int64_t*> malloc(n_groups * k_levels * sizeof(int64_t))
    cdef int64_t* kbuf = <int64_t*> malloc(k_levels * sizeof(int64_t))
    cdef int* present = <int*> malloc(n_groups * sizeof(int))
    cdef int64_t* poff = <int64_t*> malloc((n_groups + 1) * sizeof(int64_t))
    cdef double* apr_acc = <double*> malloc(n_groups * sizeof(double))
    if keys == NULL or gk == NULL or kbuf == NULL or present == NULL or poff == NULL or apr_acc == NULL:
        free(keys); free(gk); free(kbuf); free(present); free(poff); free(apr_acc)
        raise MemoryError()

    with nogil:
        for i in range(lo, hi):
            a0 = item_off[i]
            a1 = item_off[i + 1]
            n = <int> (a1 - a0)
            for g in range(n_groups):
                out_obs[i, g] = NAN
            for g in range(out_apr.shape[1]):
                out_apr[i, g] = NAN
            if n == 0:
                continue

            # real-group histograms and nDFU
            for j in range(n_groups * k_levels):
                gk[j] = 0
            for a in range(a0, a1):
                g = ann_group[a]
                for v in range(val_off[a], val_off[a + 1]):
                    gk[g * k_levels + vals[v]] += 1
            any_qual = 0
            for g in range(n_groups):
                if sizes[i, g] >= min_group:
                    out_obs[i, g] = ndfu_counts(gk + g * k_levels, k_levels)
                    any_qual = 1
            if not any_qual:
                continue  # no qualifying pseudo-group either: item unavailable

            npg = 0
            poff[0] = 0
            for g in range(n_groups):
                if sizes[i, g] > 0:
                    present[npg] = g
                    poff[npg + 1] = poff[npg] + sizes[i, g]
                    npg += 1
            score_acc = 0.0
            for g in range(n_groups):
                apr_acc[g] = 0.0

            state = seeds[i]
            for it in range(t):
                iter_seed = state + (<uint64_t> (it + 1)) * GOLDEN
                for j in range(n):
                    keys[j] = (mix64(iter_seed + (<uint64_t> (j + 1)) * GOLDEN) & KEY_HIGH) | (<uint64_t> j)
                sort_u64(keys, n)
                score = 0.0
                nq = 0
                for pg in range(npg):
                    psize = poff[pg + 1] - poff[pg]
                    if psize < min_group:
                        continue
                    for j in range(k_levels):
                        kbuf[j] = 0
                    for pos in range(poff[pg], poff[pg + 1]):
                        a = a0 + <Py_ssize_t> (keys[pos] & IDX_MASK)
                        for v in range(val_off[a], val_off[a + 1]):
                            kbuf[vals[v]] += 1
                    nd = ndfu_counts(kbuf, k_levels)
                    score += nd
                    nq += 1
                    g = present[pg]
                    apr_acc[g] += nd
                    out_rand[it, 1 + g] += nd
                score = score / nq
                score_acc += score
                out_rand[it, 0] += score

            out_apr[i, 0] = score_acc / t
            for g in range(n_groups):
                if sizes[i, g] >= min_group:
                    out_apr[i, 1 + g] = apr_acc[g] / t

    free(keys); free(gk); free(kbuf); free(present); free(poff); free(apr_acc)
    return None
