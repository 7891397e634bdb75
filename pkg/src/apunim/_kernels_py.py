"""Numpy implementation of the hot kernels (fallback backend).

Mirrors ``apunim._kernels`` (the compiled extension). Integer-derived values
(histograms, nDFU scores, permutations) are bit-identical across the two
backends; float reductions (partition-score means) may differ by ~1e-15
because numpy uses pairwise summation where the C kernel accumulates
sequentially. Each backend on its own is fully deterministic and
thread-count invariant.
"""

from __future__ import annotations

import numpy as np

from .partition import GOLDEN, KEY_HIGH_MASK

BACKEND_NAME = "python"

_GOLDEN = np.uint64(GOLDEN)
_KEY_HIGH = np.uint64(KEY_HIGH_MASK)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def ndfu_counts_batch(counts: np.ndarray) -> np.ndarray:
    """nDFU over the last axis of an integer count array.

    Rows with zero total score NaN. Exact: the score is (max frequency rise
    away from the mode) / (mode frequency) computed on integer counts with a
    single float division.
    """
    c = np.asarray(counts, dtype=np.int64)
    flat = c.reshape(-1, c.shape[-1])
    k = flat.shape[1]
    peak = flat.max(axis=1)
    mode = flat.argmax(axis=1)  # first maximum: lowest-index tie rule
    best = np.zeros(len(flat), dtype=np.int64)
    run_min = peak.copy()
    for j in range(1, k):
        right = mode < j
        rise = flat[:, j] - run_min
        np.maximum(best, np.where(right, rise, best), out=best)
        np.minimum(run_min, np.where(right, flat[:, j], run_min), out=run_min)
    run_min = peak.copy()
    for j in range(k - 2, -1, -1):
        left = mode > j
        rise = flat[:, j] - run_min
        np.maximum(best, np.where(left, rise, best), out=best)
        np.minimum(run_min, np.where(left, flat[:, j], run_min), out=run_min)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = best / peak
    out[peak == 0] = np.nan
    return out.reshape(c.shape[:-1])


def permutation_matrix(seed: int, t: int, n: int) -> np.ndarray:
    """(t, n) matrix of seeded permutations, one row per iteration."""
    iters = np.arange(1, t + 1, dtype=np.uint64) * _GOLDEN + np.uint64(seed)
    keys = mix64_array(iters[:, None] + (np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN)[None, :])
    combined = (keys & _KEY_HIGH) | np.arange(n, dtype=np.uint64)[None, :]
    return np.argsort(combined, axis=1)


def dim_scan_chunk(vals: np.ndarray, val_off: np.ndarray, ann_group: np.ndarray,
                   item_off: np.ndarray, sizes: np.ndarray, seeds: np.ndarray,
                   lo: int, hi: int,
                   k_levels: int, n_groups: int, t: int, min_group: int,
                   out_obs: np.ndarray, out_apr: np.ndarray, out_rand: np.ndarray) -> None:
    """Scan items [lo, hi): real-group nDFU, apriori means, null-partition scores.

    Writes rows [lo, hi) of out_obs (items, G) and out_apr (items, 1+G), and
    accumulates partition scores into out_rand (t, 1+G) in ascending item
    order. Column 0 carries the mean-over-qualifying-pseudo-groups collapse of
    each partition; column 1+g carries the nDFU of the pseudo-group
    size-matched to group g (the per-group null), NaN/0 where g has fewer
    than min_group annotations.
    """
    t_range = np.arange(t, dtype=np.int64)
    for i in range(lo, hi):
        a0, a1 = int(item_off[i]), int(item_off[i + 1])
        n = a1 - a0
        out_obs[i, :] = np.nan
        out_apr[i, :] = np.nan
        if n == 0:
            continue
        voff = val_off[a0 : a1 + 1] - val_off[a0]
        vals_i = vals[int(val_off[a0]) : int(val_off[a1])].astype(np.int64)
        ann_of_val = np.repeat(np.arange(n, dtype=np.int64), np.diff(voff))
        groups_i = ann_group[a0:a1].astype(np.int64)
        sizes_i = sizes[i]

        gcounts = np.bincount(groups_i[ann_of_val] * k_levels + vals_i,
                              minlength=n_groups * k_levels).reshape(n_groups, k_levels)
        nd_groups = ndfu_counts_batch(gcounts)
        qual = sizes_i >= min_group
        out_obs[i, qual] = nd_groups[qual]

        if not qual.any():
            continue  # no qualifying pseudo-group either: item not available
        present = np.flatnonzero(sizes_i)
        psizes = sizes_i[present]
        npg = len(present)
        perms = permutation_matrix(int(seeds[i]), t, n)
        pg_of_pos = np.repeat(np.arange(npg, dtype=np.int64), psizes)
        pg_of_ann = np.empty((t, n), dtype=np.int64)
        pg_of_ann[t_range[:, None], perms] = pg_of_pos[None, :]
        flat = (t_range[:, None] * npg + pg_of_ann[:, ann_of_val]) * k_levels + vals_i[None, :]
        pcounts = np.bincount(flat.ravel(), minlength=t * npg * k_levels)
        nd = ndfu_counts_batch(pcounts.reshape(t, npg, k_levels))

        pq = psizes >= min_group
        score = nd[:, pq].sum(axis=1) / pq.sum()
        out_apr[i, 0] = score.sum() / t
        out_rand[:, 0] += score
        for pg in range(npg):
            g = int(present[pg])
            if sizes_i[g] >= min_group:
                col = nd[:, pg]
                out_apr[i, 1 + g] = col.sum() / t
                out_rand[:, 1 + g] += col
