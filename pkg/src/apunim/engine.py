"""Array compilation of datasets and data-parallel dimension scans.

The per-item work (seeded partitions, pseudo-group histograms, nDFU) runs in
a kernel backend over fixed-size item chunks; chunk boundaries never depend
on the worker count, and each chunk writes disjoint output rows plus its own
partial sum buffer, so results are identical for any ``threads`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from ._backend import get_backend
from .model import Dataset, DatasetError, Dimension, SENTINEL_GROUP
from .partition import FNV_PRIME, GOLDEN, fnv1a64, mix64

#: Items per kernel call. Fixed so that chunk boundaries (and therefore the
#: reduction order of the per-chunk partial sums) are thread-count invariant.
CHUNK_ITEMS = 512


class CompiledDataset:
    """Flat numpy view of a dataset, shared by all dimension scans."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.scale = dataset.scale
        self.k_levels = dataset.scale.level_count
        self.item_ids = dataset.items
        self.n_items = len(dataset.items)

        annotator_index = {a: i for i, a in enumerate(dataset.profiles)}
        self.annotator_ids = tuple(dataset.profiles)
        ann_annotator: list[int] = []
        ann_counts = np.zeros(self.n_items, dtype=np.int64)
        vals: list[int] = []
        val_counts: list[int] = []
        for i, item in enumerate(dataset.items):
            records = dataset.annotations[item]
            ann_counts[i] = len(records)
            for rec in records:
                ann_annotator.append(annotator_index[rec.annotator_id])
                ordered = sorted(rec.values)
                vals.extend(ordered)
                val_counts.append(len(ordered))
        self.ann_annotator = np.asarray(ann_annotator, dtype=np.int32)
        self.item_off = np.concatenate(([0], np.cumsum(ann_counts))).astype(np.int64)
        self.val_counts = np.asarray(val_counts, dtype=np.int64)
        self.val_off = np.concatenate(([0], np.cumsum(self.val_counts))).astype(np.int64)
        self.vals = np.asarray(vals, dtype=np.int32)
        self.item_of_ann = np.repeat(np.arange(self.n_items, dtype=np.int64), ann_counts)

        encoded = [item.encode("utf-8") for item in dataset.items]
        self._id_lengths = np.asarray([len(b) for b in encoded], dtype=np.int64)
        width = max(1, int(self._id_lengths.max()))
        mat = np.zeros((self.n_items, width), dtype=np.uint8)
        for i, b in enumerate(encoded):
            mat[i, : len(b)] = bytearray(b)
        self._id_bytes = mat

        self._overall: np.ndarray | None = None
        self._dim_cache: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def overall_ndfu(self) -> np.ndarray:
        """nDFU of every item's full annotation multiset (cached)."""
        if self._overall is None:
            item_of_val = np.repeat(self.item_of_ann, self.val_counts)
            counts = np.bincount(
                item_of_val * self.k_levels + self.vals,
                minlength=self.n_items * self.k_levels,
            ).reshape(self.n_items, self.k_levels)
            self._overall = _kernels_py.ndfu_counts_batch(counts)
        return self._overall

    def dimension_arrays(self, dimension: Dimension):
        """(ann_codes, sizes_matrix, present_group_count) for a dimension."""
        if dimension.name not in self._dim_cache:
            group_index = {g: i for i, g in enumerate(dimension.groups)}
            profile_codes = np.full(len(self.annotator_ids), -1, dtype=np.int32)
            for i, annotator_id in enumerate(self.annotator_ids):
                group = self.dataset.profiles[annotator_id].group_for(dimension.name)
                if group == SENTINEL_GROUP:
                    continue
                code = group_index.get(group)
                if code is None:
                    raise DatasetError(
                        f"annotator {annotator_id!r}: group {group!r} not declared "
                        f"in dimension {dimension.name!r}"
                    )
                profile_codes[i] = code
            ann_codes = profile_codes[self.ann_annotator]
            n_groups = len(dimension.groups)
            known = ann_codes >= 0
            sizes = np.bincount(
                self.item_of_ann[known] * n_groups + ann_codes[known],
                minlength=self.n_items * n_groups,
            ).reshape(self.n_items, n_groups)
            present = (sizes > 0).sum(axis=1)
            self._dim_cache[dimension.name] = (ann_codes, sizes, present)
        return self._dim_cache[dimension.name]

    def stream_states(self, master_seed: int, prefix: str) -> np.ndarray:
        """Per-item partition stream states for item_key = prefix + item_id.

        Vectorized FNV-1a over the cached item-id byte matrix; equals
        ``partition.stream_state(master_seed, prefix + item_id)`` per item.
        """
        h = np.full(self.n_items, fnv1a64(prefix.encode("utf-8")), dtype=np.uint64)
        prime = np.uint64(FNV_PRIME)
        for j in range(self._id_bytes.shape[1]):
            active = self._id_lengths > j
            h[active] = (h[active] ^ self._id_bytes[active, j].astype(np.uint64)) * prime
        base = np.uint64(mix64((master_seed & (2**64 - 1)) ^ GOLDEN))
        return _kernels_py.mix64_array(base ^ h)


@dataclass
class DimensionScan:
    """Raw per-dimension scan output, before significance testing.

    ``apr_item``/``rand_sum`` column 0 holds the mean-over-pseudo-groups
    partition collapse (the apriori baseline); column 1+g holds the
    size-matched pseudo-group scores for group g (the per-group null).
    """

    dimension: Dimension
    filtered_idx: np.ndarray          # indices into the dataset's item order
    sizes: np.ndarray                 # (n_filtered, G) annotation counts
    obs_ndfu: np.ndarray              # (n_filtered, G) real-group nDFU
    apr_item: np.ndarray              # (n_filtered, 1+G) per-item apriori means
    rand_sum: np.ndarray              # (t, 1+G) summed partition scores

    @property
    def n_filtered(self) -> int:
        return len(self.filtered_idx)


def scan_dimension(compiled: CompiledDataset, dimension: Dimension, *,
                   alpha: float, t: int, min_group: int, master_seed: int,
                   threads: int | None = None, backend=None) -> DimensionScan:
    """Filter items for a dimension and run the partition scan over them."""
    kern = backend if backend is not None else get_backend()
    ann_codes, sizes_all, present = compiled.dimension_arrays(dimension)
    overall = compiled.overall_ndfu()
    filtered_idx = np.flatnonzero((overall > alpha) & (present >= 2))

    n_groups = len(dimension.groups)
    g_apr = 1 + n_groups
    t_total = int(t)
    if len(filtered_idx) == 0:
        return DimensionScan(
            dimension, filtered_idx,
            np.zeros((0, n_groups), dtype=np.int64),
            np.zeros((0, n_groups)), np.zeros((0, g_apr)),
            np.zeros((t_total, g_apr)),
        )

    in_filtered = np.zeros(compiled.n_items, dtype=bool)
    in_filtered[filtered_idx] = True
    keep_ann = (ann_codes >= 0) & in_filtered[compiled.item_of_ann]

    keep_val = np.repeat(keep_ann, compiled.val_counts)
    f_vals = compiled.vals[keep_val]
    f_val_off = np.concatenate(([0], np.cumsum(compiled.val_counts[keep_ann]))).astype(np.int64)
    f_groups = ann_codes[keep_ann]
    per_item = np.bincount(compiled.item_of_ann[keep_ann], minlength=compiled.n_items)
    f_item_off = np.concatenate(([0], np.cumsum(per_item[filtered_idx]))).astype(np.int64)
    f_sizes = sizes_all[filtered_idx].astype(np.int64)
    f_seeds = compiled.stream_states(master_seed, dimension.name + ":")[filtered_idx]
    f_seeds = np.ascontiguousarray(f_seeds, dtype=np.uint64)

    n_filtered = len(filtered_idx)
    obs = np.empty((n_filtered, n_groups), dtype=np.float64)
    apr = np.empty((n_filtered, g_apr), dtype=np.float64)
    bounds = list(range(0, n_filtered, CHUNK_ITEMS)) + [n_filtered]
    n_chunks = len(bounds) - 1
    rand_partial = np.zeros((n_chunks, t_total, g_apr), dtype=np.float64)

    def run(ci: int) -> None:
        kern.dim_scan_chunk(
            f_vals, f_val_off, f_groups, f_item_off, f_sizes, f_seeds,
            bounds[ci], bounds[ci + 1],
            compiled.k_levels, n_groups, t_total, min_group,
            obs, apr, rand_partial[ci],
        )

    workers = threads if threads and threads > 0 else 1
    if workers == 1 or n_chunks == 1:
        for ci in range(n_chunks):
            run(ci)
    else:
        with ThreadPoolExecutor(max_workers=min(workers, n_chunks)) as pool:
            list(pool.map(run, range(n_chunks)))

    return DimensionScan(dimension, filtered_idx, f_sizes, obs, apr,
                         rand_partial.sum(axis=0))
