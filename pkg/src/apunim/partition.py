"""Reproducible stratified random partitions of an item's annotations.

Randomness is counter-based so parallel scheduling can never change results:
a partition is a pure function of (master_seed, item_key, iteration). Each
annotation receives a 64-bit key from a splitmix64 stream derived from that
triple; sorting annotations by key yields the permutation, and consecutive
slices of prescribed sizes form the pseudo-groups. The compiled and numpy
kernels implement this byte-for-byte identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import AnnotationRecord, LabelScale
from .polarization import build_histogram, ndfu_from_counts

_MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
#: High 32 bits of the per-annotation key decide rank; the low 32 carry the
#: annotation index so ties (and the final order) are fully deterministic.
KEY_HIGH_MASK = 0xFFFFFFFF00000000


def mix64(x: int) -> int:
    """splitmix64 finalizer: the core bijective mixing step."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def fnv1a64(data: bytes, state: int = FNV_OFFSET) -> int:
    h = state
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def stream_state(master_seed: int, item_key: str) -> int:
    """64-bit stream state for (master_seed, item_key)."""
    return mix64(mix64((master_seed & _MASK64) ^ GOLDEN) ^ fnv1a64(item_key.encode("utf-8")))


@dataclass(frozen=True)
class SeededStream:
    """Names one reproducible random stream: (master_seed, item_key).

    The sequence drawn for a given iteration is identical across runs,
    thread counts, and evaluation orders.
    """

    master_seed: int
    item_key: str

    @property
    def state(self) -> int:
        return stream_state(self.master_seed, self.item_key)


def permutation_keys(state: int, iteration: int, n: int) -> list[int]:
    """The n sortable keys of one iteration's shuffle (low bits = index)."""
    iter_seed = (state + (iteration + 1) * GOLDEN) & _MASK64
    keys = []
    for j in range(n):
        k = mix64((iter_seed + (j + 1) * GOLDEN) & _MASK64)
        keys.append((k & KEY_HIGH_MASK) | j)
    return keys


def seeded_permutation(state: int, iteration: int, n: int) -> list[int]:
    """Uniformly random permutation of range(n), reproducible from the state."""
    return [k & 0xFFFFFFFF for k in sorted(permutation_keys(state, iteration, n))]


@dataclass(frozen=True)
class PartitionScheme:
    """Assignment of annotation indices to pseudo-groups of fixed sizes."""

    sizes: tuple[int, ...]
    assignment: tuple[int, ...]

    def __post_init__(self):
        if sum(self.sizes) != len(self.assignment):
            raise ValueError("assignment length must equal the sum of sizes")
        filled = [0] * len(self.sizes)
        for g in self.assignment:
            filled[g] += 1
        if list(self.sizes) != filled:
            raise ValueError("pseudo-group sizes do not match the assignment")

    def members(self, group: int) -> list[int]:
        return [i for i, g in enumerate(self.assignment) if g == group]


def random_partition(annotations: Sequence[AnnotationRecord], sizes: Sequence[int],
                     stream: SeededStream, iteration: int) -> PartitionScheme:
    """Split annotations into pseudo-groups of exactly the prescribed sizes.

    The split is a seeded shuffle: deterministic for a fixed
    (stream, iteration), uniform over all assignments with those sizes.
    """
    sizes = tuple(int(s) for s in sizes)
    if any(s < 1 for s in sizes):
        raise ValueError("pseudo-group sizes must be positive")
    n = len(annotations)
    if sum(sizes) != n:
        raise ValueError(f"sizes sum to {sum(sizes)} but there are {n} annotations")
    perm = seeded_permutation(stream.state, iteration, n)
    assignment = [0] * n
    pos = 0
    for g, size in enumerate(sizes):
        for p in range(pos, pos + size):
            assignment[perm[p]] = g
        pos += size
    return PartitionScheme(sizes, tuple(assignment))


def pseudo_group_ndfu(partition: PartitionScheme, annotations: Sequence[AnnotationRecord],
                      scale: LabelScale, group: int) -> float:
    """nDFU of one pseudo-group's annotations."""
    members = [annotations[i] for i in partition.members(group)]
    return ndfu_from_counts(build_histogram(members, scale).counts)


def partition_ndfu(partition: PartitionScheme, annotations: Sequence[AnnotationRecord],
                   scale: LabelScale, min_group: int) -> float | None:
    """Polarization of a partition: unweighted mean nDFU over the
    pseudo-groups holding at least ``min_group`` annotations.

    Returns None when no pseudo-group qualifies; the caller decides how to
    treat the not-available case.
    """
    if sum(partition.sizes) != len(annotations):
        raise ValueError("partition does not match the annotation list")
    scores = []
    for g, size in enumerate(partition.sizes):
        if size >= min_group:
            scores.append(pseudo_group_ndfu(partition, annotations, scale, g))
    if not scores:
        return None
    return sum(scores) / len(scores)
