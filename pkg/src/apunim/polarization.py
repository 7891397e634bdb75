"""Histogram construction and the nDFU polarization score.

nDFU measures how far an annotation histogram is from unimodal: 0 for a
single-peaked distribution, 1 for two equal modes separated by an empty
valley. It is the largest frequency rise encountered while moving away from
the modal bin (in either direction), normalized by the modal frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import AnnotationRecord, Dataset, DatasetError, Dimension, LabelScale, SENTINEL_GROUP


@dataclass(frozen=True)
class Histogram:
    """Per-bin annotation counts over a scale's levels."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise ValueError("histogram counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class PolarizationScore:
    """An nDFU value together with the number of annotations scored."""

    value: float
    n_annotations: int


def build_histogram(annotations: Iterable[AnnotationRecord], scale: LabelScale) -> Histogram:
    """Count every selected label of every annotation into scale bins.

    Multi-label annotations contribute one count per selected label, so the
    total equals the number of label selections, not the number of records.
    """
    counts = [0] * scale.level_count
    n = 0
    for rec in annotations:
        n += 1
        for v in rec.values:
            if v >= scale.level_count:
                raise DatasetError(f"value index {v} out of scale with {scale.level_count} levels")
            counts[v] += 1
    if n == 0:
        raise DatasetError("cannot build a histogram from an empty annotation list")
    return Histogram(tuple(counts))


def ndfu_from_counts(counts: Sequence[int]) -> float:
    """nDFU of raw bin counts.

    Works on integer counts directly (the score is invariant to the count
    scale), which keeps the result exact: max rise divided by max count in a
    single float division. Ties for the modal bin break to the lowest index.
    """
    total = 0
    peak = 0
    mode = 0
    for i, c in enumerate(counts):
        total += c
        if c > peak:
            peak = c
            mode = i
    if total <= 0:
        raise DatasetError("nDFU is undefined for a zero-total histogram")
    best = 0
    run_min = peak
    for j in range(mode + 1, len(counts)):
        rise = counts[j] - run_min
        if rise > best:
            best = rise
        if counts[j] < run_min:
            run_min = counts[j]
    run_min = peak
    for j in range(mode - 1, -1, -1):
        rise = counts[j] - run_min
        if rise > best:
            best = rise
        if counts[j] < run_min:
            run_min = counts[j]
    return best / peak


def ndfu(histogram: Histogram) -> PolarizationScore:
    """Score a histogram; ``n_annotations`` is the histogram total."""
    return PolarizationScore(ndfu_from_counts(histogram.counts), histogram.total)


def item_ndfu(dataset: Dataset, item_id: str) -> PolarizationScore:
    """Overall polarization of an item's full annotation multiset."""
    annotations = dataset.annotations_for(item_id)
    hist = build_histogram(annotations, dataset.scale)
    return PolarizationScore(ndfu_from_counts(hist.counts), len(annotations))


def filter_items(dataset: Dataset, dimension: Dimension | str, alpha: float) -> set[str]:
    """Items worth analyzing: nDFU strictly above ``alpha`` and annotated by
    at least two distinct non-sentinel groups of the dimension."""
    name = dimension.name if isinstance(dimension, Dimension) else dimension
    dim = dataset.dimension(name)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    selected = set()
    for item_id in dataset.items:
        groups = {
            dataset.profiles[rec.annotator_id].group_for(dim.name)
            for rec in dataset.annotations[item_id]
        }
        groups.discard(SENTINEL_GROUP)
        if len(groups) < 2:
            continue
        if item_ndfu(dataset, item_id).value > alpha:
            selected.add(item_id)
    return selected
