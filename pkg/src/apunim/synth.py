"""Synthetic datasets with known ground truth, plus annotator-count sensitivity.

The generator is the validation oracle for the whole pipeline: under a null
spec every annotator draws from one shared bell-shaped distribution, so no
group attribution should survive significance testing; under a planted
bimodal effect two designated groups annotate opposite extremes, so both
must be flagged. ``sensitivity`` measures how the stability of the observed
polarization responds to the number of annotators per item.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AnnotationRecord, AnnotatorProfile, Dataset, Dimension, LabelScale
from .polarization import ndfu_from_counts


def default_scale(levels: int = 5) -> LabelScale:
    return LabelScale("ordinal", tuple(str(i) for i in range(levels)))


@dataclass(frozen=True)
class PlantedBimodal:
    """Planted effect: on a fraction of items, two groups of one dimension
    annotate opposite extreme levels."""

    dimension: str
    group_low: str
    group_high: str
    strength: float

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")


@dataclass(frozen=True)
class SyntheticSpec:
    n_items: int
    annotators_per_item: int
    dimensions: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    scale: LabelScale = default_scale()
    effect: PlantedBimodal | None = None
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_items < 1 or self.annotators_per_item < 1:
            raise ValueError("n_items and annotators_per_item must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")
        for name, proportions in self.dimensions:
            total = sum(p for _, p in proportions)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"proportions of dimension {name!r} sum to {total}, not 1")
        if self.effect is not None:
            declared = {name: [g for g, _ in props] for name, props in self.dimensions}
            if self.effect.dimension not in declared:
                raise ValueError(f"effect dimension {self.effect.dimension!r} not declared")
            groups = declared[self.effect.dimension]
            for g in (self.effect.group_low, self.effect.group_high):
                if g not in groups:
                    raise ValueError(f"effect group {g!r} not in dimension "
                                     f"{self.effect.dimension!r}")


def _bell_probabilities(k: int) -> np.ndarray:
    """Discretized symmetric bell over k levels (binomial(k-1, 1/2) weights)."""
    weights = np.array([math.comb(k - 1, i) for i in range(k)], dtype=float)
    return weights / weights.sum()


def _exact_counts(probs: np.ndarray, m: int) -> np.ndarray:
    """Largest-remainder rounding of m * probs to integers summing to m."""
    raw = probs * m
    counts = np.floor(raw).astype(np.int64)
    remainder = int(m - counts.sum())
    if remainder:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def generate(spec: SyntheticSpec) -> Dataset:
    """Deterministic synthetic dataset for a spec.

    Every item gets its own pool of ``annotators_per_item`` fresh annotators.
    Group composition is stratified: each item holds exactly
    round(proportion * annotators_per_item) members per group (largest
    remainder), shuffled per item, so declared proportions hold item by item.
    Draw order is fixed (memberships per dimension, base values, planted item
    selection, noise), so one seed always yields one dataset.
    """
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_items, spec.annotators_per_item
    k = spec.scale.level_count

    codes = {}
    for name, proportions in spec.dimensions:
        probs = np.array([p for _, p in proportions], dtype=float)
        template = np.repeat(np.arange(len(probs)), _exact_counts(probs / probs.sum(), m))
        order = np.argsort(rng.random((n, m)), axis=1)
        codes[name] = template[order]

    values = rng.choice(k, size=(n, m), p=_bell_probabilities(k))
    if spec.effect is not None and spec.effect.strength > 0:
        planted = rng.permutation(n)[: round(spec.effect.strength * n)]
        groups = [g for g, _ in dict(spec.dimensions)[spec.effect.dimension]]
        low = groups.index(spec.effect.group_low)
        high = groups.index(spec.effect.group_high)
        dim_codes = codes[spec.effect.dimension]
        mask = np.zeros(n, dtype=bool)
        mask[planted] = True
        values = np.where(mask[:, None] & (dim_codes == low), 0, values)
        values = np.where(mask[:, None] & (dim_codes == high), k - 1, values)
    if spec.noise > 0:
        noisy = rng.random((n, m)) < spec.noise
        values = np.where(noisy, rng.integers(0, k, size=(n, m)), values)

    group_names = {name: [g for g, _ in props] for name, props in spec.dimensions}
    items = tuple(f"c{i:05d}" for i in range(n))
    annotations = {}
    profiles = {}
    for i, item_id in enumerate(items):
        records = []
        for j in range(m):
            annotator_id = f"a{i:05d}_{j:03d}"
            memberships = {
                name: group_names[name][codes[name][i, j]] for name, _ in spec.dimensions
            }
            profiles[annotator_id] = AnnotatorProfile(annotator_id, memberships)
            records.append(AnnotationRecord(item_id, annotator_id, frozenset([int(values[i, j])])))
        annotations[item_id] = tuple(records)

    dims = tuple(Dimension(name, tuple(groups)) for name, groups in group_names.items())
    return Dataset(spec.scale, items, annotations, profiles, dims)


def cancellation_fixture(seed: int = 0, annotators_per_group: int = 10,
                         levels: int = 5) -> Dataset:
    """Two items where the groups flip which one they mark as the extreme.

    Each item on its own is strongly bimodal overall while each group is
    internally unimodal; pooling the two items makes both groups' histograms
    bimodal, cancelling the attribution a per-item analysis detects. The seed
    jitters annotations between each extreme level and its inner neighbour,
    which leaves both properties intact (a two-adjacent-bin histogram is
    always unimodal, and the middle bin stays empty).
    """
    if levels < 5:
        raise ValueError("the fixture needs at least 5 levels to keep an empty middle bin")
    scale = default_scale(levels)
    rng = np.random.default_rng(seed)
    camps = {"A": [f"a{j:03d}" for j in range(annotators_per_group)],
             "B": [f"b{j:03d}" for j in range(annotators_per_group)]}
    profiles = {
        a: AnnotatorProfile(a, {"camp": camp})
        for camp, members in camps.items() for a in members
    }

    # a fixed tenth of each camp sits on the inner-adjacent level per item,
    # so both extreme peaks stay equal and the middle bin stays empty
    jitter = min(annotators_per_group // 10, annotators_per_group - 1)
    annotations = {}
    for item_id, high_camp in (("flip1", "A"), ("flip2", "B")):
        records = []
        for camp, members in camps.items():
            high = camp == high_camp
            extreme, inner = (levels - 1, levels - 2) if high else (0, 1)
            moved = set(rng.choice(annotators_per_group, size=jitter, replace=False))
            for j, annotator_id in enumerate(members):
                level = inner if j in moved else extreme
                records.append(AnnotationRecord(item_id, annotator_id, frozenset([level])))
        annotations[item_id] = tuple(records)

    return Dataset(
        scale, ("flip1", "flip2"), annotations, profiles,
        (Dimension("camp", ("A", "B")),),
    )


@dataclass(frozen=True)
class SensitivityPoint:
    k: int
    std: float
    n_items_used: int


@dataclass(frozen=True)
class SensitivityCurve:
    entries: tuple[SensitivityPoint, ...]

    def stds(self) -> list[float]:
        return [e.std for e in self.entries]


def max_feasible_k(dataset: Dataset, min_items_frac: float = 0.5,
                   dimension: str | None = None, group: str | None = None) -> int:
    """Largest k for which at least ``min_items_frac`` of items have k annotators."""
    counts = sorted(_item_record_values(dataset, dimension, group)[1], reverse=True)
    needed = max(1, math.ceil(min_items_frac * len(dataset.items)))
    if len(counts) < needed:
        raise ValueError("too few items carry the requested group's annotations")
    return int(counts[needed - 1])


def _item_record_values(dataset: Dataset, dimension: str | None, group: str | None):
    """Per-item per-record value arrays, optionally restricted to one group."""
    values = []
    counts = []
    for item_id in dataset.items:
        records = dataset.annotations[item_id]
        if group is not None:
            dim = dataset.dimension(dimension)
            records = [
                r for r in records
                if dataset.profiles[r.annotator_id].group_for(dim.name) == group
            ]
        if not records:
            continue
        values.append([np.array(sorted(r.values), dtype=np.int64) for r in records])
        counts.append(len(records))
    return values, counts


def sensitivity(dataset: Dataset, max_k: int | None = None, resamples: int = 30,
                seed: int = 0, *, min_items_frac: float = 0.5,
                dimension: str | None = None, group: str | None = None) -> SensitivityCurve:
    """Stability of the observed polarization as annotators per item vary.

    For each k from 3 to ``max_k``: resample k annotators per item (with
    replacement, among the items holding at least k) ``resamples`` times,
    compute the dataset-mean nDFU of each resample, and record the standard
    deviation of those values. Restricting to one group's annotations mirrors
    the per-group variant of the observed polarization.
    """
    if group is not None and dimension is None:
        raise ValueError("a group restriction needs its dimension")
    feasible = max_feasible_k(dataset, min_items_frac, dimension, group)
    if max_k is None:
        max_k = feasible
    if max_k < 3:
        raise ValueError(f"max_k must be at least 3, got {max_k}")
    if max_k > feasible:
        raise ValueError(
            f"max_k {max_k} exceeds the largest annotator count held by at least "
            f"{min_items_frac:.0%} of items ({feasible})"
        )
    per_item, counts = _item_record_values(dataset, dimension, group)
    k_count = dataset.scale.level_count
    singleton = all(len(v) == 1 for recs in per_item for v in recs)
    if singleton:
        flat = [np.array([v[0] for v in recs], dtype=np.int64) for recs in per_item]

    entries = []
    for k in range(3, max_k + 1):
        eligible = [i for i, c in enumerate(counts) if c >= k]
        pol = np.empty(resamples)
        for r in range(resamples):
            rng = np.random.default_rng(np.random.SeedSequence((seed, k, r)))
            total = 0.0
            for i in eligible:
                picks = rng.integers(0, counts[i], size=k)
                if singleton:
                    hist = np.bincount(flat[i][picks], minlength=k_count)
                else:
                    chosen = np.concatenate([per_item[i][j] for j in picks])
                    hist = np.bincount(chosen, minlength=k_count)
                total += ndfu_from_counts(hist)
            pol[r] = total / len(eligible)
        entries.append(SensitivityPoint(k, float(pol.std(ddof=1)), len(eligible)))
    return SensitivityCurve(tuple(entries))
