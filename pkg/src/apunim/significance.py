"""Randomized significance test for apunim values, with Holm correction.

The null distribution is built from the same random partitions used for the
apriori baseline: each partition index yields one pseudo-apunim (the apunim a
random like-sized grouping would have scored), and the observed apunim is
compared against that sample with a two-sided one-sample Student-T test.
Per-dimension p-values are then Holm-adjusted to control the family-wise
error rate across the dimension's groups.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .model import Dataset, Dimension, group_annotations
from .partition import SeededStream, partition_ndfu, pseudo_group_ndfu, random_partition


@dataclass(frozen=True)
class NullSample:
    """Pseudo-apunim values of the t reused random partitions."""

    rand_apunims: tuple[float, ...]
    reused_partitions: bool = True


@dataclass(frozen=True)
class SignificanceResult:
    p_raw: float
    t_statistic: float
    degrees_of_freedom: int
    p_corrected: float
    reject: bool
    degenerate_variance: bool = False


def null_sample(dataset: Dataset, filtered: set[str], dimension: Dimension | str,
                config, group: str) -> NullSample:
    """Reference (unoptimized) construction of a group's null sample.

    Reuses the apriori-baseline partitions: for partition index i, the i-th
    pseudo-observation is the mean (over the group's qualifying items) of the
    nDFU of the pseudo-group size-matched to ``group``, i.e. the observed
    polarization a random annotator group standing in for it would score.
    Pseudo-apunims are centered on the same baseline as the reported apunim
    (the partition_score_mode collapse; the t-test is affine-invariant, so
    the centering never changes p-values). The engine's vectorized path must
    agree with this to float precision; tests hold it to 1e-12.
    """
    name = dimension.name if isinstance(dimension, Dimension) else dimension
    dim = dataset.dimension(name)
    if group not in dim.groups:
        raise ValueError(f"group {group!r} not registered in dimension {dim.name!r}")
    matched = config.partition_score_mode == "size_matched"

    t = config.partitions
    pseudo_sums = [0.0] * t
    n_qual = 0
    baseline_apr = []
    for item_id in dataset.items:
        if item_id not in filtered:
            continue
        groups = group_annotations(dataset, item_id, dim)
        annotations = [rec for g in dim.groups for rec in groups.get(g, [])]
        present = [g for g in dim.groups if g in groups]
        sizes = [len(groups[g]) for g in present]
        if not sizes or max(sizes) < config.min_group:
            continue
        stream = SeededStream(config.seed, f"{dim.name}:{item_id}")
        mean_scores = []
        qualifies = group in present and len(groups[group]) >= config.min_group
        target = present.index(group) if qualifies else -1
        for i in range(t):
            part = random_partition(annotations, sizes, stream, i)
            mean_scores.append(partition_ndfu(part, annotations, dataset.scale, config.min_group))
            if qualifies:
                pseudo_sums[i] += pseudo_group_ndfu(part, annotations, dataset.scale, target)
        baseline_apr.append(sum(mean_scores) / t)
        n_qual += qualifies
    if n_qual == 0:
        raise ValueError(f"no qualifying items for group {group!r} in dimension {dim.name!r}")
    if matched:
        baseline = sum(pseudo_sums) / (t * n_qual)
    else:
        baseline = sum(baseline_apr) / len(baseline_apr)
    if baseline >= 1.0:
        raise ValueError("degenerate apriori baseline (= 1): pseudo-apunim undefined")
    rand_apunims = tuple((s / n_qual - baseline) / (1.0 - baseline) for s in pseudo_sums)
    return NullSample(rand_apunims)


def t_test(observed_apunim: float, null: NullSample | Sequence[float]) -> tuple[float, float]:
    """Two-sided Student-T test of one observation against the null sample.

    The observed apunim is a single draw, so it is compared against the
    spread of the sample, not the standard error of its mean:
    T = (mean(rand) - observed) / (sd(rand) * sqrt(1 + 1/t)), df = t - 1
    (the prediction-interval form; the plain one-sample denominator
    sd/sqrt(t) rejects essentially every true null once t is large). A
    zero-variance null degenerates to p = 1 when the mean equals the
    observation exactly and p = 0 otherwise (warned).
    """
    rand = np.asarray(null.rand_apunims if isinstance(null, NullSample) else null, dtype=float)
    t = len(rand)
    if t < 2:
        raise ValueError("the t-test needs at least 2 pseudo-apunim values")
    mean = float(rand.mean())
    sd = float(rand.std(ddof=1))
    if sd == 0.0:
        warnings.warn("degenerate null sample: zero variance across partitions", stacklevel=2)
        if mean == observed_apunim:
            return 1.0, 0.0
        return 0.0, math.copysign(math.inf, mean - observed_apunim)
    t_stat = (mean - observed_apunim) / (sd * math.sqrt(1.0 + 1.0 / t))
    p = 2.0 * float(stats.t.sf(abs(t_stat), t - 1))
    return min(p, 1.0), t_stat


def holm_correct(p_values: Sequence[float], fwer: float) -> tuple[list[float], list[bool]]:
    """Holm step-down adjusted p-values and rejection decisions.

    ``fwer`` follows the 0.95-style confidence convention: a hypothesis is
    rejected when its adjusted p-value is strictly below 1 - fwer.
    """
    ps = np.asarray(p_values, dtype=float)
    if ps.size == 0:
        raise ValueError("holm_correct needs at least one p-value")
    if np.any((ps < 0) | (ps > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0.0 < fwer < 1.0:
        raise ValueError(f"fwer must lie in (0, 1), got {fwer}")
    m = ps.size
    order = np.argsort(ps, kind="stable")
    adjusted = ps[order] * (m - np.arange(m))
    adjusted = np.minimum(np.maximum.accumulate(adjusted), 1.0)
    corrected = np.empty(m, dtype=float)
    corrected[order] = adjusted
    level = 1.0 - fwer
    return corrected.tolist(), (corrected < level).tolist()


def significance_stars(p_corrected: float) -> str:
    """Table annotation: *** for p < 0.01, ** for p < 0.05."""
    if p_corrected < 0.01:
        return "***"
    if p_corrected < 0.05:
        return "**"
    return ""
