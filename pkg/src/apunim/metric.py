"""Apriori and observed polarization, and the apunim attribution metric.

For each dimension: items are filtered (overall nDFU above alpha, at least
two groups present), an apriori baseline is estimated from t seeded random
partitions per item, each group's observed within-group polarization is
averaged over its qualifying items, and the two are combined into
apunim = (p_obs - p_apr) / (1 - p_apr), tested against the pseudo-apunims of
the same random partitions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import engine
from ._version import __version__
from .model import Dataset, DatasetError, Dimension, group_annotations
from .partition import SeededStream, partition_ndfu, random_partition
from .polarization import build_histogram, ndfu_from_counts
from .significance import holm_correct, t_test

SCORE_MODES = ("mean", "size_matched")


class NoQualifyingItems(ValueError):
    """A group has no filtered item with enough of its annotations."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs of one analysis run; echoed verbatim into every report."""

    alpha: float = 0.2
    partitions: int = 100
    fwer: float = 0.95
    seed: int = 42
    min_group: int = 2
    partition_score_mode: str = "mean"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.partitions < 1:
            raise ValueError("partitions must be positive")
        if not 0.0 < self.fwer < 1.0:
            raise ValueError(f"fwer must be in (0, 1), got {self.fwer}")
        if self.min_group < 2:
            raise ValueError("min_group must be at least 2 (a histogram needs 2+ annotations)")
        if self.partition_score_mode not in SCORE_MODES:
            raise ValueError(f"partition_score_mode must be one of {SCORE_MODES}")

    @property
    def significance_level(self) -> float:
        """The fwer is given 0.95-style; rejections happen below 1 - fwer."""
        return 1.0 - self.fwer


@dataclass(frozen=True)
class GroupResult:
    dimension: str
    group: str
    apunim: float
    p_raw: float
    p_corrected: float
    support: int
    n_items: int
    p_obs: float
    p_apr: float
    t_statistic: float
    degrees_of_freedom: int
    reject: bool
    degenerate_variance: bool


@dataclass(frozen=True)
class DimensionReport:
    dimension: str
    filtered_items: int
    p_apr: float | None
    groups: tuple[GroupResult, ...]
    diagnostics: tuple[str, ...]
    ordinal_order: tuple[str, ...] | None


@dataclass(frozen=True)
class ApunimReport:
    config: AnalysisConfig
    scale_kind: str
    scale_levels: tuple[str, ...]
    dimensions: tuple[DimensionReport, ...]
    nominal_scale_warning: bool
    version: str = __version__


def apunim_value(p_obs: float, p_apr: float) -> float:
    """apunim = (p_obs - p_apr) / (1 - p_apr).

    Equals 0 when the group's observed polarization matches the apriori
    baseline, 1 when p_obs = 1 and p_apr = 0. Undefined at p_apr = 1. Note
    the value drops below -1 whenever p_obs < 2*p_apr - 1, which real
    baselines above 0.5 do produce.
    """
    if not 0.0 <= p_obs <= 1.0:
        raise ValueError(f"p_obs must be in [0, 1], got {p_obs}")
    if not 0.0 <= p_apr <= 1.0:
        raise ValueError(f"p_apr must be in [0, 1], got {p_apr}")
    if p_apr >= 1.0:
        raise ValueError("apunim is undefined for an apriori baseline of 1")
    return (p_obs - p_apr) / (1.0 - p_apr)


def apriori_item(dataset: Dataset, item_id: str, sizes: Sequence[int],
                 config: AnalysisConfig, stream: SeededStream | None = None) -> float:
    """Mean partition score of ``config.partitions`` seeded random partitions.

    Partitions where no pseudo-group reaches ``min_group`` are skipped with a
    warning; if none is available the item has no apriori estimate and a
    ValueError is raised. The default stream key is the bare item id; the
    full analysis keys streams as "{dimension}:{item_id}".
    """
    annotations = dataset.annotations_for(item_id)
    if stream is None:
        stream = SeededStream(config.seed, item_id)
    scores = []
    skipped = 0
    for i in range(config.partitions):
        part = random_partition(annotations, sizes, stream, i)
        score = partition_ndfu(part, annotations, dataset.scale, config.min_group)
        if score is None:
            skipped += 1
        else:
            scores.append(score)
    if not scores:
        raise ValueError(f"item {item_id!r}: no partition has a pseudo-group of "
                         f"{config.min_group}+ annotations")
    if skipped:
        warnings.warn(f"item {item_id!r}: skipped {skipped} unavailable partitions", stacklevel=2)
    return sum(scores) / len(scores)


def observed_group(dataset: Dataset, filtered: set[str], dimension: Dimension | str,
                   group: str, config: AnalysisConfig) -> tuple[float, int, int]:
    """(p_obs, support, n_items) of one group over its qualifying items.

    Qualifying items are the filtered items where the group contributed at
    least ``min_group`` annotations; support counts those annotations.
    """
    name = dimension.name if isinstance(dimension, Dimension) else dimension
    dim = dataset.dimension(name)
    if group not in dim.groups:
        raise DatasetError(f"group {group!r} not registered in dimension {dim.name!r}")
    values = []
    support = 0
    for item_id in dataset.items:
        if item_id not in filtered:
            continue
        records = group_annotations(dataset, item_id, dim).get(group)
        if records is None or len(records) < config.min_group:
            continue
        hist = build_histogram(records, dataset.scale)
        values.append(ndfu_from_counts(hist.counts))
        support += len(records)
    if not values:
        raise NoQualifyingItems(
            f"dimension {dim.name!r}: no filtered item has {config.min_group}+ "
            f"annotations by group {group!r}"
        )
    return sum(values) / len(values), support, len(values)


def _dimension_report(compiled: engine.CompiledDataset, dimension: Dimension,
                      config: AnalysisConfig, threads: int | None,
                      backend) -> DimensionReport:
    scan = engine.scan_dimension(
        compiled, dimension,
        alpha=config.alpha, t=config.partitions, min_group=config.min_group,
        master_seed=config.seed, threads=threads, backend=backend,
    )
    diagnostics: list[str] = []
    empty = DimensionReport(dimension.name, scan.n_filtered, None, (), (), dimension.ordinal_order)

    if scan.n_filtered == 0:
        return replace(empty, diagnostics=("no items passed the filter",))

    matched = config.partition_score_mode == "size_matched"
    p_apr_dim = None
    if not matched:
        available = scan.sizes.max(axis=1) >= config.min_group
        n_available = int(available.sum())
        if n_available == 0:
            return replace(empty, diagnostics=(
                f"no filtered item has a group with {config.min_group}+ annotations",))
        p_apr_dim = float(scan.apr_item[available, 0].mean())
        if p_apr_dim >= 1.0:
            return replace(empty, diagnostics=("degenerate apriori baseline (= 1)",))

    rows: list[dict] = []
    for gi, group in enumerate(dimension.groups):
        qualifying = scan.sizes[:, gi] >= config.min_group
        n_items = int(qualifying.sum())
        if n_items == 0:
            diagnostics.append(f"group {group!r}: no qualifying items")
            continue
        p_obs = float(scan.obs_ndfu[qualifying, gi].mean())
        support = int(scan.sizes[qualifying, gi].sum())
        if matched:
            p_apr = float(scan.apr_item[qualifying, 1 + gi].mean())
            if p_apr >= 1.0:
                diagnostics.append(f"group {group!r}: degenerate apriori baseline (= 1)")
                continue
        else:
            p_apr = p_apr_dim
        # null sample: the same partitions scored through a pseudo-group
        # size-matched to this group, averaged over its qualifying items
        pseudo_obs = scan.rand_sum[:, 1 + gi] / n_items
        rand = (pseudo_obs - p_apr) / (1.0 - p_apr)
        degenerate_g = bool(np.asarray(rand).std(ddof=1) == 0.0)
        value = apunim_value(p_obs, p_apr)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p_raw, t_stat = t_test(value, rand)
        rows.append(dict(group=group, apunim=value, p_raw=p_raw, t_statistic=t_stat,
                         p_obs=p_obs, p_apr=p_apr, support=support, n_items=n_items,
                         degenerate=degenerate_g))
        if degenerate_g:
            diagnostics.append(f"group {group!r}: zero-variance null sample")

    if not rows:
        return replace(empty, diagnostics=tuple(diagnostics) or ("no reportable groups",))

    corrected, reject = holm_correct([r["p_raw"] for r in rows], config.fwer)
    results = tuple(
        GroupResult(
            dimension=dimension.name, group=r["group"], apunim=r["apunim"],
            p_raw=r["p_raw"], p_corrected=c, support=r["support"], n_items=r["n_items"],
            p_obs=r["p_obs"], p_apr=r["p_apr"], t_statistic=r["t_statistic"],
            degrees_of_freedom=config.partitions - 1, reject=rej,
            degenerate_variance=r["degenerate"],
        )
        for r, c, rej in zip(rows, corrected, reject)
    )
    return DimensionReport(
        dimension=dimension.name, filtered_items=scan.n_filtered,
        p_apr=p_apr_dim, groups=results,
        diagnostics=tuple(diagnostics), ordinal_order=dimension.ordinal_order,
    )


def analyze_dimension(dataset: Dataset, dimension: Dimension | str, config: AnalysisConfig,
                      threads: int | None = None, backend=None) -> list[GroupResult]:
    """Full metric for one dimension: filter, baseline, per-group apunim with
    significance, in group declaration order."""
    name = dimension.name if isinstance(dimension, Dimension) else dimension
    dim = dataset.dimension(name)
    compiled = engine.CompiledDataset(dataset)
    return list(_dimension_report(compiled, dim, config, threads, backend).groups)


def analyze_all(dataset: Dataset, config: AnalysisConfig, *,
                dimensions: Iterable[str] | None = None,
                threads: int | None = None, backend=None) -> ApunimReport:
    """Run every (or the selected) dimension and assemble the report.

    Deterministic for a fixed config: identical seeds produce identical
    reports regardless of the thread count. Per-dimension failures become
    diagnostics instead of aborting the other dimensions.
    """
    selected = list(dataset.dimensions)
    if dimensions is not None:
        wanted = list(dimensions)
        selected = [dataset.dimension(name) for name in wanted]
    compiled = engine.CompiledDataset(dataset)
    reports = tuple(
        _dimension_report(compiled, dim, config, threads, backend) for dim in selected
    )
    return ApunimReport(
        config=config,
        scale_kind=dataset.scale.kind,
        scale_levels=dataset.scale.levels,
        dimensions=reports,
        nominal_scale_warning=dataset.scale.kind == "nominal",
    )
