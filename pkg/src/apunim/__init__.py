"""apunim: attribute annotation polarization to annotator subgroups.

Core entry points:

- :func:`ndfu` scores an annotation histogram's distance from unimodality.
- :func:`analyze` runs the full attribution metric with significance testing
  over every declared dimension of a dataset.
"""

from ._backend import get_backend
from ._version import __version__
from .metric import (
    AnalysisConfig,
    ApunimReport,
    GroupResult,
    analyze_all,
    analyze_dimension,
    apriori_item,
    apunim_value,
    observed_group,
)
from .model import (
    AnnotationRecord,
    AnnotatorProfile,
    Dataset,
    DatasetError,
    Dimension,
    LabelScale,
    SENTINEL_GROUP,
    export_dataset,
    group_annotations,
    load_dataset,
)
from .partition import PartitionScheme, SeededStream, partition_ndfu, random_partition
from .polarization import (
    Histogram,
    PolarizationScore,
    build_histogram,
    filter_items,
    item_ndfu,
    ndfu_from_counts,
)
from .polarization import ndfu as score_histogram
from .significance import NullSample, SignificanceResult, holm_correct, null_sample, t_test


def ndfu(counts_or_values, scale: LabelScale | None = None) -> float:
    """nDFU of raw bin counts, or of annotation values binned against a scale.

    ``ndfu([3, 0, 0, 0, 3])`` treats the input as per-bin counts;
    ``ndfu(["0", "4", "4"], scale)`` bins level identifiers first.
    """
    if scale is None:
        return ndfu_from_counts(list(counts_or_values))
    counts = [0] * scale.level_count
    for value in counts_or_values:
        counts[scale.index_of(str(value))] += 1
    return ndfu_from_counts(counts)


def analyze(dataset: Dataset, config: AnalysisConfig | None = None, **kwargs) -> ApunimReport:
    """Run the full metric over a dataset (see :func:`metric.analyze_all`)."""
    return analyze_all(dataset, config or AnalysisConfig(), **kwargs)
