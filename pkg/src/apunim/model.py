"""Domain types and CSV ingestion for annotated datasets.

A dataset couples an annotation table (item, annotator, value) with an
annotator-profile table mapping each annotator to one group per dimension
(gender, race, ...). Both are immutable after loading; every downstream
computation treats them as read-only.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

#: Reserved group for annotators whose profile has no value for a dimension.
#: Excluded from metric computation, reported in diagnostics only.
SENTINEL_GROUP = "<unknown>"


class DatasetError(ValueError):
    """Malformed input file or violated dataset invariant."""


@dataclass(frozen=True)
class LabelScale:
    """Annotation scale: ordered label levels mapped to histogram bins.

    ``kind`` is "ordinal" or "nominal". Nominal scales are admitted (needed
    for multi-label tasks) but the declared level order still fixes the bin
    layout, and reports carry a ``nominal_scale_warning`` flag because
    unimodality over an arbitrary bin order is order-dependent.
    """

    kind: str
    levels: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("ordinal", "nominal"):
            raise DatasetError(f"scale kind must be 'ordinal' or 'nominal', got {self.kind!r}")
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if len(self.levels) < 2:
            raise DatasetError("a scale needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise DatasetError("scale levels must be unique")

    @property
    def level_count(self) -> int:
        return len(self.levels)

    def index_of(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise DatasetError(f"value {level!r} out of scale {list(self.levels)}") from None


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's labels for one item.

    ``values`` holds bin indices into the scale: a singleton for single-label
    tasks, several for multi-label tasks.
    """

    item_id: str
    annotator_id: str
    values: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "values", frozenset(int(v) for v in self.values))
        if not self.values:
            raise DatasetError(f"annotation ({self.item_id}, {self.annotator_id}) has no values")


@dataclass(frozen=True)
class AnnotatorProfile:
    """Group membership of one annotator, one group per dimension."""

    annotator_id: str
    memberships: Mapping[str, str]

    def group_for(self, dimension: str) -> str:
        return self.memberships.get(dimension, SENTINEL_GROUP)


@dataclass(frozen=True)
class Dimension:
    """A personal-characteristic axis partitioning annotators into groups.

    ``groups`` may be empty at declaration time, in which case the loader
    discovers them from the annotator file. ``ordinal_order``, when present,
    must be a permutation of the groups and defines the order used by the
    trend analysis.
    """

    name: str
    groups: tuple[str, ...] = ()
    ordinal_order: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.ordinal_order is not None:
            object.__setattr__(self, "ordinal_order", tuple(self.ordinal_order))
        if len(set(self.groups)) != len(self.groups):
            raise DatasetError(f"dimension {self.name!r} has duplicate groups")
        if self.groups and self.ordinal_order is not None:
            if sorted(self.ordinal_order) != sorted(self.groups):
                raise DatasetError(
                    f"ordinal_order of dimension {self.name!r} is not a permutation of its groups"
                )


@dataclass(frozen=True)
class Dataset:
    """Immutable, validated store of items, annotations, and profiles."""

    scale: LabelScale
    items: tuple[str, ...]
    annotations: Mapping[str, tuple[AnnotationRecord, ...]]
    profiles: Mapping[str, AnnotatorProfile]
    dimensions: tuple[Dimension, ...]

    def dimension(self, name: str) -> Dimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise DatasetError(f"unknown dimension {name!r}")

    def annotations_for(self, item_id: str) -> tuple[AnnotationRecord, ...]:
        try:
            return self.annotations[item_id]
        except KeyError:
            raise DatasetError(f"unknown item {item_id!r}") from None

    @property
    def n_annotations(self) -> int:
        return sum(len(a) for a in self.annotations.values())


def _parse_values(raw: str, scale: LabelScale, where: str) -> frozenset[int]:
    parts = [p for p in raw.split("|") if p != ""]
    if not parts:
        raise DatasetError(f"{where}: empty value")
    try:
        return frozenset(scale.index_of(p) for p in parts)
    except DatasetError as exc:
        raise DatasetError(f"{where}: {exc}") from None


def _read_annotators(path, dimensions: Iterable[Dimension]) -> dict[str, AnnotatorProfile]:
    declared = [d.name for d in dimensions]
    profiles: dict[str, AnnotatorProfile] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "annotator_id":
            raise DatasetError(f"{path}:1: annotator file must start with an 'annotator_id' column")
        columns = header[1:]
        unknown = [c for c in columns if c not in declared]
        if unknown:
            warnings.warn(f"ignoring undeclared annotator columns: {unknown}", stacklevel=3)
        missing = [d for d in declared if d not in columns]
        if missing:
            warnings.warn(
                f"declared dimensions absent from annotator file (all memberships missing): {missing}",
                stacklevel=3,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            annotator_id = row[0]
            if annotator_id in profiles:
                raise DatasetError(f"{path}:{lineno}: duplicate annotator {annotator_id!r}")
            memberships = {}
            for name, cell in zip(columns, row[1:]):
                if name not in declared:
                    continue
                if cell == "":
                    continue  # absent cell -> sentinel, represented by omission
                if cell == SENTINEL_GROUP:
                    raise DatasetError(
                        f"{path}:{lineno}: group value collides with the reserved "
                        f"sentinel {SENTINEL_GROUP!r}"
                    )
                memberships[name] = cell
            profiles[annotator_id] = AnnotatorProfile(annotator_id, memberships)
    return profiles


def _finalize_dimensions(
    dimensions: Iterable[Dimension], profiles: Mapping[str, AnnotatorProfile]
) -> tuple[Dimension, ...]:
    observed: dict[str, set[str]] = {d.name: set() for d in dimensions}
    for profile in profiles.values():
        for name, group in profile.memberships.items():
            if name in observed:
                observed[name].add(group)
    final = []
    for dim in dimensions:
        seen = observed[dim.name]
        if dim.groups:
            extra = seen - set(dim.groups)
            if extra:
                raise DatasetError(
                    f"dimension {dim.name!r}: groups {sorted(extra)} present in the annotator "
                    f"file but not declared"
                )
            final.append(dim)
        elif dim.ordinal_order is not None:
            extra = seen - set(dim.ordinal_order)
            if extra:
                raise DatasetError(
                    f"dimension {dim.name!r}: groups {sorted(extra)} not covered by ordinal_order"
                )
            final.append(Dimension(dim.name, dim.ordinal_order, dim.ordinal_order))
        else:
            final.append(Dimension(dim.name, tuple(sorted(seen))))
    return tuple(final)


def load_dataset(annotations_path, annotators_path, scale: LabelScale,
                 dimensions: Iterable[Dimension]) -> Dataset:
    """Load and validate a dataset from the two CSV files.

    Annotations CSV columns: ``item_id,annotator_id,value`` where multi-label
    values join level identifiers with ``|``. Annotators CSV columns:
    ``annotator_id,<dimension>,...`` with empty cells meaning "membership
    unknown". Exact duplicate (item, annotator) rows are dropped; duplicates
    with conflicting values are a hard error, as are annotations referencing
    unprofiled annotators. Loading is deterministic: identical input bytes
    produce identical datasets.
    """
    dimensions = tuple(dimensions)
    profiles = _read_annotators(annotators_path, dimensions)
    final_dims = _finalize_dimensions(dimensions, profiles)

    items: list[str] = []
    annotations: dict[str, list[AnnotationRecord]] = {}
    seen: dict[tuple[str, str], frozenset[int]] = {}
    with open(annotations_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["item_id", "annotator_id", "value"]:
            raise DatasetError(
                f"{annotations_path}:1: expected header item_id,annotator_id,value, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DatasetError(f"{annotations_path}:{lineno}: expected 3 columns, got {len(row)}")
            item_id, annotator_id, raw = row
            values = _parse_values(raw, scale, f"{annotations_path}:{lineno}")
            key = (item_id, annotator_id)
            if key in seen:
                if seen[key] != values:
                    raise DatasetError(
                        f"{annotations_path}:{lineno}: conflicting duplicate annotation for "
                        f"item {item_id!r} by annotator {annotator_id!r}"
                    )
                continue
            if annotator_id not in profiles:
                raise DatasetError(
                    f"{annotations_path}:{lineno}: annotator {annotator_id!r} referenced "
                    f"but not profiled"
                )
            seen[key] = values
            if item_id not in annotations:
                items.append(item_id)
                annotations[item_id] = []
            annotations[item_id].append(AnnotationRecord(item_id, annotator_id, values))

    if not items:
        raise DatasetError(f"{annotations_path}: no annotations")
    return Dataset(
        scale=scale,
        items=tuple(items),
        annotations={k: tuple(v) for k, v in annotations.items()},
        profiles=profiles,
        dimensions=final_dims,
    )


def export_dataset(dataset: Dataset, annotations_path, annotators_path) -> None:
    """Write a dataset back to the ingestion CSV schema (lossless round trip)."""
    with open(annotations_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "annotator_id", "value"])
        for item_id in dataset.items:
            for rec in dataset.annotations[item_id]:
                label = "|".join(dataset.scale.levels[i] for i in sorted(rec.values))
                writer.writerow([item_id, rec.annotator_id, label])
    names = [d.name for d in dataset.dimensions]
    with open(annotators_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotator_id"] + names)
        for annotator_id, profile in dataset.profiles.items():
            row = [annotator_id] + [profile.memberships.get(n, "") for n in names]
            writer.writerow(row)


def group_annotations(dataset: Dataset, item_id: str,
                      dimension: Dimension | str) -> dict[str, list[AnnotationRecord]]:
    """Partition an item's annotations by the annotators' group in a dimension.

    Annotators without a membership land under the reserved sentinel group,
    which callers must exclude from metric computation. The returned lists
    are pairwise disjoint and their union is the item's full annotation list.
    """
    name = dimension.name if isinstance(dimension, Dimension) else dimension
    dim = dataset.dimension(name)
    groups: dict[str, list[AnnotationRecord]] = {}
    for rec in dataset.annotations_for(item_id):
        group = dataset.profiles[rec.annotator_id].group_for(dim.name)
        groups.setdefault(group, []).append(rec)
    ordered: dict[str, list[AnnotationRecord]] = {}
    for g in dim.groups:
        if g in groups:
            ordered[g] = groups[g]
    if SENTINEL_GROUP in groups:
        ordered[SENTINEL_GROUP] = groups[SENTINEL_GROUP]
    return ordered
