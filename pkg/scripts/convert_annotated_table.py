#!/usr/bin/env python3
"""Convert a wide annotation table into the apunim ingestion schema.

Many public annotation datasets ship as one row per (item, annotator) with
the label and the annotator's demographic attributes in the same row. This
script splits such a table into annotations.csv / annotators.csv /
config.toml as expected by `apunim analyze`.

Example (DICES-350-style table):

    python scripts/convert_annotated_table.py \
        --input diverse_safety_adversarial_dialog_350.csv \
        --item-col item_id --annotator-col rater_id --value-col Q3_bias_overall \
        --dimension rater_race --dimension rater_gender \
        --rename rater_race=Race --rename rater_gender=Gender \
        --output-dir dices350/

See scripts/README.md for per-dataset notes. Column names drift between
dataset releases; always check the header first.
"""

import argparse
import csv
import random
import sys
import warnings
from collections import OrderedDict
from pathlib import Path


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--input", required=True)
    parser.add_argument("--item-col", required=True)
    parser.add_argument("--annotator-col", required=True)
    parser.add_argument("--value-col", required=True)
    parser.add_argument("--dimension", action="append", default=[],
                        help="annotator attribute column to keep (repeatable)")
    parser.add_argument("--rename", action="append", default=[],
                        help="old=new dimension rename (repeatable)")
    parser.add_argument("--levels", help="comma-separated level order; default: "
                                         "sorted distinct values")
    parser.add_argument("--scale-kind", choices=("ordinal", "nominal"), default="ordinal")
    parser.add_argument("--multi-label-sep", default="",
                        help="split the value column on this separator (multi-label)")
    parser.add_argument("--sample", type=int, default=0,
                        help="uniformly sample this many items (0 = keep all)")
    parser.add_argument("--sample-seed", type=int, default=0)
    parser.add_argument("--output-dir", required=True)
    return parser.parse_args()


def main():
    args = parse_args()
    renames = dict(pair.split("=", 1) for pair in args.rename)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in [args.item_col, args.annotator_col, args.value_col,
                               *args.dimension] if c not in (reader.fieldnames or [])]
        if missing:
            sys.exit(f"columns not in {args.input}: {missing} "
                     f"(header: {reader.fieldnames})")
        rows = list(reader)

    if args.sample:
        items = sorted({r[args.item_col] for r in rows})
        # seeded uniform sample; documented divergence: the original study's
        # sampling method for large datasets is unspecified
        keep = set(random.Random(args.sample_seed).sample(items, min(args.sample, len(items))))
        rows = [r for r in rows if r[args.item_col] in keep]

    values = []
    for r in rows:
        raw = r[args.value_col].strip()
        parts = raw.split(args.multi_label_sep) if args.multi_label_sep else [raw]
        values.extend(p for p in parts if p)
    if args.levels:
        levels = [v.strip() for v in args.levels.split(",")]
    else:
        levels = sorted(set(values))
    unknown = sorted(set(values) - set(levels))
    if unknown:
        sys.exit(f"values not covered by the declared levels: {unknown}")

    annotators: "OrderedDict[str, dict]" = OrderedDict()
    seen = {}
    with open(out / "annotations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "annotator_id", "value"])
        for r in rows:
            item, annotator = r[args.item_col], r[args.annotator_col]
            raw = r[args.value_col].strip()
            if not raw:
                continue
            if args.multi_label_sep:
                raw = "|".join(p for p in raw.split(args.multi_label_sep) if p)
            key = (item, annotator)
            if key in seen:
                if seen[key] != raw:
                    warnings.warn(f"conflicting duplicate for {key}; keeping the first")
                continue
            seen[key] = raw
            writer.writerow([item, annotator, raw])
            profile = {renames.get(d, d): r[d].strip() for d in args.dimension}
            previous = annotators.setdefault(annotator, profile)
            if previous != profile:
                warnings.warn(f"annotator {annotator} has conflicting attributes; "
                              f"keeping the first occurrence")

    dim_names = [renames.get(d, d) for d in args.dimension]
    with open(out / "annotators.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotator_id"] + dim_names)
        for annotator, profile in annotators.items():
            writer.writerow([annotator] + [profile.get(d, "") for d in dim_names])

    lines = ["[scale]", f'kind = "{args.scale_kind}"',
             "levels = [" + ", ".join(f'"{v}"' for v in levels) + "]", ""]
    for name in dim_names:
        lines += [f"[dimensions.{name}]", ""]
    (out / "config.toml").write_text("\n".join(lines), encoding="utf-8")
    print(f"wrote {len(seen)} annotations, {len(annotators)} annotators, "
          f"{len(levels)} levels -> {out}")


if __name__ == "__main__":
    main()
