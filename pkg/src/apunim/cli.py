"""Batch command-line front end.

Commands: analyze, polarization, trend, simulate, sensitivity. A TOML config
declares the scale and dimensions; command-line flags override the config's
[defaults] section. Every output directory gets a manifest sufficient to
re-run the command. Exit codes: 0 success, 2 input/validation error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import reporting, synth
from ._backend import get_backend
from ._version import __version__
from .metric import AnalysisConfig, analyze_all
from .model import DatasetError, Dimension, LabelScale, load_dataset

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

CONFIG_DEFAULT_KEYS = ("alpha", "partitions", "fwer", "seed", "min_group",
                       "partition_score_mode", "threads")


def _load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def parse_scale(doc: dict, where: str) -> LabelScale:
    scale = doc.get("scale")
    if not scale or "kind" not in scale or "levels" not in scale:
        raise DatasetError(f"{where}: config must declare scale.kind and scale.levels")
    return LabelScale(scale["kind"], tuple(str(v) for v in scale["levels"]))


def parse_dimensions(doc: dict) -> list[Dimension]:
    dims = []
    for name, spec in doc.get("dimensions", {}).items():
        dims.append(
            Dimension(
                name,
                tuple(spec.get("groups", ())),
                tuple(spec["ordinal_order"]) if "ordinal_order" in spec else None,
            )
        )
    if not dims:
        raise DatasetError("config declares no dimensions")
    return dims


def _analysis_config(args, defaults: dict) -> AnalysisConfig:
    def pick(flag, key, fallback):
        if flag is not None:
            return flag
        return defaults.get(key, fallback)

    return AnalysisConfig(
        alpha=float(pick(args.alpha, "alpha", 0.2)),
        partitions=int(pick(args.partitions, "partitions", 100)),
        fwer=float(pick(args.fwer, "fwer", 0.95)),
        seed=int(pick(args.seed, "seed", 42)),
        min_group=int(pick(args.min_group, "min_group", 2)),
        partition_score_mode=pick(args.partition_score_mode, "partition_score_mode", "mean"),
    )


def _threads(args, defaults: dict) -> int:
    if getattr(args, "threads", None):
        return args.threads
    configured = defaults.get("threads", 0)
    return configured if configured else (os.cpu_count() or 1)


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _load_inputs(args):
    missing = [f for f in ("annotations", "annotators", "config") if not getattr(args, f)]
    if missing:
        raise DatasetError(f"missing required inputs: {', '.join('--' + f for f in missing)}")
    doc = _load_config(args.config)
    scale = parse_scale(doc, args.config)
    dimensions = parse_dimensions(doc)
    dataset = load_dataset(args.annotations, args.annotators, scale, dimensions)
    return dataset, doc.get("defaults", {})


def cmd_analyze(args) -> int:
    started = time.time()
    dataset, defaults = _load_inputs(args)
    config = _analysis_config(args, defaults)
    threads = _threads(args, defaults)
    backend = get_backend(args.backend) if args.backend else None
    report = analyze_all(
        dataset, config,
        dimensions=args.dimension or None,
        threads=threads, backend=backend,
    )
    out = _out_dir(args)
    csv_text = reporting.report_to_csv(report)
    json_text = reporting.report_to_json(report)
    table_text = reporting.render_table(report)
    _write(out / "report.csv", csv_text)
    _write(out / "report.json", json_text)
    _write(out / "report.txt", table_text)
    manifest = reporting.build_manifest(
        "analyze", sys.argv[1:],
        {"annotations": args.annotations, "annotators": args.annotators, "config": args.config},
        {**reporting.config_echo(report), "threads": threads,
         "backend": (backend or get_backend()).BACKEND_NAME,
         "dimensions": args.dimension or [d.name for d in dataset.dimensions]},
        time.time() - started, __version__,
    )
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print({"csv": csv_text, "json": json_text}.get(args.format, table_text), end="")
    return EXIT_OK


def cmd_polarization(args) -> int:
    started = time.time()
    dataset, _ = _load_inputs(args)
    from .polarization import item_ndfu

    rows = ["item_id,ndfu,n_annotations"]
    scores = []
    for item_id in dataset.items:
        score = item_ndfu(dataset, item_id)
        scores.append(score.value)
        rows.append(f"{item_id},{score.value!r},{score.n_annotations}")
    out = _out_dir(args)
    _write(out / "polarization.csv", "\n".join(rows) + "\n")
    if args.bins:
        edges = [i / args.bins for i in range(args.bins + 1)]
        counts = [0] * args.bins
        for v in scores:
            slot = min(int(v * args.bins), args.bins - 1)
            counts[slot] += 1
        hist_rows = ["bin_start,bin_end,count"]
        hist_rows += [f"{edges[i]!r},{edges[i + 1]!r},{counts[i]}" for i in range(args.bins)]
        _write(out / "polarization_hist.csv", "\n".join(hist_rows) + "\n")
    manifest = reporting.build_manifest(
        "polarization", sys.argv[1:],
        {"annotations": args.annotations, "annotators": args.annotators, "config": args.config},
        {"bins": args.bins}, time.time() - started, __version__,
    )
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def cmd_trend(args) -> int:
    started = time.time()
    inputs = {}
    if args.report:
        with open(args.report, encoding="utf-8") as fh:
            doc = json.load(fh)
        inputs["report"] = args.report
    else:
        if not (args.annotations and args.annotators and args.config):
            raise DatasetError("trend needs either --report or the analyze inputs")
        dataset, defaults = _load_inputs(args)
        config = _analysis_config(args, defaults)
        report = analyze_all(dataset, config, dimensions=args.dimension or None,
                             threads=_threads(args, defaults))
        doc = reporting.report_to_dict(report)
        inputs = {"annotations": args.annotations, "annotators": args.annotators,
                  "config": args.config}
    if args.dimension:
        wanted = set(args.dimension)
        found = {d["dimension"]: d for d in doc["dimensions"]}
        missing = wanted - set(found)
        if missing:
            raise DatasetError(f"dimensions not in the report: {sorted(missing)}")
        non_ordinal = [n for n in wanted if not found[n].get("ordinal_order")]
        if non_ordinal:
            raise DatasetError(f"dimensions without an ordinal order: {sorted(non_ordinal)}")
        doc = {**doc, "dimensions": [d for d in doc["dimensions"] if d["dimension"] in wanted]}
    rows = reporting.trend_rows(doc, significant_only=args.significant_only)
    if not rows and not args.significant_only:
        raise DatasetError("no ordinal dimension in the report")
    out = _out_dir(args)
    _write(out / "trend.csv", reporting.trend_csv(rows))
    manifest = reporting.build_manifest(
        "trend", sys.argv[1:], inputs,
        {"significant_only": args.significant_only},
        time.time() - started, __version__,
    )
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def _parse_dimension_spec(text: str) -> tuple[str, tuple[tuple[str, float], ...]]:
    # "gender:F=0.5,M=0.5"
    name, _, rest = text.partition(":")
    if not rest:
        raise DatasetError(f"bad dimension spec {text!r}; expected name:group=prop,...")
    proportions = []
    for part in rest.split(","):
        group, _, weight = part.partition("=")
        if not weight:
            raise DatasetError(f"bad group proportion {part!r} in {text!r}")
        proportions.append((group, float(weight)))
    return name, tuple(proportions)


def cmd_simulate(args) -> int:
    started = time.time()
    dims = tuple(_parse_dimension_spec(s) for s in args.group_spec)
    effect = None
    if args.effect == "planted_bimodal":
        if not (args.effect_dimension and args.effect_low and args.effect_high):
            raise DatasetError("planted_bimodal needs --effect-dimension/--effect-low/--effect-high")
        effect = synth.PlantedBimodal(args.effect_dimension, args.effect_low,
                                      args.effect_high, args.strength)
    spec = synth.SyntheticSpec(
        n_items=args.items, annotators_per_item=args.annotators_per_item,
        dimensions=dims, scale=synth.default_scale(args.levels),
        effect=effect, noise=args.noise, seed=args.seed,
    )
    dataset = synth.generate(spec)
    out = _out_dir(args)
    from .model import export_dataset

    export_dataset(dataset, out / "annotations.csv", out / "annotators.csv")
    lines = ["[scale]", 'kind = "ordinal"',
             "levels = [" + ", ".join(f'"{v}"' for v in dataset.scale.levels) + "]", ""]
    for dim in dataset.dimensions:
        lines.append(f"[dimensions.{dim.name}]")
        lines.append("groups = [" + ", ".join(f'"{g}"' for g in dim.groups) + "]")
        lines.append("")
    _write(out / "config.toml", "\n".join(lines))
    manifest = reporting.build_manifest(
        "simulate", sys.argv[1:], {},
        {"items": args.items, "annotators_per_item": args.annotators_per_item,
         "levels": args.levels, "effect": args.effect, "strength": args.strength,
         "noise": args.noise, "seed": args.seed},
        time.time() - started, __version__,
    )
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    started = time.time()
    dataset, _ = _load_inputs(args)
    curve = synth.sensitivity(
        dataset, args.max_k, resamples=args.resamples, seed=args.seed or 0,
        min_items_frac=args.min_items_frac,
        dimension=args.dimension[0] if args.dimension else None,
        group=args.group,
    )
    rows = ["k,std,n_items_used"]
    rows += [f"{e.k},{e.std!r},{e.n_items_used}" for e in curve.entries]
    out = _out_dir(args)
    _write(out / "sensitivity.csv", "\n".join(rows) + "\n")
    manifest = reporting.build_manifest(
        "sensitivity", sys.argv[1:],
        {"annotations": args.annotations, "annotators": args.annotators, "config": args.config},
        {"max_k": args.max_k, "resamples": args.resamples, "seed": args.seed,
         "min_items_frac": args.min_items_frac, "dimension": args.dimension,
         "group": args.group},
        time.time() - started, __version__,
    )
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, *, needs_data: bool = True) -> None:
    if needs_data:
        parser.add_argument("--annotations", help="annotations CSV (item_id,annotator_id,value)")
        parser.add_argument("--annotators", help="annotator profile CSV")
        parser.add_argument("--config", help="TOML config declaring scale and dimensions")
    parser.add_argument("--alpha", type=float, help="item filter threshold (keep nDFU > alpha)")
    parser.add_argument("--partitions", type=int, help="random partitions per item")
    parser.add_argument("--fwer", type=float, help="family-wise error rate, 0.95-style")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--min-group", type=int, dest="min_group",
                        help="minimum annotations for a (pseudo-)group histogram")
    parser.add_argument("--partition-score-mode", choices=("mean", "size_matched"),
                        dest="partition_score_mode")
    parser.add_argument("--dimension", action="append", help="restrict to a dimension (repeatable)")
    parser.add_argument("--output-dir", default="apunim-out")
    parser.add_argument("--format", choices=("csv", "json", "table"), default="table")
    parser.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    parser.add_argument("--backend", choices=("auto", "c", "python"),
                        help="kernel backend override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apunim",
        description="Attribute annotation polarization to annotator subgroups.",
    )
    parser.add_argument("--version", action="version", version=f"apunim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full apunim report for every dimension")
    _add_common(p)

    p = sub.add_parser("polarization", help="per-item nDFU table")
    _add_common(p)
    p.add_argument("--bins", type=int, default=0, help="also emit a binned nDFU histogram")

    p = sub.add_parser("trend", help="apunim across ordinal dimension levels")
    _add_common(p)
    p.add_argument("--report", help="reuse an existing report.json instead of re-analyzing")
    p.add_argument("--significant-only", action="store_true",
                   help="keep only dimensions with 2+ significant groups")

    p = sub.add_parser("simulate", help="write a synthetic dataset with known ground truth")
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--annotators-per-item", type=int, required=True, dest="annotators_per_item")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--group-spec", action="append", required=True, dest="group_spec",
                   help="dimension spec, e.g. gender:F=0.5,M=0.5 (repeatable)")
    p.add_argument("--effect", choices=("none", "planted_bimodal"), default="none")
    p.add_argument("--effect-dimension", dest="effect_dimension")
    p.add_argument("--effect-low", dest="effect_low")
    p.add_argument("--effect-high", dest="effect_high")
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default="apunim-out")

    p = sub.add_parser("sensitivity", help="std of resampled polarization vs annotator count")
    _add_common(p)
    p.add_argument("--max-k", type=int, dest="max_k")
    p.add_argument("--resamples", type=int, default=30)
    p.add_argument("--min-items-frac", type=float, default=0.5, dest="min_items_frac")
    p.add_argument("--group", help="restrict to one group of --dimension")
    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "polarization": cmd_polarization,
    "trend": cmd_trend,
    "simulate": cmd_simulate,
    "sensitivity": cmd_sensitivity,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"apunim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"apunim: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
