"""Report serialization: CSV, JSON, console tables, trends, run manifests."""

from __future__ import annotations

import hashlib
import io
import json
import math
from typing import Any

from .metric import ApunimReport
from .significance import significance_stars

CSV_COLUMNS = "dimension,group,apunim,p_raw,p_corrected,support,n_items,p_obs,p_apr"


def _num(x: float) -> str:
    return repr(float(x))


def report_to_csv(report: ApunimReport) -> str:
    out = io.StringIO()
    out.write(CSV_COLUMNS + "\n")
    for dim in report.dimensions:
        for g in dim.groups:
            out.write(
                f"{dim.dimension},{g.group},{_num(g.apunim)},{_num(g.p_raw)},"
                f"{_num(g.p_corrected)},{g.support},{g.n_items},{_num(g.p_obs)},"
                f"{_num(g.p_apr)}\n"
            )
    return out.getvalue()


def _json_float(x: float | None) -> float | None:
    # strict JSON has no Infinity/NaN; degenerate statistics serialize as null
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def config_echo(report: ApunimReport) -> dict[str, Any]:
    cfg = report.config
    return {
        "alpha": cfg.alpha,
        "partitions": cfg.partitions,
        "fwer": cfg.fwer,
        "significance_level": cfg.significance_level,
        "seed": cfg.seed,
        "min_group": cfg.min_group,
        "partition_score_mode": cfg.partition_score_mode,
        "support_semantics": "annotations by the group over its qualifying items",
    }


def report_to_dict(report: ApunimReport) -> dict[str, Any]:
    return {
        "version": report.version,
        "config": config_echo(report),
        "scale": {"kind": report.scale_kind, "levels": list(report.scale_levels)},
        "nominal_scale_warning": report.nominal_scale_warning,
        "dimensions": [
            {
                "dimension": dim.dimension,
                "filtered_items": dim.filtered_items,
                "p_apr": _json_float(dim.p_apr),
                "ordinal_order": list(dim.ordinal_order) if dim.ordinal_order else None,
                "diagnostics": list(dim.diagnostics),
                "groups": [
                    {
                        "group": g.group,
                        "apunim": _json_float(g.apunim),
                        "p_raw": _json_float(g.p_raw),
                        "p_corrected": _json_float(g.p_corrected),
                        "support": g.support,
                        "n_items": g.n_items,
                        "p_obs": _json_float(g.p_obs),
                        "p_apr": _json_float(g.p_apr),
                        "t_statistic": _json_float(g.t_statistic),
                        "degrees_of_freedom": g.degrees_of_freedom,
                        "reject": g.reject,
                        "degenerate_variance": g.degenerate_variance,
                        "stars": significance_stars(g.p_corrected),
                    }
                    for g in dim.groups
                ],
            }
            for dim in report.dimensions
        ],
    }


def report_to_json(report: ApunimReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def render_table(report: ApunimReport) -> str:
    """Human-readable summary with significance stars (***: p<0.01, **: p<0.05)."""
    cfg = report.config
    lines = [
        f"apunim report (alpha={cfg.alpha}, partitions={cfg.partitions}, fwer={cfg.fwer}, "
        f"seed={cfg.seed}, min_group={cfg.min_group}, mode={cfg.partition_score_mode})"
    ]
    if report.nominal_scale_warning:
        lines.append("warning: nominal scale; nDFU depends on the declared level order")
    header = f"{'dimension':<20} {'group':<24} {'apunim':>10} {'p_corr':>10} {'support':>8} {'items':>6}"
    lines.append(header)
    lines.append("-" * len(header))
    for dim in report.dimensions:
        for g in dim.groups:
            stars = significance_stars(g.p_corrected)
            lines.append(
                f"{dim.dimension:<20} {g.group:<24} {g.apunim:>10.4f}{stars:<3} "
                f"{g.p_corrected:>7.4f} {g.support:>8} {g.n_items:>6}"
            )
        for note in dim.diagnostics:
            lines.append(f"{dim.dimension:<20} [{note}]")
        if not dim.groups and not dim.diagnostics:
            lines.append(f"{dim.dimension:<20} [no results]")
    return "\n".join(lines) + "\n"


def trend_rows(report_doc: dict[str, Any], significant_only: bool = False) -> list[dict[str, Any]]:
    """Ordinal trend rows from a report document (the report_to_dict shape).

    Positions are the rank of each group in the dimension's ordinal order,
    normalized to [0, 1]. With ``significant_only``, dimensions with fewer
    than two rejected groups are dropped entirely.
    """
    rows = []
    for dim in report_doc["dimensions"]:
        order = dim.get("ordinal_order")
        if not order:
            continue
        if significant_only and sum(1 for g in dim["groups"] if g["reject"]) < 2:
            continue
        span = max(len(order) - 1, 1)
        position = {g: i / span for i, g in enumerate(order)}
        for g in sorted(dim["groups"], key=lambda g: position[g["group"]]):
            rows.append(
                {
                    "dimension": dim["dimension"],
                    "group": g["group"],
                    "ordinal_position_normalized": position[g["group"]],
                    "apunim": g["apunim"],
                    "p_corrected": g["p_corrected"],
                }
            )
    return rows


def trend_csv(rows: list[dict[str, Any]]) -> str:
    out = io.StringIO()
    out.write("dimension,group,ordinal_position_normalized,apunim,p_corrected\n")
    for r in rows:
        out.write(
            f"{r['dimension']},{r['group']},{_num(r['ordinal_position_normalized'])},"
            f"{_num(r['apunim'])},{_num(r['p_corrected'])}\n"
        )
    return out.getvalue()


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def build_manifest(command: str, argv: list[str], inputs: dict[str, Any],
                   settings: dict[str, Any], duration_seconds: float,
                   version: str) -> dict[str, Any]:
    """Everything needed to re-run a command: args, settings, input digests."""
    return {
        "command": command,
        "argv": argv,
        "settings": settings,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)}
                   for name, p in inputs.items() if p is not None},
        "tool_version": version,
        "duration_seconds": duration_seconds,
    }
