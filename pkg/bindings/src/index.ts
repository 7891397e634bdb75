/**
 * Node bindings for the apunim annotation-polarization engine.
 *
 * The binding is a shim: every computation runs in the Python package via
 * its command-line interface and documented file formats, so there is
 * exactly one implementation to validate. Results are the engine's own JSON
 * report, parsed — numerically identical to what the CLI writes for the
 * same inputs and seed.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

const DEFAULT_PYTHON = process.env.APUNIM_PYTHON ?? "python3";

export interface Scale {
  kind: "ordinal" | "nominal";
  levels: string[];
}

export interface DimensionSpec {
  name: string;
  /** Optional ordered group list for ordinal dimensions (trend analysis). */
  ordinalOrder?: string[];
}

export interface AnnotationRow {
  itemId: string;
  annotatorId: string;
  /** A level identifier, or several for multi-label annotations. */
  value: string | string[];
}

/** One annotator's group per dimension; empty string = membership unknown. */
export type AnnotatorRow = { annotatorId: string } & Record<string, string>;

export interface AnalyzeInput {
  /** Annotation rows, or a path to an existing annotations CSV. */
  annotations: AnnotationRow[] | string;
  /** Annotator profile rows, or a path to an existing annotators CSV. */
  annotators: AnnotatorRow[] | string;
  scale: Scale;
  dimensions: Array<string | DimensionSpec>;
}

export interface AnalyzeConfig {
  alpha?: number;
  partitions?: number;
  /** 0.95-style family-wise error rate; rejection below 1 - fwer. */
  fwer?: number;
  seed?: number;
  minGroup?: number;
  partitionScoreMode?: "mean" | "size_matched";
  /** Restrict the run to these dimensions (must be declared). */
  dimensions?: string[];
  threads?: number;
  python?: string;
}

export interface GroupResult {
  group: string;
  apunim: number | null;
  p_raw: number | null;
  p_corrected: number | null;
  support: number;
  n_items: number;
  p_obs: number | null;
  p_apr: number | null;
  t_statistic: number | null;
  degrees_of_freedom: number;
  reject: boolean;
  degenerate_variance: boolean;
  stars: string;
}

export interface DimensionResult {
  dimension: string;
  filtered_items: number;
  p_apr: number | null;
  ordinal_order: string[] | null;
  diagnostics: string[];
  groups: GroupResult[];
}

export interface ApunimReport {
  version: string;
  config: {
    alpha: number;
    partitions: number;
    fwer: number;
    significance_level: number;
    seed: number;
    min_group: number;
    partition_score_mode: string;
    support_semantics: string;
  };
  scale: { kind: string; levels: string[] };
  nominal_scale_warning: boolean;
  dimensions: DimensionResult[];
}

function runCli(python: string, args: string[]): string {
  try {
    return execFileSync(python, ["-m", "apunim", ...args], { encoding: "utf8" });
  } catch (error) {
    const e = error as { stderr?: string; message: string };
    throw new Error(e.stderr ? e.stderr.toString().trim() : e.message);
  }
}

function csvField(text: string): string {
  if (/[",\n]/.test(text)) {
    return `"${text.replace(/"/g, '""')}"`;
  }
  return text;
}

function tomlString(text: string): string {
  return `"${text.replace(/\\/g, "\\\\").replace(/"/g, '\\"')}"`;
}

function writeConfig(path: string, scale: Scale, dimensions: Array<string | DimensionSpec>): void {
  const lines = [
    "[scale]",
    `kind = ${tomlString(scale.kind)}`,
    `levels = [${scale.levels.map(tomlString).join(", ")}]`,
    "",
  ];
  for (const dim of dimensions) {
    const spec = typeof dim === "string" ? { name: dim } : dim;
    lines.push(`[dimensions.${spec.name}]`);
    if (spec.ordinalOrder) {
      lines.push(`ordinal_order = [${spec.ordinalOrder.map(tomlString).join(", ")}]`);
    }
    lines.push("");
  }
  writeFileSync(path, lines.join("\n"), "utf8");
}

function writeAnnotations(path: string, rows: AnnotationRow[]): void {
  const lines = ["item_id,annotator_id,value"];
  for (const row of rows) {
    const value = Array.isArray(row.value) ? row.value.join("|") : row.value;
    lines.push([row.itemId, row.annotatorId, value].map(csvField).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf8");
}

function writeAnnotators(path: string, rows: AnnotatorRow[],
                         dimensions: Array<string | DimensionSpec>): void {
  const names = dimensions.map((d) => (typeof d === "string" ? d : d.name));
  const lines = ["annotator_id," + names.map(csvField).join(",")];
  for (const row of rows) {
    const cells = [row.annotatorId, ...names.map((n) => row[n] ?? "")];
    lines.push(cells.map(csvField).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf8");
}

function inTempDir<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "apunim-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * nDFU of pre-built bin counts, or of raw annotation values binned against
 * declared levels. 0 = unimodal, 1 = maximally bimodal.
 *
 * `ndfu([3, 0, 0, 0, 3])` treats the numbers as per-bin counts;
 * `ndfu(["0", "4", "4"], { levels: [...] })` bins level identifiers first
 * (string arrays inside mean multi-label annotations).
 */
export function ndfu(
  input: number[] | Array<string | string[]>,
  options: { levels?: string[]; python?: string } = {},
): number {
  const python = options.python ?? DEFAULT_PYTHON;
  let levels: string[];
  let rows: AnnotationRow[];
  if (input.length > 0 && typeof input[0] === "number") {
    const counts = input as number[];
    levels = counts.map((_, i) => String(i));
    rows = [];
    counts.forEach((count, bin) => {
      if (!Number.isInteger(count) || count < 0) {
        throw new Error(`bin ${bin}: counts must be non-negative integers`);
      }
      for (let j = 0; j < count; j += 1) {
        rows.push({ itemId: "item", annotatorId: `a${bin}_${j}`, value: String(bin) });
      }
    });
  } else {
    if (!options.levels) {
      throw new Error("raw annotation values need options.levels to define the bins");
    }
    levels = options.levels;
    rows = (input as Array<string | string[]>).map((value, i) => ({
      itemId: "item",
      annotatorId: `a${i}`,
      value,
    }));
  }
  return inTempDir((dir) => {
    writeAnnotations(join(dir, "annotations.csv"), rows);
    writeAnnotators(join(dir, "annotators.csv"),
                    rows.map((r) => ({ annotatorId: r.annotatorId, d: "g" })), ["d"]);
    writeConfig(join(dir, "config.toml"), { kind: "ordinal", levels }, ["d"]);
    runCli(python, [
      "polarization",
      "--annotations", join(dir, "annotations.csv"),
      "--annotators", join(dir, "annotators.csv"),
      "--config", join(dir, "config.toml"),
      "--output-dir", join(dir, "out"),
    ]);
    const csv = readFileSync(join(dir, "out", "polarization.csv"), "utf8");
    const line = csv.split("\n").find((l) => l.startsWith("item,"));
    if (!line) {
      throw new Error("engine returned no polarization row");
    }
    return Number(line.split(",")[1]);
  });
}

/**
 * Full polarization attribution with significance testing: the engine's JSON
 * report, parsed. Identical to what `apunim analyze` writes for the same
 * inputs and seed.
 */
export function analyze(input: AnalyzeInput, config: AnalyzeConfig = {}): ApunimReport {
  const python = config.python ?? DEFAULT_PYTHON;
  return inTempDir((dir) => {
    const annotationsPath = typeof input.annotations === "string"
      ? input.annotations
      : join(dir, "annotations.csv");
    if (typeof input.annotations !== "string") {
      writeAnnotations(annotationsPath, input.annotations);
    }
    const annotatorsPath = typeof input.annotators === "string"
      ? input.annotators
      : join(dir, "annotators.csv");
    if (typeof input.annotators !== "string") {
      writeAnnotators(annotatorsPath, input.annotators, input.dimensions);
    }
    const configPath = join(dir, "config.toml");
    writeConfig(configPath, input.scale, input.dimensions);

    const args = [
      "analyze",
      "--annotations", annotationsPath,
      "--annotators", annotatorsPath,
      "--config", configPath,
      "--output-dir", join(dir, "out"),
      "--format", "json",
    ];
    if (config.alpha !== undefined) args.push("--alpha", String(config.alpha));
    if (config.partitions !== undefined) args.push("--partitions", String(config.partitions));
    if (config.fwer !== undefined) args.push("--fwer", String(config.fwer));
    if (config.seed !== undefined) args.push("--seed", String(config.seed));
    if (config.minGroup !== undefined) args.push("--min-group", String(config.minGroup));
    if (config.partitionScoreMode !== undefined) {
      args.push("--partition-score-mode", config.partitionScoreMode);
    }
    if (config.threads !== undefined) args.push("--threads", String(config.threads));
    for (const name of config.dimensions ?? []) {
      args.push("--dimension", name);
    }
    runCli(python, args);
    return JSON.parse(readFileSync(join(dir, "out", "report.json"), "utf8")) as ApunimReport;
  });
}

/** Version string of the installed Python engine. */
export function coreVersion(python: string = DEFAULT_PYTHON): string {
  return runCli(python, ["--version"]).trim().replace(/^apunim\s+/, "");
}
