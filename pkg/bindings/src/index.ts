/**
 * Bindings for the chemgym library, for use from ML data pipelines.
 *
 * Exposes tokenize/detokenize, record augmentation, balanced batch
 * sampling, completion scoring, and group-relative advantages. All data
 * crosses the process boundary as JSON strings over the CLI's JSONL wire
 * formats, so binding outputs are exactly the native outputs.
 *
 * Version is pinned to the native library version (0.1.0).
 */

import { spawnSync } from "node:child_process";
import { existsSync } from "node:fs";

export const NATIVE_VERSION = "0.1.0";

export interface ChemGymOptions {
  /** Python executable that has chemgym installed (default: python3). */
  python?: string;
}

/** Native errors surface with the native error class name and message. */
export class ChemGymError extends Error {
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(`${kind}: ${message}`);
    this.kind = kind;
    this.name = "ChemGymError";
  }
}

export interface Entity {
  format: string;
  value: string;
}

export interface AnswerType {
  kind: string;
  labels?: string[];
  range?: number[];
  mode?: string;
}

export interface TaskRecord {
  category: string;
  task_id: string;
  prompt_templates: string[];
  entities: Record<string, Entity>;
  answer: Record<string, unknown>;
  answer_type: AnswerType;
}

export interface RewardReport {
  r_format: number;
  r_think: number;
  r_task: number;
  total: number;
  components: Record<string, number>;
}

export interface TokenSequence {
  ids: number[];
  spans: [string, number, number][];
}

export interface AugmentationPolicy {
  pFormatConvert?: number;
  pRandomTraversal?: number;
}

function pythonOf(options?: ChemGymOptions): string {
  return options?.python ?? process.env.CHEMGYM_PYTHON ?? "python3";
}

function runCli(python: string, args: string[], input: string): string {
  const proc = spawnSync(python, ["-m", "chemgym.cli", "--json-errors", ...args], {
    input,
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new ChemGymError("SpawnError", String(proc.error.message));
  }
  if (proc.status !== 0) {
    const stderr = (proc.stderr ?? "").trim();
    try {
      const parsed = JSON.parse(stderr.split("\n").pop() ?? "");
      throw new ChemGymError(parsed.error, parsed.message);
    } catch (err) {
      if (err instanceof ChemGymError) throw err;
      throw new ChemGymError("CliError", stderr || `exit code ${proc.status}`);
    }
  }
  return proc.stdout;
}

function parseLines<T>(stdout: string): T[] {
  return stdout
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

abstract class Handle {
  protected closed = false;

  protected ensureOpen(): void {
    if (this.closed) {
      throw new ChemGymError("ClosedHandle", "handle has been closed");
    }
  }

  /** Handles stay valid until explicitly closed. */
  close(): void {
    this.closed = true;
  }
}

/** Wraps a vocabulary file; backs tokenize/detokenize calls. */
export class Vocabulary extends Handle {
  private readonly python: string;

  constructor(readonly path: string, options?: ChemGymOptions) {
    super();
    this.python = pythonOf(options);
    if (!existsSync(path)) {
      throw new ChemGymError("VocabularyError", `no vocabulary file at ${path}`);
    }
    // cheap probe: an empty line tokenizes to an empty sequence
    runCli(this.python, ["tokenize", "--vocab", path], "\n");
  }

  tokenize(text: string, isolateInputs = true): TokenSequence {
    this.ensureOpen();
    if (text.includes("\n")) {
      // the line-oriented boundary cannot carry embedded newlines; the
      // native API has no such limit
      throw new ChemGymError("BoundaryError", "tokenize input must be single-line");
    }
    if (text.length === 0) {
      return { ids: [], spans: [] };
    }
    const args = ["tokenize", "--vocab", this.path];
    if (!isolateInputs) args.push("--no-isolate");
    const out = parseLines<TokenSequence>(runCli(this.python, args, text + "\n"));
    return out[0];
  }

  detokenize(ids: number[]): string {
    this.ensureOpen();
    if (ids.length === 0) return "";
    const stdout = runCli(
      this.python,
      ["detokenize", "--vocab", this.path],
      JSON.stringify({ ids }) + "\n",
    );
    return stdout.replace(/\n$/, "");
  }
}

/** Wraps a registry manifest; backs sampling and task-indexed scoring. */
export class Registry extends Handle {
  private readonly python: string;

  constructor(readonly manifestPath: string, options?: ChemGymOptions) {
    super();
    this.python = pythonOf(options);
    if (!existsSync(manifestPath)) {
      throw new ChemGymError("SchemaError", `no manifest at ${manifestPath}`);
    }
    runCli(this.python, ["sample", "--manifest", manifestPath, "-n", "0"], "");
  }

  /** Uniform category -> task -> example draws; deterministic per seed. */
  sampleBatch(n: number, seed: number): TaskRecord[] {
    this.ensureOpen();
    const stdout = runCli(
      this.python,
      ["sample", "--manifest", this.manifestPath, "-n", String(n), "--seed", String(seed)],
      "",
    );
    return parseLines<TaskRecord>(stdout);
  }

  score(taskId: string, exampleIndex: number, completion: string): RewardReport {
    this.ensureOpen();
    const line = JSON.stringify({
      task_id: taskId,
      example_index: exampleIndex,
      completion,
    });
    const stdout = runCli(
      this.python,
      ["score", "--manifest", this.manifestPath],
      line + "\n",
    );
    return parseLines<RewardReport>(stdout)[0];
  }
}

/** Score one completion against an inline task record. */
export function score(
  record: TaskRecord,
  completion: string,
  options?: ChemGymOptions,
): RewardReport {
  return scoreBatch([{ record, completion }], options)[0];
}

/** Batch scoring: one process, one JSONL stream, native-ordered results. */
export function scoreBatch(
  items: { record: TaskRecord; completion: string }[],
  options?: ChemGymOptions,
): RewardReport[] {
  if (items.length === 0) return [];
  const input = items.map((item) => JSON.stringify(item)).join("\n") + "\n";
  const stdout = runCli(pythonOf(options), ["score"], input);
  return parseLines<RewardReport>(stdout);
}

/** Augment a record's chemical entities; deterministic given the seed. */
export function augmentRecord(
  record: TaskRecord,
  policy: AugmentationPolicy,
  seed: number,
  options?: ChemGymOptions,
): TaskRecord {
  const args = [
    "augment",
    "--seed", String(seed),
    "--p-convert", String(policy.pFormatConvert ?? 0.5),
    "--p-traversal", String(policy.pRandomTraversal ?? 0.5),
  ];
  const stdout = runCli(pythonOf(options), args, JSON.stringify(record) + "\n");
  return parseLines<TaskRecord>(stdout)[0];
}

/** Group-relative advantages: (r - mean) / (std + eps), zero-mean. */
export function groupAdvantages(
  rewards: number[],
  options?: ChemGymOptions,
): number[] {
  const stdout = runCli(
    pythonOf(options),
    ["advantages"],
    JSON.stringify({ rewards }) + "\n",
  );
  return parseLines<{ advantages: number[] }>(stdout)[0].advantages;
}
