/**
 * Cross-language equivalence: binding outputs must equal the native outputs
 * frozen in fixtures/golden/ (exact for integers and strings, 1e-12 for
 * floats). Regenerate fixtures with `python3 tools/gen_golden.py`.
 */

import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ChemGymError,
  Registry,
  TaskRecord,
  Vocabulary,
  augmentRecord,
  groupAdvantages,
  score,
  scoreBatch,
} from "../src/index.js";

const REPO = resolve(__dirname, "..", "..");
const GOLDEN = resolve(REPO, "fixtures", "golden");

function lines<T>(name: string): T[] {
  return readFileSync(resolve(GOLDEN, name), "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

const FLOAT_TOL = 1e-12;

interface RewardCase {
  record: TaskRecord;
  completion: string;
  report: { r_format: number; r_think: number; r_task: number; total: number };
}

interface TokenizeCase {
  text: string;
  isolate: boolean;
  ids: number[];
  spans: [string, number, number][];
}

interface AugmentCase {
  seed: number;
  p_format_convert: number;
  p_random_traversal: number;
  record: TaskRecord;
  augmented: TaskRecord;
}

interface AdvantageCase {
  rewards: number[];
  advantages: number[];
}

describe("reward scoring equivalence", () => {
  const cases = lines<RewardCase>("rewards.jsonl");

  it("matches every golden report", () => {
    for (const c of cases) {
      const report = score(c.record, c.completion);
      expect(Math.abs(report.r_format - c.report.r_format)).toBeLessThanOrEqual(FLOAT_TOL);
      expect(Math.abs(report.r_think - c.report.r_think)).toBeLessThanOrEqual(FLOAT_TOL);
      expect(Math.abs(report.r_task - c.report.r_task)).toBeLessThanOrEqual(FLOAT_TOL);
      expect(Math.abs(report.total - c.report.total)).toBeLessThanOrEqual(FLOAT_TOL);
    }
  });

  it("matches native output on a 1000-completion batch", () => {
    const batch: { record: TaskRecord; completion: string }[] = [];
    for (let i = 0; i < 1000; i++) {
      const c = cases[i % cases.length];
      batch.push({ record: c.record, completion: c.completion });
    }
    const reports = scoreBatch(batch);
    expect(reports).toHaveLength(1000);
    reports.forEach((report, i) => {
      const want = cases[i % cases.length].report;
      expect(Math.abs(report.total - want.total)).toBeLessThanOrEqual(FLOAT_TOL);
      expect(Math.abs(report.r_task - want.r_task)).toBeLessThanOrEqual(FLOAT_TOL);
    });
  });

  it("surfaces native schema errors as exceptions", () => {
    const bad = { category: "mol_2d" } as unknown as TaskRecord;
    expect(() => score(bad, "<answer>x</answer>")).toThrowError(ChemGymError);
    try {
      score(bad, "<answer>x</answer>");
    } catch (err) {
      expect((err as ChemGymError).kind).toBe("SchemaError");
    }
  });
});

describe("tokenization equivalence", () => {
  const vocab = new Vocabulary(resolve(GOLDEN, "vocab.tsv"));
  const cases = lines<TokenizeCase>("tokenize.jsonl");

  it("matches golden ids and spans, and detokenizes back", () => {
    for (const c of cases) {
      const seq = vocab.tokenize(c.text, c.isolate);
      expect(seq.ids).toEqual(c.ids);
      expect(seq.spans).toEqual(c.spans);
      expect(vocab.detokenize(seq.ids)).toBe(c.text);
    }
  });

  it("rejects embedded newlines at the boundary", () => {
    expect(() => vocab.tokenize("a\nb")).toThrowError(ChemGymError);
  });

  it("rejects use after close", () => {
    const handle = new Vocabulary(resolve(GOLDEN, "vocab.tsv"));
    handle.close();
    expect(() => handle.tokenize("x")).toThrowError(/ClosedHandle/);
  });
});

describe("sampling equivalence", () => {
  it("reproduces the fixed-seed golden batch exactly", () => {
    const golden = JSON.parse(
      readFileSync(resolve(GOLDEN, "sample.json"), "utf-8"),
    ) as { manifest: string; n: number; seed: number; records: TaskRecord[] };
    const registry = new Registry(resolve(REPO, golden.manifest));
    const batch = registry.sampleBatch(golden.n, golden.seed);
    expect(batch).toEqual(golden.records);
  });

  it("scores through a manifest-backed handle", () => {
    const registry = new Registry(resolve(REPO, "demo", "manifest.yaml"));
    const report = registry.score("bbb_class", 0, "<think>t</think><answer>True</answer>");
    expect(report.r_format).toBe(1.0);
    expect(report.r_task).toBe(1.0);
  });
});

describe("augmentation equivalence", () => {
  it("matches golden augmented records", () => {
    for (const c of lines<AugmentCase>("augment.jsonl")) {
      const out = augmentRecord(
        c.record,
        { pFormatConvert: c.p_format_convert, pRandomTraversal: c.p_random_traversal },
        c.seed,
      );
      expect(out).toEqual(c.augmented);
    }
  });
});

describe("advantage equivalence", () => {
  it("matches golden advantages", () => {
    for (const c of lines<AdvantageCase>("advantages.jsonl")) {
      const got = groupAdvantages(c.rewards);
      expect(got).toHaveLength(c.advantages.length);
      got.forEach((value, i) => {
        expect(Math.abs(value - c.advantages[i])).toBeLessThanOrEqual(FLOAT_TOL);
      });
    }
  });
});
