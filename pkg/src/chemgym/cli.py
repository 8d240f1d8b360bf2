"""Command-line surface: stream transforms over JSONL (and plain lines).

Every randomized subcommand takes --seed and is byte-reproducible under it.
Usage errors exit 2 (argparse), data errors exit 1; --json-errors switches
stderr to machine-readable JSON.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import selfies as sf
from .chem import parse_smiles, random_traversal_smiles, to_canonical_smiles
from .errors import ChemGymError, SchemaError
from .evaluation import (
    HttpCompletionProvider,
    MockCompletionProvider,
    SuiteConfig,
    run_suite,
    write_outputs,
)
from .rewards import Completion, group_advantages, score
from .sampler import Registry, record_from_json, sample_batch
from .tokenizer import (
    AugmentationPolicy,
    TokenSequence,
    Vocabulary,
    ascii_text_tokens,
    augment_record,
    detokenize,
    tokenize,
)


def _open_in(args):
    return open(args.input, encoding="utf-8") if args.input else sys.stdin


def _open_out(args):
    return open(args.output, "w", encoding="utf-8") if args.output else sys.stdout


def _lines(stream):
    for line in stream:
        line = line.rstrip("\n")
        if line:
            yield line


# ---------------------------------------------------------------------------
# subcommands


def cmd_convert(args) -> int:
    rng = random.Random(args.seed)
    with _open_in(args) as src, _open_out(args) as dst:
        for line in _lines(src):
            if args.source == "selfies":
                mol = sf.decode_selfies(line)
            else:
                mol = parse_smiles(line)
            if args.to == "canonical":
                out = to_canonical_smiles(mol)
            elif args.to == "random":
                out = random_traversal_smiles(mol, rng)
            elif args.to == "selfies":
                out = sf.encode_selfies(mol)
            else:  # smiles
                out = to_canonical_smiles(mol)
            dst.write(out + "\n")
    return 0


def cmd_tokenize(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    with _open_in(args) as src, _open_out(args) as dst:
        for line in _lines(src):
            seq = tokenize(line, vocab, isolate_inputs=not args.no_isolate)
            dst.write(json.dumps({
                "ids": list(seq.ids),
                "spans": [list(s) for s in seq.spans],
            }) + "\n")
    return 0


def cmd_detokenize(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    with _open_in(args) as src, _open_out(args) as dst:
        for line_no, line in enumerate(_lines(src), start=1):
            try:
                obj = json.loads(line)
                ids = tuple(int(i) for i in obj["ids"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise SchemaError(f"bad token line: {exc}", line_no)
            dst.write(detokenize(TokenSequence(ids), vocab) + "\n")
    return 0


def cmd_augment(args) -> int:
    rng = random.Random(args.seed)
    policy = AugmentationPolicy(
        p_format_convert=args.p_convert,
        p_random_traversal=args.p_traversal,
    )
    with _open_in(args) as src, _open_out(args) as dst:
        for line_no, line in enumerate(_lines(src), start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line_no)
            record = record_from_json(obj, line_no)
            dst.write(json.dumps(augment_record(record, policy, rng).to_json(),
                                 sort_keys=True) + "\n")
    return 0


def cmd_sample(args) -> int:
    registry = Registry.from_manifest(args.manifest)
    rng = random.Random(args.seed)
    with _open_out(args) as dst:
        for record in sample_batch(registry, args.n, rng):
            dst.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    return 0


def cmd_score(args) -> int:
    registry = Registry.from_manifest(args.manifest) if args.manifest else None
    lookup: dict[str, tuple[str, str]] = {}
    if registry is not None:
        for category in registry.categories:
            for task_id in registry.task_ids(category):
                lookup[task_id] = (category, task_id)
    with _open_in(args) as src, _open_out(args) as dst:
        for line_no, line in enumerate(_lines(src), start=1):
            try:
                obj = json.loads(line)
                completion_text = obj["completion"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise SchemaError(f"bad scoring line: {exc}", line_no)
            if "record" in obj:
                record = record_from_json(obj["record"], line_no)
            else:
                task_id = obj.get("task_id")
                if registry is None or task_id not in lookup:
                    raise SchemaError(f"unknown task_id {task_id!r}", line_no)
                category, task_id = lookup[task_id]
                store = registry.store(category, task_id)
                record = store.get(int(obj.get("example_index", 0)))
            report = score(record, Completion.from_text(completion_text))
            dst.write(json.dumps(report.to_json(), sort_keys=True) + "\n")
    return 0


def cmd_advantages(args) -> int:
    with _open_in(args) as src, _open_out(args) as dst:
        for line_no, line in enumerate(_lines(src), start=1):
            try:
                obj = json.loads(line)
                rewards = [float(r) for r in obj["rewards"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"bad rewards line: {exc}", line_no)
            dst.write(json.dumps({"advantages": group_advantages(rewards)}) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    suite = SuiteConfig.load(args.suite)
    if args.seed is not None:
        suite = SuiteConfig(**{**suite.__dict__, "seed": args.seed})
    registry = Registry.from_manifest(suite.registry_path)
    if args.provider == "mock":
        if not suite.mock_responses:
            raise SchemaError("suite has no mock_responses entry for --provider mock")
        provider = MockCompletionProvider.from_jsonl(suite.mock_responses)
    else:
        if not args.base_url or not args.model:
            raise SchemaError("--provider http needs --base-url and --model")
        provider = HttpCompletionProvider(args.base_url, args.model,
                                          api_key_env=args.api_key_env)
    outcome = run_suite(suite, registry, provider)
    results_path, summary_path = write_outputs(outcome, args.out)
    sys.stderr.write(f"wrote {results_path} and {summary_path}\n")
    return 0


def cmd_opcheck(args) -> int:
    import numpy as np

    from .hybrid_ops import (
        GQAParams,
        ShortConvParams,
        gqa_forward,
        grad_check,
        shortconv_forward,
    )

    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, ok: bool, detail: str):
        nonlocal failures
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failures += 0 if ok else 1

    d, L = 6, 16
    h = rng.normal(0.0, 1.0, (L, d))
    h[:, 0] = 1.0
    out = shortconv_forward(h, ShortConvParams.identity(d))
    err = float(np.abs(out - h).max())
    report("shortconv identity", err <= 1e-12, f"max abs err {err:.3e}")

    err = grad_check("shortconv", ShortConvParams.random(4, rng=rng),
                     rng.normal(0.0, 1.0, (6, 4)))
    report("shortconv gradient", err <= 1e-4, f"max rel err {err:.3e}")

    err = grad_check("gqa", GQAParams.random(4, 4, 2, 3, rng=rng),
                     rng.normal(0.0, 1.0, (6, 4)))
    report("gqa gradient", err <= 1e-4, f"max rel err {err:.3e}")

    params = ShortConvParams.random(d, rng=rng)
    base_in = rng.normal(0.0, 1.0, (L, d))
    base = shortconv_forward(base_in, params)
    pert_in = base_in.copy()
    pert_in[L // 2] += 1.0
    pert = shortconv_forward(pert_in, params)
    err = float(np.abs(pert[: L // 2] - base[: L // 2]).max())
    report("shortconv causality", err == 0.0, f"pre-perturbation delta {err:.3e}")

    gparams = GQAParams.random(d, 2, 1, 4, rng=rng)
    gbase = gqa_forward(base_in, gparams)
    gpert = gqa_forward(pert_in, gparams)
    err = float(np.abs(gpert[: L // 2] - gbase[: L // 2]).max())
    report("gqa causality", err == 0.0, f"pre-perturbation delta {err:.3e}")

    return 1 if failures else 0


def cmd_vocab_gen(args) -> int:
    if args.text_corpus:
        chars: set[str] = set()
        with open(args.text_corpus, encoding="utf-8") as fh:
            for line in fh:
                chars.update(line)
        text = {c: i for i, c in enumerate(sorted(chars))}
    else:
        text = ascii_text_tokens()
    Vocabulary.build(text).save(args.out)
    sys.stderr.write(f"wrote {args.out}\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemgym",
        description="Chemistry LLM gym: formats, augmentation, sampling, "
                    "rewards, and benchmark evaluation.",
    )
    parser.add_argument("--json-errors", action="store_true",
                        help="emit machine-readable error JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--input", help="input file (default: stdin)")
        p.add_argument("--output", help="output file (default: stdout)")

    p = sub.add_parser("convert", help="convert molecular string formats")
    p.add_argument("--to", required=True,
                   choices=["canonical", "random", "selfies", "smiles"])
    p.add_argument("--source", default="smiles", choices=["smiles", "selfies"],
                   help="input format (default smiles)")
    p.add_argument("--seed", type=int, default=0)
    add_io(p)
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("tokenize", help="text lines -> token id JSONL")
    p.add_argument("--vocab", required=True)
    p.add_argument("--no-isolate", action="store_true",
                   help="tokenize tagged content as plain text")
    add_io(p)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("detokenize", help="token id JSONL -> text lines")
    p.add_argument("--vocab", required=True)
    add_io(p)
    p.set_defaults(fn=cmd_detokenize)

    p = sub.add_parser("augment", help="augment task-record JSONL")
    p.add_argument("--p-convert", type=float, default=0.5)
    p.add_argument("--p-traversal", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    add_io(p)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("sample", help="draw a balanced batch from a registry")
    p.add_argument("--manifest", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="output file (default: stdout)")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("score", help="batch-score completions to reward reports")
    p.add_argument("--manifest", help="registry manifest for task lookup")
    add_io(p)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("advantages", help="group rewards -> group-relative advantages")
    add_io(p)
    p.set_defaults(fn=cmd_advantages)

    p = sub.add_parser("evaluate", help="run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--provider", required=True, choices=["mock", "http"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--api-key-env", default="CHEMGYM_API_KEY")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("opcheck", help="verify hybrid sequence operators")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_opcheck)

    p = sub.add_parser("vocab-gen", help="generate a vocabulary file")
    p.add_argument("--out", required=True)
    p.add_argument("--text-corpus", help="derive text tokens from this file's characters")
    p.set_defaults(fn=cmd_vocab_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ChemGymError as exc:
        if args.json_errors:
            sys.stderr.write(json.dumps(
                {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        else:
            sys.stderr.write(f"error: {exc}\n")
        return 1
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
