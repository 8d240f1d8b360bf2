"""Regenerate the cross-language golden fixtures under fixtures/golden/.

Both the native test suite (tests/test_golden_fixtures.py) and the bindings
package assert against these files, pinning the wire-format behavior.
"""

import json
import random
from pathlib import Path

from chemgym.rewards import Completion, group_advantages, score
from chemgym.sampler import Registry, record_from_json, sample_batch
from chemgym.tokenizer import (
    AugmentationPolicy,
    Vocabulary,
    ascii_text_tokens,
    augment_record,
    tokenize,
)

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "fixtures" / "golden"


def _record(kind: str, value: str = "CC(=O)O") -> dict:
    base = {
        "category": "mol_2d",
        "task_id": f"golden_{kind}",
        "prompt_templates": ["Q {mol}"],
        "entities": {"mol": {"format": "smiles", "value": value}},
    }
    if kind == "classification":
        base["answer"] = {"label": "True"}
        base["answer_type"] = {"kind": "classification", "labels": ["True", "False"]}
    elif kind == "regression":
        base["answer"] = {"value": "5.0"}
        base["answer_type"] = {"kind": "regression", "range": [0.0, 10.0]}
    else:
        base["answer"] = {"ground_truth": ["CC(=O)O"]}
        base["answer_type"] = {"kind": "generation", "mode": "ground_truth"}
    return base


REWARD_CASES = [
    ("classification", "<think>" + "r" * 5000 + "</think><answer>True</answer>"),
    ("classification", "<answer>False</answer>"),
    ("classification", "no structure at all"),
    ("classification", "<think>a<think>b</think><answer>True</answer>"),
    ("regression", "<think>" + "x" * 1250 + "</think><answer>4.0</answer>"),
    ("regression", "<think>t</think><answer>3.14159</answer>"),
    ("regression", "<think>t</think><answer>N/A</answer>"),
    ("generation", "<think>ok</think><answer>OC(C)=O</answer>"),
    ("generation", "<think>ok</think><answer>CCO</answer>"),
    ("generation", "<think>ok</think><answer>!!</answer>"),
    ("classification", ""),
    ("regression", "<think>" + "y" * 9000 + "</think><answer>5.0</answer>"),
]

TOKENIZE_CASES = [
    ("<smiles>CC(=O)O</smiles>", True),
    ("<smiles>CCl</smiles>", True),
    ("<smiles>C%12CCCC%12Br</smiles>", True),
    ("<selfies>[C][C][=Branch1][C][=O][O]</selfies>", True),
    ("<fasta>MKVA</fasta>", True),
    ("The molecule <smiles>c1ccccc1O</smiles> is phenol.", True),
    ("<smiles>CC(=O)O</smiles>", False),
    ("plain text only", True),
    ("", True),
    ("mix <fasta>GG</fasta> and <smiles>N[C@@H](C)C(=O)O</smiles> here", True),
]

AUGMENT_CASES = [
    (1, 0.0, 1.0, _record("classification")),
    (2, 1.0, 0.0, _record("classification")),
    (3, 1.0, 1.0, _record("regression", value="CC(=O)OC1CCC1N")),
    (9, 0.5, 0.5, _record("generation", value="c1ccccc1O")),
]

ADVANTAGE_CASES = [
    [1.0, 1.0, 1.0, 1.0],
    [0.0, 2.0],
    [0.5, -0.25, 1.75, 0.0, -1.0, 2.0, 0.125, -0.5],
    [3.0, 1.0, 2.0],
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    vocab = Vocabulary.build(ascii_text_tokens())
    vocab.save(OUT / "vocab.tsv")

    with open(OUT / "rewards.jsonl", "w") as fh:
        for kind, completion in REWARD_CASES:
            record_json = _record(kind)
            report = score(record_from_json(record_json),
                           Completion.from_text(completion))
            fh.write(json.dumps({
                "record": record_json,
                "completion": completion,
                "report": report.to_json(),
            }, sort_keys=True) + "\n")

    with open(OUT / "tokenize.jsonl", "w") as fh:
        for text, isolate in TOKENIZE_CASES:
            seq = tokenize(text, vocab, isolate_inputs=isolate)
            fh.write(json.dumps({
                "text": text,
                "isolate": isolate,
                "ids": list(seq.ids),
                "spans": [list(s) for s in seq.spans],
            }, sort_keys=True) + "\n")

    registry = Registry.from_manifest(REPO / "demo" / "manifest.yaml")
    batch = sample_batch(registry, 25, random.Random(11))
    with open(OUT / "sample.json", "w") as fh:
        json.dump({
            "manifest": "demo/manifest.yaml",
            "n": 25,
            "seed": 11,
            "records": [r.to_json() for r in batch],
        }, fh, sort_keys=True, indent=1)
        fh.write("\n")

    with open(OUT / "augment.jsonl", "w") as fh:
        for seed, p_convert, p_traversal, record_json in AUGMENT_CASES:
            policy = AugmentationPolicy(p_format_convert=p_convert,
                                        p_random_traversal=p_traversal)
            augmented = augment_record(record_from_json(record_json), policy,
                                       random.Random(seed))
            fh.write(json.dumps({
                "seed": seed,
                "p_format_convert": p_convert,
                "p_random_traversal": p_traversal,
                "record": record_json,
                "augmented": augmented.to_json(),
            }, sort_keys=True) + "\n")

    with open(OUT / "advantages.jsonl", "w") as fh:
        for rewards in ADVANTAGE_CASES:
            fh.write(json.dumps({
                "rewards": rewards,
                "advantages": group_advantages(rewards),
            }) + "\n")

    print(f"golden fixtures written under {OUT}")


if __name__ == "__main__":
    main()
