"""Native outputs must match the checked-in cross-language golden corpus."""

import json
import math
import random
from pathlib import Path

import pytest

from chemgym.rewards import Completion, group_advantages, score
from chemgym.sampler import Registry, record_from_json, sample_batch
from chemgym.tokenizer import AugmentationPolicy, Vocabulary, augment_record, tokenize

REPO = Path(__file__).resolve().parent.parent
GOLDEN = REPO / "fixtures" / "golden"

pytestmark = pytest.mark.skipif(not GOLDEN.exists(),
                                reason="golden fixtures not generated")


def _lines(name):
    with open(GOLDEN / name, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_reward_reports_match():
    for case in _lines("rewards.jsonl"):
        record = record_from_json(case["record"])
        report = score(record, Completion.from_text(case["completion"]))
        want = case["report"]
        for key in ("r_format", "r_think", "r_task", "total"):
            assert math.isclose(getattr(report, key), want[key],
                                rel_tol=0, abs_tol=1e-12)


def test_tokenize_matches():
    vocab = Vocabulary.load(GOLDEN / "vocab.tsv")
    for case in _lines("tokenize.jsonl"):
        seq = tokenize(case["text"], vocab, isolate_inputs=case["isolate"])
        assert list(seq.ids) == case["ids"]
        assert [list(s) for s in seq.spans] == case["spans"]


def test_sample_matches():
    with open(GOLDEN / "sample.json") as fh:
        case = json.load(fh)
    registry = Registry.from_manifest(REPO / case["manifest"])
    batch = sample_batch(registry, case["n"], random.Random(case["seed"]))
    assert [r.to_json() for r in batch] == case["records"]


def test_augment_matches():
    for case in _lines("augment.jsonl"):
        policy = AugmentationPolicy(
            p_format_convert=case["p_format_convert"],
            p_random_traversal=case["p_random_traversal"],
        )
        augmented = augment_record(record_from_json(case["record"]), policy,
                                   random.Random(case["seed"]))
        assert augmented.to_json() == case["augmented"]


def test_advantages_match():
    for case in _lines("advantages.jsonl"):
        got = group_advantages(case["rewards"])
        assert all(math.isclose(g, w, rel_tol=0, abs_tol=1e-12)
                   for g, w in zip(got, case["advantages"]))
