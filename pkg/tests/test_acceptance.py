"""Acceptance suite: one test per acceptance criterion.

Each criterion prints a [PASS]/[FAIL] line (visible regardless of pytest
capture) and enforces its runtime budget. Run with:

    pytest tests/test_acceptance.py -v
"""

import functools
import json
import math
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from chemgym.chem import (
    kekulize,
    parse_smiles,
    random_traversal_smiles,
    to_canonical_smiles,
)
from chemgym.errors import ChemGymError
from chemgym.evaluation import (
    auprc,
    auroc,
    class_probs_from_logprobs,
    majority_vote,
    median,
    spearman,
)
from chemgym.rewards import (
    Completion,
    canonical_ground_truth,
    reward_classification,
    reward_format,
    reward_generation,
    reward_regression,
    reward_think,
)
from chemgym.sampler import (
    JsonlExampleStore,
    Registry,
    sample_batch,
    sample_plan,
)
from chemgym.selfies import decode_selfies, encode_selfies, selfies_alphabet
from chemgym.tokenizer import (
    Vocabulary,
    ascii_text_tokens,
    detokenize,
    tokenize,
)
from helpers import corpus_smiles

REPO = Path(__file__).resolve().parent.parent
DEMO = REPO / "demo"


# one (name, verdict, detail) entry per criterion; conftest prints these in
# the terminal summary so a line shows for every criterion on every run
CRITERION_RESULTS: list[tuple[str, str, str]] = []


def criterion(name: str, budget_seconds: float):
    """Wrap a criterion: enforce the runtime budget, record the verdict."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                CRITERION_RESULTS.append((name, "FAIL", f"{type(exc).__name__}"))
                print(f"[FAIL] {name}", flush=True)
                raise
            elapsed = time.monotonic() - start
            verdict = "PASS" if elapsed <= budget_seconds else "FAIL"
            detail = f"{elapsed:.1f}s, budget {budget_seconds:.0f}s"
            CRITERION_RESULTS.append((name, verdict, detail))
            print(f"[{verdict}] {name} ({detail})", flush=True)
            assert elapsed <= budget_seconds, \
                f"{name} took {elapsed:.1f}s > {budget_seconds}s"
        return wrapper

    return deco


@criterion("reward exactness", 10.0)
def test_reward_exactness():
    # r_format worked cases
    assert reward_format(Completion.from_text("<think>x</think><answer>y</answer>")) == 1.0
    assert reward_format(Completion.from_text("no tags at all")) == -1.0
    assert reward_format(Completion.from_text("<think>a<think>b</think>")) == 0.0
    # r_think saturation points
    for n, want in ((0, -1.0), (2500, 0.0), (5000, 1.0), (9000, 1.0)):
        raw = "<think>" + "x" * n + "</think>"
        assert reward_think(Completion.from_text(raw)) == want
    # r_qa cases
    assert reward_classification("True", "True") == 1.0
    assert reward_classification("False", "True") == 0.0
    assert reward_classification("True, because the ring is aromatic", "True") == -1.0
    # r_reg cases
    assert reward_regression("5.0", "5.0", (0.0, 10.0)) == 1.0
    assert math.isclose(reward_regression("3.0", "5.0", (0.0, 10.0)), 0.8,
                        rel_tol=0, abs_tol=1e-15)
    assert math.isclose(reward_regression("3.14159", "5.0", (0.0, 10.0)),
                        -0.185841, rel_tol=0, abs_tol=1e-12)
    # generation supersession
    gt = canonical_ground_truth(["CC(=O)O"])
    assert reward_generation("CCO") == 1.0
    assert reward_generation("!!bad!!") == -1.0
    assert reward_generation("OC(C)=O", gt) == 1.0
    assert reward_generation("CCO", gt) == -1.0

    # bounds fuzz over 1e5 random completions
    rng = random.Random(2024)
    pieces = ["<think>", "</think>", "<answer>", "</answer>", "True", "False",
              "3.5", "CCO", "xyz", " ", "C1CC", "%%", "\n"]
    for i in range(100_000):
        raw = "".join(rng.choice(pieces) for _ in range(rng.randrange(8)))
        completion = Completion.from_text(raw)
        assert reward_format(completion) in (-1.0, 0.0, 1.0)
        assert -1.0 <= reward_think(completion) <= 1.0
        a = rng.choice(pieces)
        g = rng.choice(["True", "5.0", "CCO"])
        assert reward_classification(a, g) in (-1.0, 0.0, 1.0)
        r = reward_regression(a, "5.0", (0.0, 10.0))
        assert -1.0 <= r <= 1.0  # |a-5| <= 10 within the parseable pieces
        assert reward_generation(a) in (-1.0, 1.0)
        assert reward_generation(a, gt) in (-1.0, 1.0)


@criterion("tokenizer golden + corpus round trip", 30.0)
def test_tokenizer_golden_and_roundtrip():
    vocab = Vocabulary.build(ascii_text_tokens())
    seq = tokenize("<smiles>CC(=O)O</smiles>", vocab)
    surfaces = [vocab.id_to_surface[t] for t in seq.ids]
    assert surfaces == ["<smiles>", "C", "C", "(", "=", "O", ")", "O", "</smiles>"]
    sm = {s: i for (f, s), i in vocab.chem_tokens.items() if f == "smiles"}
    assert list(seq.ids) == [
        vocab.tag_tokens["<smiles>"], sm["C"], sm["C"], sm["("], sm["="],
        sm["O"], sm[")"], sm["O"], vocab.tag_tokens["</smiles>"],
    ]

    rng = random.Random(77)
    molecules = corpus_smiles(rng, 2500)
    phrases = ["Predict the property of", "Convert", "Optimize", "Describe"]
    lines = []
    for i in range(10_000):
        smiles = molecules[i % len(molecules)]
        phrase = phrases[i % len(phrases)]
        lines.append(f"{phrase} <smiles>{smiles}</smiles> please.")
    for line in lines:
        assert detokenize(tokenize(line, vocab), vocab) == line


@criterion("chemistry round trips (1000 molecules + SELFIES fuzz)", 120.0)
def test_chemistry_roundtrips():
    rng = random.Random(31337)
    corpus = corpus_smiles(rng, 1000)
    assert len(corpus) == 1000
    for smiles in corpus:
        mol = parse_smiles(smiles)
        canonical = to_canonical_smiles(mol)
        assert to_canonical_smiles(parse_smiles(canonical)) == canonical
        for seed in range(20):
            variant = random_traversal_smiles(mol, random.Random(seed))
            assert to_canonical_smiles(parse_smiles(variant)) == canonical
        kek_canonical = to_canonical_smiles(kekulize(mol))
        decoded = decode_selfies(encode_selfies(mol))
        assert to_canonical_smiles(decoded) == kek_canonical

    from chemgym.chem import allowed_valences
    alphabet = selfies_alphabet()
    fuzz_rng = random.Random(5150)
    failures = 0
    for _ in range(10_000):
        s = "".join(fuzz_rng.choice(alphabet) for _ in range(50))
        try:
            mol = decode_selfies(s)
            for i, atom in enumerate(mol.atoms):
                total = int(mol.sigma_valence(i)) + atom.h_count
                if total not in allowed_valences(atom.element, atom.charge):
                    failures += 1
                    break
        except ChemGymError:
            failures += 1
    assert failures == 0


@criterion("sampler uniformity under 1:10^6 skew", 30.0)
def test_sampler_uniformity(tmp_path):
    sizes = {
        "c0": {"t00": 1},
        "c1": {"t10": 3, "t11": 7},
        "c2": {"t20": 50, "t21": 100},
        "c3": {"t30": 1000, "t31": 2000},
        "c4": {"t40": 20_000, "t41": 30_000},
        "c5": {"t50": 400_000, "t51": 600_000},
    }
    stores = {}
    for category, tasks in sizes.items():
        stores[category] = {}
        for task_id, n in tasks.items():
            path = tmp_path / f"{task_id}.jsonl"
            line = json.dumps({
                "category": category, "task_id": task_id,
                "prompt_templates": ["Q {m}"],
                "entities": {"m": {"format": "smiles", "value": "CC"}},
                "answer": {"label": "y"},
                "answer_type": {"kind": "classification", "labels": ["y", "n"]},
            }) + "\n"
            with open(path, "w") as fh:
                fh.writelines([line] * n)
            stores[category][task_id] = JsonlExampleStore(path)
    registry = Registry(stores, tuple(sizes))

    draws = 60_000
    plan = sample_plan(registry, draws, random.Random(4242))
    category_counts = {c: 0 for c in sizes}
    task_counts = {t: 0 for tasks in sizes.values() for t in tasks}
    for category, task_id, _ in plan:
        category_counts[category] += 1
        task_counts[task_id] += 1
    _, p = scipy_stats.chisquare(list(category_counts.values()))
    assert p > 0.001, f"category chi^2 p={p}"
    for category, tasks in sizes.items():
        if len(tasks) < 2:
            continue
        counts = [task_counts[t] for t in tasks]
        _, p = scipy_stats.chisquare(counts)
        assert p > 0.001, f"{category} task chi^2 p={p}"

    assert sample_plan(registry, 2000, random.Random(99)) == \
        sample_plan(registry, 2000, random.Random(99))
    assert sample_batch(registry, 25, random.Random(7)) == \
        sample_batch(registry, 25, random.Random(7))


@criterion("aggregation and metric oracles", 30.0)
def test_aggregation_and_metrics():
    # worked examples
    assert median([1.0, 3.0, 2.0]) == 2.0
    assert median([1.0, 2.0, 3.0, 4.0]) == 2.5
    assert majority_vote(["A", "A", "B"]) == "A"
    vocab = Vocabulary.build(ascii_text_tokens())
    probs = class_probs_from_logprobs({"T": 0.0, "F": 0.0}, ("True", "False"), vocab)
    assert probs == {"True": 0.5, "False": 0.5}
    probs = class_probs_from_logprobs({"T": 0.0, "F": -math.log(3.0)},
                                      ("True", "False"), vocab)
    assert math.isclose(probs["True"], 0.75, abs_tol=1e-12)

    # golden fixtures from the independent reference statistics oracle
    from test_evaluation import (
        AUPRC_REFERENCE,
        AUROC_REFERENCE,
        ROC_LABELS,
        ROC_SCORES,
        SPEARMAN_REFERENCE,
        SPEARMAN_X,
        SPEARMAN_Y,
    )
    assert abs(spearman(SPEARMAN_X, SPEARMAN_Y) - SPEARMAN_REFERENCE) <= 1e-9
    assert abs(auroc(ROC_SCORES, ROC_LABELS) - AUROC_REFERENCE) <= 1e-9
    assert abs(auprc(ROC_SCORES, ROC_LABELS) - AUPRC_REFERENCE) <= 1e-9

    # AUROC invariance under strictly monotone transforms, 100 random fixtures
    rng = random.Random(606)
    for _ in range(100):
        n = rng.randrange(8, 40)
        labels = [rng.random() < 0.4 for _ in range(n)]
        if not any(labels) or all(labels):
            labels[0], labels[1] = True, False
        scores = [rng.uniform(-5, 5) for _ in range(n)]
        base = auroc(scores, labels)
        warped = [math.tanh(s / 3.0) * 2.0 + 7.0 for s in scores]
        assert math.isclose(auroc(warped, labels), base, abs_tol=1e-12)


@criterion("hybrid operators", 180.0)
def test_hybrid_operators():
    from test_hybrid_ops import oracle_gqa, oracle_shortconv, rel_err

    from chemgym.hybrid_ops import (
        GQAParams,
        ShortConvParams,
        gqa_forward,
        grad_check,
        shortconv_forward,
    )

    rng = np.random.default_rng(808)

    # identity configuration
    d = 8
    h = rng.normal(0.0, 1.0, (24, d))
    h[:, 0] = 1.0
    assert np.abs(shortconv_forward(h, ShortConvParams.identity(d)) - h).max() <= 1e-12

    # 50 random instances per operator against scalar-loop oracles
    for _ in range(50):
        dd = int(rng.integers(2, 6))
        length = int(rng.integers(1, 9))
        params = ShortConvParams.random(dd, k=int(rng.integers(1, 4)), rng=rng)
        x = rng.normal(0.0, 1.0, (length, dd))
        assert rel_err(shortconv_forward(x, params), oracle_shortconv(x, params)) <= 1e-12
    for _ in range(50):
        n_kv = int(rng.integers(1, 3))
        n_q = n_kv * int(rng.integers(1, 4))
        dd = int(rng.integers(2, 6))
        params = GQAParams.random(dd, n_q=n_q, n_kv=n_kv,
                                  head_dim=int(rng.integers(1, 4)), rng=rng)
        x = rng.normal(0.0, 1.0, (int(rng.integers(1, 8)), dd))
        assert rel_err(gqa_forward(x, params), oracle_gqa(x, params)) <= 1e-12

    # finite-difference gradient checks
    for seed in range(3):
        params = ShortConvParams.random(3, rng=np.random.default_rng(seed))
        x = np.random.default_rng(seed + 100).normal(0.0, 1.0, (5, 3))
        assert grad_check("shortconv", params, x, epsilon=1e-5) <= 1e-4
        gparams = GQAParams.random(3, 4, 2, 2, rng=np.random.default_rng(seed))
        assert grad_check("gqa", gparams, x, epsilon=1e-5) <= 1e-4

    # causality perturbation at L = 64
    length = 64
    x = rng.normal(0.0, 1.0, (length, d))
    sc = ShortConvParams.random(d, rng=rng)
    gq = GQAParams.random(d, 2, 1, 4, rng=rng)
    base_sc = shortconv_forward(x, sc)
    base_gq = gqa_forward(x, gq)
    for t in (1, 13, 32, 63):
        perturbed = x.copy()
        perturbed[t] += 1.0
        assert np.array_equal(shortconv_forward(perturbed, sc)[:t], base_sc[:t])
        assert np.array_equal(gqa_forward(perturbed, gq)[:t], base_gq[:t])

    # timing slope: shortconv sub-quadratic, full attention not
    d_t = 32
    sc_t = ShortConvParams.random(d_t, rng=rng)
    attn_t = GQAParams.random(d_t, 1, 1, d_t, rng=rng)

    def best_time(fn, x, reps=3):
        best = float("inf")
        for _ in range(reps):
            t0 = time.perf_counter()
            fn(x)
            best = min(best, time.perf_counter() - t0)
        return best

    lengths = (256, 1024, 4096)
    conv_times = []
    attn_times = []
    for L in lengths:
        x = rng.normal(0.0, 1.0, (L, d_t))
        conv_times.append(best_time(lambda a: shortconv_forward(a, sc_t), x))
        attn_times.append(best_time(lambda a: gqa_forward(a, attn_t), x))
    span = math.log(lengths[-1] / lengths[0])
    conv_slope = math.log(conv_times[-1] / conv_times[0]) / span
    attn_slope = math.log(attn_times[-1] / attn_times[0]) / span
    assert conv_slope < 1.7, f"shortconv slope {conv_slope:.2f}"
    assert attn_slope > 1.7, f"attention slope {attn_slope:.2f}"
    assert attn_slope > conv_slope + 0.4


@criterion("end-to-end mock evaluation", 60.0)
def test_end_to_end_mock_evaluation(tmp_path):
    assert (DEMO / "suite.yaml").exists(), "demo suite missing; run tools/make_demo.py"

    def run(out_dir):
        proc = subprocess.run(
            [sys.executable, "-m", "chemgym.cli", "evaluate",
             "--suite", str(DEMO / "suite.yaml"), "--provider", "mock",
             "--out", str(out_dir)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        return (out_dir / "summary.csv").read_text(), \
            (out_dir / "results.jsonl").read_text()

    summary_a, results_a = run(tmp_path / "a")
    summary_b, results_b = run(tmp_path / "b")
    assert summary_a == summary_b and results_a == results_b  # deterministic

    rows = {}
    lines = summary_a.strip().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        rows[row["task_id"]] = row

    # hand-computed from the scripted mock responses (see tools/make_demo.py)
    assert float(rows["bbb_class"]["accuracy"]) == 0.80
    assert float(rows["bbb_class"]["validity_fraction"]) == 0.96
    assert float(rows["logp_reg"]["mae"]) == 0.36
    assert float(rows["logp_reg"]["validity_fraction"]) == 0.92
    assert math.isclose(float(rows["logp_reg"]["rmse"]), math.sqrt(13.1 / 25),
                        abs_tol=1e-6)
    assert int(rows["bbb_class"]["examples"]) == 25
    assert int(rows["logp_reg"]["examples"]) == 25
