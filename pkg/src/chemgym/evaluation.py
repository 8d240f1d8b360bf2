"""Benchmark evaluation: prompt assembly, repetition, parsing, aggregation.

Every test example is evaluated ``repetitions`` times; each repetition
samples a paraphrase template, independently augments the molecular inputs,
and queries a completion provider. Parsed predictions are aggregated (median
for numbers, majority vote for labels/molecules, or a registered rule) and
fed to the metric suite. Providers are pluggable: an HTTP client for
chat-completion endpoints and a deterministic scripted mock for tests.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .chem import (
    Molecule,
    circular_fingerprint,
    parse_smiles,
    tanimoto,
    to_canonical_smiles,
)
from .errors import (
    AllInvalidError,
    AmbiguousLabelTokensError,
    DegenerateInputError,
    MissingPlaceholderError,
    ProviderError,
    SchemaError,
    SmilesSyntaxError,
    SuiteConfigError,
    UnsupportedFeatureError,
    ValenceError,
)
from .rewards import ANSWER_CLOSE, ANSWER_OPEN, _extract_block
from .sampler import Registry, TaskRecord
from .tokenizer import (
    AugmentationPolicy,
    Vocabulary,
    ascii_text_tokens,
    augment_record,
    entity_text,
)

# ---------------------------------------------------------------------------
# prompt assembly


@dataclass(frozen=True)
class PromptPlan:
    """How to evaluate one task: repetitions, templates, augmentation, decoding."""

    repetitions: int = 1
    augmentation: AugmentationPolicy = AugmentationPolicy.identity()
    template_pool: tuple[str, ...] | None = None  # default: the record's own pool
    temperature: float = 0.0
    max_tokens: int = 512
    few_shot_k: int = 0
    few_shot_pool: tuple[TaskRecord, ...] = ()
    want_logprobs: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def _answer_text(record: TaskRecord) -> str:
    kind = record.answer_type.kind
    if kind == "classification":
        return record.answer["label"]
    if kind == "regression":
        return str(record.answer["value"])
    gt = record.answer.get("ground_truth") or []
    return gt[0] if gt else ""


def _fill_template(template: str, record: TaskRecord) -> str:
    text = template
    for name, entity in record.entities.items():
        text = text.replace("{" + name + "}", entity_text(entity))
    if "{" in text and "}" in text:
        start = text.index("{")
        end = text.index("}", start)
        raise MissingPlaceholderError(
            f"template placeholder {text[start:end + 1]!r} has no entity")
    return text


def assemble_prompt_with_provenance(record: TaskRecord, plan: PromptPlan,
                                    rng: random.Random) -> tuple[str, int]:
    """Like :func:`assemble_prompt`, also returns the sampled template index."""
    pool = plan.template_pool or record.prompt_templates
    template_index = rng.randrange(len(pool))
    augmented = augment_record(record, plan.augmentation, rng)
    prompt = _fill_template(pool[template_index], augmented)
    if plan.few_shot_k > 0 and plan.few_shot_pool:
        shots = [plan.few_shot_pool[rng.randrange(len(plan.few_shot_pool))]
                 for _ in range(plan.few_shot_k)]
        blocks = []
        for shot in shots:
            shot_aug = augment_record(shot, plan.augmentation, rng)
            question = _fill_template(shot_aug.prompt_templates[0], shot_aug)
            blocks.append(
                f"{question}\n{ANSWER_OPEN}{_answer_text(shot_aug)}{ANSWER_CLOSE}")
        prompt = "\n\n".join(blocks + [prompt])
    return prompt, template_index


def assemble_prompt(record: TaskRecord, plan: PromptPlan, rng: random.Random) -> str:
    """Sample a template uniformly, augment entities, substitute placeholders."""
    return assemble_prompt_with_provenance(record, plan, rng)[0]


# ---------------------------------------------------------------------------
# predictions


@dataclass(frozen=True)
class Prediction:
    """One parsed repetition: a number, a label, a molecule, or invalid."""

    kind: str  # "number" | "label" | "molecule" | "invalid"
    value: float | str | None = None
    template_index: int = -1
    repetition: int = -1
    class_probabilities: dict[str, float] | None = None

    @property
    def is_valid(self) -> bool:
        return self.kind != "invalid"


def parse_completion(raw: str, answer_type) -> Prediction:
    """Extract the answer block and parse it per the answer type.

    Total: every failure returns an ``invalid`` prediction, which counts
    against the validity fraction.
    """
    block, _ = _extract_block(raw, ANSWER_OPEN, ANSWER_CLOSE)
    if block is None:
        return Prediction("invalid")
    text = block.strip()
    kind = answer_type.kind
    if kind == "regression":
        try:
            return Prediction("number", float(text))
        except ValueError:
            return Prediction("invalid")
    if kind == "classification":
        labels = answer_type.labels or ()
        if labels and text not in labels:
            return Prediction("invalid")
        return Prediction("label", text)
    if kind == "generation":
        try:
            molecule = parse_smiles(text)
        except (SmilesSyntaxError, ValenceError, UnsupportedFeatureError):
            return Prediction("invalid")
        if molecule.is_empty:
            return Prediction("invalid")
        return Prediction("molecule", to_canonical_smiles(molecule))
    raise SchemaError(f"unknown answer kind {kind!r}")


def first_text_token(label: str, vocab: Vocabulary) -> str:
    """First text token of a label under greedy longest match."""
    for length in range(min(vocab._max_text_len, len(label)), 0, -1):
        if label[:length] in vocab.text_tokens:
            return label[:length]
    raise DegenerateInputError(f"label {label!r} has no first token in the vocabulary")


def class_probs_from_logprobs(first_token_logprobs: dict[str, float],
                              labels, vocab: Vocabulary) -> dict[str, float]:
    """Softmax over the first tokens representing each class label.

    Invariant to adding a constant to every logprob. Tokens absent from the
    mapping act as -inf; raises when two labels share a first token or no
    label token appears at all.
    """
    tokens = {}
    for label in labels:
        token = first_text_token(label, vocab)
        if token in tokens.values():
            clash = [l for l, t in tokens.items() if t == token][0]
            raise AmbiguousLabelTokensError(
                f"labels {clash!r} and {label!r} share first token {token!r}")
        tokens[label] = token
    scores = {label: first_token_logprobs.get(token, -math.inf)
              for label, token in tokens.items()}
    top = max(scores.values())
    if top == -math.inf:
        raise DegenerateInputError("no label token present in the logprob mapping")
    exps = {label: math.exp(s - top) for label, s in scores.items()}
    z = sum(exps.values())
    return {label: e / z for label, e in exps.items()}


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class EvalAggregate:
    """Per-example prediction distribution plus the aggregated estimate."""

    predictions: tuple[Prediction, ...]
    value: float | str
    rule: str
    n_valid: int
    n_total: int

    @property
    def validity_fraction(self) -> float:
        return self.n_valid / self.n_total if self.n_total else 0.0


def median(values) -> float:
    """Median with mean-of-middles on even counts."""
    ordered = sorted(values)
    if not ordered:
        raise DegenerateInputError("median of an empty sequence")
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def majority_vote(values) -> str:
    """Most frequent value; ties break to the lexicographically smallest."""
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    if not counts:
        raise DegenerateInputError("majority vote over an empty sequence")
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


_CUSTOM_AGGREGATORS: dict[str, callable] = {}


def register_aggregator(name: str, fn):
    """Register a task-specific aggregation rule."""
    _CUSTOM_AGGREGATORS[name] = fn


def aggregate(predictions, rule: str | None = None) -> EvalAggregate:
    """Fold per-repetition predictions into one estimate.

    Invalid predictions are excluded from the estimate but count against
    the validity fraction; raises :class:`AllInvalidError` when nothing
    parsed.
    """
    predictions = tuple(predictions)
    if not predictions:
        raise DegenerateInputError("no predictions to aggregate")
    valid = [p for p in predictions if p.is_valid]
    if not valid:
        raise AllInvalidError(f"all {len(predictions)} predictions are invalid")
    kinds = {p.kind for p in valid}
    if len(kinds) != 1:
        raise DegenerateInputError(f"mixed prediction kinds {sorted(kinds)}")
    kind = kinds.pop()
    if rule is None:
        rule = "median" if kind == "number" else "majority"
    if rule == "median":
        value = median(p.value for p in valid)
    elif rule == "majority":
        value = majority_vote(p.value for p in valid)
    elif rule in _CUSTOM_AGGREGATORS:
        value = _CUSTOM_AGGREGATORS[rule]([p.value for p in valid])
    else:
        raise SuiteConfigError(f"unknown aggregation rule {rule!r}")
    return EvalAggregate(predictions, value, rule, len(valid), len(predictions))


# ---------------------------------------------------------------------------
# metrics


def accuracy(predictions, truths) -> float:
    pairs = _paired(predictions, truths)
    return sum(1.0 for p, t in pairs if p == t) / len(pairs)


def mae(predictions, truths) -> float:
    pairs = _paired(predictions, truths)
    return sum(abs(float(p) - float(t)) for p, t in pairs) / len(pairs)


def rmse(predictions, truths) -> float:
    pairs = _paired(predictions, truths)
    return math.sqrt(sum((float(p) - float(t)) ** 2 for p, t in pairs) / len(pairs))


def _paired(a, b) -> list[tuple]:
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise DegenerateInputError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise DegenerateInputError("empty metric input")
    return list(zip(a, b))


def average_ranks(values) -> list[float]:
    """1-based ranks with ties averaged."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average-rank ties."""
    pairs = _paired(x, y)
    xs = [float(a) for a, _ in pairs]
    ys = [float(b) for _, b in pairs]
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise DegenerateInputError("constant vector in Spearman input")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx2 = math.fsum((a - mx) ** 2 for a in rx)
    vy2 = math.fsum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx2 * vy2)


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    pairs = _paired(scores, labels)
    pos = sum(1 for _, l in pairs if l)
    neg = len(pairs) - pos
    if pos == 0 or neg == 0:
        raise DegenerateInputError("AUROC needs both classes present")
    ranks = average_ranks([float(s) for s, _ in pairs])
    rank_sum = sum(r for r, (_, l) in zip(ranks, pairs) if l)
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def auprc(scores, labels) -> float:
    """Average precision: step integration of the precision-recall curve."""
    pairs = _paired(scores, labels)
    pos_total = sum(1 for _, l in pairs if l)
    if pos_total == 0 or pos_total == len(pairs):
        raise DegenerateInputError("AUPRC needs both classes present")
    ordered = sorted(pairs, key=lambda p: -float(p[0]))
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1][0] == ordered[i][0]:
            j += 1
        for k in range(i, j + 1):
            if ordered[k][1]:
                tp += 1
            else:
                fp += 1
        recall = tp / pos_total
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


def validity_fraction(aggregates) -> float:
    """1 - invalid/total across all repetitions of all examples."""
    n_valid = sum(a.n_valid for a in aggregates)
    n_total = sum(a.n_total for a in aggregates)
    if n_total == 0:
        raise DegenerateInputError("no predictions")
    return n_valid / n_total


def _as_molecule(value) -> Molecule | None:
    if isinstance(value, Molecule):
        return value
    try:
        mol = parse_smiles(value)
    except (SmilesSyntaxError, ValenceError, UnsupportedFeatureError):
        return None
    return None if mol.is_empty else mol


def success_rate(inputs, outputs, constraints) -> float:
    """Fraction of outputs that are valid and satisfy every constraint.

    ``constraints`` are callables (input_molecule, output_molecule) -> bool;
    the property oracles they close over are caller-supplied.
    """
    pairs = _paired(inputs, outputs)
    wins = 0
    for src, gen in pairs:
        mol_in = _as_molecule(src)
        mol_out = _as_molecule(gen)
        if mol_in is None:
            raise DegenerateInputError(f"invalid input molecule {src!r}")
        if mol_out is None:
            continue
        if all(c(mol_in, mol_out) for c in constraints):
            wins += 1
    return wins / len(pairs)


def tanimoto_sim_mean(inputs, outputs) -> float:
    """Mean fingerprint Tanimoto over pairs with a valid generated molecule."""
    pairs = _paired(inputs, outputs)
    sims = []
    for src, gen in pairs:
        mol_in = _as_molecule(src)
        mol_out = _as_molecule(gen)
        if mol_in is None:
            raise DegenerateInputError(f"invalid input molecule {src!r}")
        if mol_out is None:
            continue
        sims.append(tanimoto(circular_fingerprint(mol_in),
                             circular_fingerprint(mol_out)))
    if not sims:
        raise DegenerateInputError("no valid generated molecules")
    return sum(sims) / len(sims)


def relative_improvement(inputs, outputs, oracle) -> float:
    """Mean (oracle(out) - oracle(in)) / |oracle(in)| over valid pairs."""
    pairs = _paired(inputs, outputs)
    gains = []
    for src, gen in pairs:
        mol_in = _as_molecule(src)
        mol_out = _as_molecule(gen)
        if mol_in is None:
            raise DegenerateInputError(f"invalid input molecule {src!r}")
        if mol_out is None:
            continue
        base = oracle(mol_in)
        if base == 0:
            raise DegenerateInputError("oracle value 0 on an input molecule")
        gains.append((oracle(mol_out) - base) / abs(base))
    if not gains:
        raise DegenerateInputError("no valid generated molecules")
    return sum(gains) / len(gains)


def unique_fraction(answers) -> float:
    """Fraction of unique valid component sets among all answers.

    Multi-component answers (dot-separated reactant sets) compare as
    order-insensitive sets of canonical forms.
    """
    answers = list(answers)
    if not answers:
        raise DegenerateInputError("no answers")
    seen: set[frozenset] = set()
    for text in answers:
        mol = _as_molecule(text)
        if mol is None:
            continue
        seen.add(frozenset(to_canonical_smiles(mol).split(".")))
    return len(seen) / len(answers)


# a deliberately simple built-in property oracle for end-to-end tests
ATOMIC_MASSES = {
    "B": 10.81, "C": 12.011, "N": 14.007, "O": 15.999, "P": 30.974,
    "S": 32.06, "F": 18.998, "Cl": 35.45, "Br": 79.904, "I": 126.904,
}
_H_MASS = 1.008


def molecular_weight(mol: Molecule) -> float:
    total = 0.0
    for atom in mol.atoms:
        total += ATOMIC_MASSES[atom.element] + _H_MASS * atom.h_count
    return total


# ---------------------------------------------------------------------------
# completion providers


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 512
    want_logprobs: bool = False
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProviderResult:
    text: str
    first_token_logprobs: dict[str, float] | None = None


class CompletionProvider:
    """Prompt in, raw text (+ optional first-token logprobs) out."""

    max_parallel: int = 1

    def complete(self, request: CompletionRequest) -> ProviderResult:
        raise NotImplementedError


class HttpCompletionProvider(CompletionProvider):
    """Client for OpenAI-compatible chat-completion endpoints."""

    max_parallel = 4

    def __init__(self, base_url: str, model: str,
                 api_key_env: str = "CHEMGYM_API_KEY", timeout: float = 120.0,
                 extra_headers: dict | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.extra_headers = dict(extra_headers or {})

    def complete(self, request: CompletionRequest) -> ProviderResult:
        import requests

        headers = {"Content-Type": "application/json", **self.extra_headers}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.want_logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = 20
        try:
            response = requests.post(f"{self.base_url}/chat/completions",
                                     json=payload, headers=headers,
                                     timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
        except Exception as exc:
            raise ProviderError(f"completion request failed: {exc}") from exc
        try:
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion response: {body!r}") from exc
        logprobs = None
        content = (choice.get("logprobs") or {}).get("content") or []
        if content:
            top = content[0].get("top_logprobs") or []
            logprobs = {item["token"]: float(item["logprob"]) for item in top}
        return ProviderResult(text, logprobs)


class MockCompletionProvider(CompletionProvider):
    """Deterministic scripted provider for tests and offline runs.

    Responses are keyed by (task_id, example_index) and cycled per
    repetition; optional per-example first-token logprobs ride along.
    """

    max_parallel = 8

    def __init__(self, responses: dict[tuple[str, int], list[str]],
                 logprobs: dict[tuple[str, int], dict[str, float]] | None = None):
        self.responses = responses
        self.logprobs = logprobs or {}

    @classmethod
    def from_jsonl(cls, path) -> "MockCompletionProvider":
        responses: dict[tuple[str, int], list[str]] = {}
        logprobs: dict[tuple[str, int], dict[str, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    key = (str(obj["task_id"]), int(obj["example_index"]))
                    responses[key] = [str(c) for c in obj["completions"]]
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise SchemaError(f"bad mock response line: {exc}", line_no)
                if "first_token_logprobs" in obj:
                    logprobs[key] = {str(k): float(v)
                                     for k, v in obj["first_token_logprobs"].items()}
        return cls(responses, logprobs)

    def complete(self, request: CompletionRequest) -> ProviderResult:
        meta = request.metadata
        key = (meta.get("task_id"), meta.get("example_index"))
        scripted = self.responses.get(key)
        if not scripted:
            raise ProviderError(f"no scripted response for {key}")
        text = scripted[meta.get("repetition", 0) % len(scripted)]
        return ProviderResult(text, self.logprobs.get(key))


# ---------------------------------------------------------------------------
# suite runner


@dataclass(frozen=True)
class SuiteTask:
    category: str
    task_id: str
    metrics: tuple[str, ...]
    aggregation: str | None = None
    positive_label: str | None = None


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    registry_path: str
    tasks: tuple[SuiteTask, ...]
    repetitions: int = 3
    seed: int = 0
    temperature: float = 0.0
    max_tokens: int = 512
    augmentation: AugmentationPolicy = AugmentationPolicy.identity()
    mock_responses: str | None = None

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        import yaml

        path = Path(path)
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise SuiteConfigError(f"suite file {path} must be a mapping")
        for key in ("name", "registry", "tasks"):
            if key not in raw:
                raise SuiteConfigError(f"suite file missing {key!r}")
        tasks = []
        for entry in raw["tasks"]:
            try:
                tasks.append(SuiteTask(
                    category=entry["category"],
                    task_id=entry["task_id"],
                    metrics=tuple(entry.get("metrics", [])),
                    aggregation=entry.get("aggregation"),
                    positive_label=entry.get("positive_label"),
                ))
            except (KeyError, TypeError) as exc:
                raise SuiteConfigError(f"bad task entry {entry!r}: {exc}")
        aug = raw.get("augmentation", {})
        policy = AugmentationPolicy(
            p_format_convert=float(aug.get("p_format_convert", 0.0)),
            p_random_traversal=float(aug.get("p_random_traversal", 0.0)),
            p_input_isolation=float(aug.get("p_input_isolation", 0.5)),
        )

        def _resolve(rel):
            return str(rel) if Path(rel).is_absolute() else str(path.parent / rel)

        return cls(
            name=str(raw["name"]),
            registry_path=_resolve(raw["registry"]),
            tasks=tuple(tasks),
            repetitions=int(raw.get("repetitions", 3)),
            seed=int(raw.get("seed", 0)),
            temperature=float(raw.get("temperature", 0.0)),
            max_tokens=int(raw.get("max_tokens", 512)),
            augmentation=policy,
            mock_responses=_resolve(raw["mock_responses"]) if raw.get("mock_responses") else None,
        )


@dataclass
class ExampleResult:
    category: str
    task_id: str
    example_index: int
    aggregate: EvalAggregate | None  # None when every repetition was invalid
    truth: str
    predictions_raw: list[str]
    predictions: list[Prediction] = field(default_factory=list)

    def to_json(self) -> dict:
        agg = None
        if self.aggregate is not None:
            agg = {
                "value": self.aggregate.value,
                "rule": self.aggregate.rule,
                "n_valid": self.aggregate.n_valid,
                "n_total": self.aggregate.n_total,
            }
        return {
            "category": self.category,
            "task_id": self.task_id,
            "example_index": self.example_index,
            "aggregate": agg,
            "truth": self.truth,
            "n_repetitions": len(self.predictions_raw),
        }


def _rep_rng(seed: int, task_id: str, example_index: int, repetition: int) -> random.Random:
    return random.Random(f"{seed}:{task_id}:{example_index}:{repetition}")


def _run_repetition(record: TaskRecord, task: SuiteTask, plan: PromptPlan,
                    provider: CompletionProvider, seed: int,
                    example_index: int, repetition: int,
                    vocab: Vocabulary | None) -> tuple[str, Prediction]:
    rng = _rep_rng(seed, task.task_id, example_index, repetition)
    prompt, template_index = assemble_prompt_with_provenance(record, plan, rng)
    request = CompletionRequest(
        prompt=prompt,
        temperature=plan.temperature,
        max_tokens=plan.max_tokens,
        want_logprobs=plan.want_logprobs,
        metadata={"task_id": task.task_id,
                  "example_index": example_index,
                  "repetition": repetition},
    )
    result = provider.complete(request)
    prediction = parse_completion(result.text, record.answer_type)
    prediction = replace(prediction, repetition=repetition,
                         template_index=template_index)
    if (plan.want_logprobs and vocab is not None
            and record.answer_type.kind == "classification"
            and result.first_token_logprobs):
        probs = class_probs_from_logprobs(result.first_token_logprobs,
                                          record.answer_type.labels or (), vocab)
        prediction = replace(prediction, class_probabilities=probs)
    return result.text, prediction


def evaluate_task(records, task: SuiteTask, plan: PromptPlan,
                  provider: CompletionProvider, seed: int,
                  vocab: Vocabulary | None = None) -> list[ExampleResult]:
    """Run all repetitions for a task's examples; deterministic per seed.

    Repetitions run concurrently up to the provider's declared parallelism;
    per-repetition rng streams are derived independently, so the result is
    identical to the sequential order.
    """
    workers = max(1, min(getattr(provider, "max_parallel", 1), plan.repetitions))
    results = []
    for example_index, record in enumerate(records):
        if workers == 1:
            outcomes = [
                _run_repetition(record, task, plan, provider, seed,
                                example_index, repetition, vocab)
                for repetition in range(plan.repetitions)
            ]
        else:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_run_repetition, record, task, plan, provider,
                                seed, example_index, repetition, vocab)
                    for repetition in range(plan.repetitions)
                ]
                outcomes = [f.result() for f in futures]
        raws = [text for text, _ in outcomes]
        predictions = [prediction for _, prediction in outcomes]
        try:
            agg = aggregate(predictions, task.aggregation)
        except AllInvalidError:
            agg = None
        results.append(ExampleResult(task.category, task.task_id, example_index,
                                     agg, _answer_text(record), raws, predictions))
    return results


def _metric_value(name: str, results: list[ExampleResult], records,
                  task: SuiteTask) -> float:
    truths = [r.truth for r in results]
    valid = [(r, t) for r, t in zip(results, truths) if r.aggregate is not None]
    if name == "validity_fraction":
        aggs = []
        for r in results:
            if r.aggregate is not None:
                aggs.append(r.aggregate)
            else:
                aggs.append(EvalAggregate((Prediction("invalid"),) * len(r.predictions_raw),
                                          "", "majority", 0, len(r.predictions_raw)))
        return validity_fraction(aggs)
    if name == "accuracy":
        preds = [r.aggregate.value if r.aggregate is not None else None
                 for r in results]
        return sum(1.0 for p, t in zip(preds, truths) if p == t) / len(results)
    if name in ("mae", "rmse", "spearman"):
        if not valid:
            raise DegenerateInputError("no valid aggregates for regression metric")
        preds = [r.aggregate.value for r, _ in valid]
        ts = [float(t) for _, t in valid]
        if name == "mae":
            return mae(preds, ts)
        if name == "rmse":
            return rmse(preds, ts)
        return spearman(preds, ts)
    if name in ("auroc", "auprc"):
        positive = task.positive_label
        if positive is None:
            labels_decl = records[0].answer_type.labels or ()
            if not labels_decl:
                raise SuiteConfigError(f"{name} needs classification labels")
            positive = labels_decl[0]
        scores = []
        labels = []
        for r in results:
            probs = [p.class_probabilities[positive]
                     for p in r.predictions
                     if p.class_probabilities and positive in p.class_probabilities]
            if not probs:
                continue
            scores.append(median(probs))
            labels.append(r.truth == positive)
        if not scores:
            raise DegenerateInputError(
                f"no class probabilities collected for {name}; "
                "set want_logprobs and use a provider that returns them")
        return auroc(scores, labels) if name == "auroc" else auprc(scores, labels)
    if name == "unique_fraction":
        answers = []
        for r in results:
            if r.aggregate is not None:
                answers.append(r.aggregate.value)
            else:
                answers.append("")
        return unique_fraction(answers)
    raise SuiteConfigError(f"unknown metric {name!r}")


def run_suite(suite: SuiteConfig, registry: Registry,
              provider: CompletionProvider,
              vocab: Vocabulary | None = None) -> dict:
    """Evaluate every task in the suite; returns results + summary rows."""
    all_results: list[ExampleResult] = []
    summary_rows = []
    needs_probs = any(m in ("auroc", "auprc")
                      for task in suite.tasks for m in task.metrics)
    if needs_probs and vocab is None:
        vocab = Vocabulary.build(ascii_text_tokens())
    for task in suite.tasks:
        store = registry.store(task.category, task.task_id)
        records = [store.get(i) for i in range(len(store))]
        plan = PromptPlan(
            repetitions=suite.repetitions,
            augmentation=suite.augmentation,
            temperature=suite.temperature,
            max_tokens=suite.max_tokens,
            want_logprobs=needs_probs,
        )
        results = evaluate_task(records, task, plan, provider, suite.seed, vocab)
        all_results.extend(results)
        row: dict = {"category": task.category, "task_id": task.task_id,
                     "examples": len(results)}
        for metric in task.metrics:
            row[metric] = _metric_value(metric, results, records, task)
        summary_rows.append(row)
    return {"results": all_results, "summary": summary_rows}


def write_outputs(outcome: dict, out_dir) -> tuple[Path, Path]:
    """Write per-example aggregates (JSONL) and the summary table (CSV)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.jsonl"
    with open(results_path, "w", encoding="utf-8") as fh:
        for result in outcome["results"]:
            fh.write(json.dumps(result.to_json(), sort_keys=True) + "\n")
    summary_path = out_dir / "summary.csv"
    columns: list[str] = []
    for row in outcome["summary"]:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in outcome["summary"]:
            formatted = {
                k: (f"{v:.6f}" if isinstance(v, float) else v)
                for k, v in row.items()
            }
            writer.writerow(formatted)
    return results_path, summary_path
