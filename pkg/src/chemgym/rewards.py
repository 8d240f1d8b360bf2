"""Reward functions for RL post-training, plus group-relative advantages.

Five reward families: tag formatting, thinking length, classification QA,
regression, and molecular generation (validity-only or ground-truth set).
Totals default to the unweighted sum of format + thinking + task components.
Group-relative advantages normalize rewards within a completion group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .chem import is_valid_smiles, parse_smiles, to_canonical_smiles
from .errors import (
    DegenerateRangeError,
    GroupTooSmallError,
    SchemaError,
    SmilesSyntaxError,
    UnsupportedFeatureError,
    ValenceError,
)
from .sampler import TaskRecord

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"

# Thinking reward: zero at this length, saturates at twice this length.
THINK_MIDPOINT_CHARS = 2500

# Optimization constants for downstream trainers (not used in scoring).
GRPO_GROUP_SIZE = 8
GRPO_KL_BETA = 0.4
GRPO_SAMPLING_TEMPERATURE = 1.4

ADVANTAGE_EPSILON = 1e-8


@dataclass(frozen=True)
class Completion:
    """A model output with extracted think/answer spans.

    Spans, when present, are exact substrings of ``raw`` at the recorded
    offsets.
    """

    raw: str
    think_span: str | None = None
    think_offset: int = -1
    answer_span: str | None = None
    answer_offset: int = -1

    @classmethod
    def from_text(cls, raw: str) -> "Completion":
        think, think_off = _extract_block(raw, THINK_OPEN, THINK_CLOSE)
        answer, answer_off = _extract_block(raw, ANSWER_OPEN, ANSWER_CLOSE)
        return cls(raw, think, think_off, answer, answer_off)


def _extract_block(raw: str, open_tag: str, close_tag: str) -> tuple[str | None, int]:
    start = raw.find(open_tag)
    if start < 0:
        return None, -1
    content_start = start + len(open_tag)
    end = raw.find(close_tag, content_start)
    if end < 0:
        return None, -1
    return raw[content_start:end], content_start


@dataclass(frozen=True)
class RewardWeights:
    format: float = 1.0
    think: float = 1.0
    task: float = 1.0


@dataclass(frozen=True)
class RewardReport:
    r_format: float
    r_think: float
    r_task: float
    total: float
    components: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "r_format": self.r_format,
            "r_think": self.r_think,
            "r_task": self.r_task,
            "total": self.total,
            "components": dict(self.components),
        }


def reward_format(completion: Completion) -> float:
    """-1 + [exactly one think open] + [exactly one think close]."""
    n_open = completion.raw.count(THINK_OPEN)
    n_close = completion.raw.count(THINK_CLOSE)
    return -1.0 + (1.0 if n_open == 1 else 0.0) + (1.0 if n_close == 1 else 0.0)


def reward_think(completion: Completion) -> float:
    """min(1, -1 + |o|/2500); saturates at 5000 characters of reasoning."""
    length = len(completion.think_span) if completion.think_span is not None else 0
    return min(1.0, -1.0 + length / THINK_MIDPOINT_CHARS)


def reward_classification(answer: str, truth: str) -> float:
    """Length gate (< 3 characters apart) plus exact match, minus one."""
    a = answer.strip()
    g = truth.strip()
    length_ok = abs(len(a) - len(g)) < 3
    return (1.0 if length_ok else 0.0) + (1.0 if a == g else 0.0) - 1.0


def reward_regression(answer: str, truth: str,
                      answer_range: tuple[float, float]) -> float:
    """Length gate minus the range-normalized absolute error.

    Unparseable answers floor at -1; the range must be non-degenerate
    (validated at task registration).
    """
    lo, hi = answer_range
    if not hi > lo:
        raise DegenerateRangeError(f"answer range [{lo}, {hi}] is degenerate")
    a = answer.strip()
    g = truth.strip()
    length_ok = abs(len(a) - len(g)) < 3
    try:
        a_value = float(a)
    except ValueError:
        return -1.0
    g_value = float(g)
    return (1.0 if length_ok else 0.0) - abs(a_value - g_value) / (hi - lo)


def reward_generation(answer: str, ground_truth: set[str] | None = None) -> float:
    """2*[valid] - 1, or 2*[in ground-truth set] - 1 when a set exists.

    Membership is canonical-form equality; with a ground-truth set, presence
    supersedes mere validity (a valid molecule outside the set scores -1).
    """
    a = answer.strip()
    if ground_truth is None:
        return 1.0 if is_valid_smiles(a) else -1.0
    try:
        canonical = to_canonical_smiles(parse_smiles(a))
    except (SmilesSyntaxError, ValenceError, UnsupportedFeatureError):
        return -1.0
    if not canonical:
        return -1.0
    return 1.0 if canonical in ground_truth else -1.0


def canonical_ground_truth(values) -> set[str]:
    """Canonicalize a ground-truth SMILES collection for membership tests."""
    return {to_canonical_smiles(parse_smiles(v)) for v in values}


def task_reward(record: TaskRecord, completion: Completion) -> float:
    """Dispatch the task-specific reward by answer type."""
    answer = completion.answer_span if completion.answer_span is not None else ""
    kind = record.answer_type.kind
    if kind == "classification":
        return reward_classification(answer, record.answer["label"])
    if kind == "regression":
        return reward_regression(answer, str(record.answer["value"]),
                                 record.answer_type.value_range)
    if kind == "generation":
        if record.answer_type.generation_mode == "ground_truth":
            return reward_generation(answer,
                                     canonical_ground_truth(record.answer["ground_truth"]))
        return reward_generation(answer)
    raise SchemaError(f"unknown answer kind {kind!r}")


def score(record: TaskRecord, completion: Completion | str,
          weights: RewardWeights = RewardWeights()) -> RewardReport:
    """Score one completion against its task record.

    Pure function: identical inputs produce identical reports. The total is
    the (by default unweighted) sum of the three components.
    """
    if isinstance(completion, str):
        completion = Completion.from_text(completion)
    r_format = reward_format(completion)
    r_think = reward_think(completion)
    r_task = task_reward(record, completion)
    total = weights.format * r_format + weights.think * r_think + weights.task * r_task
    return RewardReport(
        r_format=r_format,
        r_think=r_think,
        r_task=r_task,
        total=total,
        components={"format": r_format, "think": r_think,
                    f"task:{record.answer_type.kind}": r_task},
    )


# ---------------------------------------------------------------------------
# group-relative advantages


@dataclass(frozen=True)
class Group:
    """A group of completions with their total rewards."""

    rewards: tuple[float, ...]
    completions: tuple[Completion, ...] | None = None

    def __post_init__(self):
        if len(self.rewards) < 2:
            raise GroupTooSmallError(
                f"group of {len(self.rewards)} completions; need at least 2")
        if self.completions is not None and len(self.completions) != len(self.rewards):
            raise GroupTooSmallError("completions and rewards lengths differ")

    @classmethod
    def from_scored(cls, scored: "list[tuple[Completion, float]]") -> "Group":
        return cls(tuple(r for _, r in scored), tuple(c for c, _ in scored))


def group_advantages(group: Group | list[float] | tuple[float, ...],
                     epsilon: float = ADVANTAGE_EPSILON) -> list[float]:
    """(r - mean) / (std + eps); zero-mean, zeros on unanimous groups."""
    rewards = group.rewards if isinstance(group, Group) else tuple(group)
    if len(rewards) < 2:
        raise GroupTooSmallError(
            f"group of {len(rewards)} completions; need at least 2")
    mean = sum(rewards) / len(rewards)
    variance = sum((r - mean) ** 2 for r in rewards) / len(rewards)
    std = math.sqrt(variance)
    return [(r - mean) / (std + epsilon) for r in rewards]
