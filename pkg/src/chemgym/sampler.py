"""Task records, JSONL-backed example stores, and balanced batch sampling.

Batches are drawn with a three-stage uniform scheme: category, then task
within the category, then example within the task, all with replacement.
Example stores keep byte offsets rather than payloads, so corpora larger
than memory stream fine.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DegenerateRangeError,
    EmptyCategoryError,
    EmptyTaskError,
    SchemaError,
)

DEFAULT_CATEGORIES = (
    "mol_2d",
    "mol_3d",
    "protein_2d",
    "protein_3d",
    "drug_gene",
    "cross_domain",
)

ENTITY_FORMATS = ("smiles", "selfies", "fasta", "protein", "text")


@dataclass(frozen=True)
class Entity:
    """One named chemical/protein payload of a task example."""

    format: str
    value: str

    def to_json(self) -> dict:
        return {"format": self.format, "value": self.value}


@dataclass(frozen=True)
class AnswerType:
    """Shape of the expected answer: classification, regression or generation."""

    kind: str
    labels: tuple[str, ...] | None = None
    value_range: tuple[float, float] | None = None
    generation_mode: str | None = None  # "validity_only" | "ground_truth"

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.value_range is not None:
            out["range"] = list(self.value_range)
        if self.generation_mode is not None:
            out["mode"] = self.generation_mode
        return out


@dataclass(frozen=True)
class TaskRecord:
    """One training/eval example."""

    category: str
    task_id: str
    prompt_templates: tuple[str, ...]
    entities: dict[str, Entity]
    answer: dict
    answer_type: AnswerType

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "task_id": self.task_id,
            "prompt_templates": list(self.prompt_templates),
            "entities": {k: v.to_json() for k, v in self.entities.items()},
            "answer": self.answer,
            "answer_type": self.answer_type.to_json(),
        }


def _require(obj: dict, key: str, line: int | None):
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", line)
    return obj[key]


def parse_answer_type(obj: dict, line: int | None = None) -> AnswerType:
    kind = _require(obj, "kind", line)
    if kind == "classification":
        labels = _require(obj, "labels", line)
        if not isinstance(labels, list) or not labels:
            raise SchemaError("classification needs a non-empty labels list", line)
        return AnswerType("classification", labels=tuple(str(x) for x in labels))
    if kind == "regression":
        rng = _require(obj, "range", line)
        if not (isinstance(rng, list) and len(rng) == 2):
            raise SchemaError("regression needs range [min, max]", line)
        lo, hi = float(rng[0]), float(rng[1])
        if not hi > lo:
            raise DegenerateRangeError(f"answer range [{lo}, {hi}] is degenerate")
        return AnswerType("regression", value_range=(lo, hi))
    if kind == "generation":
        mode = obj.get("mode", "validity_only")
        if mode not in ("validity_only", "ground_truth"):
            raise SchemaError(f"unknown generation mode {mode!r}", line)
        return AnswerType("generation", generation_mode=mode)
    raise SchemaError(f"unknown answer kind {kind!r}", line)


def record_from_json(obj: dict, line: int | None = None) -> TaskRecord:
    """Validate one JSONL object against the task schema."""
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object", line)
    category = str(_require(obj, "category", line))
    task_id = str(_require(obj, "task_id", line))
    templates = _require(obj, "prompt_templates", line)
    if not isinstance(templates, list) or not templates:
        raise SchemaError("prompt_templates must be a non-empty list", line)
    raw_entities = obj.get("entities", {})
    if not isinstance(raw_entities, dict):
        raise SchemaError("entities must be an object", line)
    entities = {}
    for name, ent in raw_entities.items():
        if not isinstance(ent, dict) or "format" not in ent or "value" not in ent:
            raise SchemaError(f"entity {name!r} needs format and value", line)
        if ent["format"] not in ENTITY_FORMATS:
            raise SchemaError(f"entity {name!r} has unknown format {ent['format']!r}", line)
        entities[str(name)] = Entity(str(ent["format"]), str(ent["value"]))
    for template in templates:
        for name in entities:
            if "{" + name + "}" not in template:
                raise SchemaError(
                    f"template {template!r} is missing placeholder {{{name}}}", line)
    answer = _require(obj, "answer", line)
    if not isinstance(answer, dict):
        raise SchemaError("answer must be an object", line)
    answer_type = parse_answer_type(_require(obj, "answer_type", line), line)
    if answer_type.kind == "classification":
        label = answer.get("label")
        if not isinstance(label, str):
            raise SchemaError("classification answer needs a string label", line)
        if label not in (answer_type.labels or ()):
            raise SchemaError(f"answer label {label!r} not in the label set", line)
    elif answer_type.kind == "regression":
        value = answer.get("value")
        if value is None:
            raise SchemaError("regression answer needs a value", line)
        try:
            float(str(value))
        except ValueError:
            raise SchemaError(f"regression answer {value!r} is not numeric", line)
    elif answer_type.kind == "generation":
        if answer_type.generation_mode == "ground_truth":
            gt = answer.get("ground_truth")
            if not isinstance(gt, list) or not gt:
                raise SchemaError("ground_truth mode needs a non-empty answer set", line)
    return TaskRecord(category, task_id, tuple(str(t) for t in templates),
                      entities, answer, answer_type)


# ---------------------------------------------------------------------------
# example stores


class ExampleStore:
    """Random access to task examples by index."""

    def __len__(self) -> int:
        raise NotImplementedError

    def get(self, index: int) -> TaskRecord:
        raise NotImplementedError


class ListExampleStore(ExampleStore):
    def __init__(self, records: Sequence[TaskRecord]):
        self._records = list(records)

    def __len__(self) -> int:
        return len(self._records)

    def get(self, index: int) -> TaskRecord:
        return self._records[index]


class JsonlExampleStore(ExampleStore):
    """Offset-indexed JSONL file; payloads are parsed on access."""

    def __init__(self, path: str | Path, validate: bool = True):
        self.path = Path(path)
        self._offsets: list[int] = []
        offset = 0
        with open(self.path, "rb") as fh:
            for line_no, raw in enumerate(fh, start=1):
                stripped = raw.strip()
                if stripped:
                    if validate:
                        try:
                            obj = json.loads(stripped)
                        except json.JSONDecodeError as exc:
                            raise SchemaError(f"invalid JSON: {exc.msg}", line_no)
                        record_from_json(obj, line_no)
                    self._offsets.append(offset)
                offset += len(raw)

    def __len__(self) -> int:
        return len(self._offsets)

    def get(self, index: int) -> TaskRecord:
        with open(self.path, "rb") as fh:
            fh.seek(self._offsets[index])
            raw = fh.readline()
        return record_from_json(json.loads(raw))


def load_jsonl(path: str | Path, validate: bool = True) -> JsonlExampleStore:
    """Ingest a JSONL task file, reporting schema problems with line numbers."""
    return JsonlExampleStore(path, validate=validate)


# ---------------------------------------------------------------------------
# registry


class Registry:
    """categories -> task ids -> example stores."""

    def __init__(self, stores: dict[str, dict[str, ExampleStore]],
                 categories: Sequence[str] = DEFAULT_CATEGORIES):
        self.categories = tuple(categories)
        self.stores = stores
        for category in self.categories:
            tasks = stores.get(category)
            if not tasks:
                raise EmptyCategoryError(f"category {category!r} has no tasks")
            for task_id, store in tasks.items():
                if len(store) == 0:
                    raise EmptyTaskError(f"task {category}/{task_id} has no examples")
        unknown = set(stores) - set(self.categories)
        if unknown:
            raise SchemaError(f"categories outside the configured set: {sorted(unknown)}")

    @classmethod
    def from_manifest(cls, path: str | Path, validate: bool = True) -> "Registry":
        """Load a YAML manifest: {categories?: [...], tasks: {cat: {task: file}}}."""
        import yaml

        path = Path(path)
        with open(path) as fh:
            manifest = yaml.safe_load(fh)
        if not isinstance(manifest, dict) or "tasks" not in manifest:
            raise SchemaError(f"manifest {path} needs a top-level 'tasks' mapping")
        categories = tuple(manifest.get("categories", DEFAULT_CATEGORIES))
        stores: dict[str, dict[str, ExampleStore]] = {}
        for category, tasks in manifest["tasks"].items():
            stores[category] = {}
            for task_id, rel in tasks.items():
                file_path = (path.parent / rel) if not Path(rel).is_absolute() else Path(rel)
                stores[category][task_id] = JsonlExampleStore(file_path, validate=validate)
        return cls(stores, categories)

    def task_ids(self, category: str) -> list[str]:
        return sorted(self.stores[category])

    def store(self, category: str, task_id: str) -> ExampleStore:
        return self.stores[category][task_id]

    def counts(self) -> dict[str, dict[str, int]]:
        return {c: {t: len(s) for t, s in tasks.items()}
                for c, tasks in self.stores.items()}

    def all_records(self) -> Iterable[TaskRecord]:
        for category in self.categories:
            for task_id in self.task_ids(category):
                store = self.stores[category][task_id]
                for i in range(len(store)):
                    yield store.get(i)


def sample_batch(registry: Registry, n: int, rng: random.Random) -> list[TaskRecord]:
    """Draw ``n`` records: uniform category, uniform task, uniform example."""
    categories = sorted(registry.categories)
    batch = []
    for _ in range(n):
        category = categories[rng.randrange(len(categories))]
        tasks = registry.task_ids(category)
        task_id = tasks[rng.randrange(len(tasks))]
        store = registry.stores[category][task_id]
        batch.append(store.get(rng.randrange(len(store))))
    return batch


def sample_plan(registry: Registry, n: int, rng: random.Random) -> list[tuple[str, str, int]]:
    """Like :func:`sample_batch` but yields (category, task, index) triples
    without materializing records; used for frequency tests on huge stores."""
    categories = sorted(registry.categories)
    plan = []
    for _ in range(n):
        category = categories[rng.randrange(len(categories))]
        tasks = registry.task_ids(category)
        task_id = tasks[rng.randrange(len(tasks))]
        store = registry.stores[category][task_id]
        plan.append((category, task_id, rng.randrange(len(store))))
    return plan
