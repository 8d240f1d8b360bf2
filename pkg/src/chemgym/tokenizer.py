"""Gym tokenization: chemical token inventories, format tags, augmentation.

Molecular spans are wrapped in format tags (``<smiles>...</smiles>``) and
tokenized one chemical symbol per token via greedy longest match over a
closed inventory generated from the serializers. Text outside tags uses an
externally supplied id map; this package never trains a subword model.
Protein spans mix residue/atom-name tokens with plain-text coordinates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import selfies as sf
from .chem import parse_smiles, random_traversal_smiles, to_canonical_smiles
from .errors import (
    UnbalancedTagError,
    UnknownChemicalSymbolError,
    UnknownTextSymbolError,
    UnknownTokenIdError,
    UnsupportedFeatureError,
    VocabularyError,
)
from .sampler import Entity, TaskRecord

FORMATS = ("smiles", "selfies", "fasta", "protein")

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"

PROTEIN_ATOM_NAMES = (
    "N", "CA", "C", "O", "OXT",
    "CB", "CG", "CG1", "CG2", "CD", "CD1", "CD2",
    "CE", "CE1", "CE2", "CE3", "CZ", "CZ2", "CZ3", "CH2",
    "ND1", "ND2", "NE", "NE1", "NE2", "NH1", "NH2", "NZ",
    "OD1", "OD2", "OE1", "OE2", "OG", "OG1", "OH",
    "SD", "SG",
)


def smiles_symbol_inventory() -> tuple[str, ...]:
    """Every surface symbol the SMILES writer can emit."""
    singles = list("BCNOPSFIbcnops()[]=#:./\\-+@H0123456789")
    doubles = ["Cl", "Br", "@@"]
    percents = [f"%{n:02d}" for n in range(10, 100)]
    return tuple(singles + doubles + percents)


def selfies_symbol_inventory() -> tuple[str, ...]:
    return tuple(sf.selfies_alphabet()) + (".",)


def fasta_symbol_inventory() -> tuple[str, ...]:
    return tuple(AMINO_ACIDS) + ("X",)


def protein_symbol_inventory() -> tuple[str, ...]:
    residues = tuple(f"am_{a}" for a in AMINO_ACIDS)
    atoms = tuple(f"atom_name_{n}" for n in PROTEIN_ATOM_NAMES)
    return residues + atoms


_INVENTORY_BUILDERS = {
    "smiles": smiles_symbol_inventory,
    "selfies": selfies_symbol_inventory,
    "fasta": fasta_symbol_inventory,
    "protein": protein_symbol_inventory,
}

_NAME_PREFIXES = {"smiles": "sm_", "selfies": "sf_", "fasta": "fasta_"}


def _token_name(fmt: str, surface: str) -> str:
    # protein surfaces are already namespaced (am_*, atom_name_*)
    return surface if fmt == "protein" else _NAME_PREFIXES[fmt] + surface


def open_tag(fmt: str) -> str:
    return f"<{fmt}>"


def close_tag(fmt: str) -> str:
    return f"</{fmt}>"


class Vocabulary:
    """Immutable token inventory: text ids, chemical ids, and format tags."""

    def __init__(self, text_tokens: dict[str, int],
                 chem_tokens: dict[tuple[str, str], int],
                 tag_tokens: dict[str, int]):
        self.text_tokens = dict(text_tokens)
        self.chem_tokens = dict(chem_tokens)
        self.tag_tokens = dict(tag_tokens)
        self._check()
        self.id_to_surface: dict[int, str] = {}
        for surface, tid in self.text_tokens.items():
            self.id_to_surface[tid] = surface
        for (_, surface), tid in self.chem_tokens.items():
            self.id_to_surface[tid] = surface
        for tag, tid in self.tag_tokens.items():
            self.id_to_surface[tid] = tag
        self._chem_by_format: dict[str, dict[str, int]] = {f: {} for f in FORMATS}
        for (fmt, surface), tid in self.chem_tokens.items():
            self._chem_by_format[fmt][surface] = tid
        self._max_text_len = max((len(s) for s in self.text_tokens), default=0)
        self._max_chem_len = {
            fmt: max((len(s) for s in surfaces), default=0)
            for fmt, surfaces in self._chem_by_format.items()
        }

    def _check(self):
        ids: dict[int, str] = {}
        for name, tid in [(s, i) for s, i in self.text_tokens.items()] + \
                         [(_token_name(f, s), i) for (f, s), i in self.chem_tokens.items()] + \
                         [(t, i) for t, i in self.tag_tokens.items()]:
            if tid in ids:
                raise VocabularyError(f"id {tid} assigned to both {ids[tid]!r} and {name!r}")
            ids[tid] = name
        reserved = sorted(list(self.chem_tokens.values()) + list(self.tag_tokens.values()))
        if reserved and reserved != list(range(reserved[0], reserved[0] + len(reserved))):
            raise VocabularyError("chemical/tag ids must form a contiguous range")
        for surface in self.text_tokens:
            if not surface:
                raise VocabularyError("empty text token surface")
        for (_, surface) in self.chem_tokens:
            if not surface:
                raise VocabularyError("empty chemical token surface")

    @classmethod
    def build(cls, text_tokens: dict[str, int]) -> "Vocabulary":
        """Assemble the full vocabulary around a base text id map."""
        next_id = max(text_tokens.values(), default=-1) + 1
        tag_tokens: dict[str, int] = {}
        for fmt in FORMATS:
            for tag in (open_tag(fmt), close_tag(fmt)):
                tag_tokens[tag] = next_id
                next_id += 1
        chem_tokens: dict[tuple[str, str], int] = {}
        for fmt in FORMATS:
            for surface in sorted(_INVENTORY_BUILDERS[fmt]()):
                chem_tokens[(fmt, surface)] = next_id
                next_id += 1
        return cls(text_tokens, chem_tokens, tag_tokens)

    # -- persistence (token<TAB>id lines, surfaces unicode-escaped) ---------

    def save(self, path):
        lines = []
        for surface, tid in sorted(self.text_tokens.items(), key=lambda kv: kv[1]):
            lines.append((surface, tid))
        for tag, tid in sorted(self.tag_tokens.items(), key=lambda kv: kv[1]):
            lines.append((tag, tid))
        for (fmt, surface), tid in sorted(self.chem_tokens.items(), key=lambda kv: kv[1]):
            lines.append((_token_name(fmt, surface), tid))
        with open(path, "w", encoding="utf-8") as fh:
            for name, tid in sorted(lines, key=lambda kv: kv[1]):
                escaped = name.encode("unicode_escape").decode("ascii")
                fh.write(f"{escaped}\t{tid}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        text: dict[str, int] = {}
        chem: dict[tuple[str, str], int] = {}
        tags: dict[str, int] = {}
        tag_names = {open_tag(f) for f in FORMATS} | {close_tag(f) for f in FORMATS}
        seen_names: set[str] = set()
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    escaped, tid_text = line.rstrip("\n").split("\t")
                    tid = int(tid_text)
                except ValueError:
                    raise VocabularyError(f"line {line_no}: expected 'token<TAB>id'")
                name = escaped.encode("ascii").decode("unicode_escape")
                if name in seen_names:
                    raise VocabularyError(f"line {line_no}: duplicate token {name!r}")
                seen_names.add(name)
                if name in tag_names:
                    tags[name] = tid
                elif name.startswith("sm_"):
                    chem[("smiles", name[3:])] = tid
                elif name.startswith("sf_"):
                    chem[("selfies", name[3:])] = tid
                elif name.startswith("fasta_"):
                    chem[("fasta", name[6:])] = tid
                elif name.startswith(("am_", "atom_name_")):
                    chem[("protein", name)] = tid
                else:
                    text[name] = tid
        return cls(text, chem, tags)


def ascii_text_tokens() -> dict[str, int]:
    """Default character-level text inventory (printable ASCII + newline/tab)."""
    chars = [chr(i) for i in range(32, 127)] + ["\n", "\t"]
    return {c: i for i, c in enumerate(chars)}


@dataclass(frozen=True)
class TokenSequence:
    """Token ids plus the chemical spans (format, start, end) they contain.

    Span bounds are token indices; ``start`` points at the opening tag token
    and ``end`` is one past the closing tag token.
    """

    ids: tuple[int, ...]
    spans: tuple[tuple[str, int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.ids)


def _match_longest(text: str, pos: int, surfaces: dict[str, int], max_len: int) -> str | None:
    limit = min(max_len, len(text) - pos)
    for length in range(limit, 0, -1):
        candidate = text[pos : pos + length]
        if candidate in surfaces:
            return candidate
    return None


def _find_tag_spans(text: str) -> list[tuple[str, int, int, int, int]]:
    """(format, open_start, content_start, content_end, close_end) spans."""
    spans = []
    pos = 0
    while True:
        hits = [(text.find(open_tag(f), pos), f) for f in FORMATS]
        hits = [(i, f) for i, f in hits if i >= 0]
        stray = [(text.find(close_tag(f), pos), f) for f in FORMATS]
        stray = [(i, f) for i, f in stray if i >= 0]
        if not hits:
            if stray:
                i, f = min(stray)
                raise UnbalancedTagError(
                    f"closing tag {close_tag(f)!r} at position {i} without an opening tag")
            return spans
        start, fmt = min(hits)
        if stray and min(stray)[0] < start:
            i, f = min(stray)
            raise UnbalancedTagError(
                f"closing tag {close_tag(f)!r} at position {i} without an opening tag")
        content_start = start + len(open_tag(fmt))
        close = text.find(close_tag(fmt), content_start)
        if close < 0:
            raise UnbalancedTagError(f"unclosed {open_tag(fmt)!r} at position {start}")
        inner_opens = [
            (text.find(open_tag(f), content_start, close), f) for f in FORMATS
        ]
        inner_opens = [x for x in inner_opens if x[0] >= 0]
        if inner_opens:
            i, f = min(inner_opens)
            raise UnbalancedTagError(f"nested {open_tag(f)!r} at position {i}")
        spans.append((fmt, start, content_start, close, close + len(close_tag(fmt))))
        pos = close + len(close_tag(fmt))


def _tokenize_text(text: str, vocab: Vocabulary, base: int, out: list[int]):
    pos = 0
    while pos < len(text):
        match = _match_longest(text, pos, vocab.text_tokens, vocab._max_text_len)
        if match is None:
            raise UnknownTextSymbolError(
                f"character {text[pos]!r} not in the text vocabulary", base + pos)
        out.append(vocab.text_tokens[match])
        pos += len(match)


def _tokenize_chem(content: str, fmt: str, vocab: Vocabulary, base: int, out: list[int]):
    surfaces = vocab._chem_by_format[fmt]
    max_len = vocab._max_chem_len[fmt]
    pos = 0
    while pos < len(content):
        match = _match_longest(content, pos, surfaces, max_len)
        if match is not None:
            out.append(surfaces[match])
            pos += len(match)
            continue
        if fmt == "protein":
            # coordinates and layout whitespace ride on the text vocabulary
            tmatch = _match_longest(content, pos, vocab.text_tokens, 1)
            if tmatch is not None:
                out.append(vocab.text_tokens[tmatch])
                pos += 1
                continue
        raise UnknownChemicalSymbolError(
            f"symbol {content[pos]!r} not in the {fmt} inventory", base + pos)


def tokenize(text: str, vocab: Vocabulary, isolate_inputs: bool = True) -> TokenSequence:
    """Tokenize text, isolating tagged chemical spans when requested.

    With ``isolate_inputs=False`` the entire input (tags included) rides on
    the text vocabulary; tag balance is validated either way. Model-side
    content should always be tokenized with isolation on.
    """
    tag_spans = _find_tag_spans(text)
    ids: list[int] = []
    spans: list[tuple[str, int, int]] = []
    if not isolate_inputs:
        _tokenize_text(text, vocab, 0, ids)
        return TokenSequence(tuple(ids))
    cursor = 0
    for fmt, start, content_start, content_end, end in tag_spans:
        _tokenize_text(text[cursor:start], vocab, cursor, ids)
        span_start = len(ids)
        ids.append(vocab.tag_tokens[open_tag(fmt)])
        _tokenize_chem(text[content_start:content_end], fmt, vocab, content_start, ids)
        ids.append(vocab.tag_tokens[close_tag(fmt)])
        spans.append((fmt, span_start, len(ids)))
        cursor = end
    _tokenize_text(text[cursor:], vocab, cursor, ids)
    return TokenSequence(tuple(ids), tuple(spans))


def detokenize(seq: TokenSequence, vocab: Vocabulary) -> str:
    """Exact inverse of :func:`tokenize` on its own output."""
    parts = []
    for tid in seq.ids:
        surface = vocab.id_to_surface.get(tid)
        if surface is None:
            raise UnknownTokenIdError(f"id {tid} not in vocabulary")
        parts.append(surface)
    return "".join(parts)


def tokenize_chat(turns, vocab: Vocabulary, policy: "AugmentationPolicy",
                  rng: random.Random) -> list[TokenSequence]:
    """Tokenize (role, text) turns; user-side isolation is probabilistic,
    model-side content is always chemically isolated."""
    out = []
    for role, text in turns:
        if role == "user":
            isolate = rng.random() < policy.p_input_isolation
        else:
            isolate = True
        out.append(tokenize(text, vocab, isolate_inputs=isolate))
    return out


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentationPolicy:
    """Probabilities for the chemical-entity augmentations.

    0.5 for input isolation follows the training recipe; the conversion and
    traversal defaults are configuration, not established constants.
    """

    p_format_convert: float = 0.5
    p_random_traversal: float = 0.5
    p_input_isolation: float = 0.5
    p_name_convert: float = 0.0
    rng_seed: int | None = None

    def __post_init__(self):
        for name in ("p_format_convert", "p_random_traversal",
                     "p_input_isolation", "p_name_convert"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")

    def make_rng(self) -> random.Random:
        return random.Random(self.rng_seed)

    @classmethod
    def identity(cls) -> "AugmentationPolicy":
        return cls(0.0, 0.0, 0.0, 0.0)


def _augment_entity(entity: Entity, policy: AugmentationPolicy,
                    rng: random.Random, name_provider=None) -> Entity:
    if entity.format not in ("smiles", "selfies"):
        return entity
    want_name = rng.random() < policy.p_name_convert
    convert = rng.random() < policy.p_format_convert
    traverse = rng.random() < policy.p_random_traversal
    if not (want_name or convert or traverse):
        return entity
    if entity.format == "smiles":
        mol = parse_smiles(entity.value)
    else:
        mol = sf.decode_selfies(entity.value)
    if want_name and name_provider is not None:
        name = name_provider(to_canonical_smiles(mol))
        if name:
            return Entity("text", name)
    fmt = entity.format
    if convert:
        fmt = "selfies" if fmt == "smiles" else "smiles"
    if fmt == "selfies":
        try:
            value = sf.encode_selfies(mol, rng=rng if traverse else None)
            return Entity("selfies", value)
        except UnsupportedFeatureError:
            fmt = "smiles"  # outside the SELFIES alphabet; keep SMILES form
    if traverse:
        return Entity("smiles", random_traversal_smiles(mol, rng))
    return Entity("smiles", to_canonical_smiles(mol))


def augment_record(rec: TaskRecord, policy: AugmentationPolicy,
                   rng: random.Random, name_provider=None) -> TaskRecord:
    """Augment a record's chemical entities; deterministic given the rng.

    Input entities may be format-converted and re-serialized via random
    traversal; generation ground-truth sets are re-canonicalized and never
    traversal-augmented, so the molecular identity of every payload is
    preserved.
    """
    entities = {
        name: _augment_entity(ent, policy, rng, name_provider)
        for name, ent in rec.entities.items()
    }
    answer = rec.answer
    if (rec.answer_type.kind == "generation"
            and rec.answer_type.generation_mode == "ground_truth"):
        answer = dict(rec.answer)
        answer["ground_truth"] = [
            to_canonical_smiles(parse_smiles(s)) for s in rec.answer["ground_truth"]
        ]
    return TaskRecord(rec.category, rec.task_id, rec.prompt_templates,
                      entities, answer, rec.answer_type)


def entity_text(entity: Entity) -> str:
    """Render an entity as prompt text (tagged for chemical formats)."""
    if entity.format in FORMATS:
        return f"{open_tag(entity.format)}{entity.value}{close_tag(entity.format)}"
    return entity.value
