"""Molecular graphs and SMILES machinery.

Self-contained (no external cheminformatics toolkit): parsing into an
attributed graph, valence checking, kekulization, canonical and randomized
serialization, and hash-folded circular fingerprints.

Supported grammar: the organic subset (B, C, N, O, P, S, F, Cl, Br, I) in
plain and aromatic lowercase form, bracket atoms with isotope / charge /
explicit hydrogens / @ and @@ tags, ring closures including two-digit %nn,
branches, directional single bonds (/ and \\), and dot-separated components.
Stereo annotations are parsed and carried but never participate in canonical
ranking; equivalence of rewritten stereo forms is out of scope.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

from .errors import (
    KekulizationError,
    LengthMismatchError,
    SmilesSyntaxError,
    UnsupportedFeatureError,
    ValenceError,
)

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_SYMBOLS = ("b", "c", "n", "o", "p", "s")

# Allowed total valences (bond orders + hydrogens) per neutral element.
BASE_VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}


def allowed_valences(element: str, charge: int) -> tuple[int, ...]:
    """Allowed total valences for an element at a given formal charge.

    Electron-rich elements (N, O, P, S, halogens) gain a bond per positive
    charge and lose one per negative charge; B and C lose capacity in both
    directions (carbocation and carbanion are both trivalent).
    """
    base = BASE_VALENCES.get(element)
    if base is None:
        raise UnsupportedFeatureError(f"element {element!r} is not in the supported set")
    if charge == 0:
        return base
    if element in ("B", "C"):
        shifted = tuple(v - abs(charge) for v in base)
    else:
        shifted = tuple(v + charge for v in base)
    ok = tuple(v for v in shifted if v >= 0)
    if not ok:
        raise ValenceError(f"{element} with charge {charge:+d} has no allowed valence")
    return ok


class BondOrder(enum.IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def value_float(self) -> float:
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


@dataclass(frozen=True)
class Atom:
    """One heavy atom. ``h_count`` is the resolved hydrogen count."""

    element: str
    charge: int = 0
    h_count: int = 0
    aromatic: bool = False
    isotope: int | None = None
    chirality: str | None = None  # "@" or "@@", carried verbatim


@dataclass(frozen=True)
class Bond:
    """Undirected bond; ``direction`` ("/" or "\\") is oriented a -> b."""

    a: int
    b: int
    order: BondOrder = BondOrder.SINGLE
    direction: str | None = None

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    """Immutable attributed molecular graph (possibly multi-component)."""

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]

    def __post_init__(self):
        n = len(self.atoms)
        seen: set[tuple[int, int]] = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n) or bond.a == bond.b:
                raise ValueError(f"bond {bond.a}-{bond.b} out of range")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, Bond], ...], ...]:
        adj: list[list[tuple[int, Bond]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond))
            adj[bond.b].append((bond.a, bond))
        return tuple(tuple(x) for x in adj)

    def neighbors(self, idx: int) -> tuple[tuple[int, Bond], ...]:
        return self.adjacency[idx]

    def degree(self, idx: int) -> int:
        return len(self.adjacency[idx])

    def bond_between(self, i: int, j: int) -> Bond | None:
        for k, bond in self.adjacency[i]:
            if k == j:
                return bond
        return None

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def is_empty(self) -> bool:
        return not self.atoms

    def components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        comps: list[list[int]] = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                u = stack.pop()
                comp.append(u)
                for v, _ in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def sigma_valence(self, idx: int) -> float:
        """Sum of bond order values (aromatic counts 1.5)."""
        return sum(bond.order.value_float for _, bond in self.adjacency[idx])


# ---------------------------------------------------------------------------
# implicit hydrogens

_ELEMENT_NAMES = {
    "B": "boron",
    "C": "carbon",
    "N": "nitrogen",
    "O": "oxygen",
    "P": "phosphorus",
    "S": "sulfur",
    "F": "fluorine",
    "Cl": "chlorine",
    "Br": "bromine",
    "I": "iodine",
}


def _element_name(element: str) -> str:
    return _ELEMENT_NAMES.get(element, element)


def _implicit_h_plain(element: str, charge: int, sigma: float) -> int:
    """Implicit H for a bare non-aromatic organic-subset atom."""
    needed = int(-(-sigma // 1))  # ceil
    for v in allowed_valences(element, charge):
        if v >= needed:
            return v - needed
    raise ValenceError(f"{_element_name(element)} valence {needed} exceeds allowed table")


def _implicit_h_aromatic(element: str, charge: int, explicit_bonds: int) -> int:
    """Implicit H for a bare aromatic atom.

    One unit of valence is reserved for the ring double bond the atom may
    take during kekulization; atoms that take none (pyrrole-type) must be
    written with explicit H ([nH]).
    """
    lowest = allowed_valences(element, charge)[0]
    return max(0, lowest - explicit_bonds - 1)


# ---------------------------------------------------------------------------
# SMILES parsing

_BRACKET_CHARGE_CHARS = "+-"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bare: list[bool] = []  # atom written without brackets
        self.bonds: dict[tuple[int, int], Bond] = {}
        self.ring_open: dict[int, tuple[int, BondOrder | None, str | None, int]] = {}

    def error(self, message: str, pos: int | None = None):
        raise SmilesSyntaxError(message, self.pos if pos is None else pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    # -- atoms --------------------------------------------------------------

    def parse_bare_atom(self) -> Atom | None:
        ch = self.peek()
        if not ch:
            return None
        two = self.text[self.pos : self.pos + 2]
        if two in ("Cl", "Br"):
            self.pos += 2
            return Atom(two)
        if ch in "BCNOPSFI":
            self.pos += 1
            return Atom(ch)
        if ch in AROMATIC_SYMBOLS:
            self.pos += 1
            return Atom(ch.upper(), aromatic=True)
        return None

    def parse_bracket_atom(self) -> Atom:
        start = self.pos
        self.take()  # consume "["
        isotope: int | None = None
        digits = ""
        while self.peek().isdigit():
            digits += self.take()
        if digits:
            isotope = int(digits)
            if isotope <= 0:
                self.error("isotope must be positive", start)
        # element symbol
        element = ""
        aromatic = False
        ch = self.peek()
        two = self.text[self.pos : self.pos + 2]
        if two in ("Cl", "Br"):
            element = two
            self.pos += 2
        elif ch.isupper() and len(two) == 2 and two[1].islower():
            raise UnsupportedFeatureError(f"element {two!r} is not in the supported set")
        elif ch in "BCNOPSFI":
            element = ch
            self.pos += 1
        elif ch in AROMATIC_SYMBOLS:
            element = ch.upper()
            aromatic = True
            self.pos += 1
        elif ch == "H":
            raise UnsupportedFeatureError("explicit hydrogen atoms are not supported")
        elif ch.isalpha():
            raise UnsupportedFeatureError(f"element {ch!r} is not in the supported set")
        else:
            self.error("expected element symbol in bracket atom")
        chirality: str | None = None
        if self.peek() == "@":
            self.take()
            if self.peek() == "@":
                self.take()
                chirality = "@@"
            else:
                chirality = "@"
        h_count = 0
        if self.peek() == "H":
            self.take()
            digits = ""
            while self.peek().isdigit():
                digits += self.take()
            h_count = int(digits) if digits else 1
        charge = 0
        if self.peek() in _BRACKET_CHARGE_CHARS:
            sign_ch = self.take()
            sign = 1 if sign_ch == "+" else -1
            if self.peek() == sign_ch:  # ++ / --
                self.take()
                charge = 2 * sign
            else:
                digits = ""
                while self.peek().isdigit():
                    digits += self.take()
                charge = sign * int(digits) if digits else sign
        if self.peek() == ":":
            raise UnsupportedFeatureError("atom class labels are not supported")
        if self.peek() != "]":
            self.error("expected ']' in bracket atom")
        self.take()
        return Atom(element, charge=charge, h_count=h_count, aromatic=aromatic,
                    isotope=isotope, chirality=chirality)

    # -- bonds / rings -------------------------------------------------------

    def add_bond(self, a: int, b: int, order: BondOrder | None, direction: str | None,
                 pos: int):
        if a == b:
            self.error("ring closure bonds an atom to itself", pos)
        key = (min(a, b), max(a, b))
        if key in self.bonds:
            self.error(f"duplicate bond between atoms {a} and {b}", pos)
        if order is None:
            both_aromatic = self.atoms[a].aromatic and self.atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        if order is BondOrder.AROMATIC and not (
            self.atoms[a].aromatic and self.atoms[b].aromatic
        ):
            self.error("aromatic bond requires aromatic atoms on both ends", pos)
        self.bonds[key] = Bond(a, b, order, direction)

    def parse(self) -> Molecule:
        text = self.text
        prev: int | None = None
        stack: list[int | None] = []
        pending_order: BondOrder | None = None
        pending_dir: str | None = None
        pending_pos = 0
        seen_any = False
        dot_pending = False

        bond_chars = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE,
                      "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC}

        def attach(atom: Atom, bare: bool):
            nonlocal prev, pending_order, pending_dir, dot_pending
            idx = len(self.atoms)
            self.atoms.append(atom)
            self.bare.append(bare)
            if prev is not None:
                self.add_bond(prev, idx, pending_order, pending_dir, pending_pos)
            elif pending_order is not None or pending_dir is not None:
                self.error("bond symbol with no preceding atom", pending_pos)
            prev = idx
            pending_order = None
            pending_dir = None
            dot_pending = False

        def ring_closure(num: int, pos: int):
            nonlocal pending_order, pending_dir
            if prev is None:
                self.error("ring bond before any atom", pos)
            if num in self.ring_open:
                open_atom, open_order, open_dir, open_pos = self.ring_open.pop(num)
                order = open_order
                if pending_order is not None:
                    if order is not None and order is not pending_order:
                        self.error(f"ring bond {num} opened and closed with different orders", pos)
                    order = pending_order
                direction = open_dir
                if pending_dir is not None:
                    # closing-side marker is oriented closing atom -> opening atom
                    flipped = "\\" if pending_dir == "/" else "/"
                    if direction is not None and direction != flipped:
                        self.error(f"ring bond {num} has conflicting direction markers", pos)
                    direction = flipped
                self.add_bond(open_atom, prev, order, direction, pos)
            else:
                self.ring_open[num] = (prev, pending_order, pending_dir, pos)
            pending_order = None
            pending_dir = None

        while self.pos < len(text):
            ch = self.peek()
            if ch == "(":
                if prev is None:
                    self.error("branch start before any atom")
                if pending_order is not None or pending_dir is not None:
                    self.error("bond symbol before branch start", pending_pos)
                stack.append(prev)
                self.take()
            elif ch == ")":
                if not stack:
                    self.error("unmatched ')'")
                if pending_order is not None or pending_dir is not None:
                    self.error("dangling bond symbol before ')'", pending_pos)
                prev = stack.pop()
                self.take()
            elif ch in bond_chars:
                if pending_order is not None:
                    self.error("two bond symbols in a row")
                pending_order = bond_chars[ch]
                pending_pos = self.pos
                self.take()
            elif ch in "/\\":
                if pending_dir is not None:
                    self.error("two direction markers in a row")
                pending_dir = ch
                pending_pos = self.pos
                self.take()
            elif ch == ".":
                if pending_order is not None or pending_dir is not None:
                    self.error("bond symbol adjacent to '.'", pending_pos)
                if not seen_any or dot_pending:
                    self.error("'.' with no component before it")
                if stack:
                    self.error("'.' inside a branch")
                prev = None
                dot_pending = True
                self.take()
            elif ch.isdigit():
                pos = self.pos
                ring_closure(int(self.take()), pos)
            elif ch == "%":
                pos = self.pos
                self.take()
                digits = ""
                while self.peek().isdigit() and len(digits) < 2:
                    digits += self.take()
                if len(digits) != 2:
                    self.error("'%' ring closure needs two digits", pos)
                ring_closure(int(digits), pos)
            elif ch == "[":
                atom = self.parse_bracket_atom()
                attach(atom, bare=False)
                seen_any = True
            else:
                pos = self.pos
                atom = self.parse_bare_atom()
                if atom is None:
                    self.error(f"unexpected character {ch!r}", pos)
                attach(atom, bare=True)
                seen_any = True

        if stack:
            self.error("unclosed '('", len(text) - 1)
        if pending_order is not None or pending_dir is not None:
            self.error("dangling bond symbol at end of input", pending_pos)
        if dot_pending:
            self.error("trailing '.'", len(text) - 1)
        if self.ring_open:
            num = sorted(self.ring_open)[0]
            self.error(f"unclosed ring bond {num}", self.ring_open[num][3])

        return self.finalize()

    # -- semantic pass -------------------------------------------------------

    def finalize(self) -> Molecule:
        bonds = tuple(self.bonds.values())
        mol = Molecule(tuple(self.atoms), bonds)
        atoms: list[Atom] = []
        for idx, atom in enumerate(mol.atoms):
            sigma = mol.sigma_valence(idx)
            if self.bare[idx]:
                if atom.aromatic:
                    explicit = len(mol.adjacency[idx])
                    h = _implicit_h_aromatic(atom.element, atom.charge, explicit)
                else:
                    h = _implicit_h_plain(atom.element, atom.charge, sigma)
                atoms.append(replace(atom, h_count=h))
            else:
                atoms.append(atom)
        mol = Molecule(tuple(atoms), bonds)
        _check_aromatic_rings(mol)
        kek = kekulize(mol)  # raises KekulizationError when impossible
        _check_valences(kek)
        return mol


def parse_smiles(s: str) -> Molecule:
    """Parse a SMILES string into a :class:`Molecule`.

    Raises :class:`SmilesSyntaxError`, :class:`ValenceError` (including
    :class:`KekulizationError`) or :class:`UnsupportedFeatureError`.
    An empty string yields the empty molecule.
    """
    return _Parser(s).parse()


def is_valid_smiles(s: str) -> bool:
    """True iff ``s`` parses and passes valence checks."""
    try:
        mol = parse_smiles(s)
    except (SmilesSyntaxError, ValenceError, UnsupportedFeatureError):
        return False
    return not mol.is_empty


# ---------------------------------------------------------------------------
# aromaticity / kekulization


def _bridges(mol: Molecule) -> set[tuple[int, int]]:
    """Bridge edges (edges on no cycle), via iterative Tarjan low-link."""
    n = len(mol.atoms)
    disc = [-1] * n
    low = [0] * n
    bridges: set[tuple[int, int]] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        parent_edge: dict[int, int] = {root: -1}
        while stack:
            u, parent, i = stack.pop()
            if i == 0:
                disc[u] = low[u] = timer
                timer += 1
            adj = mol.adjacency[u]
            if i < len(adj):
                stack.append((u, parent, i + 1))
                v, _ = adj[i]
                if disc[v] == -1:
                    parent_edge[v] = u
                    stack.append((v, u, 0))
                elif v != parent:
                    low[u] = min(low[u], disc[v])
            else:
                if parent != -1:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add((min(parent, u), max(parent, u)))
    return bridges


def _check_aromatic_rings(mol: Molecule):
    aromatic_atoms = [i for i, a in enumerate(mol.atoms) if a.aromatic]
    if not aromatic_atoms:
        return
    bridges = _bridges(mol)
    for i in aromatic_atoms:
        in_ring = any(
            (min(i, j), max(i, j)) not in bridges for j, _ in mol.adjacency[i]
        )
        if not in_ring:
            raise KekulizationError(f"aromatic atom {i} is not in a ring")


def _needs_ring_double(mol: Molecule, idx: int) -> int:
    """0 or 1 extra bond the atom needs from the aromatic system."""
    atom = mol.atoms[idx]
    sigma = 0
    for _, bond in mol.adjacency[idx]:
        sigma += 1 if bond.order is BondOrder.AROMATIC else int(bond.order)
    total = sigma + atom.h_count
    for v in allowed_valences(atom.element, atom.charge):
        if v >= total:
            need = v - total
            if need == 0:
                return 0
            if need == 1:
                return 1
            # larger gaps mean the written form undershoots every valence
            break
    raise KekulizationError(
        f"aromatic atom {idx} ({_element_name(atom.element)}) cannot reach an allowed valence"
    )


def kekulize(mol: Molecule) -> Molecule:
    """Resolve aromatic bonds into alternating single/double bonds.

    Returns a new molecule with ``aromatic`` flags cleared. Raises
    :class:`KekulizationError` when no perfect assignment exists.
    """
    arom_bonds = [b for b in mol.bonds if b.order is BondOrder.AROMATIC]
    if not arom_bonds:
        return mol
    needy = {i for i in range(len(mol.atoms)) if mol.atoms[i].aromatic
             and _needs_ring_double(mol, i)}
    # adjacency over aromatic bonds restricted to needy atoms
    nbrs: dict[int, list[int]] = {i: [] for i in needy}
    for b in arom_bonds:
        if b.a in needy and b.b in needy:
            nbrs[b.a].append(b.b)
            nbrs[b.b].append(b.a)
    for i in needy:
        nbrs[i].sort()

    match: dict[int, int] = {}

    def backtrack(remaining: list[int]) -> bool:
        if not remaining:
            return True
        u = remaining[0]
        rest = remaining[1:]
        for v in nbrs[u]:
            if v in match or v == u:
                continue
            match[u] = v
            match[v] = u
            if backtrack([x for x in rest if x != v]):
                return True
            del match[u], match[v]
        return False

    if not backtrack(sorted(needy)):
        raise KekulizationError("no alternating bond assignment for aromatic system")

    new_bonds = []
    for b in mol.bonds:
        if b.order is BondOrder.AROMATIC:
            double = match.get(b.a) == b.b
            new_bonds.append(replace(b, order=BondOrder.DOUBLE if double else BondOrder.SINGLE))
        else:
            new_bonds.append(b)
    new_atoms = tuple(replace(a, aromatic=False) for a in mol.atoms)
    return Molecule(new_atoms, tuple(new_bonds))


def _check_valences(kek: Molecule):
    for idx, atom in enumerate(kek.atoms):
        total = int(kek.sigma_valence(idx)) + atom.h_count
        if total not in allowed_valences(atom.element, atom.charge):
            raise ValenceError(
                f"{_element_name(atom.element)} valence {total} not allowed"
                + (f" (charge {atom.charge:+d})" if atom.charge else "")
            )


# ---------------------------------------------------------------------------
# serialization


def _writer_default_h(mol: Molecule, idx: int) -> int:
    """H count the parser would infer for a bare atom at this position."""
    atom = mol.atoms[idx]
    if atom.aromatic:
        return _implicit_h_aromatic(atom.element, atom.charge, len(mol.adjacency[idx]))
    return _implicit_h_plain(atom.element, atom.charge, mol.sigma_valence(idx))


def _atom_text(mol: Molecule, idx: int) -> str:
    atom = mol.atoms[idx]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    needs_bracket = (
        atom.element not in ORGANIC_SUBSET
        or atom.charge != 0
        or atom.isotope is not None
        or atom.chirality is not None
        or atom.h_count != _writer_default_h(mol, idx)
    )
    if not needs_bracket:
        return symbol
    parts = ["["]
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(symbol)
    if atom.chirality:
        parts.append(atom.chirality)
    if atom.h_count == 1:
        parts.append("H")
    elif atom.h_count > 1:
        parts.append(f"H{atom.h_count}")
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        parts.append(sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}")
    parts.append("]")
    return "".join(parts)


def _bond_text(mol: Molecule, bond: Bond, from_idx: int) -> str:
    """Bond symbol as written when traversing from ``from_idx``."""
    if bond.direction is not None and bond.order is BondOrder.SINGLE:
        return bond.direction if from_idx == bond.a else ("\\" if bond.direction == "/" else "/")
    both_aromatic = mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic
    if bond.order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if bond.order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    if bond.order is BondOrder.DOUBLE:
        return "="
    return "#"


def _write_component(mol: Molecule, comp: Sequence[int], root: int,
                     key: Sequence[float]) -> tuple[str, list[int]]:
    """Serialize one component; returns (text, atom indices in emission order)."""
    order_of: dict[int, int] = {}
    tree: dict[int, list[int]] = {i: [] for i in comp}
    ring_bonds: list[Bond] = []
    visited: set[int] = set()

    def explore(u: int, parent_bond: Bond | None):
        visited.add(u)
        order_of[u] = len(order_of)
        for v, bond in sorted(mol.adjacency[u], key=lambda nb: key[nb[0]]):
            if bond is parent_bond:
                continue
            if v in visited:
                if bond not in ring_bonds:
                    ring_bonds.append(bond)
            else:
                tree[u].append(v)
                explore(v, bond)

    explore(root, None)

    # ring digits: assign in write order of the opening atom, reuse freed digits
    opens: dict[int, list[Bond]] = {i: [] for i in comp}
    closes: dict[int, list[Bond]] = {i: [] for i in comp}
    for bond in ring_bonds:
        first, second = (bond.a, bond.b) if order_of[bond.a] < order_of[bond.b] else (bond.b, bond.a)
        opens[first].append(bond)
        closes[second].append(bond)
    for i in comp:
        opens[i].sort(key=lambda b: order_of[b.other(i)])
        closes[i].sort(key=lambda b: order_of[b.other(i)])

    digit_of: dict[Bond, int] = {}
    in_use: set[int] = set()
    for u in sorted(comp, key=lambda i: order_of.get(i, -1)):
        if u not in order_of:
            continue
        for bond in closes[u]:
            in_use.discard(digit_of[bond])
        for bond in opens[u]:
            num = next(d for d in range(1, 100) if d not in in_use)
            digit_of[bond] = num
            in_use.add(num)

    def ring_digit_text(num: int) -> str:
        return str(num) if num < 10 else f"%{num:02d}"

    def render(u: int, parent_bond: Bond | None) -> str:
        parts = []
        if parent_bond is not None:
            parts.append(_bond_text(mol, parent_bond, parent_bond.other(u)))
        parts.append(_atom_text(mol, u))
        for bond in opens[u]:
            parts.append(_bond_text(mol, bond, u))
            parts.append(ring_digit_text(digit_of[bond]))
        for bond in closes[u]:
            parts.append(ring_digit_text(digit_of[bond]))
        children = tree[u]
        for v in children[:-1]:
            parts.append("(" + render(v, mol.bond_between(u, v)) + ")")
        if children:
            v = children[-1]
            parts.append(render(v, mol.bond_between(u, v)))
        return "".join(parts)

    emit_order = sorted(order_of, key=order_of.get)
    return render(root, None), emit_order


# -- canonical ranking -------------------------------------------------------


def _initial_invariants(mol: Molecule) -> list[tuple]:
    inv = []
    for i, atom in enumerate(mol.atoms):
        inv.append((atom.element, atom.charge, len(mol.adjacency[i]),
                    atom.h_count, atom.aromatic, atom.isotope or 0))
    return inv


def _refine(mol: Molecule, ranks: list[int]) -> list[int]:
    n = len(mol.atoms)
    while True:
        keys = []
        for i in range(n):
            env = sorted((int(b.order), ranks[j]) for j, b in mol.adjacency[i])
            keys.append((ranks[i], tuple(env)))
        order = sorted(range(n), key=lambda i: keys[i])
        new_ranks = [0] * n
        r = 0
        for pos, i in enumerate(order):
            if pos and keys[order[pos - 1]] != keys[i]:
                r += 1
            new_ranks[i] = r
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def canonical_ranks(mol: Molecule) -> list[int]:
    """Stable neighborhood-refinement ranks (ties possible on symmetry)."""
    inv = _initial_invariants(mol)
    order = sorted(range(len(mol.atoms)), key=lambda i: inv[i])
    ranks = [0] * len(mol.atoms)
    r = 0
    for pos, i in enumerate(order):
        if pos and inv[order[pos - 1]] != inv[i]:
            r += 1
        ranks[i] = r
    return _refine(mol, ranks)


_MAX_TIEBREAK_LEAVES = 4096


def _canonical_component(mol: Molecule, comp: list[int],
                         ranks: list[int]) -> tuple[str, list[int]]:
    best: list[tuple[str, list[int]] | None] = [None]
    leaves = [0]

    def complete(cur: list[int]):
        classes: dict[int, list[int]] = {}
        for i in comp:
            classes.setdefault(cur[i], []).append(i)
        tied = [atoms for atoms in classes.values() if len(atoms) > 1]
        if not tied:
            leaves[0] += 1
            if leaves[0] > _MAX_TIEBREAK_LEAVES:
                raise RuntimeError("canonicalization tie-break budget exceeded")
            root = min(comp, key=lambda i: cur[i])
            text, emit_order = _write_component(mol, comp, root, cur)
            if best[0] is None or text < best[0][0]:
                best[0] = (text, emit_order)
            return
        target = min(tied, key=lambda atoms: cur[atoms[0]])
        for a in target:
            bumped = [(cur[i], 0 if i == a else 1) for i in range(len(cur))]
            order = sorted(range(len(cur)), key=lambda i: bumped[i])
            dense = [0] * len(cur)
            r = 0
            for pos, i in enumerate(order):
                if pos and bumped[order[pos - 1]] != bumped[i]:
                    r += 1
                dense[i] = r
            complete(_refine(mol, dense))

    complete(ranks)
    assert best[0] is not None
    return best[0]


def canonical_smiles_with_order(mol: Molecule) -> tuple[str, list[int]]:
    """Canonical SMILES plus atom indices in string emission order."""
    if mol.is_empty:
        return "", []
    ranks = canonical_ranks(mol)
    parts = [_canonical_component(mol, comp, ranks) for comp in mol.components()]
    parts.sort(key=lambda p: p[0])
    order: list[int] = []
    for _, emit_order in parts:
        order.extend(emit_order)
    return ".".join(text for text, _ in parts), order


def to_canonical_smiles(mol: Molecule) -> str:
    """Unique serialization per molecular graph.

    Isomorphic molecules (same atoms, bonds and carried annotations up to
    reindexing) map to the identical string; chirality and bond-direction
    markers are carried into the output but never drive the atom ranking.
    """
    return canonical_smiles_with_order(mol)[0]


def random_traversal_smiles(mol: Molecule, rng: random.Random) -> str:
    """Non-canonical serialization from a random start atom and visit order."""
    if mol.is_empty:
        return ""
    n = len(mol.atoms)
    perm = list(range(n))
    rng.shuffle(perm)
    key = [0.0] * n
    for pos, i in enumerate(perm):
        key[i] = float(pos)
    parts = []
    comps = mol.components()
    rng.shuffle(comps)
    for comp in comps:
        root = rng.choice(comp)
        parts.append(_write_component(mol, comp, root, key)[0])
    return ".".join(parts)


def molecules_equal(a: Molecule, b: Molecule) -> bool:
    """Graph isomorphism via canonical-form equality."""
    return to_canonical_smiles(a) == to_canonical_smiles(b)


# ---------------------------------------------------------------------------
# fingerprints

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_HASH_SEED = 0x9E3779B97F4A7C15  # pinned so fingerprints are bit-stable


def _fnv1a(data: bytes, seed: int = _HASH_SEED) -> int:
    h = _FNV_OFFSET ^ seed
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-length bit vector from hashed circular environments."""

    bits: int
    n_bits: int = 2048
    radius: int = 2

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    def on_bits(self) -> list[int]:
        return [i for i in range(self.n_bits) if self.bits >> i & 1]


def circular_fingerprint(mol: Molecule, radius: int = 2, n_bits: int = 2048) -> Fingerprint:
    """Morgan-style environment fingerprint, folded into ``n_bits`` bits.

    Invariant under atom reindexing: hashes see only attribute tuples and
    neighbor hashes, never indices.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if n_bits <= 0 or n_bits & (n_bits - 1):
        raise ValueError("n_bits must be a power of two")
    codes = []
    for i, atom in enumerate(mol.atoms):
        seed_tuple = (atom.element, atom.charge, atom.h_count, atom.aromatic,
                      atom.isotope or 0, len(mol.adjacency[i]))
        codes.append(_fnv1a(repr(seed_tuple).encode()))
    bits = 0
    current = list(codes)
    for code in current:
        bits |= 1 << (code % n_bits)
    for r in range(1, radius + 1):
        nxt = []
        for i in range(len(mol.atoms)):
            env = sorted((int(b.order), current[j]) for j, b in mol.adjacency[i])
            nxt.append(_fnv1a(repr((r, current[i], tuple(env))).encode()))
        for code in nxt:
            bits |= 1 << (code % n_bits)
        current = nxt
    return Fingerprint(bits=bits, n_bits=n_bits, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; 1.0 when both fingerprints are empty."""
    if a.n_bits != b.n_bits:
        raise LengthMismatchError(f"fingerprint sizes differ: {a.n_bits} vs {b.n_bits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union
