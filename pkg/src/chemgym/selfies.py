"""SELFIES encoding and decoding over the organic subset plus charges.

Follows the published v2 symbol syntax and derivation semantics: bracketed
symbols with bond prefixes ('', '=', '#'), [BranchL]/[RingL] with base-16
index symbols, a per-atom bonding-capacity state machine, and deferred ring
formation clamped to remaining capacity. Decoding is total over the alphabet:
any symbol sequence yields a valence-valid molecule.

Bonding capacities derive from the same valence table as the SMILES side
(``chem.allowed_valences``), so decoded molecules always pass ``chem``'s
validity checks. Aromatic molecules are kekulized before encoding; explicit
hydrogen counts, isotopes and stereo tags are outside the alphabet.
"""

from __future__ import annotations

import random
import re

from .chem import (
    Atom,
    Bond,
    BondOrder,
    Molecule,
    allowed_valences,
    kekulize,
)
from .errors import SymbolError, UnsupportedFeatureError

_ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
_CHARGES = (0, 1, -1)
_PREFIX_ORDER = {"": 1, "=": 2, "#": 3}
_ORDER_PREFIX = {1: "", 2: "=", 3: "#"}

# base-16 digit encoding used by branch/ring length symbols
_INDEX_SYMBOLS = [
    "[C]", "[Ring1]", "[Ring2]",
    "[Branch1]", "[=Branch1]", "[#Branch1]",
    "[Branch2]", "[=Branch2]", "[#Branch2]",
    "[O]", "[N]", "[=N]", "[=C]", "[#C]", "[S]", "[P]",
]
_INDEX_CODE = {s: i for i, s in enumerate(_INDEX_SYMBOLS)}


def bond_capacity(element: str, charge: int) -> int:
    return max(allowed_valences(element, charge))


def _fill_h(element: str, charge: int, sigma: int) -> int:
    for v in allowed_valences(element, charge):
        if v >= sigma:
            return v - sigma
    raise AssertionError("capacity bookkeeping violated")


def _charge_text(charge: int) -> str:
    if charge == 0:
        return ""
    return f"{'+' if charge > 0 else '-'}{abs(charge)}"


def selfies_alphabet() -> list[str]:
    """All symbols the decoder accepts (excluding the '.' separator)."""
    symbols = ["[nop]"]
    for element in _ELEMENTS:
        for charge in _CHARGES:
            try:
                cap = bond_capacity(element, charge)
            except Exception:
                continue
            for prefix, order in _PREFIX_ORDER.items():
                if order <= cap:
                    symbols.append(f"[{prefix}{element}{_charge_text(charge)}]")
    for prefix in _PREFIX_ORDER:
        for level in (1, 2, 3):
            symbols.append(f"[{prefix}Branch{level}]")
            symbols.append(f"[{prefix}Ring{level}]")
    return symbols


_ATOM_RE = re.compile(r"\[([=#]?)(Cl|Br|[BCNOPSFI])([+-]\d+)?\]")
_BRANCH_RE = re.compile(r"\[([=#]?)Branch([123])\]")
_RING_RE = re.compile(r"\[([=#]?)Ring([123])\]")


def split_selfies(s: str) -> list[str]:
    """Split a SELFIES string into bracketed symbols and '.' separators."""
    symbols = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == ".":
            symbols.append(".")
            i += 1
        elif ch == "[":
            j = s.find("]", i)
            if j < 0:
                raise SymbolError(f"unclosed symbol at position {i}")
            symbols.append(s[i : j + 1])
            i = j + 1
        else:
            raise SymbolError(f"unexpected character {ch!r} at position {i}")
    return symbols


def _index_value(symbols: list[str]) -> int:
    n = 0
    for sym in symbols:
        n = n * 16 + _INDEX_CODE.get(sym, 0)
    return n


def _index_symbols(n: int, width: int) -> list[str]:
    digits = []
    for _ in range(width):
        digits.append(_INDEX_SYMBOLS[n % 16])
        n //= 16
    if n:
        raise UnsupportedFeatureError("molecule too large for the index alphabet")
    return digits[::-1]


def _index_width(n: int) -> int:
    for width in (1, 2, 3):
        if n < 16 ** width:
            return width
    raise UnsupportedFeatureError("molecule too large for the index alphabet")


# ---------------------------------------------------------------------------
# decoding


class _Decoder:
    def __init__(self):
        self.specs: list[tuple[str, int]] = []  # (element, charge)
        self.capacity: list[int] = []  # remaining capacity, exact
        self.bonds: dict[tuple[int, int], int] = {}
        self.rings: list[tuple[int, int, int]] = []  # (right, back_count, order)

    def place_atom(self, element: str, charge: int) -> int:
        idx = len(self.specs)
        self.specs.append((element, charge))
        self.capacity.append(bond_capacity(element, charge))
        return idx

    def add_bond(self, a: int, b: int, order: int):
        key = (min(a, b), max(a, b))
        self.bonds[key] = self.bonds.get(key, 0) + order
        self.capacity[a] -= order
        self.capacity[b] -= order

    def derive(self, symbols: list[str], pos: int, limit: int,
               prev: int | None, state: int) -> int:
        """Derive symbols[pos:limit]; returns the next unread position."""
        while pos < limit:
            sym = symbols[pos]
            pos += 1
            if sym == "[nop]":
                continue
            m = _BRANCH_RE.fullmatch(sym)
            if m:
                if prev is None or state <= 1:
                    continue  # no room for a branch; length symbols untouched
                width = int(m.group(2))
                length_syms = symbols[pos : pos + width]
                pos += len(length_syms)
                count = _index_value(length_syms) + 1
                end = min(pos + count, limit)
                budget = min(_PREFIX_ORDER[m.group(1)], state - 1)
                self.derive(symbols, pos, end, prev, budget)
                pos = end
                state -= budget
                continue
            m = _RING_RE.fullmatch(sym)
            if m:
                width = int(m.group(2))
                length_syms = symbols[pos : pos + width]
                pos += len(length_syms)
                if prev is None:
                    continue
                back = _index_value(length_syms) + 1
                self.rings.append((prev, back, _PREFIX_ORDER[m.group(1)]))
                continue
            m = _ATOM_RE.fullmatch(sym)
            if m is None:
                raise SymbolError(f"unknown symbol {sym!r}")
            element = m.group(2)
            charge = int(m.group(3)) if m.group(3) else 0
            try:
                cap = bond_capacity(element, charge)
            except Exception as exc:
                raise SymbolError(f"symbol {sym!r} outside the alphabet") from exc
            if prev is None:
                prev = self.place_atom(element, charge)
                state = cap
                continue
            if state == 0:
                return limit  # attachment saturated; rest of fragment dropped
            order = min(_PREFIX_ORDER[m.group(1)], state, cap)
            idx = self.place_atom(element, charge)
            self.add_bond(prev, idx, order)
            prev = idx
            state = cap - order
        return pos

    def form_rings(self):
        for right, back, order in self.rings:
            left = max(0, right - back)
            if left == right:
                continue
            key = (left, right)
            existing = self.bonds.get(key, 0)
            room = min(self.capacity[left], self.capacity[right], 3 - existing)
            take = min(order, room)
            if take <= 0:
                continue
            self.bonds[key] = existing + take
            self.capacity[left] -= take
            self.capacity[right] -= take

    def molecule(self) -> Molecule:
        sigma = [0] * len(self.specs)
        bonds = []
        for (a, b), order in self.bonds.items():
            sigma[a] += order
            sigma[b] += order
            bonds.append(Bond(a, b, BondOrder(order)))
        atoms = tuple(
            Atom(element, charge=charge, h_count=_fill_h(element, charge, sigma[i]))
            for i, (element, charge) in enumerate(self.specs)
        )
        return Molecule(atoms, tuple(bonds))


def decode_selfies(s: str) -> Molecule:
    """Decode a SELFIES string; never fails on alphabet symbols.

    Raises :class:`SymbolError` only for tokens outside the alphabet. The
    empty string decodes to the empty molecule.
    """
    symbols = split_selfies(s) if s else []
    fragments: list[list[str]] = [[]]
    for sym in symbols:
        if sym == ".":
            fragments.append([])
        else:
            fragments[-1].append(sym)

    atoms: list[Atom] = []
    bonds: list[Bond] = []
    for fragment in fragments:
        if not fragment:
            continue
        dec = _Decoder()
        dec.derive(fragment, 0, len(fragment), None, 0)
        dec.form_rings()
        mol = dec.molecule()
        offset = len(atoms)
        atoms.extend(mol.atoms)
        bonds.extend(Bond(b.a + offset, b.b + offset, b.order) for b in mol.bonds)
    return Molecule(tuple(atoms), tuple(bonds))


# ---------------------------------------------------------------------------
# encoding


def _encodable_atom(atom: Atom, sigma: int):
    if atom.isotope is not None:
        raise UnsupportedFeatureError("isotopes are outside the SELFIES alphabet")
    if atom.chirality is not None:
        raise UnsupportedFeatureError("stereo tags are outside the SELFIES alphabet")
    if atom.charge not in _CHARGES:
        raise UnsupportedFeatureError(
            f"charge {atom.charge:+d} is outside the SELFIES alphabet")
    if atom.h_count != _fill_h(atom.element, atom.charge, sigma):
        raise UnsupportedFeatureError(
            "explicit hydrogen counts are outside the SELFIES alphabet")


def encode_selfies(mol: Molecule, rng: random.Random | None = None) -> str:
    """Encode a molecule as SELFIES.

    Aromatic systems are kekulized first. With ``rng`` the traversal (and
    hence the surface form) is randomized; the default walks atoms in index
    order, mirroring the reference layout for molecules parsed from SMILES.
    Raises :class:`UnsupportedFeatureError` for atoms outside the alphabet.
    """
    if mol.is_empty:
        return ""
    kek = kekulize(mol)
    for i, atom in enumerate(kek.atoms):
        _encodable_atom(atom, int(kek.sigma_valence(i)))

    n = len(kek.atoms)
    visit_key = list(range(n))
    if rng is not None:
        rng.shuffle(visit_key)

    def atom_symbol(idx: int, order: int) -> str:
        atom = kek.atoms[idx]
        return f"[{_ORDER_PREFIX[order]}{atom.element}{_charge_text(atom.charge)}]"

    def encode_component(root: int) -> list[str]:
        # pass 1: spanning tree + ring closures, each recorded at its later atom
        tree: dict[int, list[tuple[int, int]]] = {}
        rings_at: dict[int, list[tuple[int, int]]] = {}
        position: dict[int, int] = {}

        def explore(u: int, parent_bond: Bond | None):
            position[u] = len(position)
            tree[u] = []
            rings_at[u] = []
            for v, bond in sorted(kek.adjacency[u], key=lambda nb: visit_key[nb[0]]):
                if bond is parent_bond:
                    continue
                if v in position:
                    if position[v] < position[u]:
                        rings_at[u].append((position[u] - position[v], int(bond.order)))
                else:
                    explore(v, bond)
                    tree[u].append((v, int(bond.order)))

        explore(root, None)

        # pass 2: atoms in derivation order, rings after the closing atom,
        # every tree child but the last wrapped in a branch
        def render(u: int, parent_order: int) -> list[str]:
            symbols = [atom_symbol(u, parent_order)]
            for back, order in rings_at[u]:
                width = _index_width(back - 1)
                symbols.append(f"[{_ORDER_PREFIX[order]}Ring{width}]")
                symbols.extend(_index_symbols(back - 1, width))
            children = tree[u]
            for v, order in children[:-1]:
                branch = render(v, order)
                width = _index_width(len(branch) - 1)
                symbols.append(f"[{_ORDER_PREFIX[order]}Branch{width}]")
                symbols.extend(_index_symbols(len(branch) - 1, width))
                symbols.extend(branch)
            if children:
                v, order = children[-1]
                symbols.extend(render(v, order))
            return symbols

        return render(root, 1)

    components = kek.components()
    if rng is not None:
        rng.shuffle(components)
    fragments = []
    for comp in components:
        root = min(comp, key=lambda i: visit_key[i])
        fragments.append("".join(encode_component(root)))
    return ".".join(fragments)
