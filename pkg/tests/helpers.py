"""Shared test utilities: random molecule generation and permutation tools.

The generator builds molecules directly as graphs (never via the SMILES
parser), so parser/writer round-trip tests have an independent construction
path. Default profile stays inside the SELFIES-encodable subset (no isotopes,
no stereo tags, hydrogens at the lowest allowed valence).
"""

from __future__ import annotations

import random

from chemgym.chem import (
    Atom,
    Bond,
    BondOrder,
    Molecule,
    allowed_valences,
)

# (element, charge) pool with sampling weights; capacity = max allowed valence
_ATOM_POOL = [
    (("C", 0), 20),
    (("N", 0), 6),
    (("O", 0), 6),
    (("S", 0), 2),
    (("P", 0), 1),
    (("F", 0), 2),
    (("Cl", 0), 2),
    (("Br", 0), 1),
    (("I", 0), 1),
    (("B", 0), 1),
    (("N", 1), 1),
    (("O", -1), 1),
    (("N", -1), 1),
    (("S", -1), 1),
]

# aromatic ring templates: (elements, h-bearing override) as SMILES fragments
_AROMATIC_TEMPLATES = ["c1ccccc1", "c1ccncc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1"]


def _fill_hydrogens(element: str, charge: int, sigma: int) -> int:
    for v in allowed_valences(element, charge):
        if v >= sigma:
            return v - sigma
    raise AssertionError("generator exceeded valence capacity")


def random_molecule(rng: random.Random, max_atoms: int = 14,
                    allow_isotopes: bool = False,
                    allow_chirality: bool = False) -> Molecule:
    """A random valence-valid molecule (single component, non-aromatic core)."""
    n = rng.randint(1, max_atoms)
    pool, weights = zip(*_ATOM_POOL)
    specs = [rng.choices(pool, weights=weights)[0]]
    capacity = [max(allowed_valences(*specs[0]))]
    bonds: list[Bond] = []
    used = [0]
    for i in range(1, n):
        anchors = [j for j in range(len(specs)) if capacity[j] - used[j] >= 1]
        if not anchors:
            break
        j = rng.choice(anchors)
        element, charge = rng.choices(pool, weights=weights)[0]
        cap = max(allowed_valences(element, charge))
        room = min(capacity[j] - used[j], cap)
        order = rng.choice([1, 1, 1, 1, 2, 2, 3])
        order = min(order, room)
        specs.append((element, charge))
        capacity.append(cap)
        used.append(order)
        used[j] += order
        bonds.append(Bond(j, len(specs) - 1, BondOrder(order)))

    # occasional ring closure between non-adjacent atoms with spare capacity
    if len(specs) >= 4 and rng.random() < 0.6:
        adjacent = {(b.a, b.b) for b in bonds} | {(b.b, b.a) for b in bonds}
        candidates = [
            (i, j)
            for i in range(len(specs))
            for j in range(i + 1, len(specs))
            if (i, j) not in adjacent
            and capacity[i] - used[i] >= 1
            and capacity[j] - used[j] >= 1
        ]
        if candidates:
            i, j = rng.choice(candidates)
            bonds.append(Bond(i, j, BondOrder.SINGLE))
            used[i] += 1
            used[j] += 1

    atoms = []
    for idx, (element, charge) in enumerate(specs):
        isotope = None
        chirality = None
        if allow_isotopes and rng.random() < 0.05:
            isotope = rng.choice([2, 13, 15, 18])
        if allow_chirality and rng.random() < 0.05:
            chirality = rng.choice(["@", "@@"])
        atoms.append(
            Atom(element, charge=charge,
                 h_count=_fill_hydrogens(element, charge, used[idx]),
                 isotope=isotope, chirality=chirality)
        )
    return Molecule(tuple(atoms), tuple(bonds))


def permute_molecule(mol: Molecule, rng: random.Random) -> Molecule:
    """Reindex atoms by a random permutation (same graph, new labels)."""
    n = len(mol.atoms)
    perm = list(range(n))
    rng.shuffle(perm)  # perm[old] = new
    atoms: list[Atom | None] = [None] * n
    for old, new in enumerate(perm):
        atoms[new] = mol.atoms[old]
    bonds = tuple(
        Bond(perm[b.a], perm[b.b], b.order, b.direction) for b in mol.bonds
    )
    return Molecule(tuple(atoms), bonds)


def corpus_smiles(rng: random.Random, size: int) -> list[str]:
    """Deterministic mixed corpus of SMILES strings for round-trip suites."""
    from chemgym.chem import random_traversal_smiles, to_canonical_smiles

    out = []
    for _ in range(size):
        roll = rng.random()
        if roll < 0.18:
            template = rng.choice(_AROMATIC_TEMPLATES)
            if rng.random() < 0.5:
                template = _decorate_aromatic(template, rng)
            out.append(template)
        elif roll < 0.24:
            a = to_canonical_smiles(random_molecule(rng, max_atoms=8))
            b = to_canonical_smiles(random_molecule(rng, max_atoms=8))
            out.append(f"{a}.{b}")
        else:
            mol = random_molecule(rng)
            out.append(random_traversal_smiles(mol, rng)
                       if rng.random() < 0.5 else to_canonical_smiles(mol))
    return out


def _decorate_aromatic(template: str, rng: random.Random) -> str:
    sub = rng.choice(["C", "O", "N", "CC", "C(C)C", "F", "Cl", "C(=O)O"])
    # substitute at the first ring atom (right after the ring-open digit)
    i = template.index("1") + 1
    return template[:i] + "(" + sub + ")" + template[i:]
