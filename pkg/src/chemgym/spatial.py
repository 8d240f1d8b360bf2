"""Text encoding of 3D small molecules and proteins.

Small molecules: a tagged SMILES span followed by one fixed-precision
coordinate triple per heavy atom, in SMILES atom order. Proteins: residues in
order, each introduced by its amino-acid token and followed by atom-name /
coordinate lines. Coordinates are Angstrom with three decimals by default;
hydrogens never appear on either side (reconstruction is delegated to
standard toolkits downstream).
"""

from __future__ import annotations

from dataclasses import dataclass

from .chem import (
    Atom,
    Bond,
    BondOrder,
    Molecule,
    allowed_valences,
    canonical_smiles_with_order,
    parse_smiles,
)
from .errors import (
    CountMismatchError,
    PrecisionOverflowError,
    SpatialFormatError,
)
from .tokenizer import AMINO_ACIDS, PROTEIN_ATOM_NAMES, close_tag, open_tag

_MAX_ABS_COORD = 10000.0  # fixed-width field: up to 4 integer digits


@dataclass(frozen=True)
class Conformer:
    """Heavy-atom 3D coordinates attached to a molecule.

    ``coords[i]`` belongs to ``molecule.atoms[i]``.
    """

    molecule: Molecule
    coords: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.coords) != len(self.molecule.atoms):
            raise CountMismatchError(
                f"{len(self.coords)} coordinate triples for "
                f"{len(self.molecule.atoms)} atoms")


@dataclass(frozen=True)
class Residue:
    residue_type: str  # one-letter amino acid code
    atoms: tuple[tuple[str, float, float, float], ...]

    def __post_init__(self):
        if self.residue_type not in AMINO_ACIDS:
            raise SpatialFormatError(f"unknown residue type {self.residue_type!r}")
        for name, *_ in self.atoms:
            if name.startswith("H") or name == "H":
                raise SpatialFormatError("hydrogen atoms are not encoded")
            if name not in PROTEIN_ATOM_NAMES:
                raise SpatialFormatError(f"unknown atom name {name!r}")


@dataclass(frozen=True)
class ProteinStructure:
    residues: tuple[Residue, ...]


def _coord_text(value: float, precision: int) -> str:
    if not abs(value) < _MAX_ABS_COORD:
        raise PrecisionOverflowError(
            f"coordinate {value} exceeds the +/-{_MAX_ABS_COORD} field")
    return f"{value:.{precision}f}"


def encode_conformer(conformer: Conformer, precision: int = 3) -> str:
    """Tagged SMILES plus one 'x y z' line per atom in SMILES atom order."""
    smiles, order = canonical_smiles_with_order(conformer.molecule)
    lines = [f"{open_tag('smiles')}{smiles}{close_tag('smiles')}"]
    for atom_idx in order:
        x, y, z = conformer.coords[atom_idx]
        lines.append(" ".join(_coord_text(v, precision) for v in (x, y, z)))
    return "\n".join(lines)


def decode_conformer(text: str) -> Conformer:
    """Inverse of :func:`encode_conformer` (coordinates at written precision)."""
    lines = [ln for ln in text.strip().splitlines()]
    if not lines:
        raise SpatialFormatError("empty conformer block")
    head = lines[0].strip()
    o_tag, c_tag = open_tag("smiles"), close_tag("smiles")
    if not (head.startswith(o_tag) and head.endswith(c_tag)):
        raise SpatialFormatError("conformer block must start with a tagged SMILES line")
    smiles = head[len(o_tag) : -len(c_tag)]
    molecule = parse_smiles(smiles)
    coord_lines = [ln.strip() for ln in lines[1:] if ln.strip()]
    if len(coord_lines) != len(molecule.atoms):
        raise CountMismatchError(
            f"{len(coord_lines)} coordinate lines for {len(molecule.atoms)} atoms")
    coords = []
    for ln in coord_lines:
        parts = ln.split()
        if len(parts) != 3:
            raise SpatialFormatError(f"expected 'x y z', got {ln!r}")
        try:
            coords.append(tuple(float(p) for p in parts))
        except ValueError:
            raise SpatialFormatError(f"non-numeric coordinate in {ln!r}")
    # parse order equals string order, so coords line up with atom indices
    return Conformer(molecule, tuple(coords))


def encode_protein(protein: ProteinStructure, precision: int = 3) -> str:
    """Residue-by-residue layout with amino-acid and atom-name tokens."""
    lines = [open_tag("protein")]
    for residue in protein.residues:
        lines.append(f"am_{residue.residue_type}")
        for name, x, y, z in residue.atoms:
            coord = " ".join(_coord_text(v, precision) for v in (x, y, z))
            lines.append(f"atom_name_{name} {coord}")
    lines.append(close_tag("protein"))
    return "\n".join(lines)


def decode_protein(text: str) -> ProteinStructure:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != open_tag("protein") or lines[-1] != close_tag("protein"):
        raise SpatialFormatError("protein block must be wrapped in <protein> tags")
    residues: list[Residue] = []
    current_type: str | None = None
    current_atoms: list[tuple[str, float, float, float]] = []

    def flush():
        nonlocal current_type, current_atoms
        if current_type is not None:
            residues.append(Residue(current_type, tuple(current_atoms)))
        current_type = None
        current_atoms = []

    for ln in lines[1:-1]:
        if ln.startswith("am_"):
            flush()
            current_type = ln[3:]
            if current_type not in AMINO_ACIDS:
                raise SpatialFormatError(f"unknown residue token {ln!r}")
        elif ln.startswith("atom_name_"):
            if current_type is None:
                raise SpatialFormatError("atom line before any residue token")
            parts = ln.split()
            if len(parts) != 4:
                raise SpatialFormatError(f"expected 'atom_name_X x y z', got {ln!r}")
            name = parts[0][len("atom_name_"):]
            try:
                x, y, z = (float(p) for p in parts[1:])
            except ValueError:
                raise SpatialFormatError(f"non-numeric coordinate in {ln!r}")
            current_atoms.append((name, x, y, z))
        else:
            raise SpatialFormatError(f"unexpected line {ln!r} in protein block")
    flush()
    return ProteinStructure(tuple(residues))


# ---------------------------------------------------------------------------
# fixture ingestion (minimal subsets, for building test conformers/proteins)

_SDF_BOND_ORDERS = {1: BondOrder.SINGLE, 2: BondOrder.DOUBLE, 3: BondOrder.TRIPLE}

_THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C",
    "GLN": "Q", "GLU": "E", "GLY": "G", "HIS": "H", "ILE": "I",
    "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F", "PRO": "P",
    "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
}


def conformer_from_sdf_block(text: str) -> Conformer:
    """Read a minimal molfile-style block: counts line, atoms, bonds.

    Fixture ingestion only: V2000 layout, no charge/stereo blocks, hydrogens
    dropped. Implicit hydrogens are refit from the valence table.
    """
    lines = text.splitlines()
    if len(lines) < 4:
        raise SpatialFormatError("molfile block too short")
    counts = lines[3].split()
    try:
        n_atoms, n_bonds = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise SpatialFormatError(f"bad counts line {lines[3]!r}")
    if len(lines) < 4 + n_atoms + n_bonds:
        raise SpatialFormatError("molfile block truncated")
    coords: list[tuple[float, float, float]] = []
    elements: list[str] = []
    keep: dict[int, int] = {}  # 1-based molfile index -> heavy-atom index
    for i in range(n_atoms):
        parts = lines[4 + i].split()
        if len(parts) < 4:
            raise SpatialFormatError(f"bad atom line {lines[4 + i]!r}")
        element = parts[3]
        if element == "H":
            continue
        keep[i + 1] = len(elements)
        elements.append(element)
        coords.append((float(parts[0]), float(parts[1]), float(parts[2])))
    bonds = []
    sigma = [0] * len(elements)
    for i in range(n_bonds):
        parts = lines[4 + n_atoms + i].split()
        if len(parts) < 3:
            raise SpatialFormatError(f"bad bond line {lines[4 + n_atoms + i]!r}")
        a, b, order = int(parts[0]), int(parts[1]), int(parts[2])
        if order not in _SDF_BOND_ORDERS:
            raise SpatialFormatError(f"unsupported bond order {order}")
        if a in keep and b in keep:
            bonds.append(Bond(keep[a], keep[b], _SDF_BOND_ORDERS[order]))
            sigma[keep[a]] += order
            sigma[keep[b]] += order
    atoms = []
    for element, total in zip(elements, sigma):
        fills = [v for v in allowed_valences(element, 0) if v >= total]
        if not fills:
            raise SpatialFormatError(f"{element} valence {total} outside the table")
        atoms.append(Atom(element, h_count=fills[0] - total))
    return Conformer(Molecule(tuple(atoms), tuple(bonds)), tuple(coords))


def protein_from_pdb_lines(text: str) -> ProteinStructure:
    """Read ATOM records from a PDB-like fixture; hydrogens dropped.

    Uses columns (record, serial, name, resName, chain, resSeq, x, y, z) in
    whitespace-separated form, which covers hand-written fixtures.
    """
    residues: list[Residue] = []
    current_key: tuple[str, str] | None = None
    current_type = ""
    current_atoms: list[tuple[str, float, float, float]] = []

    def flush():
        nonlocal current_atoms
        if current_key is not None:
            residues.append(Residue(current_type, tuple(current_atoms)))
        current_atoms = []

    for ln in text.splitlines():
        if not ln.startswith("ATOM"):
            continue
        parts = ln.split()
        if len(parts) < 9:
            raise SpatialFormatError(f"bad ATOM record {ln!r}")
        name, res_name, chain, res_seq = parts[2], parts[3], parts[4], parts[5]
        if name.startswith("H"):
            continue
        if res_name not in _THREE_TO_ONE:
            raise SpatialFormatError(f"unknown residue {res_name!r}")
        key = (chain, res_seq)
        if key != current_key:
            flush()
            current_key = key
            current_type = _THREE_TO_ONE[res_name]
        try:
            x, y, z = float(parts[6]), float(parts[7]), float(parts[8])
        except ValueError:
            raise SpatialFormatError(f"non-numeric coordinates in {ln!r}")
        current_atoms.append((name, x, y, z))
    flush()
    return ProteinStructure(tuple(residues))
