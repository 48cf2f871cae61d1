"""PDB backbone parsing: fixed-column ATOM records -> per-residue N/CA/C/O + sequence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStructureError, PdbParseError

log = logging.getLogger(__name__)

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C",
    "GLN": "Q", "GLU": "E", "GLY": "G", "HIS": "H", "ILE": "I",
    "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F", "PRO": "P",
    "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V",
}

BACKBONE_ATOMS = ("N", "CA", "C", "O")

DEFAULT_MAX_RESIDUES = 1024


@dataclass
class Residue:
    chain: str
    index: int
    aa: str
    coords: np.ndarray  # (4, 3) N, CA, C, O in Angstrom
    backbone_complete: bool = True


@dataclass
class BackboneStructure:
    residues: list[Residue] = field(default_factory=list)

    @property
    def sequence(self) -> str:
        return "".join(r.aa for r in self.residues)

    @property
    def n_residues(self) -> int:
        return len(self.residues)

    @property
    def chain_ids(self) -> list[str]:
        out: list[str] = []
        for r in self.residues:
            if not out or out[-1] != r.chain:
                out.append(r.chain)
        return out

    def coords_array(self) -> np.ndarray:
        """(n, 4, 3) backbone coordinates."""
        return np.stack([r.coords for r in self.residues]) if self.residues else np.zeros((0, 4, 3))

    def validity_flags(self) -> np.ndarray:
        return np.array([r.backbone_complete for r in self.residues], dtype=bool)


def _parse_float(field_text: str, what: str, line_no: int) -> float:
    try:
        return float(field_text)
    except ValueError:
        raise PdbParseError(f"bad {what} field {field_text!r}", line_no) from None


def _parse_int(field_text: str, what: str, line_no: int) -> int:
    try:
        return int(field_text)
    except ValueError:
        raise PdbParseError(f"bad {what} field {field_text!r}", line_no) from None


def parse_pdb(text: str, max_residues: int = DEFAULT_MAX_RESIDUES) -> BackboneStructure:
    """Parse fixed-column PDB text into a BackboneStructure.

    Only the first MODEL is read; HETATM records are skipped; alternate
    locations resolve to the first-listed altloc per atom. A residue needs at
    least a CA; missing N/C/O are imputed at the CA position and flagged.
    """
    # accumulate per residue key (chain, resseq, icode): atom name -> xyz
    order: list[tuple[str, int, str]] = []
    atoms: dict[tuple[str, int, str], dict[str, np.ndarray]] = {}
    names: dict[tuple[str, int, str], str] = {}
    in_first_model = True
    saw_atom = False

    for line_no, line in enumerate(text.splitlines(), start=1):
        rec = line[:6]
        if rec.startswith("MODEL"):
            if saw_atom:
                break  # later models ignored
            in_first_model = True
            continue
        if rec.startswith("ENDMDL"):
            in_first_model = False
            continue
        if not in_first_model or not rec.startswith("ATOM"):
            continue
        saw_atom = True
        if len(line) < 54:
            raise PdbParseError("ATOM record shorter than coordinate columns", line_no)
        atom_name = line[12:16].strip()
        altloc = line[16]
        res_name = line[17:20].strip()
        chain = line[21]
        res_seq = _parse_int(line[22:26].strip(), "residue number", line_no)
        icode = line[26]
        if atom_name not in BACKBONE_ATOMS:
            continue
        key = (chain, res_seq, icode)
        if key not in atoms:
            order.append(key)
            atoms[key] = {}
            names[key] = res_name
        if atom_name in atoms[key]:
            continue  # first-listed altloc (or duplicate) wins
        del altloc
        xyz = np.array(
            [
                _parse_float(line[30:38].strip(), "x", line_no),
                _parse_float(line[38:46].strip(), "y", line_no),
                _parse_float(line[46:54].strip(), "z", line_no),
            ],
            dtype=np.float64,
        )
        if not np.all(np.isfinite(xyz)):
            raise PdbParseError("non-finite coordinate", line_no)
        atoms[key][atom_name] = xyz

    if not saw_atom:
        raise EmptyStructureError("no ATOM records found")

    # chains in order of first appearance; enforce strictly increasing indices
    chain_order: list[str] = []
    for chain, _, _ in order:
        if chain not in chain_order:
            chain_order.append(chain)

    residues: list[Residue] = []
    for chain in chain_order:
        last_index: int | None = None
        for key in order:
            if key[0] != chain:
                continue
            got = atoms[key]
            if "CA" not in got:
                continue
            if last_index is not None and key[1] <= last_index:
                log.warning("skipping out-of-order residue %s%d", chain, key[1])
                continue
            last_index = key[1]
            ca = got["CA"]
            complete = all(a in got for a in BACKBONE_ATOMS)
            coords = np.stack([got.get(a, ca) for a in BACKBONE_ATOMS])
            residues.append(
                Residue(
                    chain=chain,
                    index=key[1],
                    aa=THREE_TO_ONE.get(names[key], "X"),
                    coords=coords,
                    backbone_complete=complete,
                )
            )

    if not residues:
        raise EmptyStructureError("no residue has a CA atom")
    if len(residues) > max_residues:
        log.warning("truncating structure from %d to %d residues", len(residues), max_residues)
        residues = residues[:max_residues]
    return BackboneStructure(residues=residues)


def to_fasta(structure: BackboneStructure) -> str:
    """Single-record FASTA of the structure's sequence."""
    if not structure.residues:
        raise EmptyStructureError("cannot serialize an empty structure")
    header = "chain_" + "".join(structure.chain_ids)
    return f">{header}\n{structure.sequence}\n"


def format_pdb(structure: BackboneStructure) -> str:
    """Serialize backbone atoms back to fixed-column ATOM records."""
    one_to_three = {v: k for k, v in THREE_TO_ONE.items()}
    lines = []
    serial = 1
    for r in structure.residues:
        res3 = one_to_three.get(r.aa, "UNK")
        for atom, xyz in zip(BACKBONE_ATOMS, r.coords):
            lines.append(
                f"ATOM  {serial:>5}  {atom:<3} {res3:>3} {r.chain}{r.index:>4}    "
                f"{xyz[0]:8.3f}{xyz[1]:8.3f}{xyz[2]:8.3f}{1.0:6.2f}{0.0:6.2f}"
                f"          {atom[0]:>2}"
            )
            serial += 1
    lines.append("END")
    return "\n".join(lines) + "\n"
