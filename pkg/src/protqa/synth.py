"""Deterministic synthetic corpus: idealized backbones plus geometry-grounded QA.

Proteins are chains of helical and extended segments packed by randomized
rotations. Question templates: residue-residue contact (CA-CA < 8 A),
residue count, segment type at a residue, and amino acid identity at a
position. Answers are computed from the generated geometry/sequence, so an
independent checker can re-derive every one of them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .corpus import DatasetSplit, QASample
from .errors import ConfigError
from .pdbio import BackboneStructure, Residue, format_pdb

HELIX_RISE = 1.5
HELIX_TURN_DEG = 100.0
HELIX_RADIUS = 2.3
STRAND_RISE = 3.5
CONTACT_CUTOFF = 8.0
MIN_CONTACT_SEPARATION = 10

AA20 = "ACDEFGHIKLMNPQRSTVWY"

AA_NAMES = {
    "A": "alanine", "C": "cysteine", "D": "aspartate", "E": "glutamate",
    "F": "phenylalanine", "G": "glycine", "H": "histidine", "I": "isoleucine",
    "K": "lysine", "L": "leucine", "M": "methionine", "N": "asparagine",
    "P": "proline", "Q": "glutamine", "R": "arginine", "S": "serine",
    "T": "threonine", "V": "valine", "W": "tryptophan", "Y": "tyrosine",
}

TASKS = ("contact", "count", "segment", "identity")

CONTACT_YES = "Yes, they are in contact."
CONTACT_NO = "No, they are not in contact."


@dataclass
class SynthProtein:
    structure: BackboneStructure
    segment_types: list[str]  # per-residue "helix" | "strand"
    segments: list[tuple[int, int, str]]  # (start, end) inclusive 0-based


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _frame(direction: np.ndarray, rng: np.random.Generator):
    t = _unit(direction)
    probe = rng.normal(size=3)
    u = probe - np.dot(probe, t) * t
    if np.linalg.norm(u) < 1e-8:
        probe = np.array([1.0, 0.0, 0.0])
        u = probe - np.dot(probe, t) * t
    u = _unit(u)
    return t, u, np.cross(t, u)


def generate_protein(rng: np.random.Generator, n_residues: int) -> SynthProtein:
    """Segmented helix/strand backbone folded back on itself."""
    ca = np.zeros((n_residues, 3))
    seg_types: list[str] = []
    segments: list[tuple[int, int, str]] = []
    pos = np.zeros(3)
    i = 0
    while i < n_residues:
        length = min(int(rng.integers(6, 13)), n_residues - i)
        kind = "helix" if rng.random() < 0.5 else "strand"
        direction = rng.normal(size=3)
        if np.linalg.norm(pos) > 6.0:  # fold back toward the origin for contacts
            direction = direction - 1.4 * _unit(pos) * np.linalg.norm(direction)
        t, u, v = _frame(direction, rng)
        phase = rng.uniform(0, 2 * np.pi)
        for j in range(length):
            if kind == "helix":
                angle = phase + np.deg2rad(HELIX_TURN_DEG) * j
                ca[i + j] = pos + t * (HELIX_RISE * j) + HELIX_RADIUS * (
                    np.cos(angle) * u + np.sin(angle) * v
                )
            else:
                ca[i + j] = pos + t * (STRAND_RISE * j)
        segments.append((i, i + length - 1, kind))
        seg_types.extend([kind] * length)
        pos = ca[i + length - 1] + t * (HELIX_RISE if kind == "helix" else STRAND_RISE)
        i += length

    sequence = "".join(AA20[k] for k in rng.integers(0, len(AA20), size=n_residues))
    residues = []
    for idx in range(n_residues):
        prev_ca = ca[max(idx - 1, 0)]
        next_ca = ca[min(idx + 1, n_residues - 1)]
        tangent = next_ca - prev_ca
        if np.linalg.norm(tangent) < 1e-8:
            tangent = np.array([1.0, 0.0, 0.0])
        t = _unit(tangent)
        ref = np.array([0.0, 0.0, 1.0])
        u = ref - np.dot(ref, t) * t
        if np.linalg.norm(u) < 1e-8:
            ref = np.array([0.0, 1.0, 0.0])
            u = ref - np.dot(ref, t) * t
        u = _unit(u)
        coords = np.vstack([
            ca[idx] - 1.2 * t + 0.5 * u,  # N
            ca[idx],                       # CA
            ca[idx] + 1.2 * t + 0.5 * u,  # C
            ca[idx] + 1.2 * t + 1.6 * u,  # O
        ])
        residues.append(Residue(chain="A", index=idx + 1, aa=sequence[idx], coords=coords))
    return SynthProtein(
        structure=BackboneStructure(residues=residues),
        segment_types=seg_types,
        segments=segments,
    )


def _ca_distance(structure: BackboneStructure, i: int, j: int) -> float:
    a = structure.residues[i].coords[1]
    b = structure.residues[j].coords[1]
    return float(np.linalg.norm(a - b))


def _contact_pairs(structure: BackboneStructure, min_sep: int):
    n = structure.n_residues
    ca = structure.coords_array()[:, 1]
    diff = ca[:, None] - ca[None, :]
    dist = np.sqrt((diff**2).sum(-1))
    contacts, non_contacts = [], []
    for i in range(n):
        for j in range(i + min_sep, n):
            (contacts if dist[i, j] < CONTACT_CUTOFF else non_contacts).append((i, j))
    return contacts, non_contacts


def split_of_id(sample_id: str) -> str:
    """Deterministic 80/10/10 split by id hash."""
    h = int.from_bytes(hashlib.sha1(sample_id.encode()).digest()[:4], "big") % 10
    return "train" if h < 8 else ("valid" if h == 8 else "test")


def _make_contact_question(protein: SynthProtein, rng, want_yes: bool):
    contacts, non_contacts = _contact_pairs(protein.structure, MIN_CONTACT_SEPARATION)
    if not contacts or not non_contacts:
        contacts, non_contacts = _contact_pairs(protein.structure, 4)
    pool = contacts if want_yes else non_contacts
    if not pool:
        pool = non_contacts or contacts
    if want_yes or not contacts:
        i, j = pool[int(rng.integers(len(pool)))]
    else:
        # match the separation profile of the contact class so sequence
        # distance alone cannot predict the answer
        ci, cj = contacts[int(rng.integers(len(contacts)))]
        sep = cj - ci
        ranked = sorted(pool, key=lambda p: abs((p[1] - p[0]) - sep))
        top = ranked[: max(1, len(ranked) // 10)]
        i, j = top[int(rng.integers(len(top)))]
    yes = _ca_distance(protein.structure, i, j) < CONTACT_CUTOFF
    question = f"Does residue {i + 1} contact residue {j + 1}?"
    answer = CONTACT_YES if yes else CONTACT_NO
    return question, answer, {"i": i + 1, "j": j + 1}, yes


def _make_count_question(protein: SynthProtein):
    n = protein.structure.n_residues
    return "How many residues does this protein have?", f"This protein has {n} residues.", {}


def _make_segment_question(protein: SynthProtein, rng, slot: int = 0):
    interior = [
        k
        for start, end, _ in protein.segments
        for k in range(start + 2, end - 1)
    ]
    if not interior:
        interior = list(range(protein.structure.n_residues))
    order = rng.permutation(len(interior))
    i = interior[int(order[slot % len(interior)])]
    kind = protein.segment_types[i]
    label = "helical" if kind == "helix" else "extended"
    question = f"Is the segment containing residue {i + 1} helical or extended?"
    return question, f"The segment containing residue {i + 1} is {label}.", {"i": i + 1}


def _make_identity_question(protein: SynthProtein, rng, slot: int = 0):
    n = protein.structure.n_residues
    i = int(rng.permutation(n)[slot % n])
    aa = protein.structure.residues[i].aa
    question = f"What is the amino acid at position {i + 1}?"
    return question, f"Position {i + 1} is {AA_NAMES[aa]} ({aa}).", {"i": i + 1}


def synth_corpus(
    seed: int,
    n_samples: int,
    residues_range: tuple[int, int] = (24, 48),
    tasks: tuple[str, ...] = TASKS,
    per_protein: dict[str, int] | None = None,
) -> DatasetSplit:
    """Deterministic dataset; same seed -> byte-identical serialized output.

    By default each protein serves one question per task. `per_protein` asks
    several distinct questions of a task about the same protein (e.g.
    {"identity": 5, "contact": 5, "segment": 5, "count": 1}), which blocks
    protein-level answer memorization during training. Contact yes/no stays
    balanced per split by construction.
    """
    lo, hi = residues_range
    if n_samples < 0 or lo < 8 or hi < lo:
        raise ConfigError("invalid sample count or residues range")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError(f"unknown task {t!r}")
    plan: list[tuple[str, int]] = []
    for t in tasks:
        for j in range((per_protein or {}).get(t, 1)):
            plan.append((t, j))
    if not plan:
        raise ConfigError("question plan is empty")

    split = DatasetSplit()
    contact_balance = {"train": 0, "valid": 0, "test": 0}  # yes minus no
    protein = None
    pdb_text = ""
    for idx in range(n_samples):
        group, slot = divmod(idx, len(plan))
        if slot == 0 or protein is None:
            prot_rng = np.random.default_rng([seed, group])
            protein = generate_protein(prot_rng, int(prot_rng.integers(lo, hi + 1)))
            pdb_text = format_pdb(protein.structure)
        task, occurrence = plan[slot]
        sample_id = f"synth-{seed}-{idx:06d}"
        name = split_of_id(sample_id)
        meta = {"task": task, "protein": f"g{group}"}
        if task == "contact":
            q_rng = np.random.default_rng([seed, group, 200, occurrence])
            want_yes = contact_balance[name] <= 0
            question, answer, extra, yes = _make_contact_question(protein, q_rng, want_yes)
            contact_balance[name] += 1 if yes else -1
            meta.update(extra)
        elif task == "count":
            question, answer, extra = _make_count_question(protein)
        elif task == "segment":
            q_rng = np.random.default_rng([seed, group, 300])
            question, answer, extra = _make_segment_question(protein, q_rng, slot=occurrence)
            meta.update(extra)
        else:
            q_rng = np.random.default_rng([seed, group, 400])
            question, answer, extra = _make_identity_question(protein, q_rng, slot=occurrence)
            meta.update(extra)
        getattr(split, name).append(
            QASample(id=sample_id, pdb=pdb_text, question=question, answer=answer, meta=meta)
        )
    return split
