"""QA sample schema, JSON-Lines dataset loading and the split manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .pdbio import BackboneStructure, parse_pdb

SPLIT_NAMES = ("train", "valid", "test")

REQUIRED_FIELDS = ("id", "pdb", "question", "answer")


@dataclass
class QASample:
    id: str
    pdb: str  # inline PDB text, or a path relative to the manifest
    question: str
    answer: str
    meta: dict = field(default_factory=dict)

    def pdb_text(self, base_dir: str | Path | None = None) -> str:
        if "\n" in self.pdb or self.pdb.lstrip().startswith(("ATOM", "HEADER", "MODEL")):
            return self.pdb
        path = Path(base_dir) / self.pdb if base_dir else Path(self.pdb)
        return path.read_text()

    def structure(self, base_dir: str | Path | None = None) -> BackboneStructure:
        return parse_pdb(self.pdb_text(base_dir))


@dataclass
class DatasetSplit:
    train: list[QASample] = field(default_factory=list)
    valid: list[QASample] = field(default_factory=list)
    test: list[QASample] = field(default_factory=list)
    base_dir: Path | None = None

    @property
    def counts(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in SPLIT_NAMES}

    def all_samples(self) -> list[QASample]:
        return self.train + self.valid + self.test


def _parse_sample(line: str, where: str, line_no: int) -> QASample:
    try:
        row = json.loads(line)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{where} line {line_no}: invalid JSON ({e.msg})") from None
    if not isinstance(row, dict):
        raise SchemaError(f"{where} line {line_no}: expected an object")
    for fld in REQUIRED_FIELDS:
        if fld not in row:
            raise SchemaError(f"{where} line {line_no}: missing field {fld!r}")
    if not row["question"] or not row["answer"]:
        raise SchemaError(f"{where} line {line_no}: question and answer must be non-empty")
    return QASample(
        id=str(row["id"]),
        pdb=str(row["pdb"]),
        question=str(row["question"]),
        answer=str(row["answer"]),
        meta=dict(row.get("meta", {})),
    )


def load_samples(path: str | Path) -> list[QASample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                out.append(_parse_sample(line, Path(path).name, line_no))
    return out


def load_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for name in SPLIT_NAMES:
        if name not in manifest:
            raise SchemaError(f"manifest missing split {name!r}")
    return manifest


def load_dataset(manifest_path: str | Path, validate_pdb: bool = False) -> DatasetSplit:
    """Load the three splits named by a manifest; verify declared counts.

    With validate_pdb, every referenced PDB must parse (slow on large sets).
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    split = DatasetSplit(base_dir=base)
    for name in SPLIT_NAMES:
        samples = load_samples(base / manifest[name])
        ids = {s.id for s in samples}
        if len(ids) != len(samples):
            raise SchemaError(f"duplicate sample ids in split {name!r}")
        setattr(split, name, samples)
    declared = manifest.get("counts")
    if declared:
        for name in SPLIT_NAMES:
            if name in declared and declared[name] != split.counts[name]:
                raise SchemaError(
                    f"manifest declares {declared[name]} {name} samples, found {split.counts[name]}"
                )
    seen: set[str] = set()
    for name in SPLIT_NAMES:
        for s in getattr(split, name):
            if s.id in seen:
                raise SchemaError(f"sample id {s.id!r} appears in more than one split")
            seen.add(s.id)
    if validate_pdb:
        for s in split.all_samples():
            try:
                s.structure(base)
            except Exception as e:
                raise SchemaError(f"sample {s.id}: PDB does not parse ({e})") from e
    return split


def _sample_json(sample: QASample) -> str:
    row = {
        "id": sample.id,
        "pdb": sample.pdb,
        "question": sample.question,
        "answer": sample.answer,
        "meta": sample.meta,
    }
    return json.dumps(row, sort_keys=True, separators=(",", ":"))


def save_dataset(split: DatasetSplit, out_dir: str | Path) -> Path:
    """Write train/valid/test JSONL plus the manifest; byte-deterministic."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        lines = [_sample_json(s) for s in getattr(split, name)]
        (out_dir / f"{name}.jsonl").write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8"
        )
    manifest = {name: f"{name}.jsonl" for name in SPLIT_NAMES}
    manifest["counts"] = split.counts
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest_path
