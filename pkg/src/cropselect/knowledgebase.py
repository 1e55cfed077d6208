"""Species knowledge base: records, references, notes, persistence.

The on-disk format is line-oriented UTF-8 so field researchers can diff
and hand-edit it::

    schema-version: 1

    [species] Mucuna pruriens
    provenance = synthetic sample record
    attr Ecology.Precipitation = 601-900 .. 1201-1500
    attr Ecology.Soil texture = Loamy | Clay

    [reference] carsky1997
    citation = ...
    tags = Ecology.Drought risk | Mucuna pruriens

    [note]
    author = jdoe
    target = Mucuna pruriens
    timestamp = 2026-08-24T12:00:00+00:00
    body = seen nodulating well on sandy sites\nsecond line

Ordinal attributes are stored as "lo .. hi" over option labels, with an
empty side for a missing bound; categorical attributes as labels joined
by " | ". Option values are stored as labels, never indices. The
change log lives next to the DB file as ``<path>.log`` (one JSON object
per line, append-only).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from types import MappingProxyType
from typing import Mapping

from .errors import (
    DuplicateIdError,
    FormatError,
    NotFoundError,
    SchemaMismatchError,
    UnresolvedTargetError,
    ValidationError,
)
from .schema import CriteriaSchema, Kind, Property, lookup_property


@dataclass(frozen=True)
class OrdinalRange:
    """Stored interval of option indices; either bound may be missing."""

    lo: int | None
    hi: int | None


@dataclass(frozen=True)
class CategorySet:
    """Stored set of option indices; empty means missing."""

    members: frozenset[int]


AttributeValue = OrdinalRange | CategorySet


@dataclass(frozen=True)
class SpeciesRecord:
    name: str
    attributes: Mapping[str, AttributeValue]
    provenance: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "attributes", MappingProxyType(dict(self.attributes)))

    def __eq__(self, other):
        if not isinstance(other, SpeciesRecord):
            return NotImplemented
        return (
            self.name == other.name
            and dict(self.attributes) == dict(other.attributes)
            and self.provenance == other.provenance
        )

    def __hash__(self):
        return hash((self.name, self.provenance, frozenset(self.attributes.items())))


@dataclass(frozen=True)
class ReferenceEntry:
    id: str
    citation: str
    tags: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class NoteEntry:
    author: str
    target: str
    body: str
    timestamp: datetime


@dataclass(frozen=True)
class ChangeEntry:
    author: str
    timestamp: datetime
    action: str
    subject: str
    detail: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "author": self.author,
                "timestamp": self.timestamp.isoformat(),
                "action": self.action,
                "subject": self.subject,
                "detail": self.detail,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "ChangeEntry":
        raw = json.loads(line)
        return cls(
            author=raw["author"],
            timestamp=datetime.fromisoformat(raw["timestamp"]),
            action=raw["action"],
            subject=raw["subject"],
            detail=raw.get("detail", ""),
        )


@dataclass(frozen=True)
class SpeciesDB:
    """Immutable snapshot; mutations return a new snapshot."""

    schema_version: str
    species: Mapping[str, SpeciesRecord]
    references: tuple[ReferenceEntry, ...] = ()
    notes: tuple[NoteEntry, ...] = ()
    changelog: tuple[ChangeEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "species", MappingProxyType(dict(self.species)))

    def __eq__(self, other):
        if not isinstance(other, SpeciesDB):
            return NotImplemented
        return (
            self.schema_version == other.schema_version
            and dict(self.species) == dict(other.species)
            and self.references == other.references
            and self.notes == other.notes
        )

    def names(self) -> list[str]:
        return sorted(self.species)


def _now() -> datetime:
    return datetime.now(timezone.utc)


# ---------------------------------------------------------------------------
# Validation


def validate_record(record: SpeciesRecord, schema: CriteriaSchema) -> None:
    """Raise SchemaMismatch/ValidationError unless the record fits the schema."""
    if not record.name or record.name != record.name.strip():
        raise ValidationError(f"bad species name {record.name!r}")
    for key, value in record.attributes.items():
        try:
            _, prop = lookup_property(schema, key)
        except NotFoundError:
            raise SchemaMismatchError(f"record {record.name!r} references unknown property {key!r}")
        n = len(prop.scale)
        if isinstance(value, OrdinalRange):
            if prop.kind is not Kind.ORDINAL:
                raise SchemaMismatchError(f"{key!r} is categorical but {record.name!r} stores a range")
            for bound in (value.lo, value.hi):
                if bound is not None and not (0 <= bound < n):
                    raise SchemaMismatchError(f"{key!r}: option index {bound} out of range for {record.name!r}")
            if value.lo is not None and value.hi is not None and value.lo > value.hi:
                raise ValidationError(f"{key!r}: range lo > hi for {record.name!r}")
        elif isinstance(value, CategorySet):
            if prop.kind is not Kind.CATEGORICAL:
                raise SchemaMismatchError(f"{key!r} is ordinal but {record.name!r} stores a set")
            for idx in value.members:
                if not (0 <= idx < n):
                    raise SchemaMismatchError(f"{key!r}: option index {idx} out of range for {record.name!r}")
        else:
            raise ValidationError(f"{key!r}: unsupported attribute value for {record.name!r}")


def validate_db(db: SpeciesDB, schema: CriteriaSchema) -> None:
    if db.schema_version != schema.version:
        raise SchemaMismatchError(
            f"database schema version {db.schema_version!r} does not match active schema {schema.version!r}"
        )
    for record in db.species.values():
        validate_record(record, schema)
    seen_refs: set[str] = set()
    for ref in db.references:
        if ref.id in seen_refs:
            raise DuplicateIdError(f"duplicate reference id {ref.id!r}")
        seen_refs.add(ref.id)


# ---------------------------------------------------------------------------
# Mutations (snapshot in, snapshot out)


def upsert_species(db: SpeciesDB, record: SpeciesRecord, schema: CriteriaSchema, author: str = "local") -> SpeciesDB:
    validate_record(record, schema)
    species = dict(db.species)
    action = "update" if record.name in species else "add"
    species[record.name] = record
    entry = ChangeEntry(author, _now(), action, record.name, detail=f"{len(record.attributes)} attributes")
    return replace(db, species=species, changelog=db.changelog + (entry,))


def remove_species(db: SpeciesDB, name: str, author: str = "local") -> SpeciesDB:
    if name not in db.species:
        raise NotFoundError(f"no species named {name!r}")
    species = dict(db.species)
    del species[name]
    entry = ChangeEntry(author, _now(), "remove", name)
    return replace(db, species=species, changelog=db.changelog + (entry,))


def _target_resolves(db: SpeciesDB, schema: CriteriaSchema, target: str) -> bool:
    if target in db.species:
        return True
    try:
        lookup_property(schema, target)
        return True
    except NotFoundError:
        return False


def add_note(db: SpeciesDB, note: NoteEntry, schema: CriteriaSchema) -> SpeciesDB:
    if not _target_resolves(db, schema, note.target):
        raise UnresolvedTargetError(f"note target {note.target!r} is neither a species nor a property")
    entry = ChangeEntry(note.author, _now(), "note", note.target)
    return replace(db, notes=db.notes + (note,), changelog=db.changelog + (entry,))


def add_reference(db: SpeciesDB, ref: ReferenceEntry, schema: CriteriaSchema) -> SpeciesDB:
    if any(r.id == ref.id for r in db.references):
        raise DuplicateIdError(f"reference id {ref.id!r} already exists")
    for tag in ref.tags:
        if not _target_resolves(db, schema, tag):
            raise UnresolvedTargetError(f"reference tag {tag!r} is neither a species nor a property")
    entry = ChangeEntry("local", _now(), "reference", ref.id)
    return replace(db, references=db.references + (ref,), changelog=db.changelog + (entry,))


def list_references(db: SpeciesDB, tag: str | None = None) -> list[ReferenceEntry]:
    refs = db.references if tag is None else [r for r in db.references if tag in r.tags]
    return sorted(refs, key=lambda r: r.id)


# ---------------------------------------------------------------------------
# Persistence

_RANGE_SEP = " .. "
_SET_SEP = " | "


def _format_attr(value: AttributeValue, prop: Property) -> str:
    if isinstance(value, OrdinalRange):
        lo = prop.scale[value.lo].label if value.lo is not None else ""
        hi = prop.scale[value.hi].label if value.hi is not None else ""
        return f"{lo}{_RANGE_SEP}{hi}".strip()
    labels = [prop.scale[i].label for i in sorted(value.members)]
    for label in labels:
        if _SET_SEP in label or _RANGE_SEP in label:
            raise FormatError(f"option label {label!r} cannot be stored in the text format")
    return _SET_SEP.join(labels)


def _parse_attr(raw: str, prop: Property, where: str) -> AttributeValue:
    if prop.kind is Kind.ORDINAL:
        if ".." not in raw:
            raise FormatError(f"{where}: ordinal value {raw!r} must use 'lo .. hi'")
        lo_s, hi_s = raw.split("..", 1)
        lo_s, hi_s = lo_s.strip(), hi_s.strip()
        lo = prop.index_of(lo_s) if lo_s else None
        hi = prop.index_of(hi_s) if hi_s else None
        return OrdinalRange(lo, hi)
    members = frozenset(prop.index_of(part.strip()) for part in raw.split("|") if part.strip())
    return CategorySet(members)


def save_db(db: SpeciesDB, path: str | os.PathLike, schema: CriteriaSchema) -> None:
    validate_db(db, schema)
    lines = [f"schema-version: {db.schema_version}", ""]
    prop_map = {q: p for q, _, p in schema.qualified_properties()}
    for name in sorted(db.species):
        record = db.species[name]
        lines.append(f"[species] {name}")
        if record.provenance:
            lines.append(f"provenance = {record.provenance}")
        for key in sorted(record.attributes):
            try:
                lines.append(f"attr {key} = {_format_attr(record.attributes[key], prop_map[key])}")
            except KeyError:
                raise SchemaMismatchError(f"record {name!r} references unknown property {key!r}")
        lines.append("")
    for ref in db.references:
        lines.append(f"[reference] {ref.id}")
        lines.append(f"citation = {ref.citation}")
        if ref.tags:
            lines.append(f"tags = {_SET_SEP.join(sorted(ref.tags))}")
        lines.append("")
    for note in db.notes:
        lines.append("[note]")
        lines.append(f"author = {note.author}")
        lines.append(f"target = {note.target}")
        lines.append(f"timestamp = {note.timestamp.isoformat()}")
        lines.append("body = " + note.body.replace("\\", "\\\\").replace("\n", "\\n"))
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    log_path = str(path) + ".log"
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in db.changelog:
            fh.write(entry.to_json() + "\n")


def load_db(path: str | os.PathLike, schema: CriteriaSchema) -> SpeciesDB:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read database file: {exc}")
    species: dict[str, SpeciesRecord] = {}
    references: list[ReferenceEntry] = []
    notes: list[NoteEntry] = []
    schema_version: str | None = None

    cur_kind: str | None = None
    cur: dict = {}

    def flush(lineno: int):
        nonlocal cur_kind, cur
        if cur_kind is None:
            return
        if cur_kind == "species":
            record = SpeciesRecord(cur["name"], cur["attrs"], cur.get("provenance"))
            if record.name in species:
                raise FormatError(f"line {lineno}: duplicate species {record.name!r}")
            species[record.name] = record
        elif cur_kind == "reference":
            references.append(ReferenceEntry(cur["id"], cur.get("citation", ""), frozenset(cur.get("tags", ()))))
        elif cur_kind == "note":
            try:
                ts = datetime.fromisoformat(cur["timestamp"])
            except (KeyError, ValueError):
                raise FormatError(f"line {lineno}: note with missing or bad timestamp")
            body = cur.get("body", "").replace("\\n", "\n").replace("\\\\", "\\")
            notes.append(NoteEntry(cur.get("author", ""), cur.get("target", ""), body, ts))
        cur_kind, cur = None, {}

    prop_map = {q: p for q, _, p in schema.qualified_properties()}
    for lineno, line in enumerate(text.split("\n"), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("schema-version:"):
            schema_version = stripped.split(":", 1)[1].strip()
        elif stripped.startswith("[species]"):
            flush(lineno)
            cur_kind = "species"
            cur = {"name": stripped[len("[species]") :].strip(), "attrs": {}}
        elif stripped.startswith("[reference]"):
            flush(lineno)
            cur_kind = "reference"
            cur = {"id": stripped[len("[reference]") :].strip(), "tags": []}
        elif stripped.startswith("[note]"):
            flush(lineno)
            cur_kind = "note"
            cur = {}
        elif "=" in stripped and cur_kind is not None:
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if cur_kind == "species" and key.startswith("attr "):
                qualified = key[len("attr ") :].strip()
                prop = prop_map.get(qualified)
                if prop is None:
                    raise SchemaMismatchError(f"line {lineno}: unknown property {qualified!r}")
                try:
                    cur["attrs"][qualified] = _parse_attr(value, prop, f"line {lineno}")
                except NotFoundError as exc:
                    raise SchemaMismatchError(f"line {lineno}: {exc.message}")
            elif key == "tags":
                cur["tags"] = [t.strip() for t in value.split("|") if t.strip()]
            else:
                cur[key] = value
        else:
            raise FormatError(f"line {lineno}: unrecognized line {stripped!r}")
    flush(len(text.split("\n")))

    if schema_version is None:
        raise FormatError("missing schema-version header")

    changelog: list[ChangeEntry] = []
    log_path = str(path) + ".log"
    if os.path.exists(log_path):
        with open(log_path, encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if raw:
                    changelog.append(ChangeEntry.from_json(raw))

    db = SpeciesDB(schema_version, species, tuple(references), tuple(notes), tuple(changelog))
    validate_db(db, schema)
    return db


# ---------------------------------------------------------------------------
# Tabular interchange (one row per species, one column per property)


def export_tabular(db: SpeciesDB, schema: CriteriaSchema) -> str:
    """CSV with ranges rendered as "lo..hi" and sets as "a; b"."""
    import csv
    import io

    qualified = schema.property_names()
    prop_map = {q: p for q, _, p in schema.qualified_properties()}
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["species"] + qualified)
    for name in sorted(db.species):
        record = db.species[name]
        row = [name]
        for q in qualified:
            value = record.attributes.get(q)
            if value is None:
                row.append("")
            elif isinstance(value, OrdinalRange):
                prop = prop_map[q]
                lo = prop.scale[value.lo].label if value.lo is not None else ""
                hi = prop.scale[value.hi].label if value.hi is not None else ""
                row.append(f"{lo}..{hi}")
            else:
                prop = prop_map[q]
                row.append("; ".join(prop.scale[i].label for i in sorted(value.members)))
        writer.writerow(row)
    return buf.getvalue()


def load_sample_db(schema: CriteriaSchema) -> SpeciesDB:
    """Load the synthetic 20-species sample database shipped with the package."""
    from importlib import resources

    with resources.as_file(resources.files("cropselect.data").joinpath("sample.db")) as p:
        return load_db(p, schema)
