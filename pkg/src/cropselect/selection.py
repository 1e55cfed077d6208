"""Conjunctive selection over the species knowledge base.

A query holds at most one criterion per property. Ordinal criteria are a
closed window [lo, hi] of option indices and match by interval overlap
with the species' stored range; categorical criteria match by set
intersection. Missing species data is asymmetric: an absent lower bound
fails the criterion outright, an absent upper bound leaves the upper test
permissive. Criteria in a Negative-polarity group (the "Avoid" group)
invert the base test: the species must lack the trait. A wildcard
criterion always passes, regardless of polarity.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import KindMismatchError, NotFoundError, StoreError, ValidationError
from .knowledgebase import CategorySet, OrdinalRange, SpeciesDB, SpeciesRecord
from .schema import CriteriaSchema, Kind, Polarity, Property, lookup_property


@dataclass(frozen=True)
class OrdinalWindow:
    lo: int
    hi: int


@dataclass(frozen=True)
class CategoryChoice:
    members: frozenset[int]


@dataclass(frozen=True)
class Wildcard:
    pass


WILDCARD = Wildcard()

Requested = OrdinalWindow | CategoryChoice | Wildcard


@dataclass(frozen=True)
class CriterionRequest:
    property: str  # qualified "Group.Property" name
    requested: Requested


@dataclass(frozen=True)
class SelectionQuery:
    criteria: tuple[CriterionRequest, ...] = ()
    label: str | None = None


@dataclass(frozen=True)
class MatchOutcome:
    passed: bool
    reason: str | None = None  # "Not adapted to <Group.Property>" on failure


@dataclass(frozen=True)
class CombineProvenance:
    op: str
    operands: tuple[str, ...]


@dataclass(frozen=True)
class SelectionResult:
    id: str
    query: SelectionQuery
    matched: tuple[str, ...]
    created_at: datetime
    provenance: CombineProvenance | None = None
    seq: int = 0  # store-assigned, breaks created_at ties in listings


def match_one(
    species: SpeciesRecord,
    request: CriterionRequest,
    prop: Property,
    polarity: Polarity,
) -> MatchOutcome:
    """Test one criterion against one species.

    Raises KindMismatch when the request shape does not fit the property
    kind. The failure reason is the canonical why-not message.
    """
    reason = f"Not adapted to {request.property}"
    if isinstance(request.requested, Wildcard):
        return MatchOutcome(True)

    attr = species.attributes.get(request.property)
    if isinstance(request.requested, OrdinalWindow):
        if prop.kind is not Kind.ORDINAL:
            raise KindMismatchError(f"ordinal window on categorical property {request.property!r}")
        if attr is not None and not isinstance(attr, OrdinalRange):
            raise KindMismatchError(f"species {species.name!r} stores a set for ordinal {request.property!r}")
        q = attr.lo if attr is not None else None
        r = attr.hi if attr is not None else None
        # Closed interval overlap with asymmetric missing-bound handling:
        # missing lower bound fails, missing upper bound passes its half.
        base = q is not None and q <= request.requested.hi and (r is None or r >= request.requested.lo)
    elif isinstance(request.requested, CategoryChoice):
        if prop.kind is not Kind.CATEGORICAL:
            raise KindMismatchError(f"category choice on ordinal property {request.property!r}")
        if attr is not None and not isinstance(attr, CategorySet):
            raise KindMismatchError(f"species {species.name!r} stores a range for categorical {request.property!r}")
        members = attr.members if attr is not None else frozenset()
        base = bool(members & request.requested.members)
    else:
        raise ValidationError(f"unsupported request on {request.property!r}")

    passed = (not base) if polarity is Polarity.NEGATIVE else base
    return MatchOutcome(passed, None if passed else reason)


def validate_query(query: SelectionQuery, schema: CriteriaSchema) -> list[tuple[CriterionRequest, Property, Polarity]]:
    """Resolve each criterion against the schema; raise ValidationError on misuse."""
    seen: set[str] = set()
    resolved = []
    for criterion in query.criteria:
        if criterion.property in seen:
            raise ValidationError(f"duplicate criterion for property {criterion.property!r}")
        seen.add(criterion.property)
        try:
            group, prop = lookup_property(schema, criterion.property)
        except NotFoundError as exc:
            raise ValidationError(f"unknown property {criterion.property!r}", exc.detail)
        n = len(prop.scale)
        req = criterion.requested
        if isinstance(req, OrdinalWindow):
            if prop.kind is not Kind.ORDINAL:
                raise KindMismatchError(f"ordinal window on categorical property {criterion.property!r}")
            if not (0 <= req.lo <= req.hi < n):
                raise ValidationError(f"window [{req.lo}, {req.hi}] out of range for {criterion.property!r}")
        elif isinstance(req, CategoryChoice):
            if prop.kind is not Kind.CATEGORICAL:
                raise KindMismatchError(f"category choice on ordinal property {criterion.property!r}")
            if not req.members:
                raise ValidationError(f"empty category choice for {criterion.property!r}")
            for idx in req.members:
                if not (0 <= idx < n):
                    raise ValidationError(f"option index {idx} out of range for {criterion.property!r}")
        elif isinstance(req, Wildcard):
            if not prop.wildcard_labels:
                raise ValidationError(f"property {criterion.property!r} has no wildcard option")
        else:
            raise ValidationError(f"unsupported request on {criterion.property!r}")
        resolved.append((criterion, prop, group.polarity))
    return resolved


def match_query(query: SelectionQuery, db: SpeciesDB, schema: CriteriaSchema) -> list[str]:
    """Names of species passing every criterion, ascending by name."""
    resolved = validate_query(query, schema)
    matched = []
    for name in sorted(db.species):
        record = db.species[name]
        if all(match_one(record, c, p, pol).passed for c, p, pol in resolved):
            matched.append(name)
    return matched


def evaluate(
    query: SelectionQuery,
    db: SpeciesDB,
    schema: CriteriaSchema,
    store: "SelectionStore | None" = None,
) -> SelectionResult:
    """Run the query; persist the result when a store is given."""
    matched = tuple(match_query(query, db, schema))
    result = SelectionResult(
        id=uuid.uuid4().hex[:12],
        query=query,
        matched=matched,
        created_at=datetime.now(timezone.utc),
    )
    if store is not None:
        result = store.save(result)
    return result


# ---------------------------------------------------------------------------
# Persistence of selections (one JSON record per result in a session dir)


def requested_to_raw(req: Requested) -> dict:
    if isinstance(req, OrdinalWindow):
        return {"window": [req.lo, req.hi]}
    if isinstance(req, CategoryChoice):
        return {"members": sorted(req.members)}
    return {"wildcard": True}


def requested_from_raw(raw: dict) -> Requested:
    if "window" in raw:
        return OrdinalWindow(raw["window"][0], raw["window"][1])
    if "members" in raw:
        return CategoryChoice(frozenset(raw["members"]))
    return WILDCARD


def result_to_raw(result: SelectionResult) -> dict:
    return {
        "id": result.id,
        "seq": result.seq,
        "created_at": result.created_at.isoformat(),
        "label": result.query.label,
        "criteria": [
            {"property": c.property, **requested_to_raw(c.requested)} for c in result.query.criteria
        ],
        "matched": list(result.matched),
        "provenance": (
            {"op": result.provenance.op, "operands": list(result.provenance.operands)}
            if result.provenance
            else None
        ),
    }


def result_from_raw(raw: dict) -> SelectionResult:
    criteria = tuple(
        CriterionRequest(c["property"], requested_from_raw(c)) for c in raw["criteria"]
    )
    prov = raw.get("provenance")
    return SelectionResult(
        id=raw["id"],
        query=SelectionQuery(criteria, raw.get("label")),
        matched=tuple(raw["matched"]),
        created_at=datetime.fromisoformat(raw["created_at"]),
        provenance=CombineProvenance(prov["op"], tuple(prov["operands"])) if prov else None,
        seq=raw.get("seq", 0),
    )


class SelectionStore:
    """Directory-backed store of selection results."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._seq: int | None = None  # lazily read from disk, then counted in memory

    def _path(self, selection_id: str) -> Path:
        if not selection_id.replace("-", "").isalnum():
            raise StoreError(f"bad selection id {selection_id!r}")
        return self.directory / f"{selection_id}.json"

    def _next_seq(self) -> int:
        if self._seq is None:
            self._seq = max((r.seq for r in self.list()), default=0)
        self._seq += 1
        return self._seq

    def save(self, result: SelectionResult) -> SelectionResult:
        if result.seq == 0:
            result = SelectionResult(
                result.id, result.query, result.matched, result.created_at, result.provenance, self._next_seq()
            )
        try:
            self._path(result.id).write_text(
                json.dumps(result_to_raw(result), ensure_ascii=False, indent=1), "utf-8"
            )
        except OSError as exc:
            raise StoreError(f"cannot persist selection: {exc}")
        return result

    def load(self, selection_id: str) -> SelectionResult:
        path = self._path(selection_id)
        if not path.exists():
            raise NotFoundError(f"no selection with id {selection_id!r}")
        try:
            return result_from_raw(json.loads(path.read_text("utf-8")))
        except (OSError, ValueError, KeyError) as exc:
            raise StoreError(f"corrupt selection record {selection_id!r}: {exc}")

    def list(self) -> list[SelectionResult]:
        """All stored results, newest first."""
        results = []
        for path in self.directory.glob("*.json"):
            try:
                results.append(result_from_raw(json.loads(path.read_text("utf-8"))))
            except (ValueError, KeyError) as exc:
                raise StoreError(f"corrupt selection record {path.name!r}: {exc}")
        results.sort(key=lambda r: (r.created_at, r.seq), reverse=True)
        return results
