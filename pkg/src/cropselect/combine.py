"""Set algebra over saved selections, and direct knowledge-base browsing."""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import ArityError, NotFoundError
from .knowledgebase import CategorySet, OrdinalRange, SpeciesDB
from .schema import CriteriaSchema
from .selection import CombineProvenance, SelectionQuery, SelectionResult, SelectionStore

OPS = ("intersect", "union", "difference")


@dataclass(frozen=True)
class CombineSpec:
    operands: tuple[str, ...]  # selection ids
    op: str  # one of OPS


def combine(spec: CombineSpec, store: SelectionStore) -> SelectionResult:
    """Fold the op over the operand matched-sets and persist the result.

    Difference is binary and left-to-right; intersect/union fold over two
    or more operands. The result's provenance records the op and operand
    ids in place of criteria.
    """
    if spec.op not in OPS:
        raise ArityError(f"unknown combine op {spec.op!r}")
    if len(spec.operands) < 2:
        raise ArityError(f"{spec.op} needs at least 2 operands")
    if spec.op == "difference" and len(spec.operands) != 2:
        raise ArityError("difference takes exactly 2 operands")
    sets = [set(store.load(op_id).matched) for op_id in spec.operands]
    acc = sets[0]
    for other in sets[1:]:
        if spec.op == "intersect":
            acc = acc & other
        elif spec.op == "union":
            acc = acc | other
        else:
            acc = acc - other
    result = SelectionResult(
        id=uuid.uuid4().hex[:12],
        query=SelectionQuery(label=f"{spec.op}({', '.join(spec.operands)})"),
        matched=tuple(sorted(acc)),
        created_at=datetime.now(timezone.utc),
        provenance=CombineProvenance(spec.op, spec.operands),
    )
    return store.save(result)


@dataclass(frozen=True)
class SpeciesView:
    name: str
    provenance: str | None
    attributes: tuple[tuple[str, str], ...]  # (qualified property, rendered labels)


def browse(
    db: SpeciesDB,
    schema: CriteriaSchema,
    filter: str | None = None,
) -> list[SpeciesView]:
    """Rendered record views ordered by name.

    ``filter`` is either a qualified property name (only species with
    that attribute recorded, its value shown) or a species-name prefix.
    """
    prop_filter: str | None = None
    prefix: str | None = None
    if filter:
        qualified = {q for q, _, _ in schema.qualified_properties()}
        if filter in qualified:
            prop_filter = filter
        elif "." in filter:
            # Dotted filters are property names; an unknown one is an error
            # rather than an implausible species prefix.
            raise NotFoundError(f"filter {filter!r} names no known property")
        else:
            prefix = filter  # a prefix with zero matches renders an empty list

    prop_map = {q: p for q, _, p in schema.qualified_properties()}
    views = []
    for name in sorted(db.species):
        if prefix is not None and not name.startswith(prefix):
            continue
        record = db.species[name]
        if prop_filter is not None and prop_filter not in record.attributes:
            continue
        rendered = []
        for qualified in sorted(record.attributes):
            prop = prop_map[qualified]
            value = record.attributes[qualified]
            if isinstance(value, OrdinalRange):
                lo = prop.scale[value.lo].label if value.lo is not None else "?"
                hi = prop.scale[value.hi].label if value.hi is not None else "?"
                rendered.append((qualified, f"{lo} .. {hi}"))
            elif isinstance(value, CategorySet):
                rendered.append((qualified, ", ".join(prop.scale[i].label for i in sorted(value.members))))
        views.append(SpeciesView(name, record.provenance, tuple(rendered)))
    return views
