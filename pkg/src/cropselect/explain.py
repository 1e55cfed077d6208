"""Why-not explanations for excluded species.

Given a persisted selection, report every criterion a named species
fails, each with the canonical "Not adapted to <Group.Property>" message,
plus single-criterion relaxation hints (drop one failing criterion and
show how large the matched set becomes).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NotFoundError, NothingToRelaxError
from .knowledgebase import CategorySet, OrdinalRange, SpeciesDB
from .schema import CriteriaSchema, Kind, Property
from .selection import (
    CategoryChoice,
    CriterionRequest,
    OrdinalWindow,
    SelectionQuery,
    SelectionResult,
    Wildcard,
    match_one,
    match_query,
    validate_query,
)


@dataclass(frozen=True)
class Failure:
    criterion: str  # qualified property name
    message: str
    species_value: str
    requested: str


@dataclass(frozen=True)
class Explanation:
    species: str
    query_id: str
    failures: tuple[Failure, ...]


@dataclass(frozen=True)
class RelaxationHint:
    criterion: str
    action: str  # "drop"
    resulting_size: int


def _render_species_value(record, qualified: str, prop: Property) -> str:
    value = record.attributes.get(qualified)
    if value is None:
        return "(unknown)"
    if isinstance(value, OrdinalRange):
        lo = prop.scale[value.lo].label if value.lo is not None else "?"
        hi = prop.scale[value.hi].label if value.hi is not None else "?"
        return f"{lo} .. {hi}"
    if isinstance(value, CategorySet):
        if not value.members:
            return "(none recorded)"
        return ", ".join(prop.scale[i].label for i in sorted(value.members))
    return str(value)


def _render_requested(request: CriterionRequest, prop: Property) -> str:
    req = request.requested
    if isinstance(req, Wildcard):
        return "(any)"
    if isinstance(req, OrdinalWindow):
        return f"{prop.scale[req.lo].label} .. {prop.scale[req.hi].label}"
    return ", ".join(prop.scale[i].label for i in sorted(req.members))


def why(
    species_name: str,
    selection: SelectionResult,
    db: SpeciesDB,
    schema: CriteriaSchema,
) -> Explanation:
    """Every criterion the species fails, in query order."""
    record = db.species.get(species_name)
    if record is None:
        raise NotFoundError(f"no species named {species_name!r}")
    resolved = validate_query(selection.query, schema)
    failures = []
    for criterion, prop, polarity in resolved:
        outcome = match_one(record, criterion, prop, polarity)
        if not outcome.passed:
            failures.append(
                Failure(
                    criterion=criterion.property,
                    message=outcome.reason or f"Not adapted to {criterion.property}",
                    species_value=_render_species_value(record, criterion.property, prop),
                    requested=_render_requested(criterion, prop),
                )
            )
    return Explanation(species_name, selection.id, tuple(failures))


def why_suggestions(
    species_name: str,
    selection: SelectionResult,
    db: SpeciesDB,
    schema: CriteriaSchema,
    k: int = 3,
) -> list[RelaxationHint]:
    """Up to k single-criterion relaxations, largest resulting match first.

    Each hint drops one failing criterion and reports the matched-set size
    of the reduced query. Ties keep query order.
    """
    explanation = why(species_name, selection, db, schema)
    if not explanation.failures:
        raise NothingToRelaxError(f"{species_name!r} already matches selection {selection.id!r}")
    failing = {f.criterion for f in explanation.failures}
    hints = []
    for position, criterion in enumerate(selection.query.criteria):
        if criterion.property not in failing:
            continue
        reduced = SelectionQuery(
            tuple(c for c in selection.query.criteria if c.property != criterion.property),
            selection.query.label,
        )
        size = len(match_query(reduced, db, schema))
        hints.append(((-size, position), RelaxationHint(criterion.property, "drop", size)))
    hints.sort(key=lambda pair: pair[0])
    return [hint for _, hint in hints[:k]]
