"""JSON wire shapes shared by the HTTP service and the CLI's --json mode.

Option values cross the wire as labels, never indices; indices are an
internal representation only. Both surfaces render through these
functions, so their outputs are structurally identical by construction.
"""

from __future__ import annotations

from .agent import SyncReport, UserProfile
from .combine import SpeciesView
from .errors import ValidationError
from .explain import Explanation, RelaxationHint
from .knowledgebase import (
    CategorySet,
    NoteEntry,
    OrdinalRange,
    ReferenceEntry,
    SpeciesDB,
    SpeciesRecord,
)
from .schema import CriteriaSchema, Kind, lookup_property
from .selection import (
    WILDCARD,
    CategoryChoice,
    CriterionRequest,
    OrdinalWindow,
    SelectionQuery,
    SelectionResult,
    Wildcard,
)


def schema_to_wire(schema: CriteriaSchema) -> dict:
    return {
        "version": schema.version,
        "groups": [
            {
                "name": group.name,
                "polarity": group.polarity.value,
                "properties": [
                    {
                        "name": prop.name,
                        "qualified": f"{group.name}.{prop.name}",
                        "kind": prop.kind.value,
                        "scale": prop.labels(),
                        "wildcards": sorted(prop.wildcard_labels),
                    }
                    for prop in group.properties
                ],
            }
            for group in schema.groups
        ],
    }


def species_to_wire(record: SpeciesRecord, schema: CriteriaSchema) -> dict:
    attributes = {}
    for qualified in sorted(record.attributes):
        _, prop = lookup_property(schema, qualified)
        value = record.attributes[qualified]
        if isinstance(value, OrdinalRange):
            attributes[qualified] = {
                "lo": prop.scale[value.lo].label if value.lo is not None else None,
                "hi": prop.scale[value.hi].label if value.hi is not None else None,
            }
        else:
            attributes[qualified] = {"members": [prop.scale[i].label for i in sorted(value.members)]}
    return {"name": record.name, "provenance": record.provenance, "attributes": attributes}


def species_from_wire(raw: dict, schema: CriteriaSchema) -> SpeciesRecord:
    if "name" not in raw or not isinstance(raw.get("attributes", {}), dict):
        raise ValidationError("species record needs 'name' and an 'attributes' object")
    attributes = {}
    for qualified, value in raw.get("attributes", {}).items():
        _, prop = lookup_property(schema, qualified)
        if not isinstance(value, dict):
            raise ValidationError(f"attribute {qualified!r} must be an object")
        if "members" in value:
            attributes[qualified] = CategorySet(frozenset(prop.index_of(lbl) for lbl in value["members"]))
        else:
            lo = prop.index_of(value["lo"]) if value.get("lo") is not None else None
            hi = prop.index_of(value["hi"]) if value.get("hi") is not None else None
            attributes[qualified] = OrdinalRange(lo, hi)
    return SpeciesRecord(raw["name"], attributes, raw.get("provenance"))


def criterion_to_wire(criterion: CriterionRequest, schema: CriteriaSchema) -> dict:
    _, prop = lookup_property(schema, criterion.property)
    req = criterion.requested
    if isinstance(req, Wildcard):
        return {"property": criterion.property, "wildcard": True}
    if isinstance(req, OrdinalWindow):
        return {
            "property": criterion.property,
            "lo": prop.scale[req.lo].label,
            "hi": prop.scale[req.hi].label,
        }
    return {
        "property": criterion.property,
        "members": [prop.scale[i].label for i in sorted(req.members)],
    }


def criterion_from_wire(raw: dict, schema: CriteriaSchema) -> CriterionRequest:
    qualified = raw.get("property")
    if not qualified:
        raise ValidationError("criterion needs a 'property'")
    _, prop = lookup_property(schema, qualified)
    if raw.get("wildcard"):
        return CriterionRequest(qualified, WILDCARD)
    if "members" in raw:
        return CriterionRequest(qualified, CategoryChoice(frozenset(prop.index_of(lbl) for lbl in raw["members"])))
    if "lo" in raw or "hi" in raw:
        if prop.kind is not Kind.ORDINAL:
            raise ValidationError(f"{qualified!r} is categorical; use 'members'")
        lo = prop.index_of(raw["lo"]) if raw.get("lo") is not None else 0
        hi = prop.index_of(raw["hi"]) if raw.get("hi") is not None else len(prop.scale) - 1
        return CriterionRequest(qualified, OrdinalWindow(lo, hi))
    raise ValidationError(f"criterion for {qualified!r} needs 'lo'/'hi', 'members', or 'wildcard'")


def query_from_wire(raw: dict, schema: CriteriaSchema) -> SelectionQuery:
    criteria = tuple(criterion_from_wire(c, schema) for c in raw.get("criteria", []))
    return SelectionQuery(criteria, raw.get("label"))


def query_to_wire(query: SelectionQuery, schema: CriteriaSchema) -> dict:
    return {
        "label": query.label,
        "criteria": [criterion_to_wire(c, schema) for c in query.criteria],
    }


def result_to_wire(result: SelectionResult, schema: CriteriaSchema) -> dict:
    return {
        "id": result.id,
        "created_at": result.created_at.isoformat(),
        "query": query_to_wire(result.query, schema),
        "provenance": (
            {"op": result.provenance.op, "operands": list(result.provenance.operands)}
            if result.provenance
            else None
        ),
        "matched": list(result.matched),
        "count": len(result.matched),
    }


def selection_summary_to_wire(result: SelectionResult) -> dict:
    return {
        "id": result.id,
        "created_at": result.created_at.isoformat(),
        "label": result.query.label,
        "count": len(result.matched),
    }


def explanation_to_wire(explanation: Explanation) -> dict:
    return {
        "species": explanation.species,
        "selection": explanation.query_id,
        "included": not explanation.failures,
        "failures": [
            {
                "criterion": f.criterion,
                "message": f.message,
                "species_value": f.species_value,
                "requested": f.requested,
            }
            for f in explanation.failures
        ],
    }


def hints_to_wire(hints: list[RelaxationHint]) -> list[dict]:
    return [
        {"criterion": h.criterion, "action": h.action, "resulting_size": h.resulting_size}
        for h in hints
    ]


def view_to_wire(view: SpeciesView) -> dict:
    return {
        "name": view.name,
        "provenance": view.provenance,
        "attributes": [{"property": q, "value": v} for q, v in view.attributes],
    }


def reference_to_wire(ref: ReferenceEntry) -> dict:
    return {"id": ref.id, "citation": ref.citation, "tags": sorted(ref.tags)}


def note_to_wire(note: NoteEntry) -> dict:
    return {
        "author": note.author,
        "target": note.target,
        "body": note.body,
        "timestamp": note.timestamp.isoformat(),
    }


def sync_report_to_wire(report: SyncReport) -> dict:
    return {
        "applied": list(report.applied),
        "staged": list(report.staged),
        "conflicted": list(report.conflicted),
    }


def profile_summary_to_wire(profile: UserProfile) -> dict:
    return {
        "user_id": profile.user_id,
        "events": len(profile.events),
        "criterion_counts": dict(sorted(profile.criterion_counts.items())),
        "species_why_counts": dict(sorted(profile.species_why_counts.items())),
    }
