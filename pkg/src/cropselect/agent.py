"""Persistent user profiles and the suggestion agent.

Each profile is an append-only session-event log plus counters derived
from it (the log is the source of truth; counters are maintained
incrementally and always equal a from-scratch fold). On top of the
profiles sit:

* content-based criterion suggestions from the user's own usage counts;
* collaborative species suggestions weighted by cosine similarity of
  criterion-frequency vectors across users;
* the "most referenced species" ranking that feeds the WHY pull-down;
* a local knowledge-base subset with pull refresh and staged push of
  field contributions to the central change log.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import ClockSkewError, ConflictError, StoreError, ValidationError
from .knowledgebase import (
    CategorySet,
    ChangeEntry,
    NoteEntry,
    OrdinalRange,
    SpeciesDB,
    SpeciesRecord,
    validate_record,
)
from .schema import CriteriaSchema, Kind
from .selection import (
    WILDCARD,
    CategoryChoice,
    CriterionRequest,
    OrdinalWindow,
    SelectionQuery,
    Wildcard,
    requested_from_raw,
    requested_to_raw,
)

# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class QueryIssued:
    query: SelectionQuery


@dataclass(frozen=True)
class WhyAsked:
    species: str


@dataclass(frozen=True)
class SelectionSaved:
    selection_id: str
    matched: tuple[str, ...]


@dataclass(frozen=True)
class NoteAdded:
    target: str = ""


@dataclass(frozen=True)
class SuggestionAccepted:
    what: str


EventKind = QueryIssued | WhyAsked | SelectionSaved | NoteAdded | SuggestionAccepted


@dataclass(frozen=True)
class SessionEvent:
    timestamp: datetime
    kind: EventKind


@dataclass(frozen=True)
class Counters:
    criterion: Mapping[str, int]
    option: Mapping[tuple[str, int], int]
    species_why: Mapping[str, int]
    species_selected: Mapping[str, int]

    @classmethod
    def empty(cls) -> "Counters":
        return cls({}, {}, {}, {})


def _bump(counts: Mapping, key, by: int = 1) -> dict:
    out = dict(counts)
    out[key] = out.get(key, 0) + by
    return out


def apply_event(counters: Counters, event: SessionEvent) -> Counters:
    kind = event.kind
    if isinstance(kind, QueryIssued):
        criterion = dict(counters.criterion)
        option = dict(counters.option)
        for c in kind.query.criteria:
            criterion[c.property] = criterion.get(c.property, 0) + 1
            if isinstance(c.requested, OrdinalWindow):
                for idx in range(c.requested.lo, c.requested.hi + 1):
                    option[(c.property, idx)] = option.get((c.property, idx), 0) + 1
            elif isinstance(c.requested, CategoryChoice):
                for idx in c.requested.members:
                    option[(c.property, idx)] = option.get((c.property, idx), 0) + 1
        return replace(counters, criterion=criterion, option=option)
    if isinstance(kind, WhyAsked):
        return replace(counters, species_why=_bump(counters.species_why, kind.species))
    if isinstance(kind, SelectionSaved):
        selected = dict(counters.species_selected)
        for name in kind.matched:
            selected[name] = selected.get(name, 0) + 1
        return replace(counters, species_selected=selected)
    return counters


def fold_counters(events: tuple[SessionEvent, ...]) -> Counters:
    counters = Counters.empty()
    for event in events:
        counters = apply_event(counters, event)
    return counters


# ---------------------------------------------------------------------------
# Profile


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    events: tuple[SessionEvent, ...] = ()
    counters: Counters = field(default_factory=Counters.empty)
    local_subset: frozenset[str] | None = None
    local_records: Mapping[str, SpeciesRecord] = field(default_factory=dict)
    local_base: Mapping[str, str] = field(default_factory=dict)  # name -> central fingerprint at pull
    pending_edits: Mapping[str, SpeciesRecord] = field(default_factory=dict)
    pending_notes: tuple[NoteEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "local_records", MappingProxyType(dict(self.local_records)))
        object.__setattr__(self, "local_base", MappingProxyType(dict(self.local_base)))
        object.__setattr__(self, "pending_edits", MappingProxyType(dict(self.pending_edits)))

    @property
    def criterion_counts(self) -> Mapping[str, int]:
        return self.counters.criterion

    @property
    def option_counts(self) -> Mapping[tuple[str, int], int]:
        return self.counters.option

    @property
    def species_why_counts(self) -> Mapping[str, int]:
        return self.counters.species_why

    @property
    def species_selection_counts(self) -> Mapping[str, int]:
        return self.counters.species_selected

    def last_selected(self) -> frozenset[str]:
        """Species in the most recently saved selection, if any."""
        for event in reversed(self.events):
            if isinstance(event.kind, SelectionSaved):
                return frozenset(event.kind.matched)
        return frozenset()


def record_event(profile: UserProfile, event: SessionEvent) -> UserProfile:
    """Append an event; timestamps must be non-decreasing."""
    if profile.events and event.timestamp < profile.events[-1].timestamp:
        raise ClockSkewError(
            f"event timestamp {event.timestamp.isoformat()} precedes "
            f"{profile.events[-1].timestamp.isoformat()}"
        )
    return replace(
        profile,
        events=profile.events + (event,),
        counters=apply_event(profile.counters, event),
    )


# ---------------------------------------------------------------------------
# Suggestions


def suggest_criteria(profile: UserProfile, schema: CriteriaSchema, k: int) -> list[CriterionRequest]:
    """Top-k criteria by the user's own usage; cold profiles get schema order.

    Each suggestion pairs a property with its most-used option (a
    single-option window or singleton choice); properties the user never
    constrained get a wildcard, or the full scale when the property has
    no wildcard option.
    """
    order = []
    for pos, (qualified, _, prop) in enumerate(schema.qualified_properties()):
        ccount = profile.criterion_counts.get(qualified, 0)
        best_opt, best_count = None, 0
        for idx in range(len(prop.scale)):
            count = profile.option_counts.get((qualified, idx), 0)
            if count > best_count:
                best_opt, best_count = idx, count
        order.append(((-ccount, -best_count, pos), qualified, prop, best_opt))
    order.sort(key=lambda item: item[0])

    suggestions = []
    for _, qualified, prop, best_opt in order[:k]:
        if best_opt is not None:
            if prop.kind is Kind.ORDINAL:
                requested = OrdinalWindow(best_opt, best_opt)
            else:
                requested = CategoryChoice(frozenset({best_opt}))
        elif prop.wildcard_labels:
            requested = WILDCARD
        elif prop.kind is Kind.ORDINAL:
            requested = OrdinalWindow(0, len(prop.scale) - 1)
        else:
            requested = CategoryChoice(frozenset(range(len(prop.scale))))
        suggestions.append(CriterionRequest(qualified, requested))
    return suggestions


def criterion_vector(profile: UserProfile, schema: CriteriaSchema) -> list[float]:
    return [float(profile.criterion_counts.get(q, 0)) for q in schema.property_names()]


def cosine_similarity(a: list[float], b: list[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _reference_count(profile: UserProfile, species: str) -> int:
    return profile.species_why_counts.get(species, 0) + profile.species_selection_counts.get(species, 0)


def suggest_species(
    profile: UserProfile,
    all_profiles: list[UserProfile],
    db: SpeciesDB,
    schema: CriteriaSchema,
    k: int,
) -> list[str]:
    """Collaborative top-k: similarity-weighted reference counts of other users.

    Species the user selected in their most recent saved selection are
    excluded; species with zero score never appear. A single-user
    population yields an empty list.
    """
    mine = criterion_vector(profile, schema)
    exclude = profile.last_selected()
    scores: dict[str, float] = {}
    for other in all_profiles:
        if other.user_id == profile.user_id:
            continue
        sim = cosine_similarity(mine, criterion_vector(other, schema))
        if sim <= 0.0:
            continue
        for name in db.species:
            count = _reference_count(other, name)
            if count:
                scores[name] = scores.get(name, 0.0) + sim * count
    ranked = sorted(
        (name for name, score in scores.items() if score > 0.0 and name not in exclude),
        key=lambda name: (-scores[name], name),
    )
    return ranked[:k]


def most_referenced_species(all_profiles: list[UserProfile], k: int) -> list[tuple[str, int]]:
    """Species ranked by total WHY lookups across all profiles."""
    totals: dict[str, int] = {}
    for profile in all_profiles:
        for name, count in profile.species_why_counts.items():
            totals[name] = totals.get(name, 0) + count
    ranked = sorted(((n, c) for n, c in totals.items() if c > 0), key=lambda nc: (-nc[1], nc[0]))
    return ranked[:k]


# ---------------------------------------------------------------------------
# Local subset sync


@dataclass(frozen=True)
class SyncReport:
    applied: tuple[str, ...] = ()
    staged: tuple[str, ...] = ()
    conflicted: tuple[str, ...] = ()


def record_fingerprint(record: SpeciesRecord) -> str:
    payload = {
        "name": record.name,
        "provenance": record.provenance,
        "attributes": {
            key: requested_like_raw(value) for key, value in sorted(record.attributes.items())
        },
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def requested_like_raw(value) -> dict:
    if isinstance(value, OrdinalRange):
        return {"lo": value.lo, "hi": value.hi}
    return {"members": sorted(value.members)}


def stage_edit(profile: UserProfile, record: SpeciesRecord, schema: CriteriaSchema) -> UserProfile:
    validate_record(record, schema)
    edits = dict(profile.pending_edits)
    edits[record.name] = record
    return replace(profile, pending_edits=edits)


def stage_note(profile: UserProfile, note: NoteEntry) -> UserProfile:
    return replace(profile, pending_notes=profile.pending_notes + (note,))


def sync_local_subset(
    profile: UserProfile,
    central_db: SpeciesDB,
    direction: str,
    schema: CriteriaSchema,
) -> tuple[UserProfile, SpeciesDB, SyncReport]:
    """Pull refreshes the local copy; push stages contributions for review.

    Push never applies edits to central records directly: accepted items
    land in the central change log as staged entries, and an edit whose
    central base record changed since the local pull is reported as a
    conflict and kept pending.
    """
    if direction == "pull":
        subset = profile.local_subset or frozenset()
        missing = sorted(n for n in subset if n not in central_db.species)
        if missing:
            raise ValidationError(f"subset names not in central database: {', '.join(missing)}")
        records = {n: central_db.species[n] for n in subset}
        base = {n: record_fingerprint(r) for n, r in records.items()}
        updated = replace(profile, local_records=records, local_base=base)
        return updated, central_db, SyncReport(applied=tuple(sorted(subset)))

    if direction != "push":
        raise ValidationError(f"unknown sync direction {direction!r}")

    staged: list[str] = []
    conflicted: list[str] = []
    changelog = list(central_db.changelog)
    remaining_edits = dict(profile.pending_edits)
    now = datetime.now().astimezone()
    for name in sorted(profile.pending_edits):
        record = profile.pending_edits[name]
        validate_record(record, schema)
        central = central_db.species.get(name)
        base = profile.local_base.get(name)
        if central is not None and base is not None and record_fingerprint(central) != base:
            conflicted.append(name)
            continue
        if central is not None and base is None:
            # Editing a central record never pulled locally: treat as conflict.
            conflicted.append(name)
            continue
        changelog.append(
            ChangeEntry(profile.user_id, now, "staged-upsert", name, detail="pending curation")
        )
        staged.append(name)
        del remaining_edits[name]
    for note in profile.pending_notes:
        changelog.append(ChangeEntry(profile.user_id, now, "staged-note", note.target))
        staged.append(f"note:{note.target}")
    updated_profile = replace(profile, pending_edits=remaining_edits, pending_notes=())
    updated_db = replace(central_db, changelog=tuple(changelog))
    if conflicted:
        raise ConflictError(
            "central records changed since local copy: " + ", ".join(conflicted),
            detail=json.dumps({"staged": staged, "conflicted": conflicted}),
        )
    return updated_profile, updated_db, SyncReport(staged=tuple(staged), conflicted=tuple(conflicted))


# ---------------------------------------------------------------------------
# Persistence (one JSON file per user; the event log is authoritative)


def _event_to_raw(event: SessionEvent) -> dict:
    kind = event.kind
    raw: dict = {"timestamp": event.timestamp.isoformat()}
    if isinstance(kind, QueryIssued):
        raw["kind"] = "query"
        raw["criteria"] = [
            {"property": c.property, **requested_to_raw(c.requested)} for c in kind.query.criteria
        ]
        raw["label"] = kind.query.label
    elif isinstance(kind, WhyAsked):
        raw["kind"] = "why"
        raw["species"] = kind.species
    elif isinstance(kind, SelectionSaved):
        raw["kind"] = "selection"
        raw["selection_id"] = kind.selection_id
        raw["matched"] = list(kind.matched)
    elif isinstance(kind, NoteAdded):
        raw["kind"] = "note"
        raw["target"] = kind.target
    else:
        raw["kind"] = "suggestion"
        raw["what"] = kind.what
    return raw


def _event_from_raw(raw: dict) -> SessionEvent:
    ts = datetime.fromisoformat(raw["timestamp"])
    k = raw["kind"]
    if k == "query":
        criteria = tuple(CriterionRequest(c["property"], requested_from_raw(c)) for c in raw["criteria"])
        return SessionEvent(ts, QueryIssued(SelectionQuery(criteria, raw.get("label"))))
    if k == "why":
        return SessionEvent(ts, WhyAsked(raw["species"]))
    if k == "selection":
        return SessionEvent(ts, SelectionSaved(raw["selection_id"], tuple(raw["matched"])))
    if k == "note":
        return SessionEvent(ts, NoteAdded(raw.get("target", "")))
    return SessionEvent(ts, SuggestionAccepted(raw["what"]))


def _record_to_raw(record: SpeciesRecord) -> dict:
    return {
        "name": record.name,
        "provenance": record.provenance,
        "attributes": {k: requested_like_raw(v) for k, v in sorted(record.attributes.items())},
    }


def _record_from_raw(raw: dict) -> SpeciesRecord:
    attrs = {}
    for key, value in raw["attributes"].items():
        if "members" in value:
            attrs[key] = CategorySet(frozenset(value["members"]))
        else:
            attrs[key] = OrdinalRange(value["lo"], value["hi"])
    return SpeciesRecord(raw["name"], attrs, raw.get("provenance"))


class ProfileStore:
    """Directory of per-user profile files; survives process restarts."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, user_id: str) -> Path:
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in user_id)
        if not safe:
            raise StoreError(f"bad user id {user_id!r}")
        return self.directory / f"{safe}.json"

    def save(self, profile: UserProfile) -> None:
        raw = {
            "user_id": profile.user_id,
            "events": [_event_to_raw(e) for e in profile.events],
            "local_subset": sorted(profile.local_subset) if profile.local_subset is not None else None,
            "local_records": {n: _record_to_raw(r) for n, r in profile.local_records.items()},
            "local_base": dict(profile.local_base),
            "pending_edits": {n: _record_to_raw(r) for n, r in profile.pending_edits.items()},
            "pending_notes": [
                {
                    "author": n.author,
                    "target": n.target,
                    "body": n.body,
                    "timestamp": n.timestamp.isoformat(),
                }
                for n in profile.pending_notes
            ],
        }
        try:
            self._path(profile.user_id).write_text(json.dumps(raw, ensure_ascii=False, indent=1), "utf-8")
        except OSError as exc:
            raise StoreError(f"cannot persist profile {profile.user_id!r}: {exc}")

    def load(self, user_id: str) -> UserProfile:
        """Load a profile, or return a fresh one for an unknown user."""
        path = self._path(user_id)
        if not path.exists():
            return UserProfile(user_id)
        try:
            raw = json.loads(path.read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise StoreError(f"corrupt profile {user_id!r}: {exc}")
        events = tuple(_event_from_raw(e) for e in raw.get("events", ()))
        subset = raw.get("local_subset")
        return UserProfile(
            user_id=raw["user_id"],
            events=events,
            counters=fold_counters(events),
            local_subset=frozenset(subset) if subset is not None else None,
            local_records={n: _record_from_raw(r) for n, r in raw.get("local_records", {}).items()},
            local_base=raw.get("local_base", {}),
            pending_edits={n: _record_from_raw(r) for n, r in raw.get("pending_edits", {}).items()},
            pending_notes=tuple(
                NoteEntry(n["author"], n["target"], n["body"], datetime.fromisoformat(n["timestamp"]))
                for n in raw.get("pending_notes", ())
            ),
        )

    def list(self) -> list[UserProfile]:
        return sorted(
            (self.load(path.stem) for path in self.directory.glob("*.json")),
            key=lambda p: p.user_id,
        )
