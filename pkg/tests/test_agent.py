import random
from collections import Counter
from datetime import datetime, timedelta, timezone

import pytest

from cropselect.agent import (
    Counters,
    NoteAdded,
    ProfileStore,
    QueryIssued,
    SelectionSaved,
    SessionEvent,
    SuggestionAccepted,
    UserProfile,
    WhyAsked,
    cosine_similarity,
    criterion_vector,
    fold_counters,
    most_referenced_species,
    record_event,
    record_fingerprint,
    stage_edit,
    stage_note,
    suggest_criteria,
    suggest_species,
    sync_local_subset,
)
from cropselect.errors import ClockSkewError, ConflictError, ValidationError
from cropselect.knowledgebase import NoteEntry, OrdinalRange, SpeciesRecord, upsert_species
from cropselect.selection import (
    WILDCARD,
    CategoryChoice,
    CriterionRequest,
    OrdinalWindow,
    SelectionQuery,
    Wildcard,
)
from oracles import random_query, random_record

T0 = datetime(2026, 8, 1, tzinfo=timezone.utc)


def _at(minutes):
    return T0 + timedelta(minutes=minutes)


def _profile(events=()):
    profile = UserProfile("u1")
    for event in events:
        profile = record_event(profile, event)
    return profile


def brute_counters(events):
    """Independent fold: plain Counter arithmetic over the raw log."""
    criterion, option, why, selected = Counter(), Counter(), Counter(), Counter()
    for event in events:
        k = event.kind
        if isinstance(k, QueryIssued):
            for c in k.query.criteria:
                criterion[c.property] += 1
                if isinstance(c.requested, OrdinalWindow):
                    for i in range(c.requested.lo, c.requested.hi + 1):
                        option[(c.property, i)] += 1
                elif isinstance(c.requested, CategoryChoice):
                    for i in c.requested.members:
                        option[(c.property, i)] += 1
        elif isinstance(k, WhyAsked):
            why[k.species] += 1
        elif isinstance(k, SelectionSaved):
            for name in k.matched:
                selected[name] += 1
    return dict(criterion), dict(option), dict(why), dict(selected)


def random_events(rng, schema, count):
    events = []
    minute = 0
    for _ in range(count):
        minute += rng.randint(0, 3)
        roll = rng.random()
        if roll < 0.4:
            events.append(SessionEvent(_at(minute), QueryIssued(random_query(rng, schema, max_criteria=6))))
        elif roll < 0.65:
            events.append(SessionEvent(_at(minute), WhyAsked(f"Species {rng.randrange(30):03d}")))
        elif roll < 0.85:
            matched = tuple(sorted({f"Species {rng.randrange(30):03d}" for _ in range(rng.randint(0, 6))}))
            events.append(SessionEvent(_at(minute), SelectionSaved(f"sel{rng.randrange(1000)}", matched)))
        elif roll < 0.95:
            events.append(SessionEvent(_at(minute), NoteAdded("Species 001")))
        else:
            events.append(SessionEvent(_at(minute), SuggestionAccepted("criteria")))
    return events


class TestRecordEvent:
    def test_query_counts(self, schema):
        query = SelectionQuery((CriterionRequest("Ecology.Precipitation", OrdinalWindow(1, 1)),))
        profile = _profile([SessionEvent(T0, QueryIssued(query))])
        assert profile.criterion_counts["Ecology.Precipitation"] == 1
        assert profile.option_counts[("Ecology.Precipitation", 1)] == 1

    def test_why_counts(self):
        profile = _profile(
            [SessionEvent(_at(0), WhyAsked("Mucuna")), SessionEvent(_at(1), WhyAsked("Mucuna"))]
        )
        assert profile.species_why_counts["Mucuna"] == 2

    def test_clock_skew_rejected(self):
        profile = _profile([SessionEvent(_at(5), WhyAsked("A"))])
        with pytest.raises(ClockSkewError):
            record_event(profile, SessionEvent(_at(4), WhyAsked("B")))

    def test_equal_timestamps_allowed(self):
        profile = _profile([SessionEvent(_at(5), WhyAsked("A")), SessionEvent(_at(5), WhyAsked("B"))])
        assert len(profile.events) == 2

    def test_counters_equal_log_fold(self, schema):
        rng = random.Random(123)
        for _ in range(10):
            events = random_events(rng, schema, 500)
            profile = _profile(events)
            criterion, option, why, selected = brute_counters(events)
            assert dict(profile.criterion_counts) == criterion
            assert dict(profile.option_counts) == option
            assert dict(profile.species_why_counts) == why
            assert dict(profile.species_selection_counts) == selected
            # incremental == from-scratch fold
            folded = fold_counters(tuple(events))
            assert profile.counters == folded


class TestSuggestCriteria:
    def test_cold_profile_schema_order(self, schema):
        suggestions = suggest_criteria(UserProfile("cold"), schema, 3)
        names = schema.property_names()
        assert [s.property for s in suggestions] == names[:3]
        # Cold fallback never errors: wildcard where available, full scale otherwise.
        for s in suggestions:
            assert isinstance(s.requested, (Wildcard, OrdinalWindow, CategoryChoice))

    def test_dominant_property_first(self, schema):
        query = SelectionQuery((CriterionRequest("Ecology.Drought risk", OrdinalWindow(2, 2)),))
        events = [SessionEvent(_at(i), QueryIssued(query)) for i in range(5)]
        profile = _profile(events)
        suggestions = suggest_criteria(profile, schema, 3)
        assert suggestions[0].property == "Ecology.Drought risk"
        assert suggestions[0].requested == OrdinalWindow(2, 2)

    def test_ranking_matches_sort_oracle(self, schema):
        rng = random.Random(321)
        names = schema.property_names()
        for _ in range(20):
            events = random_events(rng, schema, 100)
            profile = _profile(events)
            suggestions = suggest_criteria(profile, schema, len(names))
            # oracle: stable sort of schema order by (-criterion count, -best option count)
            criterion, option, _, _ = brute_counters(events)

            def best_opt(q):
                counts = [option.get((q, i), 0) for i in range(50)]
                return max(counts) if counts else 0

            expected = sorted(names, key=lambda q: (-criterion.get(q, 0), -best_opt(q), names.index(q)))
            assert [s.property for s in suggestions] == expected

    def test_determinism(self, schema):
        rng = random.Random(5)
        events = random_events(rng, schema, 50)
        a = suggest_criteria(_profile(events), schema, 10)
        b = suggest_criteria(_profile(events), schema, 10)
        assert a == b


class TestSuggestSpecies:
    def _with_queries(self, user_id, schema, n=3, seed=1):
        rng = random.Random(seed)
        profile = UserProfile(user_id)
        for i in range(n):
            profile = record_event(profile, SessionEvent(_at(i), QueryIssued(random_query(rng, schema, 5))))
        return profile

    def test_single_user_population(self, sample_db, schema):
        me = self._with_queries("solo", schema)
        assert suggest_species(me, [me], sample_db, schema, 5) == []

    def test_identical_profiles_share_references(self, sample_db, schema):
        query = SelectionQuery((CriterionRequest("Ecology.Drought risk", OrdinalWindow(1, 2)),))
        me = _profile([SessionEvent(T0, QueryIssued(query))])
        other = UserProfile("u2")
        other = record_event(other, SessionEvent(T0, QueryIssued(query)))
        other = record_event(other, SessionEvent(_at(1), WhyAsked("Lablab purpureus")))
        assert suggest_species(me, [me, other], sample_db, schema, 5) == ["Lablab purpureus"]

    def test_scores_match_dense_oracle(self, sample_db, schema):
        rng = random.Random(654)
        profiles = []
        for i in range(10):
            p = UserProfile(f"user{i}")
            minute = 0
            for _ in range(rng.randint(1, 30)):
                minute += 1
                roll = rng.random()
                if roll < 0.5:
                    p = record_event(p, SessionEvent(_at(minute), QueryIssued(random_query(rng, schema, 5))))
                elif roll < 0.8:
                    p = record_event(p, SessionEvent(_at(minute), WhyAsked(rng.choice(sorted(sample_db.species)))))
                else:
                    matched = tuple(sorted(rng.sample(sorted(sample_db.species), rng.randint(0, 4))))
                    p = record_event(p, SessionEvent(_at(minute), SelectionSaved("s", matched)))
            profiles.append(p)
        for me in profiles:
            got = suggest_species(me, profiles, sample_db, schema, 50)
            # dense oracle
            mine = criterion_vector(me, schema)
            scores = {}
            for other in profiles:
                if other.user_id == me.user_id:
                    continue
                sim = cosine_similarity(mine, criterion_vector(other, schema))
                for name in sample_db.species:
                    ref = other.species_why_counts.get(name, 0) + other.species_selection_counts.get(name, 0)
                    if sim > 0 and ref > 0:
                        scores[name] = scores.get(name, 0.0) + sim * ref
            exclude = me.last_selected()
            expected = sorted(
                (n for n, s in scores.items() if s > 0 and n not in exclude),
                key=lambda n: (-scores[n], n),
            )
            assert got == expected[:50]

    def test_cosine_bounds(self, schema):
        rng = random.Random(9)
        for _ in range(50):
            a = [float(rng.randint(0, 5)) for _ in range(25)]
            b = [float(rng.randint(0, 5)) for _ in range(25)]
            sim = cosine_similarity(a, b)
            assert 0.0 <= sim <= 1.0 + 1e-12
        v = [1.0, 2.0, 3.0] + [0.0] * 22
        assert cosine_similarity(v, v) == pytest.approx(1.0)
        assert cosine_similarity([0.0] * 25, v) == 0.0

    def test_scaling_invariance(self, sample_db, schema):
        rng = random.Random(10)
        base_profiles = []
        for i in range(5):
            events = random_events(rng, schema, 60)
            p = UserProfile(f"user{i}")
            for e in events:
                p = record_event(p, e)
            base_profiles.append(p)

        def scaled(profile, factor):
            from dataclasses import replace

            c = profile.counters
            return replace(
                profile,
                counters=Counters(
                    {k: v * factor for k, v in c.criterion.items()},
                    {k: v * factor for k, v in c.option.items()},
                    {k: v * factor for k, v in c.species_why.items()},
                    {k: v * factor for k, v in c.species_selected.items()},
                ),
            )

        scaled_profiles = [scaled(p, 7) for p in base_profiles]
        for me, me_scaled in zip(base_profiles, scaled_profiles):
            assert suggest_species(me, base_profiles, sample_db, schema, 20) == suggest_species(
                me_scaled, scaled_profiles, sample_db, schema, 20
            )
            assert [s.property for s in suggest_criteria(me, schema, 25)] == [
                s.property for s in suggest_criteria(me_scaled, schema, 25)
            ]
        assert [n for n, _ in most_referenced_species(base_profiles, 20)] == [
            n for n, _ in most_referenced_species(scaled_profiles, 20)
        ]


class TestMostReferenced:
    def test_empty(self):
        assert most_referenced_species([], 5) == []

    def test_single_profile(self):
        profile = _profile(
            [SessionEvent(_at(i), WhyAsked("A")) for i in range(3)]
            + [SessionEvent(_at(10), WhyAsked("B"))]
        )
        assert most_referenced_species([profile], 1) == [("A", 3)]
        assert most_referenced_species([profile], 5) == [("A", 3), ("B", 1)]

    def test_matches_brute_aggregation(self, schema):
        rng = random.Random(11)
        profiles = []
        for i in range(8):
            p = UserProfile(f"user{i}")
            for e in random_events(rng, schema, 80):
                p = record_event(p, e)
            profiles.append(p)
        totals = Counter()
        for p in profiles:
            totals.update(p.species_why_counts)
        expected = sorted(((n, c) for n, c in totals.items() if c > 0), key=lambda nc: (-nc[1], nc[0]))
        assert most_referenced_species(profiles, 1000) == expected


class TestSync:
    def test_pull_empty_subset(self, sample_db, schema):
        profile = UserProfile("u", local_subset=frozenset())
        updated, db, report = sync_local_subset(profile, sample_db, "pull", schema)
        assert report.applied == ()
        assert db == sample_db

    def test_pull_refreshes_local_copy(self, sample_db, schema):
        name = sorted(sample_db.species)[0]
        profile = UserProfile("u", local_subset=frozenset({name}))
        updated, _, report = sync_local_subset(profile, sample_db, "pull", schema)
        assert report.applied == (name,)
        assert updated.local_records[name] == sample_db.species[name]
        assert updated.local_base[name] == record_fingerprint(sample_db.species[name])

    def test_pull_unknown_name(self, sample_db, schema):
        profile = UserProfile("u", local_subset=frozenset({"Ghost"}))
        with pytest.raises(ValidationError):
            sync_local_subset(profile, sample_db, "pull", schema)

    def test_push_new_species_staged(self, sample_db, schema):
        rng = random.Random(12)
        record = random_record(rng, schema, "Brand new")
        profile = stage_edit(UserProfile("u"), record, schema)
        updated, db, report = sync_local_subset(profile, sample_db, "push", schema)
        assert report.staged == ("Brand new",)
        assert updated.pending_edits == {}
        assert db.changelog[-1].action == "staged-upsert"
        assert db.changelog[-1].subject == "Brand new"
        assert db.species == sample_db.species  # not auto-applied

    def test_push_note_staged(self, sample_db, schema):
        note = NoteEntry("u", "Mucuna pruriens", "obs", T0)
        profile = stage_note(UserProfile("u"), note)
        updated, db, report = sync_local_subset(profile, sample_db, "push", schema)
        assert report.staged == ("note:Mucuna pruriens",)
        assert updated.pending_notes == ()

    def test_concurrent_central_edit_conflicts(self, sample_db, schema):
        rng = random.Random(13)
        name = sorted(sample_db.species)[0]
        profile = UserProfile("u", local_subset=frozenset({name}))
        profile, _, _ = sync_local_subset(profile, sample_db, "pull", schema)
        # local edit based on the pulled copy
        edited = random_record(rng, schema, name)
        profile = stage_edit(profile, edited, schema)
        # meanwhile the central record changes
        central_edit = random_record(rng, schema, name)
        central2 = upsert_species(sample_db, central_edit, schema, author="someone-else")
        with pytest.raises(ConflictError) as exc:
            sync_local_subset(profile, central2, "push", schema)
        assert name in str(exc.value)

    def test_push_after_clean_pull_is_staged(self, sample_db, schema):
        rng = random.Random(14)
        name = sorted(sample_db.species)[0]
        profile = UserProfile("u", local_subset=frozenset({name}))
        profile, _, _ = sync_local_subset(profile, sample_db, "pull", schema)
        profile = stage_edit(profile, random_record(rng, schema, name), schema)
        _, db, report = sync_local_subset(profile, sample_db, "push", schema)
        assert report.staged == (name,)


class TestPersistence:
    def test_profiles_survive_restart(self, tmp_path, schema):
        rng = random.Random(15)
        store = ProfileStore(tmp_path / "profiles")
        events = random_events(rng, schema, 100)
        profile = UserProfile("fieldworker")
        for e in events:
            profile = record_event(profile, e)
        profile = stage_note(profile, NoteEntry("fieldworker", "Somewhere", "x", T0))
        store.save(profile)
        fresh = ProfileStore(tmp_path / "profiles")  # simulated restart
        loaded = fresh.load("fieldworker")
        assert loaded.user_id == profile.user_id
        assert loaded.events == profile.events
        assert loaded.counters == profile.counters
        assert loaded.pending_notes == profile.pending_notes

    def test_round_trip_random_profiles(self, tmp_path, schema):
        rng = random.Random(16)
        store = ProfileStore(tmp_path / "p2")
        for i in range(20):
            profile = UserProfile(f"user{i}")
            for e in random_events(rng, schema, rng.randint(0, 50)):
                profile = record_event(profile, e)
            store.save(profile)
            loaded = store.load(f"user{i}")
            assert loaded.events == profile.events
            assert loaded.counters == profile.counters

    def test_unknown_user_is_fresh(self, tmp_path):
        store = ProfileStore(tmp_path / "p3")
        profile = store.load("nobody")
        assert profile.events == ()
