"""Command-line interface.

Exit codes: 0 success, 1 domain error (stable error code on stderr),
2 usage error. ``--json`` emits the same payloads as the HTTP service.

Inline criteria syntax (repeat --criteria):

    Group.Property=lo..hi        ordinal window over option labels
    Group.Property=a,b,c         categorical choice
    Group.Property=label         single option
    Group.Property=*             wildcard ("Any one" / "Not relevant")

A criteria file uses the taxonomy brace syntax, listing only the chosen
options, e.g. ``{Select}{Ecology}{Soil texture(Loamy|Clay)}{/Select}``.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import agent, combine as combine_mod, explain, wire
from .errors import CropSelectError, ValidationError
from .knowledgebase import (
    NoteEntry,
    ReferenceEntry,
    add_note,
    add_reference,
    export_tabular,
    list_references,
    load_db,
    save_db,
    upsert_species,
)
from .schema import (
    CriteriaSchema,
    Kind,
    default_schema_path,
    lookup_property,
    parse_schema,
)
from .selection import (
    WILDCARD,
    CategoryChoice,
    CriterionRequest,
    OrdinalWindow,
    SelectionQuery,
    SelectionStore,
    evaluate,
)
from importlib import resources


def _sample_db_path() -> str:
    return str(resources.files("cropselect.data").joinpath("sample.db"))


class Context:
    def __init__(self, schema_path: str, db_path: str, data_dir: str):
        self.schema_path = schema_path
        self.db_path = db_path
        self.data_dir = Path(data_dir)
        self._schema: CriteriaSchema | None = None
        self._db = None

    @property
    def schema(self) -> CriteriaSchema:
        if self._schema is None:
            self._schema = parse_schema(Path(self.schema_path).read_text("utf-8"))
        return self._schema

    @property
    def db(self):
        if self._db is None:
            self._db = load_db(self.db_path, self.schema)
        return self._db

    @property
    def store(self) -> SelectionStore:
        return SelectionStore(self.data_dir / "selections")

    @property
    def profiles(self) -> agent.ProfileStore:
        return agent.ProfileStore(self.data_dir / "profiles")

    def save_db(self, db):
        save_db(db, self.db_path, self.schema)
        self._db = db


def _emit(payload, as_json: bool, render=None):
    if as_json:
        click.echo(json.dumps(payload, ensure_ascii=False, indent=1))
    elif render is not None:
        render(payload)
    else:
        click.echo(json.dumps(payload, ensure_ascii=False, indent=1))


def parse_inline_criterion(text: str, schema: CriteriaSchema) -> CriterionRequest:
    if "=" not in text:
        raise ValidationError(f"criterion {text!r} must look like Group.Property=value")
    qualified, _, value = text.partition("=")
    qualified, value = qualified.strip(), value.strip()
    _, prop = lookup_property(schema, qualified)
    if value == "*":
        return CriterionRequest(qualified, WILDCARD)
    if prop.kind is Kind.ORDINAL:
        if ".." in value:
            lo_s, hi_s = (part.strip() for part in value.split("..", 1))
        else:
            lo_s = hi_s = value
        lo = prop.index_of(lo_s) if lo_s else 0
        hi = prop.index_of(hi_s) if hi_s else len(prop.scale) - 1
        return CriterionRequest(qualified, OrdinalWindow(lo, hi))
    members = frozenset(prop.index_of(part.strip()) for part in value.split(",") if part.strip())
    return CriterionRequest(qualified, CategoryChoice(members))


def parse_criteria_file(text: str, schema: CriteriaSchema) -> list[CriterionRequest]:
    """A brace document whose option lists are the *chosen* options."""
    chosen = parse_schema(text)
    criteria = []
    for group in chosen.groups:
        for cprop in group.properties:
            qualified = f"{group.name}.{cprop.name}"
            _, prop = lookup_property(schema, qualified)
            labels = cprop.labels()
            if len(labels) == 1 and labels[0] in prop.wildcard_labels:
                criteria.append(CriterionRequest(qualified, WILDCARD))
            elif prop.kind is Kind.ORDINAL:
                indices = [prop.index_of(lbl) for lbl in labels]
                criteria.append(CriterionRequest(qualified, OrdinalWindow(min(indices), max(indices))))
            else:
                criteria.append(
                    CriterionRequest(qualified, CategoryChoice(frozenset(prop.index_of(lbl) for lbl in labels)))
                )
    return criteria


@click.group()
@click.option("--schema", "schema_path", default=None, type=click.Path(), help="Taxonomy file (default: built-in).")
@click.option("--db", "db_path", default=None, type=click.Path(), help="Species database (default: built-in sample).")
@click.option("--data-dir", default=".cropselect", type=click.Path(), help="Directory for selections and profiles.")
@click.pass_context
def main(ctx, schema_path, db_path, data_dir):
    """Explainable species selection over a criteria taxonomy."""
    ctx.obj = Context(schema_path or default_schema_path(), db_path or _sample_db_path(), data_dir)


def _run(ctx_obj, fn):
    try:
        fn(ctx_obj)
    except CropSelectError as exc:
        click.echo(f"{exc.code}: {exc.message}" + (f" ({exc.detail})" if exc.detail else ""), err=True)
        sys.exit(1)


@main.command()
@click.argument("schema_file", type=click.Path(exists=True))
@click.argument("db_file", type=click.Path(exists=True), required=False)
def validate(schema_file, db_file):
    """Check a taxonomy file and optionally a database against it."""

    def go(_ctx):
        schema = parse_schema(Path(schema_file).read_text("utf-8"))
        count = sum(len(g.properties) for g in schema.groups)
        click.echo(f"schema ok: {len(schema.groups)} groups, {count} properties")
        if db_file:
            db = load_db(db_file, schema)
            click.echo(f"database ok: {len(db.species)} species")

    _run(None, go)


@main.command("schema")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def schema_cmd(ctx_obj, as_json):
    """Show the active criteria taxonomy."""

    def go(ctx):
        payload = wire.schema_to_wire(ctx.schema)

        def render(p):
            for group in p["groups"]:
                click.echo(f"{group['name']} [{group['polarity']}]")
                for prop in group["properties"]:
                    click.echo(f"  {prop['name']} ({prop['kind']}): {' | '.join(prop['scale'])}")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.command()
@click.option("--criteria", "-c", multiple=True, help="Inline criterion, e.g. 'Ecology.Soil texture=Loamy'.")
@click.option("--criteria-file", type=click.Path(exists=True), help="Brace-syntax criteria file.")
@click.option("--label", default=None)
@click.option("--user", default=None, help="Record the query on this user's profile.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def select(ctx_obj, criteria, criteria_file, label, user, as_json):
    """Run a conjunctive selection and persist the result."""

    def go(ctx):
        crits = [parse_inline_criterion(c, ctx.schema) for c in criteria]
        if criteria_file:
            crits.extend(parse_criteria_file(Path(criteria_file).read_text("utf-8"), ctx.schema))
        query = SelectionQuery(tuple(crits), label)
        result = evaluate(query, ctx.db, ctx.schema, ctx.store)
        if user:
            profiles = ctx.profiles
            profile = profiles.load(user)
            now = datetime.now(timezone.utc)
            profile = agent.record_event(profile, agent.SessionEvent(now, agent.QueryIssued(query)))
            profile = agent.record_event(
                profile, agent.SessionEvent(now, agent.SelectionSaved(result.id, result.matched))
            )
            profiles.save(profile)
        payload = wire.result_to_wire(result, ctx.schema)

        def render(p):
            click.echo(f"selection {p['id']}: {p['count']} species matched")
            for name in p["matched"]:
                click.echo(f"  {name}")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.command()
@click.argument("species")
@click.option("--selection", "selection_id", required=True)
@click.option("--suggest", "suggest_k", default=3, show_default=True, help="Max relaxation hints.")
@click.option("--user", default=None, help="Record the lookup on this user's profile.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def why(ctx_obj, species, selection_id, suggest_k, user, as_json):
    """Explain which criteria exclude SPECIES from a saved selection."""

    def go(ctx):
        selection = ctx.store.load(selection_id)
        explanation = explain.why(species, selection, ctx.db, ctx.schema)
        hints = []
        if explanation.failures and suggest_k > 0:
            hints = explain.why_suggestions(species, selection, ctx.db, ctx.schema, suggest_k)
        if user:
            profiles = ctx.profiles
            profile = profiles.load(user)
            profile = agent.record_event(
                profile, agent.SessionEvent(datetime.now(timezone.utc), agent.WhyAsked(species))
            )
            profiles.save(profile)
        payload = wire.explanation_to_wire(explanation)
        payload["hints"] = wire.hints_to_wire(hints)

        def render(p):
            if p["included"]:
                click.echo(f"{species} is included in selection {selection_id}")
                return
            click.echo(f"{species} is excluded from selection {selection_id}:")
            for failure in p["failures"]:
                click.echo(f"  {failure['message']}  (has: {failure['species_value']}; wanted: {failure['requested']})")
            for hint in p["hints"]:
                click.echo(f"  hint: drop {hint['criterion']} -> {hint['resulting_size']} species")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.command()
@click.option("--op", type=click.Choice(combine_mod.OPS), required=True)
@click.argument("operands", nargs=-1, required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def combine(ctx_obj, op, operands, as_json):
    """Set-combine two or more saved selections into a new one."""

    def go(ctx):
        result = combine_mod.combine(combine_mod.CombineSpec(tuple(operands), op), ctx.store)
        payload = wire.result_to_wire(result, ctx.schema)

        def render(p):
            click.echo(f"selection {p['id']}: {p['count']} species")
            for name in p["matched"]:
                click.echo(f"  {name}")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.command()
@click.option("--filter", "filter_", default=None, help="Property name or species-name prefix.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def browse(ctx_obj, filter_, as_json):
    """Render species records with labeled attribute values."""

    def go(ctx):
        views = combine_mod.browse(ctx.db, ctx.schema, filter_)
        payload = {"species": [wire.view_to_wire(v) for v in views]}

        def render(p):
            for view in p["species"]:
                click.echo(view["name"])
                for attr in view["attributes"]:
                    click.echo(f"  {attr['property']}: {attr['value']}")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.command()
@click.argument("what", type=click.Choice(["criteria", "species"]))
@click.option("--user", default="anonymous")
@click.option("-k", default=5, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def suggest(ctx_obj, what, user, k, as_json):
    """Suggest criteria (from your own history) or species (collaborative)."""

    def go(ctx):
        profiles = ctx.profiles
        profile = profiles.load(user)
        if what == "criteria":
            suggestions = agent.suggest_criteria(profile, ctx.schema, k)
            payload = {"user": user, "criteria": [wire.criterion_to_wire(c, ctx.schema) for c in suggestions]}
        else:
            names = agent.suggest_species(profile, profiles.list(), ctx.db, ctx.schema, k)
            payload = {"user": user, "species": names}
        _emit(payload, as_json)

    _run(ctx_obj, go)


@main.command("most-referenced")
@click.option("-k", default=10, show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def most_referenced(ctx_obj, k, as_json):
    """Species most often asked about across all user profiles."""

    def go(ctx):
        ranked = agent.most_referenced_species(ctx.profiles.list(), k)
        _emit({"species": [{"species": n, "count": c} for n, c in ranked]}, as_json)

    _run(ctx_obj, go)


@main.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def selections(ctx_obj, as_json):
    """List saved selections, newest first."""

    def go(ctx):
        payload = {"selections": [wire.selection_summary_to_wire(r) for r in ctx.store.list()]}

        def render(p):
            for s in p["selections"]:
                click.echo(f"{s['id']}  {s['created_at']}  {s['count']} species  {s['label'] or ''}")

        _emit(payload, as_json, render)

    _run(ctx_obj, go)


@main.group()
def species():
    """Inspect or update individual species records."""


@species.command("show")
@click.argument("name")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def species_show(ctx_obj, name, as_json):
    def go(ctx):
        record = ctx.db.species.get(name)
        if record is None:
            from .errors import NotFoundError

            raise NotFoundError(f"no species named {name!r}")
        _emit(wire.species_to_wire(record, ctx.schema), as_json)

    _run(ctx_obj, go)


@species.command("put")
@click.argument("record_file", type=click.Path(exists=True))
@click.option("--author", default="cli")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def species_put(ctx_obj, record_file, author, as_json):
    """Upsert a species from a JSON record (wire shape)."""

    def go(ctx):
        raw = json.loads(Path(record_file).read_text("utf-8"))
        record = wire.species_from_wire(raw, ctx.schema)
        ctx.save_db(upsert_species(ctx.db, record, ctx.schema, author=author))
        _emit(wire.species_to_wire(record, ctx.schema), as_json)

    _run(ctx_obj, go)


@main.group()
def note():
    """Field notes attached to species or properties."""


@note.command("add")
@click.option("--author", required=True)
@click.option("--target", required=True)
@click.option("--body", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def note_add(ctx_obj, author, target, body, as_json):
    def go(ctx):
        entry = NoteEntry(author, target, body, datetime.now(timezone.utc))
        ctx.save_db(add_note(ctx.db, entry, ctx.schema))
        _emit(wire.note_to_wire(entry), as_json)

    _run(ctx_obj, go)


@main.group()
def refs():
    """Bibliographic references."""


@refs.command("list")
@click.option("--tag", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def refs_list(ctx_obj, tag, as_json):
    def go(ctx):
        payload = {"references": [wire.reference_to_wire(r) for r in list_references(ctx.db, tag)]}
        _emit(payload, as_json)

    _run(ctx_obj, go)


@refs.command("add")
@click.option("--id", "ref_id", required=True)
@click.option("--citation", required=True)
@click.option("--tag", "tags", multiple=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def refs_add(ctx_obj, ref_id, citation, tags, as_json):
    def go(ctx):
        ref = ReferenceEntry(ref_id, citation, frozenset(tags))
        ctx.save_db(add_reference(ctx.db, ref, ctx.schema))
        _emit(wire.reference_to_wire(ref), as_json)

    _run(ctx_obj, go)


@main.command()
@click.option("--direction", type=click.Choice(["pull", "push"]), required=True)
@click.option("--user", required=True)
@click.option("--subset", default=None, help="Comma-separated species names to track locally.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def sync(ctx_obj, direction, user, subset, as_json):
    """Pull a local knowledge-base subset or push staged contributions."""

    def go(ctx):
        from dataclasses import replace

        profiles = ctx.profiles
        profile = profiles.load(user)
        if subset is not None:
            profile = replace(profile, local_subset=frozenset(s.strip() for s in subset.split(",") if s.strip()))
        profile, db, report = agent.sync_local_subset(profile, ctx.db, direction, ctx.schema)
        ctx.save_db(db)
        profiles.save(profile)
        _emit(wire.sync_report_to_wire(report), as_json)

    _run(ctx_obj, go)


@main.command()
@click.option("--out", type=click.Path(), required=True)
@click.option("--selection", "selection_id", default=None, help="Export only this selection's species.")
@click.pass_obj
def export(ctx_obj, out, selection_id):
    """Write the database (or one selection) as tabular CSV."""

    def go(ctx):
        db = ctx.db
        if selection_id:
            result = ctx.store.load(selection_id)
            from dataclasses import replace

            db = replace(db, species={n: db.species[n] for n in result.matched if n in db.species})
        Path(out).write_text(export_tabular(db, ctx.schema), "utf-8")
        click.echo(f"wrote {out}")

    _run(ctx_obj, go)


@main.command()
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.pass_obj
def serve(ctx_obj, host, port, config_file):
    """Run the HTTP/JSON API service."""

    def go(ctx):
        from .service import ServiceConfig, serve as run_service

        if config_file:
            config = ServiceConfig.from_file(config_file, host=host, port=port)
        else:
            config = ServiceConfig(
                db_path=ctx.db_path,
                data_dir=str(ctx.data_dir),
                schema_path=ctx.schema_path,
                host=host or "127.0.0.1",
                port=port or 8571,
            )
        run_service(config)

    _run(ctx_obj, go)


if __name__ == "__main__":
    main()
