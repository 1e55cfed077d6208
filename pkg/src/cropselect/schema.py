"""Criteria-taxonomy model and its brace-format text DSL.

A taxonomy document looks like::

    {Select}
      {Ecology}
        {Precipitation(<60|601-900|901-1200|1201-1500|> 1500)}
        ...
      {Avoid Susceptibility}
        {Diseases(Anthracnose|...)}
    {/Select}

Groups nest directly under ``{Select}``; each property carries its ordered
option scale in a trailing parenthesis group, options separated by ``|``.
Whitespace around labels is trimmed; everything else inside a label is kept
byte-exact.

Two extensions over the bare brace format:

* lines starting with ``#`` are comments and are ignored;
* lines starting with ``#%`` are metadata directives (``version``,
  ``ordinal``, ``negative``, ``explicit``).  ``serialize_schema`` always
  emits them so arbitrary schemas round-trip; documents without directives
  fall back to a built-in registry of known ordinal properties and the
  "Avoid" group-name rule for polarity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources

from .errors import NotFoundError, SchemaSyntaxError

#: Option labels whose selection satisfies a criterion trivially.
WILDCARD_LABELS = frozenset({"Any one", "Not relevant"})

#: Qualified names of properties with an ordered scale in the default
#: taxonomy; used when a document carries no kind directives.
DEFAULT_ORDINAL_PROPERTIES = frozenset(
    {
        "Ecology.Precipitation",
        "Ecology.Altitude range",
        "Ecology.Temperature range",
        "Ecology.Drought risk",
        "Ecology.Ph-range",
        "Ecology.Fertility range",
        "Ecology.Water logging",
        "System niche.Life cycle",
        "System niche.Initial growth",
        "System niche.Productive growth",
        "USE.Vegetable for human nutrition",
        "USE.Grain for human nutrition",
        "USE.Fodder (green)",
        "USE.Hay for livestock",
    }
)


class Kind(enum.Enum):
    ORDINAL = "ordinal"
    CATEGORICAL = "categorical"


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class OptionLabel:
    label: str
    index: int


@dataclass(frozen=True)
class Property:
    name: str
    kind: Kind
    scale: tuple[OptionLabel, ...]
    wildcard_labels: frozenset[str] = field(default_factory=frozenset)

    def labels(self) -> list[str]:
        return [o.label for o in self.scale]

    def index_of(self, label: str) -> int:
        for opt in self.scale:
            if opt.label == label:
                return opt.index
        raise NotFoundError(f"option {label!r} not in scale of {self.name!r}")


@dataclass(frozen=True)
class Group:
    name: str
    polarity: Polarity
    properties: tuple[Property, ...]


@dataclass(frozen=True)
class CriteriaSchema:
    groups: tuple[Group, ...]
    version: str = "1"

    def qualified_properties(self) -> list[tuple[str, Group, Property]]:
        """(qualified name, group, property) triples in document order."""
        out = []
        for group in self.groups:
            for prop in group.properties:
                out.append((f"{group.name}.{prop.name}", group, prop))
        return out

    def property_names(self) -> list[str]:
        return [q for q, _, _ in self.qualified_properties()]


def _edit_distance(a: str, b: str) -> int:
    if abs(len(a) - len(b)) > 2:
        return 3
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lookup_property(schema: CriteriaSchema, qualified_name: str) -> tuple[Group, Property]:
    """Resolve "Group.Property"; NotFound carries near-miss suggestions."""
    for qualified, group, prop in schema.qualified_properties():
        if qualified == qualified_name:
            return group, prop
    suggestions = [
        q for q in schema.property_names() if _edit_distance(q.lower(), qualified_name.lower()) <= 2
    ]
    raise NotFoundError(f"no property named {qualified_name!r}", suggestions)


# ---------------------------------------------------------------------------
# Parsing


class _Directives:
    def __init__(self):
        self.version: str | None = None
        self.ordinal: set[str] = set()
        self.negative: set[str] = set()
        self.explicit = False


def _strip_comments(text: str) -> tuple[str, _Directives]:
    """Remove comment lines, collecting ``#%`` directives.

    Comment lines are replaced by empty lines so error positions in the
    remaining document keep their original line numbers.
    """
    directives = _Directives()
    out_lines = []
    for lineno, line in enumerate(text.split("\n"), 1):
        stripped = line.lstrip()
        if stripped.startswith("#%"):
            body = stripped[2:].strip()
            if body.startswith("version "):
                directives.version = body[len("version ") :].strip()
            elif body.startswith("ordinal "):
                directives.ordinal.add(body[len("ordinal ") :].strip())
                directives.explicit = True
            elif body.startswith("negative "):
                directives.negative.add(body[len("negative ") :].strip())
            elif body == "explicit":
                directives.explicit = True
            else:
                raise SchemaSyntaxError(f"unknown directive {body.split(' ')[0]!r}", lineno, 1)
            out_lines.append("")
        elif stripped.startswith("#"):
            out_lines.append("")
        else:
            out_lines.append(line)
    return "\n".join(out_lines), directives


@dataclass
class _Token:
    content: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    depth_open: tuple[int, int] | None = None
    buf: list[str] = []
    tok_pos = (1, 1)
    while i < len(text):
        ch = text[i]
        if ch == "{":
            if depth_open is not None:
                raise SchemaSyntaxError("unexpected '{' inside token", line, col)
            depth_open = (line, col)
            tok_pos = (line, col)
            buf = []
        elif ch == "}":
            if depth_open is None:
                raise SchemaSyntaxError("unbalanced '}'", line, col)
            tokens.append(_Token("".join(buf), tok_pos[0], tok_pos[1]))
            depth_open = None
        elif depth_open is not None:
            buf.append(ch)
        elif not ch.isspace():
            raise SchemaSyntaxError(f"stray text {ch!r} outside braces", line, col)
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1
        i += 1
    if depth_open is not None:
        raise SchemaSyntaxError("unbalanced '{'", depth_open[0], depth_open[1])
    return tokens


def _split_property(tok: _Token) -> tuple[str, list[str]] | None:
    """Split a token into (name, option labels); None if it is a group."""
    content = tok.content.rstrip()
    if not content.endswith(")"):
        if "(" in content or ")" in content:
            raise SchemaSyntaxError("unbalanced parentheses in token", tok.line, tok.column)
        return None
    # The option list is the final balanced paren group; the name may itself
    # contain parens (e.g. "Fodder (green)").
    depth = 0
    for i in range(len(content) - 1, -1, -1):
        if content[i] == ")":
            depth += 1
        elif content[i] == "(":
            depth -= 1
            if depth == 0:
                name = content[:i].strip()
                inner = content[i + 1 : -1]
                if not name:
                    raise SchemaSyntaxError("property with empty name", tok.line, tok.column)
                labels = [part.strip() for part in inner.split("|")]
                return name, labels
    raise SchemaSyntaxError("unbalanced parentheses in token", tok.line, tok.column)


def parse_schema(text: str) -> CriteriaSchema:
    """Parse a taxonomy document into a CriteriaSchema.

    Raises SchemaSyntaxError (with line/column) for unbalanced braces,
    empty option lists, duplicate names, or structure violations.
    """
    body, directives = _strip_comments(text)
    tokens = _tokenize(body)
    if not tokens or tokens[0].content.strip() != "Select":
        pos = tokens[0] if tokens else _Token("", 1, 1)
        raise SchemaSyntaxError("document must open with {Select}", pos.line, pos.column)
    if tokens[-1].content.strip() != "/Select":
        raise SchemaSyntaxError("document must close with {/Select}", tokens[-1].line, tokens[-1].column)

    groups: list[Group] = []
    group_names: set[str] = set()
    cur_name: str | None = None
    cur_props: list[Property] = []
    cur_prop_names: set[str] = set()

    def flush_group(tok: _Token):
        nonlocal cur_name, cur_props, cur_prop_names
        if cur_name is None:
            return
        if not cur_props:
            raise SchemaSyntaxError(f"group {cur_name!r} has no properties", tok.line, tok.column)
        groups.append(Group(cur_name, Polarity.POSITIVE, tuple(cur_props)))
        cur_name, cur_props, cur_prop_names = None, [], set()

    for tok in tokens[1:-1]:
        split = _split_property(tok)
        if split is None:
            name = tok.content.strip()
            if name.startswith("/"):
                raise SchemaSyntaxError(f"unexpected closing token {name!r}", tok.line, tok.column)
            if not name:
                raise SchemaSyntaxError("group with empty name", tok.line, tok.column)
            flush_group(tok)
            if name in group_names:
                raise SchemaSyntaxError(f"duplicate group name {name!r}", tok.line, tok.column)
            group_names.add(name)
            cur_name = name
        else:
            prop_name, labels = split
            if cur_name is None:
                raise SchemaSyntaxError(
                    f"property {prop_name!r} appears before any group", tok.line, tok.column
                )
            if prop_name in cur_prop_names:
                raise SchemaSyntaxError(f"duplicate property name {prop_name!r}", tok.line, tok.column)
            if labels == [""]:
                raise SchemaSyntaxError(f"property {prop_name!r} has an empty option list", tok.line, tok.column)
            seen: set[str] = set()
            for label in labels:
                if not label:
                    raise SchemaSyntaxError(f"empty option label in {prop_name!r}", tok.line, tok.column)
                if label in seen:
                    raise SchemaSyntaxError(f"duplicate option {label!r} in {prop_name!r}", tok.line, tok.column)
                seen.add(label)
            cur_prop_names.add(prop_name)
            qualified = f"{cur_name}.{prop_name}"
            if directives.explicit:
                kind = Kind.ORDINAL if qualified in directives.ordinal else Kind.CATEGORICAL
            else:
                kind = Kind.ORDINAL if qualified in DEFAULT_ORDINAL_PROPERTIES else Kind.CATEGORICAL
            cur_props.append(
                Property(
                    name=prop_name,
                    kind=kind,
                    scale=tuple(OptionLabel(lbl, i) for i, lbl in enumerate(labels)),
                    wildcard_labels=frozenset(lbl for lbl in labels if lbl in WILDCARD_LABELS),
                )
            )
    flush_group(tokens[-1])
    if not groups:
        raise SchemaSyntaxError("schema has no groups", tokens[-1].line, tokens[-1].column)

    resolved = []
    for group in groups:
        if directives.negative:
            polarity = Polarity.NEGATIVE if group.name in directives.negative else Polarity.POSITIVE
        else:
            polarity = Polarity.NEGATIVE if group.name.startswith("Avoid") else Polarity.POSITIVE
        resolved.append(Group(group.name, polarity, group.properties))
    return CriteriaSchema(tuple(resolved), version=directives.version or "1")


def serialize_schema(schema: CriteriaSchema) -> str:
    """Render a schema back to DSL text; parse(serialize(s)) == s."""
    lines = [f"#% version {schema.version}", "#% explicit"]
    for group in schema.groups:
        if group.polarity is Polarity.NEGATIVE:
            lines.append(f"#% negative {group.name}")
        for prop in group.properties:
            if prop.kind is Kind.ORDINAL:
                lines.append(f"#% ordinal {group.name}.{prop.name}")
    lines.append("{Select}")
    for group in schema.groups:
        lines.append(f"  {{{group.name}}}")
        for prop in group.properties:
            opts = "|".join(prop.labels())
            lines.append(f"    {{{prop.name}({opts})}}")
    lines.append("{/Select}")
    return "\n".join(lines) + "\n"


def load_default_schema() -> CriteriaSchema:
    """Parse the taxonomy document shipped with the package."""
    text = resources.files("cropselect.data").joinpath("default.schema").read_text("utf-8")
    return parse_schema(text)


def default_schema_path() -> str:
    return str(resources.files("cropselect.data").joinpath("default.schema"))
