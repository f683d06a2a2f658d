"""Metadata index over every stored outcome, with conjunctive path queries.

The atlas is derived data: it is rebuilt from the store when attached and
then kept current by a store listener. Entries are typed by the leaf kind
the outcome's schema declares.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal

from .canon import Node, parse_ts
from .errors import QuerySyntaxError, TypeMismatch, UnknownPath
from .schema import ElementSpec, SchemaDef
from .store import ItemRef, ItemStore, Outcome

OPS = ("=", "!=", "<", "<=", ">", ">=", "contains")
ORDERED_KINDS = ("integer", "decimal", "timestamp")

Scalar = str | int | Decimal | bool | datetime


@dataclass(frozen=True)
class IndexEntry:
    item: ItemRef
    event_id: int
    schema: str
    schema_version: int
    path: str
    kind: str
    value: Scalar


def typed(kind: str, text: str) -> Scalar:
    if kind == "integer":
        return int(text)
    if kind == "decimal":
        return Decimal(text)
    if kind == "boolean":
        return text == "true"
    if kind == "timestamp":
        return parse_ts(text)
    return text


def _resolve(spec: ElementSpec, ancestors: tuple[ElementSpec, ...]) -> ElementSpec:
    if spec.ref is None:
        return spec
    target = next(a for a in reversed(ancestors) if a.name == spec.ref)
    return ElementSpec(spec.name, target.kind, spec.min_occurs, spec.max_occurs, target.children,
                       target.attributes, target.allowed_values)


def path_kind(defn: SchemaDef, path: str) -> str | None:
    """Scalar kind of the leaf at ``path`` in ``defn``, or None if it is not a leaf path."""
    parts = path.split("/")
    spec = defn.root
    if parts[0] != spec.name:
        return None
    ancestors: tuple[ElementSpec, ...] = ()
    for part in parts[1:]:
        if not spec.is_composite:
            return None
        ancestors += (spec,)
        child = next((c for c in spec.children if c.name == part), None)
        if child is None:
            return None
        spec = _resolve(child, ancestors)
    return None if spec.is_composite else spec.kind


def leaf_entries(outcome: Outcome, defn: SchemaDef) -> list[IndexEntry]:
    out: list[IndexEntry] = []

    def walk(n: Node, spec: ElementSpec, path: str, ancestors: tuple[ElementSpec, ...]) -> None:
        if not spec.is_composite:
            out.append(IndexEntry(outcome.item, outcome.event_id, outcome.schema, outcome.schema_version,
                                  path, spec.kind, typed(spec.kind, n.text)))
            return
        inner = ancestors + (spec,)
        for c in n.children:
            cs = next((s for s in spec.children if s.name == c.tag), None)
            if cs is not None:
                walk(c, _resolve(cs, inner), f"{path}/{c.tag}", inner)

    doc = outcome.tree
    if doc.tag == defn.root.name:
        walk(doc, defn.root, doc.tag, ())
    return out


# queries ----------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    kind: str  # string | number | boolean | timestamp
    text: str

    def render(self) -> str:
        if self.kind == "string":
            return '"' + self.text.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return self.text


@dataclass(frozen=True)
class Predicate:
    path: str
    op: str
    literal: Literal

    def render(self) -> str:
        return f"{self.path} {self.op} {self.literal.render()}"


@dataclass(frozen=True)
class Query:
    predicates: tuple[Predicate, ...] = ()
    schemas: tuple[str, ...] = ()
    types: tuple[str, ...] = ()


_NAME = r"[A-Za-z_][A-Za-z0-9_.\-]*"
_TOKENS = [
    ("schema", re.compile(r"schema=(" + _NAME + ")")),
    ("type", re.compile(r"type=(" + _NAME + ")")),
    ("path", re.compile(_NAME + r"(?:/" + _NAME + r")*")),
]
_OP_RE = re.compile(r"\s*(!=|<=|>=|=|<|>|\scontains\s)\s*")
_LIT_RES = [
    ("timestamp", re.compile(r"[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}\.[0-9]{3}Z")),
    ("number", re.compile(r"-?[0-9]+(?:\.[0-9]+)?(?![0-9A-Za-z_.])")),
    ("boolean", re.compile(r"(?:true|false)(?![A-Za-z0-9_])")),
]


def _string_literal(text: str, pos: int) -> tuple[Literal, int]:
    i = pos + 1
    buf = []
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in '"\\':
                raise QuerySyntaxError(i, "invalid escape in string literal")
            buf.append(text[i + 1])
            i += 2
        elif ch == '"':
            return Literal("string", "".join(buf)), i + 1
        else:
            buf.append(ch)
            i += 1
    raise QuerySyntaxError(pos, "unterminated string literal")


def parse_query(text: str) -> Query:
    """Parse ``clause (" and " clause)*``; raises :class:`QuerySyntaxError` with an offset."""
    if not text.strip():
        raise QuerySyntaxError(0, "empty query")
    preds, schemas, types = [], [], []
    pos = 0
    while True:
        start = pos
        if text.startswith("schema=", pos):
            m = _TOKENS[0][1].match(text, pos)
            if not m:
                raise QuerySyntaxError(pos + 7, "schema name expected")
            schemas.append(m.group(1))
            pos = m.end()
        elif text.startswith("type=", pos):
            m = _TOKENS[1][1].match(text, pos)
            if not m:
                raise QuerySyntaxError(pos + 5, "type name expected")
            types.append(m.group(1))
            pos = m.end()
        else:
            m = _TOKENS[2][1].match(text, pos)
            if not m:
                raise QuerySyntaxError(pos, "path expected")
            path = m.group(0)
            pos = m.end()
            op_m = _OP_RE.match(text, pos)
            if not op_m:
                raise QuerySyntaxError(pos, "operator expected")
            op = op_m.group(1).strip()
            pos = op_m.end()
            if pos < len(text) and text[pos] == '"':
                lit, pos = _string_literal(text, pos)
            else:
                for kind, rx in _LIT_RES:
                    lm = rx.match(text, pos)
                    if lm:
                        lit, pos = Literal(kind, lm.group(0)), lm.end()
                        break
                else:
                    raise QuerySyntaxError(pos, "literal expected")
            preds.append(Predicate(path, op, lit))
        if pos == len(text):
            break
        if not text.startswith(" and ", pos):
            raise QuerySyntaxError(pos, f"' and ' expected after clause at {start}")
        pos += 5
    return Query(tuple(preds), tuple(schemas), tuple(types))


def print_query(q: Query) -> str:
    clauses = [f"schema={s}" for s in q.schemas] + [f"type={t}" for t in q.types]
    clauses += [p.render() for p in q.predicates]
    return " and ".join(clauses)


def coerce(literal: Literal, kind: str, op: str) -> Scalar:
    """Convert ``literal`` to the value space of a leaf of ``kind`` or raise TypeMismatch."""
    if kind == "string":
        return literal.text
    if kind in ("integer", "decimal") and literal.kind == "number":
        return Decimal(literal.text)
    if kind == "boolean" and literal.kind == "boolean":
        return literal.text == "true"
    if kind == "timestamp" and literal.kind in ("timestamp", "string"):
        try:
            return parse_ts(literal.text)
        except ValueError:
            pass
    raise TypeMismatch(op, f"{kind} (literal {literal.render()})")


def matches(op: str, value: Scalar, target: Scalar) -> bool:
    if op == "contains":
        return target in value
    if op == "=":
        return value == target
    if op == "!=":
        return value != target
    if op == "<":
        return value < target
    if op == "<=":
        return value <= target
    if op == ">":
        return value > target
    return value >= target


class DataAtlas:
    """Index of leaf values of every outcome in ``store``."""

    def __init__(self, store: ItemStore | None = None) -> None:
        self.store = store
        self._entries: dict[tuple[ItemRef, int], list[IndexEntry]] = {}
        self._lock = threading.Lock()
        if store is not None:
            self.attach(store)

    def attach(self, store: ItemStore) -> None:
        self.store = store
        for o in store.outcomes():
            self.index_outcome(o)
        store.subscribe(self.index_outcome)

    def index_outcome(self, outcome: Outcome) -> int:
        """Add entries for every leaf of ``outcome``; idempotent per (item, event)."""
        key = (outcome.item, outcome.event_id)
        with self._lock:
            if key in self._entries:
                return 0
            defn = self.store.registry.get(outcome.schema, outcome.schema_version)
            entries = leaf_entries(outcome, defn)
            self._entries[key] = entries
            return len(entries)

    def entries(self) -> list[IndexEntry]:
        with self._lock:
            return [e for key in sorted(self._entries) for e in self._entries[key]]

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def check(self, q: Query) -> dict[int, dict[str, Scalar]]:
        """Type-check ``q``; returns the literal coerced per leaf kind for each predicate."""
        names = list(q.schemas) if q.schemas else self.store.registry.names()
        defs = [d for n in names if n in self.store.registry for d in self.store.registry.versions(n)]
        coerced: dict[int, dict[str, Scalar]] = {}
        for i, p in enumerate(q.predicates):
            kinds = sorted({k for d in defs if (k := path_kind(d, p.path)) is not None})
            if not kinds:
                raise UnknownPath(",".join(q.schemas) or None, p.path)
            coerced[i] = {}
            for kind in kinds:
                if p.op == "contains" and kind != "string":
                    raise TypeMismatch(p.op, kind)
                if p.op in ("<", "<=", ">", ">=") and kind not in ORDERED_KINDS:
                    raise TypeMismatch(p.op, kind)
                coerced[i][kind] = coerce(p.literal, kind, p.op)
        return coerced

    def query(self, q: Query | str) -> list[tuple[ItemRef, int, str]]:
        """Outcomes satisfying every clause, sorted by (item uuid, event id)."""
        if isinstance(q, str):
            q = parse_query(q)
        coerced = self.check(q)
        with self._lock:
            snapshot = sorted(self._entries.items())
        hits = []
        for (item, eid), entries in snapshot:
            outcome = self.store.items[item].outcomes[eid]
            if q.schemas and any(outcome.schema != s for s in q.schemas):
                continue
            if q.types and any(self.store.items[item].type != t for t in q.types):
                continue
            if all(self._satisfied(entries, p, coerced[i]) for i, p in enumerate(q.predicates)):
                hits.append((item, eid, outcome.schema))
        return hits

    @staticmethod
    def _satisfied(entries: list[IndexEntry], p: Predicate, targets: dict[str, Scalar]) -> bool:
        for e in entries:
            if e.path != p.path or e.kind not in targets:
                continue
            value = Decimal(e.value) if e.kind == "integer" else e.value
            if matches(p.op, value, targets[e.kind]):
                return True
        return False

    def results_node(self, hits: list[tuple[ItemRef, int, str]]) -> Node:
        n = Node("QueryResult", {"count": str(len(hits))})
        for item, eid, schema in hits:
            n.add("Hit", item=item, event=str(eid), schema=schema)
        return n


def rebuild(store: ItemStore) -> DataAtlas:
    """A fresh atlas over the current store contents (not subscribed)."""
    atlas = DataAtlas()
    atlas.store = store
    for o in store.outcomes():
        atlas.index_outcome(o)
    return atlas
