"""Append-only, event-sourced item store.

Every change is written to the journal (one canonical XML record per line)
before it becomes visible, and the in-memory state is exactly what replaying
the journal produces. Nothing is ever rewritten or deleted.
"""

from __future__ import annotations

import os
import threading
import uuid as uuidlib
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

from . import builtins
from .canon import Node, SystemClock, parse, to_canonical
from .errors import (
    CorruptJournal,
    CristalError,
    DuplicateProperty,
    DuplicateUuid,
    ImmutableProperty,
    MalformedXml,
    OutcomeWithoutEvent,
    RoleDenied,
    UnknownCollection,
    UnknownItem,
    UnknownProperty,
    UnknownSlot,
    UnknownTarget,
    UnknownViewpoint,
    WrongTargetType,
)
from .schema import SchemaDef, SchemaRegistry, schema_from_node
from .scripts import Context, Script, ScriptRegistry, evaluate_predicate_script
from .workflow import (
    COMPLETED,
    DONE,
    RESERVED_ACTIVITY,
    WAITING,
    WorkflowDef,
    WorkflowInstance,
    workflow_from_node,
)

ItemRef = str
MAINTENANCE = RESERVED_ACTIVITY


def canonical_uuid(value: str) -> str:
    try:
        canon = str(uuidlib.UUID(value))
    except (ValueError, AttributeError, TypeError):
        raise UnknownItem(f"not a UUID: {value!r}") from None
    return canon


@dataclass(frozen=True)
class Agent:
    """A human or computational actor and the roles it holds."""

    name: str
    roles: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "roles", frozenset(self.roles))

    def pick_role(self, role: str | None = None) -> str:
        if role is not None:
            if role not in self.roles:
                raise RoleDenied(",".join(sorted(self.roles)), role)
            return role
        return min(self.roles) if self.roles else ""


@dataclass(frozen=True)
class Event:
    id: int
    item: ItemRef
    activity: str
    prev: str
    target: str
    transition: str
    schema: str | None
    schema_version: int | None
    agent: str
    role: str
    ts: str

    def to_node(self) -> Node:
        attrs = {
            "id": str(self.id), "item": self.item, "activity": self.activity,
            "prev": self.prev, "target": self.target, "transition": self.transition,
        }
        if self.schema is not None:
            attrs["schema"] = self.schema
            attrs["schemaVersion"] = str(self.schema_version)
        attrs.update(agent=self.agent, role=self.role, ts=self.ts)
        return Node("Event", attrs)

    @classmethod
    def from_node(cls, n: Node) -> Event:
        a = n.attrs
        schema = a.get("schema")
        return cls(
            int(a["id"]), a["item"], a["activity"], a["prev"], a["target"], a["transition"],
            schema, int(a["schemaVersion"]) if schema is not None else None,
            a["agent"], a["role"], a["ts"],
        )


@dataclass(frozen=True)
class Outcome:
    item: ItemRef
    event_id: int
    schema: str
    schema_version: int
    document: str  # canonical XML

    @cached_property
    def tree(self) -> Node:
        return parse(self.document)

    def leaf(self, path: str) -> str:
        """Text of the first element at slash-separated ``path`` (root included)."""
        parts = path.strip("/").split("/")
        node = self.tree
        if not parts or parts[0] != node.tag:
            return ""
        for part in parts[1:]:
            node = node.child(part)
            if node is None:
                return ""
        return node.text


@dataclass(frozen=True)
class Property:
    name: str
    value: str
    mutable: bool = True


@dataclass
class Collection:
    name: str
    slots: list[ItemRef | None]
    type: str | None = None


@dataclass
class ItemState:
    uuid: ItemRef
    created: str
    desc: tuple[ItemRef, int] | None = None
    properties: dict[str, Property] = field(default_factory=dict)
    collections: dict[str, Collection] = field(default_factory=dict)
    workflow: WorkflowInstance | None = None
    workflow_ref: tuple[ItemRef, int] | None = None
    events: list[Event] = field(default_factory=list)
    outcomes: dict[int, Outcome] = field(default_factory=dict)
    viewpoints: dict[tuple[str, str], int] = field(default_factory=dict)
    requests: dict[int, str] = field(default_factory=dict)
    triggers: dict[int, int | None] = field(default_factory=dict)
    used: dict[int, tuple[tuple[ItemRef, int], ...]] = field(default_factory=dict)

    @property
    def event_count(self) -> int:
        return len(self.events)

    @property
    def type(self) -> str:
        p = self.properties.get("Type")
        return p.value if p else ""

    def clone(self) -> ItemState:
        return ItemState(
            self.uuid, self.created, self.desc, dict(self.properties),
            {k: Collection(c.name, list(c.slots), c.type) for k, c in self.collections.items()},
            self.workflow.clone() if self.workflow else None, self.workflow_ref,
            list(self.events), dict(self.outcomes), dict(self.viewpoints), dict(self.requests),
            dict(self.triggers), dict(self.used),
        )

    def viewpoint_names(self, schema: str) -> list[str]:
        return [v for (s, v) in self.viewpoints if s == schema]


def _new_uuid(store: ItemStore) -> ItemRef:
    return str(uuidlib.uuid4())


def sequential_uuids(namespace: str = "cristal") -> Callable[[ItemStore], ItemRef]:
    """Deterministic uuid factory derived from the journal position."""
    ns = uuidlib.uuid5(uuidlib.NAMESPACE_URL, namespace)

    def make(store: ItemStore) -> ItemRef:
        return str(uuidlib.uuid5(ns, f"{len(store.journal)}:{len(store.items)}"))

    return make


class _Apply:
    """Applies journal records to item states.

    In staged mode (live writes) item states are cloned on first touch and
    global records are deferred, so a failing batch leaves the store untouched.
    """

    def __init__(self, store: ItemStore, staged: bool) -> None:
        self.store = store
        self.staged = staged
        self.touched: dict[ItemRef, ItemState] = {}
        self.schemas: list[SchemaDef] = []
        self.scripts: list[Script] = []
        self.pending: tuple[ItemRef, Event] | None = None
        self.new_outcomes: list[Outcome] = []
        self.items: list[ItemRef | None] = []

    # lookups

    def lookup(self, ref: ItemRef) -> ItemState | None:
        if ref in self.touched:
            return self.touched[ref]
        return self.store.items.get(ref)

    def writable(self, ref: ItemRef) -> ItemState:
        if ref in self.touched:
            return self.touched[ref]
        live = self.store.items.get(ref)
        if live is None:
            raise UnknownItem(ref)
        state = live.clone() if self.staged else live
        self.touched[ref] = state
        return state

    # dispatch

    def record(self, rec: Node) -> None:
        if self.pending is not None and rec.tag != "Outcome":
            raise CorruptJournal(0, f"event {self.pending[1].id} of {self.pending[0]} lacks its Outcome")
        handler = getattr(self, f"_{rec.tag}", None)
        if handler is None:
            raise CorruptJournal(0, f"unknown record <{rec.tag}>")
        self.items.append(handler(rec))

    def finish(self) -> None:
        if self.pending is not None:
            raise CorruptJournal(0, f"event {self.pending[1].id} of {self.pending[0]} lacks its Outcome")

    def _SchemaRegistered(self, rec: Node) -> None:
        defn = schema_from_node(rec.children[0])
        expected = self.store.registry.next_version(defn.name) + sum(d.name == defn.name for d in self.schemas)
        if defn.version != expected or int(rec.attrs["version"]) != expected or rec.attrs["name"] != defn.name:
            raise CorruptJournal(0, f"schema {defn.name} version {defn.version} out of sequence")
        if self.staged:
            self.schemas.append(defn)
        else:
            self.store.registry.add(defn)
        return None

    def _ScriptRegistered(self, rec: Node) -> None:
        script = Script(rec.attrs["name"], int(rec.attrs["version"]), rec.text)
        expected = self.store.scripts.next_version(script.name) + sum(s.name == script.name for s in self.scripts)
        if script.version != expected:
            raise CorruptJournal(0, f"script {script.name} version {script.version} out of sequence")
        if self.staged:
            self.scripts.append(script)
        else:
            self.store.scripts.add(script)
        return None

    def _ItemCreated(self, rec: Node) -> ItemRef:
        ref = rec.attrs["uuid"]
        if self.lookup(ref) is not None:
            raise DuplicateUuid(ref)
        desc = (rec.attrs["desc"], int(rec.attrs["descVersion"])) if "desc" in rec.attrs else None
        state = ItemState(ref, rec.attrs["ts"], desc)
        for c in rec.children:
            if c.tag == "Property":
                state.properties[c.attrs["name"]] = Property(
                    c.attrs["name"], c.attrs["value"], c.attrs["mutable"] == "true")
            elif c.tag == "Collection":
                state.collections[c.attrs["name"]] = Collection(
                    c.attrs["name"], [None] * int(c.attrs["slots"]), c.attrs.get("type"))
            else:
                raise CorruptJournal(0, f"unexpected <{c.tag}> in ItemCreated")
        self.touched[ref] = state
        return ref

    def _WorkflowAssigned(self, rec: Node) -> ItemRef:
        ref = rec.attrs["item"]
        state = self.writable(ref)
        if state.workflow is not None:
            raise CorruptJournal(0, f"{ref} already has a workflow")
        definition = workflow_from_node(rec.children[0])
        if "desc" in rec.attrs:
            state.workflow_ref = (rec.attrs["desc"], int(rec.attrs["version"]))
        state.workflow = WorkflowInstance.start(definition, self.store._predicate(state, self.lookup))
        return ref

    def _AmendRequest(self, rec: Node) -> ItemRef:
        ref = rec.attrs["item"]
        state = self.writable(ref)
        state.requests[int(rec.attrs["event"])] = to_canonical(rec.children[0])
        return ref

    def _Event(self, rec: Node) -> ItemRef:
        event = Event.from_node(rec)
        state = self.writable(event.item)
        if event.id != len(state.events):
            raise CorruptJournal(0, f"event id {event.id} of {event.item}, expected {len(state.events)}")
        state.events.append(event)
        if event.activity != MAINTENANCE:
            if state.workflow is None:
                raise CorruptJournal(0, f"event on {event.item} which has no workflow")
            inst = state.workflow
            inst.apply(event.activity, event.prev, event.target, event.transition)
            if event.prev == WAITING:
                state.triggers[event.id] = inst.enabled_by.get(event.activity)
            if event.target == COMPLETED:
                state.used[event.id] = self.store._resolve_inputs(
                    state, inst.activity(event.activity), self.lookup)
        elif event.schema is None:
            raise CorruptJournal(0, "maintenance event without outcome")
        if event.schema is not None:
            self.pending = (event.item, event)
        else:
            self._settle(state, event)
        return event.item

    def _Outcome(self, rec: Node) -> ItemRef:
        ref, eid = rec.attrs["item"], int(rec.attrs["event"])
        if self.pending is None or self.pending[0] != ref or self.pending[1].id != eid:
            raise OutcomeWithoutEvent(0, f"outcome for event {eid} of {ref} does not follow its event")
        if len(rec.children) != 1:
            raise CorruptJournal(0, "outcome must hold exactly one document")
        event = self.pending[1]
        self.pending = None
        state = self.writable(ref)
        outcome = Outcome(ref, eid, event.schema, event.schema_version, to_canonical(rec.children[0]))
        state.outcomes[eid] = outcome
        numbered = sum(1 for o in state.outcomes.values() if o.schema == event.schema) - 1
        state.viewpoints[(event.schema, str(numbered))] = eid
        state.viewpoints[(event.schema, "last")] = eid
        self.new_outcomes.append(outcome)
        if event.activity == MAINTENANCE:
            self._maintenance(state, outcome)
        else:
            self._settle(state, event)
        return ref

    def _maintenance(self, state: ItemState, outcome: Outcome) -> None:
        doc = outcome.tree
        if outcome.schema == "PropertyChange":
            name, new = doc.child("Name").text, doc.child("New").text
            old = state.properties.get(name)
            state.properties[name] = Property(name, new, True) if old is None else replace(old, value=new)
        elif outcome.schema == "CollectionChange":
            coll = state.collections[doc.child("Collection").text]
            coll.slots[int(doc.child("Slot").text)] = doc.child("New").text or None
        else:
            raise CorruptJournal(0, f"unexpected maintenance outcome schema {outcome.schema}")

    def _settle(self, state: ItemState, event: Event) -> None:
        if event.activity == MAINTENANCE:
            return
        state.workflow.settle(self.store._predicate(state, self.lookup), event.id)


class ItemStore:
    """Repository of items backed by an append-only journal.

    ``path`` is optional: without it the journal lives only in memory
    (``store.journal``). ``clock`` supplies event timestamps and
    ``id_factory`` new item uuids.
    """

    def __init__(self, path: str | os.PathLike | None = None, clock=None,
                 id_factory: Callable[[ItemStore], ItemRef] | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.clock = clock or SystemClock()
        self.id_factory = id_factory or _new_uuid
        self.registry = SchemaRegistry()
        self.scripts = ScriptRegistry()
        for s in builtins.BUILTIN_SCHEMAS:
            self.registry.add(s)
        for sc in builtins.BUILTIN_SCRIPTS:
            self.scripts.add(sc)
        self.items: dict[ItemRef, ItemState] = {}
        self.journal: list[str] = []
        self.record_items: list[ItemRef | None] = []
        self._listeners: list[Callable[[Outcome], None]] = []
        self._lock = threading.RLock()

    # journal --------------------------------------------------------------

    @classmethod
    def load(cls, path: str | os.PathLike, clock=None, id_factory=None, create: bool = True) -> ItemStore:
        """Replay the journal at ``path``; later writes append to the same file."""
        store = cls(None, clock, id_factory)
        p = Path(path)
        if p.exists():
            data = p.read_bytes()
            store._replay_bytes(data)
        elif not create:
            raise FileNotFoundError(p)
        store.path = p
        return store

    def _replay_bytes(self, data: bytes) -> None:
        if not data:
            return
        lines = data.split(b"\n")
        if lines[-1] != b"":
            offset = len(data) - len(lines[-1])
            raise CorruptJournal(len(lines), "torn final record (no line terminator)", offset)
        lines.pop()
        applier = _Apply(self, staged=False)
        for number, raw in enumerate(lines, 1):
            try:
                text = raw.decode("utf-8")
                rec = parse(text)
                applier.record(rec)
            except OutcomeWithoutEvent as exc:
                raise OutcomeWithoutEvent(number, exc.reason) from None
            except CorruptJournal as exc:
                raise CorruptJournal(number, exc.reason) from None
            except (CristalError, MalformedXml, KeyError, ValueError, IndexError, AttributeError) as exc:
                raise CorruptJournal(number, f"{type(exc).__name__}: {exc}") from None
            self.journal.append(text)
            for ref, state in applier.touched.items():
                self.items[ref] = state
            applier.touched.clear()
        self.record_items.extend(applier.items)
        try:
            applier.finish()
        except CorruptJournal as exc:
            raise CorruptJournal(len(lines), exc.reason) from None
        for o in applier.new_outcomes:
            self._notify(o)

    def append_journal(self, *records: Node | str) -> None:
        """Apply and durably append raw records as one atomic batch."""
        nodes = [parse(r) if isinstance(r, str) else r for r in records]
        self.commit(nodes)

    def commit(self, records: list[Node]) -> None:
        with self._lock:
            applier = _Apply(self, staged=True)
            for rec in records:
                applier.record(rec)
            applier.finish()
            lines = [to_canonical(r) for r in records]
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write("".join(line + "\n" for line in lines))
                    fh.flush()
            self.journal.extend(lines)
            self.record_items.extend(applier.items)
            for defn in applier.schemas:
                self.registry.add(defn)
            for script in applier.scripts:
                self.scripts.add(script)
            self.items.update(applier.touched)
            for o in applier.new_outcomes:
                self._notify(o)

    def preview(self, records: list[Node]) -> dict[ItemRef, ItemState]:
        """States of the items ``records`` would touch, without writing anything."""
        with self._lock:
            applier = _Apply(self, staged=True)
            for rec in records:
                applier.record(rec)
            return applier.touched

    def subscribe(self, listener: Callable[[Outcome], None]) -> None:
        self._listeners.append(listener)

    def _notify(self, outcome: Outcome) -> None:
        for fn in self._listeners:
            fn(outcome)

    # helpers used by the lifecycle engine --------------------------------

    def state(self, ref: ItemRef) -> ItemState:
        try:
            return self.items[ref]
        except KeyError:
            raise UnknownItem(ref) from None

    def context(self, state: ItemState, lookup=None, request: str | None = None) -> Context:
        lookup = lookup or self.items.get

        def prop(name: str) -> str:
            p = state.properties.get(name)
            return p.value if p else ""

        def field_(schema: str, view: str, path: str) -> str:
            eid = state.viewpoints.get((schema, view))
            return "" if eid is None else state.outcomes[eid].leaf(path)

        def input_(collection: str, slot: int, schema: str, path: str) -> str:
            target = self._slot_target(state, collection, slot)
            if target is None:
                return ""
            other = lookup(target)
            eid = other.viewpoints.get((schema, "last")) if other else None
            return "" if eid is None else other.outcomes[eid].leaf(path)

        return Context(prop, field_, input_)

    def _slot_target(self, state: ItemState, collection: str, slot: int) -> ItemRef | None:
        from .errors import EvaluationError
        coll = state.collections.get(collection)
        if coll is None:
            raise EvaluationError(f"{collection}[{slot}]", "no such collection")
        if not 0 <= slot < len(coll.slots):
            raise EvaluationError(f"{collection}[{slot}]", "no such slot")
        return coll.slots[slot]

    def _predicate(self, state: ItemState, lookup):
        def predicate(name: str, version: int) -> bool:
            script = self.scripts.get(name, version)
            return evaluate_predicate_script(script, self.context(state, lookup))
        return predicate

    def _resolve_inputs(self, state: ItemState, activity, lookup) -> tuple[tuple[ItemRef, int], ...]:
        out = []
        for decl in activity.inputs:
            coll = state.collections.get(decl.collection)
            if coll is None or not 0 <= decl.slot < len(coll.slots) or coll.slots[decl.slot] is None:
                continue
            other = lookup(coll.slots[decl.slot])
            eid = other.viewpoints.get((decl.schema, "last")) if other else None
            if eid is not None:
                out.append((other.uuid, eid))
        return tuple(out)

    # item operations ------------------------------------------------------

    def create_item(self, uuid: str | None = None, properties: Iterable = (), *,
                    collections: Iterable = (), desc: tuple[ItemRef, int] | None = None) -> ItemRef:
        """Create an item; creation is journaled but is not an event.

        ``properties`` holds :class:`Property` or ``(name, value, mutable)``
        tuples, ``collections`` ``(name, slot_count, allowed_type)`` tuples.
        """
        with self._lock:
            ref = canonical_uuid(uuid) if uuid is not None else self.id_factory(self)
            if ref in self.items:
                raise DuplicateUuid(ref)
            rec = self.creation_record(ref, properties, collections, desc)
            self.commit([rec])
            return ref

    def creation_record(self, ref: ItemRef, properties: Iterable = (), collections: Iterable = (),
                        desc: tuple[ItemRef, int] | None = None) -> Node:
        attrs = {"uuid": ref, "ts": self.clock.now()}
        if desc is not None:
            attrs["desc"], attrs["descVersion"] = desc[0], str(desc[1])
        rec = Node("ItemCreated", attrs)
        seen = set()
        for p in properties:
            p = p if isinstance(p, Property) else Property(*p)
            if p.name in seen:
                raise DuplicateProperty(p.name)
            seen.add(p.name)
            rec.add("Property", name=p.name, value=p.value, mutable="true" if p.mutable else "false")
        for c in collections:
            name, slots, *rest = c
            if int(slots) < 0:
                raise UnknownSlot(f"{name}: negative slot count")
            attrs = {"name": name, "slots": str(int(slots))}
            if rest and rest[0]:
                attrs["type"] = rest[0]
            rec.children.append(Node("Collection", attrs))
        return rec

    def _maintenance_records(self, agent: Agent, ref: ItemRef, schema: str, doc: Node,
                             role: str | None) -> tuple[list[Node], Event]:
        state = self.state(ref)
        event = Event(len(state.events), ref, MAINTENANCE, WAITING, COMPLETED, DONE, schema, 0,
                      agent.name, agent.pick_role(role), self.clock.now())
        outcome = Node("Outcome", {"item": ref, "event": str(event.id)}, "", [doc])
        return [event.to_node(), outcome], event

    def _change(self, agent: Agent, ref: ItemRef, schema: str, doc: Node, role: str | None) -> Event:
        records, event = self._maintenance_records(agent, ref, schema, doc, role)
        self.commit(records)
        return event

    def set_property(self, agent: Agent, item: ItemRef, name: str, value: str,
                     role: str | None = None) -> Event:
        with self._lock:
            state = self.state(item)
            prop = state.properties.get(name)
            if prop is None:
                raise UnknownProperty(name)
            if not prop.mutable:
                raise ImmutableProperty(name)
            doc = Node("PropertyChange")
            doc.add("Name", name)
            doc.add("Old", prop.value)
            doc.add("New", value)
            return self._change(agent, item, "PropertyChange", doc, role)

    def add_property(self, agent: Agent, item: ItemRef, name: str, value: str,
                     role: str | None = None) -> Event:
        """Add a new mutable property (recorded as a PropertyChange with empty Old)."""
        with self._lock:
            state = self.state(item)
            if name in state.properties:
                raise DuplicateProperty(name)
            doc = Node("PropertyChange")
            doc.add("Name", name)
            doc.add("Old", "")
            doc.add("New", value)
            return self._change(agent, item, "PropertyChange", doc, role)

    def assign_slot(self, agent: Agent, item: ItemRef, collection: str, slot: int,
                    target: ItemRef, role: str | None = None) -> Event:
        with self._lock:
            state = self.state(item)
            coll = state.collections.get(collection)
            if coll is None:
                raise UnknownCollection(collection)
            if not 0 <= slot < len(coll.slots):
                raise UnknownSlot(f"{collection}[{slot}]")
            target_state = self.items.get(target)
            if target_state is None:
                raise UnknownTarget(target)
            if coll.type is not None and target_state.type != coll.type:
                raise WrongTargetType(f"{collection} holds {coll.type}, {target} is {target_state.type or 'untyped'}")
            doc = Node("CollectionChange")
            doc.add("Collection", collection)
            doc.add("Slot", str(slot))
            doc.add("Old", coll.slots[slot] or "")
            doc.add("New", target)
            return self._change(agent, item, "CollectionChange", doc, role)

    def register_schema(self, defn: SchemaDef) -> tuple[str, int]:
        """Register ``defn`` as the next version of its name and journal it."""
        from .schema import check_schema
        with self._lock:
            check_schema(defn)
            stored = defn.with_version(self.registry.next_version(defn.name))
            self.commit([self.schema_record(stored)])
            return stored.name, stored.version

    @staticmethod
    def schema_record(defn: SchemaDef) -> Node:
        return Node("SchemaRegistered", {"name": defn.name, "version": str(defn.version)}, "",
                    [defn.to_node()])

    def register_script(self, name: str, body: str) -> Script:
        with self._lock:
            script = Script(name, self.scripts.next_version(name), body)
            script.check()
            self.commit([self.script_record(script)])
            return script

    @staticmethod
    def script_record(script: Script) -> Node:
        return Node("ScriptRegistered", {"name": script.name, "version": str(script.version)}, script.body)

    # queries --------------------------------------------------------------

    def get_outcome(self, item: ItemRef, schema: str, view: str = "last") -> Outcome:
        state = self.state(item)
        eid = state.viewpoints.get((schema, str(view)))
        if eid is None:
            raise UnknownViewpoint(f"{item} {schema}/{view}")
        return state.outcomes[eid]

    def list_events(self, item: ItemRef, activity: str | None = None, agent: str | None = None,
                    schema: str | None = None, since: str | None = None,
                    until: str | None = None) -> list[Event]:
        """Events of ``item`` in id order; filters are conjunctive, times inclusive."""
        events = self.state(item).events
        return [
            e for e in events
            if (activity is None or e.activity == activity)
            and (agent is None or e.agent == agent)
            and (schema is None or e.schema == schema)
            and (since is None or e.ts >= since)
            and (until is None or e.ts <= until)
        ]

    def outcomes(self) -> list[Outcome]:
        return [o for ref in sorted(self.items) for _, o in sorted(self.items[ref].outcomes.items())]

    # archive --------------------------------------------------------------

    def export_archive(self, item: ItemRef | None = None) -> str:
        """Self-describing XML archive of the whole store or of one item."""
        from .archive import export_archive
        return export_archive(self, item)

    @classmethod
    def import_archive(cls, document: str, path=None, clock=None, id_factory=None) -> ItemStore:
        from .archive import import_archive
        return import_archive(document, cls(path, clock, id_factory))


def load_journal(path: str | os.PathLike, **kwargs) -> ItemStore:
    return ItemStore.load(path, **kwargs)
