"""Traces, provenance graphs, OPM-style export and replay verification.

A *process* is one execution span of an activity: the event leaving
``Waiting`` through the event reaching ``Completed`` or ``Aborted``, with any
Suspend/Resume events in between. Property and collection maintenance events
appear in traces but not in graphs.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from pathlib import Path

from .canon import Node, parse, to_canonical
from .errors import CristalError, MissingDescription, ScriptFailure, UnknownSchema, UnknownScript, UnknownVersion
from .lifecycle import run_script
from .store import MAINTENANCE, Event, ItemRef, ItemStore, _Apply
from .workflow import ABORTED, COMPLETED, WAITING

EDGE_TYPES = ("Used", "WasGeneratedBy", "WasControlledBy", "WasTriggeredBy", "WasDerivedFrom")


# traces -----------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    event: Event
    outcome: str | None  # outcome artifact id
    agent: str
    role: str


@dataclass(frozen=True)
class Trace:
    item: ItemRef
    entries: tuple[TraceEntry, ...]

    def to_node(self) -> Node:
        n = Node("Trace", {"item": self.item})
        for e in self.entries:
            ev = e.event.to_node()
            if e.outcome is not None:
                ev.add("OutcomeRef", ref=e.outcome)
            n.children.append(ev)
        return n


def outcome_id(item: ItemRef, eid: int) -> str:
    return f"outcome:{item}:{eid}"


def process_id(item: ItemRef, eid: int) -> str:
    return f"process:{item}:{eid}"


def agent_id(name: str) -> str:
    return f"agent:{name}"


def trace(store: ItemStore, item: ItemRef) -> Trace:
    """Every event of ``item`` in id order with its outcome reference."""
    state = store.state(item)
    return Trace(item, tuple(
        TraceEntry(e, outcome_id(item, e.id) if e.id in state.outcomes else None, e.agent, e.role)
        for e in state.events
    ))


# graphs -----------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Edge:
    type: str
    cause: str
    effect: str
    event: int


@dataclass
class ProvGraph:
    artifacts: set[str] = field(default_factory=set)
    processes: set[str] = field(default_factory=set)
    agents: set[str] = field(default_factory=set)
    edges: set[Edge] = field(default_factory=set)

    def count(self, edge_type: str) -> int:
        return sum(1 for e in self.edges if e.type == edge_type)

    def nodes(self) -> set[str]:
        return self.artifacts | self.processes | self.agents

    def is_acyclic(self) -> bool:
        ts = TopologicalSorter({n: () for n in self.nodes()})
        for e in self.edges:
            ts.add(e.effect, e.cause)
        try:
            tuple(ts.static_order())
        except CycleError:
            return False
        return True

    def dangling(self) -> list[Edge]:
        nodes = self.nodes()
        return sorted(e for e in self.edges if e.cause not in nodes or e.effect not in nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProvGraph):
            return NotImplemented
        return (self.artifacts, self.processes, self.agents, self.edges) == \
            (other.artifacts, other.processes, other.agents, other.edges)


@dataclass(frozen=True)
class Span:
    item: ItemRef
    activity: str
    events: tuple[Event, ...]

    @property
    def start(self) -> int:
        return self.events[0].id

    @property
    def end(self) -> Event:
        return self.events[-1]


def spans(store: ItemStore, item: ItemRef) -> list[Span]:
    """Activity execution spans of ``item`` in order of their first event."""
    open_spans: dict[str, list[Event]] = {}
    out: list[list[Event]] = []
    for e in store.state(item).events:
        if e.activity == MAINTENANCE:
            continue
        if e.prev == WAITING:
            current = [e]
            open_spans[e.activity] = current
            out.append(current)
        else:
            current = open_spans.get(e.activity)
            if current is None:
                continue
            current.append(e)
        if e.target in (COMPLETED, ABORTED):
            open_spans.pop(e.activity, None)
    return [Span(item, evs[0].activity, tuple(evs)) for evs in out]


def scope(store: ItemStore, roots: list[ItemRef], depth: int | None = None) -> list[ItemRef]:
    """Roots plus items reachable over collection links within ``depth`` hops."""
    seen = {}
    queue = deque()
    for r in roots:
        store.state(r)
        if r not in seen:
            seen[r] = 0
            queue.append(r)
    while queue:
        ref = queue.popleft()
        if depth is not None and seen[ref] >= depth:
            continue
        for coll in store.state(ref).collections.values():
            for target in coll.slots:
                if target is not None and target in store.items and target not in seen:
                    seen[target] = seen[ref] + 1
                    queue.append(target)
    return sorted(seen)


def build_graph(store: ItemStore, roots: list[ItemRef], depth: int | None = None) -> ProvGraph:
    g = ProvGraph()
    with store._lock:
        for ref in scope(store, roots, depth):
            state = store.state(ref)
            item_spans = spans(store, ref)
            owner = {e.id: process_id(ref, s.start) for s in item_spans for e in s.events}
            for s in item_spans:
                pid = process_id(ref, s.start)
                first, end = s.events[0], s.end
                g.processes.add(pid)
                g.agents.add(agent_id(first.agent))
                g.edges.add(Edge("WasControlledBy", agent_id(first.agent), pid, first.id))
                cause = state.triggers.get(first.id)
                if cause is not None and cause in owner and owner[cause] != pid:
                    g.edges.add(Edge("WasTriggeredBy", owner[cause], pid, cause))
                if end.target != COMPLETED:
                    continue
                used = [outcome_id(u, eid) for u, eid in state.used.get(end.id, ())]
                for art in used:
                    g.artifacts.add(art)
                    g.edges.add(Edge("Used", art, pid, end.id))
                if end.id in state.outcomes:
                    out = outcome_id(ref, end.id)
                    g.artifacts.add(out)
                    g.edges.add(Edge("WasGeneratedBy", pid, out, end.id))
                    for art in used:
                        g.edges.add(Edge("WasDerivedFrom", art, out, end.id))
    return g


def export_opm(graph: ProvGraph) -> str:
    root = Node("OPMGraph")
    for tag, ids in (("Artifact", graph.artifacts), ("Process", graph.processes), ("Agent", graph.agents)):
        for i in sorted(ids):
            root.add(tag, id=i)
    for e in sorted(graph.edges):
        root.add(e.type, effect=e.effect, cause=e.cause, event=str(e.event))
    return to_canonical(root)


def parse_opm(document: str | bytes) -> ProvGraph:
    root = parse(document)
    if root.tag != "OPMGraph":
        raise CristalError("OPM document root must be <OPMGraph>")
    g = ProvGraph()
    sets = {"Artifact": g.artifacts, "Process": g.processes, "Agent": g.agents}
    for n in root.children:
        if n.tag in sets:
            sets[n.tag].add(n.attrs["id"])
        elif n.tag in EDGE_TYPES:
            g.edges.add(Edge(n.tag, n.attrs["cause"], n.attrs["effect"], int(n.attrs["event"])))
        else:
            raise CristalError(f"unexpected <{n.tag}> in OPM graph")
    return g


# replay verification ------------------------------------------------------------

@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    checked: int = 0
    item: ItemRef | None = None
    event: int | None = None
    line: int | None = None
    detail: str = ""

    def to_node(self) -> Node:
        attrs = {"ok": "true" if self.ok else "false", "checked": str(self.checked)}
        if not self.ok:
            if self.item is not None:
                attrs["item"] = self.item
            if self.event is not None:
                attrs["event"] = str(self.event)
            if self.line is not None:
                attrs["line"] = str(self.line)
        return Node("ReplayReport", attrs, self.detail if not self.ok else "")


def _journal_bytes(source) -> bytes:
    if isinstance(source, ItemStore):
        return "".join(line + "\n" for line in source.journal).encode("utf-8")
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    return Path(os.fspath(source)).read_bytes()


def replay_verify(source, item: ItemRef | None = None) -> VerifyReport:
    """Replay a journal, regenerating every automatic outcome and re-validating manual ones.

    ``source`` is a store, raw journal bytes or a journal path. With ``item``
    only that item's outcomes are checked (the whole journal is still replayed,
    since scripts may read other items). The report names the first divergence.
    """
    data = _journal_bytes(source)
    fresh = ItemStore()
    applier = _Apply(fresh, staged=False)
    lines = data.split(b"\n")
    if lines[-1] != b"":
        return VerifyReport(False, 0, None, None, len(lines), "torn final record")
    lines.pop()
    last: Event | None = None
    checked = 0

    def fail(number: int, detail: str, event: Event | None) -> VerifyReport:
        return VerifyReport(False, checked, event.item if event else None,
                            event.id if event else None, number, detail)

    for number, raw in enumerate(lines, 1):
        pending = last if applier.pending is not None else None
        try:
            text = raw.decode("utf-8")
            rec = parse(text)
        except (UnicodeDecodeError, CristalError) as exc:
            return fail(number, f"unreadable record: {exc}", pending)
        if to_canonical(rec) != text:
            return fail(number, "record is not in canonical form", pending)
        if rec.tag == "Outcome" and applier.pending is not None:
            event = applier.pending[1]
            if item is None or event.item == item:
                problem = _check_outcome(fresh, event, rec)
                if problem:
                    return fail(number, problem, event)
                checked += 1
        try:
            applier.record(rec)
        except (CristalError, KeyError, ValueError, IndexError, AttributeError) as exc:
            return fail(number, f"replay failed: {type(exc).__name__}: {exc}", pending or last)
        for ref, st in applier.touched.items():
            fresh.items[ref] = st
        applier.touched.clear()
        fresh.journal.append(text)
        if rec.tag == "Event":
            last = Event.from_node(rec)
    if applier.pending is not None:
        return fail(len(lines), "event lacks its outcome", applier.pending[1])
    if item is not None and item not in fresh.items:
        raise CristalError(f"{item} does not occur in the journal")
    return VerifyReport(True, checked)


def _check_outcome(fresh: ItemStore, event: Event, rec: Node) -> str:
    if len(rec.children) != 1:
        return "outcome must hold exactly one document"
    stored = to_canonical(rec.children[0])
    state = fresh.items[event.item]
    activity = None
    if event.activity != MAINTENANCE and state.workflow is not None:
        activity = state.workflow.definition.activities().get(event.activity)
    if activity is not None and activity.automatic:
        request = state.requests.get(event.id)
        try:
            regenerated = run_script(fresh, state, activity, event.activity,
                                     parse(request) if request is not None else None)
        except ScriptFailure as exc:
            if isinstance(exc.cause, (UnknownScript, UnknownSchema, UnknownVersion)):
                raise MissingDescription(str(exc.cause)) from None
            return f"regeneration failed: {exc.cause}"
        if regenerated is None or to_canonical(regenerated) != stored:
            return "regenerated outcome differs from the stored outcome"
        return ""
    try:
        report = fresh.registry.validate(stored, event.schema, event.schema_version)
    except (UnknownSchema, UnknownVersion) as exc:
        raise MissingDescription(str(exc)) from None
    if not report.valid:
        v = report.violations[0]
        return f"stored outcome no longer validates: {v.code} at {v.path}"
    if event.activity == MAINTENANCE:
        return _check_change(state, rec.children[0])
    return ""


def _check_change(state, doc: Node) -> str:
    """A maintenance outcome's Old value must be the value current before it."""
    if doc.tag == "PropertyChange":
        prop = state.properties.get(doc.child("Name").text)
        current = prop.value if prop is not None else ""
    elif doc.tag == "CollectionChange":
        coll = state.collections.get(doc.child("Collection").text)
        slot = int(doc.child("Slot").text)
        if coll is None or not 0 <= slot < len(coll.slots):
            return "change names an unknown collection slot"
        current = coll.slots[slot] or ""
    else:
        return ""
    if doc.child("Old").text != current:
        return "recorded old value differs from the replayed state"
    return ""
