"""Activity transitions, event emission and automatic execution.

Every accepted request appends its events (and any outcome) in one atomic
journal batch; every rejected request appends nothing. A ``Done`` on an
automatic activity emits a Start/Complete pair sharing one timestamp.
"""

from __future__ import annotations

import logging

from .canon import Node, parse
from .errors import (
    CristalError,
    EvaluationError,
    InvalidTransition,
    MalformedXml,
    NoWorkflow,
    OutcomeInvalid,
    OutcomeRequired,
    RoleDenied,
    ScriptFailure,
    WorkflowAlreadyAssigned,
)
from .schema import MALFORMED, UNEXPECTED, SchemaDef, ValidationReport, Violation
from .scripts import Script, evaluate, evaluate_predicate_script, format_value
from .store import Agent, Event, ItemRef, ItemState, ItemStore
from .workflow import (
    ABORT,
    ABORTED,
    COMPLETED,
    DONE,
    MOVES,
    STARTED,
    TRANSITIONS,
    WAITING,
    ActivityDef,
    Block,
    WorkflowDef,
    workflow_from_node,
)

log = logging.getLogger(__name__)

AUTOMATION = "automation"


def _as_workflow(definition: WorkflowDef | str | Node) -> WorkflowDef:
    if isinstance(definition, WorkflowDef):
        return definition
    return workflow_from_node(parse(definition) if isinstance(definition, str) else definition)


def check_references(store: ItemStore, definition: WorkflowDef) -> None:
    """Raise if the workflow names a schema or script version the store lacks."""
    for name, version in sorted(definition.schemas()):
        store.registry.get(name, version)
    for name, version in sorted(definition.scripts()):
        store.scripts.get(name, version)


def workflow_record(item: ItemRef, definition: WorkflowDef, desc: tuple[ItemRef, int] | None = None) -> Node:
    attrs = {"item": item}
    if desc is not None:
        attrs["desc"], attrs["version"] = desc[0], str(desc[1])
    return Node("WorkflowAssigned", attrs, "", [definition.to_node()])


def init_workflow(store: ItemStore, item: ItemRef, definition: WorkflowDef | str | Node,
                  version: int | None = None, desc: tuple[ItemRef, int] | None = None) -> None:
    """Assign a workflow to an item that has none; all activities start Waiting."""
    definition = _as_workflow(definition)
    if version is not None:
        definition = WorkflowDef(definition.root, version)
    with store._lock:
        state = store.state(item)
        if state.workflow is not None:
            raise WorkflowAlreadyAssigned(item)
        check_references(store, definition)
        store.commit([workflow_record(item, definition, desc)])


def active_activities(store: ItemStore, item: ItemRef) -> list[str]:
    state = store.state(item)
    if state.workflow is None:
        raise NoWorkflow(item)
    return state.workflow.frontier()


def evaluate_predicate(store: ItemStore, item: ItemRef, script: str | Script,
                       version: int | str = "last") -> bool:
    state = store.state(item)
    if not isinstance(script, Script):
        script = store.scripts.get(script, version)
    return evaluate_predicate_script(script, store.context(state))


# outcome handling -------------------------------------------------------------

def _document(outcome: str | bytes | Node) -> Node:
    if isinstance(outcome, Node):
        return outcome
    try:
        return parse(outcome)
    except MalformedXml as exc:
        raise OutcomeInvalid(ValidationReport((Violation("", MALFORMED, str(exc)),))) from None


def check_outcome(store: ItemStore, activity: ActivityDef, outcome) -> Node:
    doc = _document(outcome)
    report = store.registry.validate(doc, activity.schema, activity.schema_version)
    if not report.valid:
        raise OutcomeInvalid(report)
    return doc


def _unexpected_outcome(path: str) -> OutcomeInvalid:
    return OutcomeInvalid(ValidationReport((Violation(path, UNEXPECTED, "this transition takes no outcome"),)))


def build_outcome(schema: SchemaDef, values: list[tuple[str, str]]) -> Node:
    """Assemble an outcome document from ``(leaf path, text)`` assignments in schema order."""
    root_spec = schema.root
    root = Node(root_spec.name)
    for path, text in values:
        parts = path.strip("/").split("/")
        if parts[0] != root_spec.name:
            raise EvaluationError(path, f"target must start with {root_spec.name}")
        if len(parts) == 1:
            root.text = text
            continue
        node, spec = root, root_spec
        for depth, part in enumerate(parts[1:], 1):
            child_spec = next((c for c in spec.children if c.name == part), None)
            if child_spec is None:
                raise EvaluationError(path, f"{part!r} is not declared under {spec.name}")
            if depth == len(parts) - 1:
                node.children.append(Node(part, {}, text))
            else:
                existing = [c for c in node.children if c.tag == part]
                node = existing[-1] if existing else node.add(part)
            spec = child_spec

    def order(node: Node, spec) -> None:
        rank = {c.name: i for i, c in enumerate(spec.children)}
        node.children.sort(key=lambda c: rank.get(c.tag, len(rank)))
        for c in node.children:
            cs = next((s for s in spec.children if s.name == c.tag), None)
            if cs is not None and cs.is_composite:
                order(c, cs)

    if root_spec.is_composite:
        order(root, root_spec)
    return root


def run_script(store: ItemStore, state: ItemState, activity: ActivityDef, path: str,
               request: Node | None = None, lookup=None) -> Node | None:
    """Execute an automatic activity's script and return its outcome document."""
    try:
        script = store.scripts.get(activity.script, activity.script_version)
        if script.is_copy:
            if request is None:
                raise EvaluationError(script.name, "request() needs a supplied document")
            return request
        ctx = store.context(state, lookup)
        if script.is_assignment:
            if activity.schema is None:
                raise EvaluationError(script.name, "assignment script on an activity without outcome schema")
            values = [(p, format_value(evaluate(expr, ctx, f"{script.name}:{p}")))
                      for p, expr in script.assignments()]
            doc = build_outcome(store.registry.get(activity.schema, activity.schema_version), values)
        else:
            evaluate(script.predicate(), ctx, script.name)
            doc = None
        if activity.schema is not None:
            if doc is None:
                raise EvaluationError(script.name, "script produced no outcome document")
            report = store.registry.validate(doc, activity.schema, activity.schema_version)
            if not report.valid:
                raise OutcomeInvalid(report)
        return doc
    except CristalError as exc:
        raise ScriptFailure(path, exc) from None


# transitions ----------------------------------------------------------------

def _role(agent: Agent, activity: ActivityDef) -> str:
    if activity.role not in agent.roles:
        raise RoleDenied(",".join(sorted(agent.roles)), activity.role)
    return activity.role


def transition_records(store: ItemStore, state: ItemState, agent: Agent, path: str, transition: str,
                       outcome=None, request: Node | None = None, lookup=None) -> tuple[list[Node], list[Event]]:
    """Validate a request against ``state`` and build its journal records (nothing is written)."""
    inst = state.workflow
    if inst is None:
        raise NoWorkflow(state.uuid)
    if transition not in TRANSITIONS:
        raise InvalidTransition("?", transition, "unknown transition")
    node = inst.node(path)
    if isinstance(node, Block) or path in ("", "/"):
        if transition != ABORT:
            raise InvalidTransition("composite", transition, "only Abort applies to a block")
        return _abort_block(store, state, agent, path, outcome)

    activity: ActivityDef = node
    prev = inst.states[path]
    if prev not in MOVES[transition]:
        raise InvalidTransition(prev, transition)
    if not inst.is_current(path):
        raise InvalidTransition(prev, transition, "activity is not enabled")
    if activity.automatic and transition not in (DONE, ABORT):
        raise InvalidTransition(prev, transition, "automatic activities only accept Done or Abort")
    if not activity.automatic and transition == DONE:
        raise InvalidTransition(prev, transition, "Done applies to automatic activities only")
    role = _role(agent, activity)
    eid = len(state.events)

    if transition == DONE:
        if outcome is not None:
            raise _unexpected_outcome(path)
        doc = run_script(store, state, activity, path, request, lookup)
        ts = store.clock.now()
        start = Event(eid, state.uuid, path, WAITING, STARTED, DONE, None, None, agent.name, role, ts)
        schema, version = activity.outcome_schema or (None, None)
        if doc is None:
            schema = version = None
        end = Event(eid + 1, state.uuid, path, STARTED, COMPLETED, DONE, schema, version, agent.name, role, ts)
        records = []
        if request is not None:
            records.append(Node("AmendRequest", {"item": state.uuid, "event": str(eid + 1)}, "", [request]))
        records += [start.to_node(), end.to_node()]
        if doc is not None:
            records.append(Node("Outcome", {"item": state.uuid, "event": str(eid + 1)}, "", [doc]))
        return records, [start, end]

    target = MOVES[transition][prev]
    doc = None
    if target == COMPLETED and activity.schema is not None:
        if outcome is None:
            raise OutcomeRequired(f"{path} requires a {activity.schema} v{activity.schema_version} outcome")
        doc = check_outcome(store, activity, outcome)
    elif outcome is not None:
        raise _unexpected_outcome(path)
    schema, version = (activity.schema, activity.schema_version) if doc is not None else (None, None)
    event = Event(eid, state.uuid, path, prev, target, transition, schema, version,
                  agent.name, role, store.clock.now())
    records = [event.to_node()]
    if doc is not None:
        records.append(Node("Outcome", {"item": state.uuid, "event": str(eid)}, "", [doc]))
    return records, [event]


def _abort_block(store, state, agent, path, outcome):
    if outcome is not None:
        raise _unexpected_outcome(path)
    inst = state.workflow
    if inst.status != "running":
        raise InvalidTransition(inst.status, ABORT, "workflow already finished")
    targets = inst.abortable(path)
    if not targets:
        raise InvalidTransition("terminal", ABORT, f"nothing to abort under {path or '/'}")
    roles = [_role(agent, inst.activity(p)) for p in targets]
    ts = store.clock.now()
    eid = len(state.events)
    events = [
        Event(eid + i, state.uuid, p, inst.states[p], ABORTED, ABORT, None, None, agent.name, r, ts)
        for i, (p, r) in enumerate(zip(targets, roles))
    ]
    return [e.to_node() for e in events], events


def request_transition(store: ItemStore, agent: Agent, item: ItemRef, path: str, transition: str,
                       outcome=None) -> list[Event]:
    """Apply ``transition`` to the activity at ``path``; returns the emitted events."""
    with store._lock:
        state = store.state(item)
        records, events = transition_records(store, state, agent, path, transition, outcome)
        store.commit(records)
        log.debug("%s %s %s -> %d event(s)", item, path, transition, len(events))
        return events


def run_automatic(store: ItemStore, item: ItemRef, agent: Agent | None = None,
                  limit: int = 10_000) -> list[Event]:
    """Apply Done to active automatic activities until none is active.

    Without ``agent`` a mechanical agent named ``automation`` holding the
    activity's role executes each step.
    """
    emitted: list[Event] = []
    with store._lock:
        for _ in range(limit):
            state = store.state(item)
            if state.workflow is None:
                return emitted
            autos = [p for p in state.workflow.frontier() if state.workflow.activity(p).automatic]
            if not autos:
                return emitted
            path = autos[0]
            actor = agent or Agent(AUTOMATION, {state.workflow.activity(path).role})
            emitted += request_transition(store, actor, item, path, DONE)
    raise ScriptFailure(item, RuntimeError(f"automatic execution exceeded {limit} steps"))
