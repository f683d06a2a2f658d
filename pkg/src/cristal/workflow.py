"""Workflow definitions and the activity state machine.

A workflow is a tree of blocks (``Sequence``, ``AndSplit``, ``OrSplit``,
``Loop``) whose leaves are :class:`ActivityDef`. Activity paths are the
slash-joined names below the root block. :class:`WorkflowInstance` holds the
run-time state of one item's workflow and is advanced only by applying
recorded events, so it can always be rebuilt from the journal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

from .canon import Node, to_canonical
from .errors import InvalidTransition, MalformedWorkflow, NoSuchActivity

# activity states
WAITING = "Waiting"
STARTED = "Started"
SUSPENDED = "Suspended"
COMPLETED = "Completed"
ABORTED = "Aborted"
STATES = (WAITING, STARTED, SUSPENDED, COMPLETED, ABORTED)
TERMINAL = (COMPLETED, ABORTED)

# transitions
START = "Start"
COMPLETE = "Complete"
DONE = "Done"
SUSPEND = "Suspend"
RESUME = "Resume"
ABORT = "Abort"
TRANSITIONS = (START, COMPLETE, DONE, SUSPEND, RESUME, ABORT)

MOVES: dict[str, dict[str, str]] = {
    START: {WAITING: STARTED},
    COMPLETE: {STARTED: COMPLETED},
    DONE: {WAITING: COMPLETED},
    SUSPEND: {STARTED: SUSPENDED},
    RESUME: {SUSPENDED: STARTED},
    ABORT: {WAITING: ABORTED, STARTED: ABORTED, SUSPENDED: ABORTED},
}

BLOCK_KINDS = ("Sequence", "AndSplit", "OrSplit", "Loop")
RESERVED_ACTIVITY = "ItemMaintenance"

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


@dataclass(frozen=True)
class InputDecl:
    collection: str
    slot: int
    schema: str


@dataclass(frozen=True)
class ActivityDef:
    name: str
    role: str
    automatic: bool = False
    schema: str | None = None
    schema_version: int | None = None
    script: str | None = None
    script_version: int | None = None
    inputs: tuple[InputDecl, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))

    @property
    def outcome_schema(self) -> tuple[str, int] | None:
        return None if self.schema is None else (self.schema, self.schema_version)


@dataclass(frozen=True)
class Block:
    kind: str
    name: str
    children: tuple[WorkflowNode, ...]
    script: str | None = None
    script_version: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


WorkflowNode = Union[ActivityDef, Block]


def sequence(name: str, *children: WorkflowNode) -> Block:
    return Block("Sequence", name, tuple(children))


def and_split(name: str, *children: WorkflowNode) -> Block:
    return Block("AndSplit", name, tuple(children))


def or_split(name: str, script: str, script_version: int, if_true: WorkflowNode,
             if_false: WorkflowNode) -> Block:
    return Block("OrSplit", name, (if_true, if_false), script, script_version)


def loop(name: str, script: str, script_version: int, body: WorkflowNode) -> Block:
    """Do-while loop: the body runs, then repeats while the predicate holds."""
    return Block("Loop", name, (body,), script, script_version)


@dataclass(frozen=True)
class WorkflowDef:
    root: Block
    version: int | None = None

    def __post_init__(self) -> None:
        check_workflow(self)

    def walk(self):
        """Yield ``(path, node)`` in document order; the root has path ``""``."""
        def rec(node: WorkflowNode, path: str):
            yield path, node
            if isinstance(node, Block):
                for c in node.children:
                    yield from rec(c, f"{path}/{c.name}" if path else c.name)
        yield from rec(self.root, "")

    @cached_property
    def _activities(self) -> dict[str, ActivityDef]:
        return {p: n for p, n in self.walk() if isinstance(n, ActivityDef)}

    def activities(self) -> dict[str, ActivityDef]:
        return self._activities

    def scripts(self) -> set[tuple[str, int]]:
        refs = set()
        for _, n in self.walk():
            if n.script is not None:
                refs.add((n.script, n.script_version))
        return refs

    def schemas(self) -> set[tuple[str, int]]:
        return {a.outcome_schema for a in self.activities().values() if a.schema is not None}

    def to_node(self) -> Node:
        attrs = {} if self.version is None else {"version": str(self.version)}
        return Node("Workflow", attrs, "", [_node_xml(self.root)])

    def canonical(self) -> str:
        return to_canonical(self.to_node())


def check_workflow(wf: WorkflowDef) -> None:
    if not isinstance(wf.root, Block):
        raise MalformedWorkflow("the workflow root must be a block")

    def rec(node: WorkflowNode, path: str) -> None:
        if not _NAME_RE.match(node.name or ""):
            raise MalformedWorkflow(f"{path or '/'}: invalid node name {node.name!r}")
        if isinstance(node, ActivityDef):
            if path == RESERVED_ACTIVITY:
                raise MalformedWorkflow(f"{RESERVED_ACTIVITY} is a reserved activity name")
            if not node.role:
                raise MalformedWorkflow(f"{path}: activity needs a role")
            if node.automatic and node.script is None:
                raise MalformedWorkflow(f"{path}: automatic activity needs a script")
            if (node.schema is None) != (node.schema_version is None):
                raise MalformedWorkflow(f"{path}: schema and schemaVersion go together")
            if (node.script is None) != (node.script_version is None):
                raise MalformedWorkflow(f"{path}: script and scriptVersion go together")
            return
        if node.kind not in BLOCK_KINDS:
            raise MalformedWorkflow(f"{path or '/'}: unknown block kind {node.kind!r}")
        if not node.children:
            raise MalformedWorkflow(f"{path or '/'}: empty {node.kind}")
        if node.kind == "OrSplit" and len(node.children) != 2:
            raise MalformedWorkflow(f"{path or '/'}: OrSplit needs exactly two branches")
        if node.kind == "Loop" and len(node.children) != 1:
            raise MalformedWorkflow(f"{path or '/'}: Loop needs exactly one body")
        if node.kind in ("OrSplit", "Loop"):
            if node.script is None or node.script_version is None:
                raise MalformedWorkflow(f"{path or '/'}: {node.kind} needs a predicate script")
        elif node.script is not None:
            raise MalformedWorkflow(f"{path or '/'}: {node.kind} takes no script")
        names = [c.name for c in node.children]
        if len(set(names)) != len(names):
            raise MalformedWorkflow(f"{path or '/'}: duplicate child names")
        for c in node.children:
            rec(c, f"{path}/{c.name}" if path else c.name)

    rec(wf.root, "")


def _node_xml(node: WorkflowNode) -> Node:
    attrs = {"kind": "Activity" if isinstance(node, ActivityDef) else node.kind, "name": node.name}
    if isinstance(node, ActivityDef):
        attrs["role"] = node.role
        attrs["automatic"] = "true" if node.automatic else "false"
        if node.schema is not None:
            attrs["schema"] = node.schema
            attrs["schemaVersion"] = str(node.schema_version)
    if node.script is not None:
        attrs["script"] = node.script
        attrs["scriptVersion"] = str(node.script_version)
    n = Node("Node", attrs)
    if isinstance(node, ActivityDef):
        for i in node.inputs:
            n.add("Input", collection=i.collection, slot=str(i.slot), schema=i.schema)
    else:
        n.children.extend(_node_xml(c) for c in node.children)
    return n


def _int_attr(n: Node, key: str) -> int | None:
    if key not in n.attrs:
        return None
    text = n.attrs[key]
    if not re.match(r"^[0-9]+$", text):
        raise MalformedWorkflow(f"{key} must be a non-negative integer, got {text!r}")
    return int(text)


def _node_from_xml(n: Node) -> WorkflowNode:
    if n.tag != "Node":
        raise MalformedWorkflow(f"unexpected <{n.tag}>")
    kind = n.attrs.get("kind")
    name = n.attrs.get("name", "")
    if kind == "Activity":
        inputs = []
        for c in n.children:
            if c.tag != "Input":
                raise MalformedWorkflow(f"{name}: activities only contain <Input>")
            try:
                inputs.append(InputDecl(c.attrs["collection"], int(c.attrs["slot"]), c.attrs["schema"]))
            except (KeyError, ValueError):
                raise MalformedWorkflow(f"{name}: malformed <Input>") from None
        automatic = n.attrs.get("automatic", "false")
        if automatic not in ("true", "false"):
            raise MalformedWorkflow(f"{name}: automatic must be true or false")
        return ActivityDef(
            name, n.attrs.get("role", ""), automatic == "true",
            n.attrs.get("schema"), _int_attr(n, "schemaVersion"),
            n.attrs.get("script"), _int_attr(n, "scriptVersion"), tuple(inputs),
        )
    if kind not in BLOCK_KINDS:
        raise MalformedWorkflow(f"{name}: unknown node kind {kind!r}")
    if any(c.tag != "Node" for c in n.children):
        raise MalformedWorkflow(f"{name}: blocks only contain <Node>")
    return Block(kind, name, tuple(_node_from_xml(c) for c in n.children),
                 n.attrs.get("script"), _int_attr(n, "scriptVersion"))


def workflow_from_node(n: Node) -> WorkflowDef:
    if n.tag != "Workflow" or len(n.children) != 1:
        raise MalformedWorkflow("a workflow document is <Workflow> holding exactly one root <Node>")
    root = _node_from_xml(n.children[0])
    if not isinstance(root, Block):
        raise MalformedWorkflow("the workflow root must be a block")
    return WorkflowDef(root, _int_attr(n, "version"))


# run-time state ---------------------------------------------------------------

OPEN = "open"
_DONE_STATUS = COMPLETED

Predicate = Callable[[str, int], bool]


def move(prev: str, transition: str) -> str:
    target = MOVES.get(transition, {}).get(prev)
    if target is None:
        raise InvalidTransition(prev, transition)
    return target


@dataclass
class WorkflowInstance:
    definition: WorkflowDef
    states: dict[str, str] = field(default_factory=dict)
    cursor: dict[str, int] = field(default_factory=dict)
    choice: dict[str, int] = field(default_factory=dict)
    iteration: dict[str, int] = field(default_factory=dict)
    finished_loops: set[str] = field(default_factory=set)
    enabled_by: dict[str, int | None] = field(default_factory=dict)
    status: str = "running"

    @classmethod
    def start(cls, definition: WorkflowDef, predicate: Predicate) -> WorkflowInstance:
        inst = cls(definition, {p: WAITING for p in definition.activities()})
        inst.settle(predicate, None)
        return inst

    def clone(self) -> WorkflowInstance:
        return WorkflowInstance(self.definition, dict(self.states), dict(self.cursor),
                                dict(self.choice), dict(self.iteration), set(self.finished_loops),
                                dict(self.enabled_by), self.status)

    def activity(self, path: str) -> ActivityDef:
        acts = self.definition.activities()
        if path not in acts:
            raise NoSuchActivity(path)
        return acts[path]

    def node(self, path: str) -> WorkflowNode:
        if path in ("", "/"):
            return self.definition.root
        for p, n in self.definition.walk():
            if p == path:
                return n
        raise NoSuchActivity(path)

    # control flow

    def settle(self, predicate: Predicate, cause: int | None) -> None:
        """Advance control flow after a state change and record enabling causes."""
        status = self._settle(self.definition.root, "", predicate)
        self.status = {COMPLETED: "completed", ABORTED: "aborted"}.get(status, "running")
        for path in self.frontier():
            self.enabled_by.setdefault(path, cause)

    def _settle(self, node: WorkflowNode, path: str, predicate: Predicate) -> str:
        if isinstance(node, ActivityDef):
            s = self.states[path]
            return s if s in TERMINAL else OPEN
        kids = [(f"{path}/{c.name}" if path else c.name, c) for c in node.children]
        if node.kind == "Sequence":
            i = self.cursor.get(path, 0)
            while i < len(kids):
                st = self._settle(kids[i][1], kids[i][0], predicate)
                if st != COMPLETED:
                    return st
                i += 1
                self.cursor[path] = i
            return COMPLETED
        if node.kind == "AndSplit":
            sts = [self._settle(c, p, predicate) for p, c in kids]
            if ABORTED in sts:
                return ABORTED
            return COMPLETED if all(s == COMPLETED for s in sts) else OPEN
        if node.kind == "OrSplit":
            if path not in self.choice:
                self.choice[path] = 0 if predicate(node.script, node.script_version) else 1
            p, c = kids[self.choice[path]]
            return self._settle(c, p, predicate)
        # Loop
        if path in self.finished_loops:
            return COMPLETED
        bpath, body = kids[0]
        while True:
            st = self._settle(body, bpath, predicate)
            if st != COMPLETED:
                return st
            if not predicate(node.script, node.script_version):
                self.finished_loops.add(path)
                return COMPLETED
            self._reset(body, bpath)
            self.iteration[path] = self.iteration.get(path, 0) + 1

    def _reset(self, node: WorkflowNode, path: str) -> None:
        if isinstance(node, ActivityDef):
            self.states[path] = WAITING
            self.enabled_by.pop(path, None)
            return
        self.cursor.pop(path, None)
        self.choice.pop(path, None)
        self.iteration.pop(path, None)
        self.finished_loops.discard(path)
        for c in node.children:
            self._reset(c, f"{path}/{c.name}" if path else c.name)

    def frontier(self) -> list[str]:
        """Waiting activities currently eligible for Start (or Done)."""
        if self.status != "running":
            return []
        out: list[str] = []

        def rec(node: WorkflowNode, path: str) -> None:
            if isinstance(node, ActivityDef):
                if self.states[path] == WAITING:
                    out.append(path)
                return
            kids = [(f"{path}/{c.name}" if path else c.name, c) for c in node.children]
            if node.kind == "Sequence":
                i = self.cursor.get(path, 0)
                if i < len(kids):
                    rec(kids[i][1], kids[i][0])
            elif node.kind == "AndSplit":
                for p, c in kids:
                    rec(c, p)
            elif node.kind == "OrSplit":
                if path in self.choice:
                    p, c = kids[self.choice[path]]
                    rec(c, p)
            elif path not in self.finished_loops:
                rec(kids[0][1], kids[0][0])

        rec(self.definition.root, "")
        return out

    def in_progress(self) -> list[str]:
        return [p for p in self.definition.activities() if self.states[p] in (STARTED, SUSPENDED)]

    def is_current(self, path: str) -> bool:
        if self.status != "running":
            return False
        return self.states[path] in (STARTED, SUSPENDED) or path in self.frontier()

    def abortable(self, path: str) -> list[str]:
        """Non-terminal activities under ``path`` reachable by control flow, in document order."""
        node = self.node(path)
        base = "" if path in ("", "/") else path
        out: list[str] = []

        def rec(n: WorkflowNode, p: str) -> None:
            if isinstance(n, ActivityDef):
                if self.states[p] not in TERMINAL:
                    out.append(p)
                return
            kids = [(f"{p}/{c.name}" if p else c.name, c) for c in n.children]
            if n.kind == "OrSplit":
                if p in self.choice:
                    q, c = kids[self.choice[p]]
                    rec(c, q)
                return
            for q, c in kids:
                rec(c, q)

        rec(node, base)
        return out

    def apply(self, path: str, prev: str, target: str, transition: str) -> None:
        """Apply one recorded state change, checking it against the move table."""
        current = self.states.get(path)
        if current is None:
            raise NoSuchActivity(path)
        if current != prev:
            raise InvalidTransition(current, transition, f"event says previous state {prev}")
        if transition == DONE:
            legal = (prev, target) in ((WAITING, STARTED), (STARTED, COMPLETED))
        else:
            legal = MOVES.get(transition, {}).get(prev) == target
        if not legal:
            raise InvalidTransition(prev, transition, f"cannot reach {target}")
        self.states[path] = target
