"""Description items: schemas, scripts, workflows, activities and item types
stored as ordinary items whose content evolves by the ``Amend`` activity.

Every description item carries an immutable ``Type`` property naming its kind
and a lifecycle that loops over one automatic ``Amend`` activity. Each amend
adds a numbered viewpoint (``"0"``, ``"1"``, ...) of the kind's content schema;
older versions stay readable forever. ``bootstrap`` seeds a store with the
descriptions of the built-in schemas, scripts, lifecycles and item kinds, so
the description layer describes itself.
"""

from __future__ import annotations

from . import builtins
from .canon import Node, parse
from .errors import (
    CristalError,
    DuplicateUuid,
    MalformedXml,
    NotADescription,
    OutcomeInvalid,
    StoreNotEmpty,
    UnknownItem,
    UnknownKind,
    UnknownProperty,
    UnknownVersion,
)
from .lifecycle import check_references, transition_records, workflow_record
from .schema import MALFORMED, SchemaDef, ValidationReport, Violation, schema_from_node
from .scripts import Script
from .store import Agent, ItemRef, ItemStore, Property, canonical_uuid
from .workflow import DONE, ActivityDef, WorkflowDef, _node_from_xml, loop, sequence, workflow_from_node

KINDS = {
    "SchemaDesc": "SchemaDef",
    "ScriptDesc": "ScriptDef",
    "WorkflowDesc": "WorkflowDef",
    "ItemDesc": "ItemDef",
    "ActivityDesc": "ActivityDef",
}
DESIGNER = "designer"
SYSTEM = Agent("system", {DESIGNER})
AMEND = "Amend"


def reserved_uuid(n: int) -> ItemRef:
    return f"00000000-0000-0000-0000-{n:012x}"


def _numbering() -> dict[str, ItemRef]:
    names = [f"SchemaDesc:{s.name}" for s in builtins.BUILTIN_SCHEMAS]
    names += [f"ScriptDesc:{s.name}" for s in builtins.BUILTIN_SCRIPTS]
    names += [f"WorkflowDesc:{k}Lifecycle" for k in KINDS]
    names += [f"ItemDesc:{k}" for k in KINDS]
    return {name: reserved_uuid(i) for i, name in enumerate(names, 1)}


BOOTSTRAP = _numbering()


def meta_item_desc(kind: str) -> ItemRef:
    """The ItemDesc describing description items of ``kind``."""
    if kind not in KINDS:
        raise UnknownKind(kind)
    return BOOTSTRAP[f"ItemDesc:{kind}"]


def lifecycle(kind: str) -> WorkflowDef:
    amend = ActivityDef(AMEND, DESIGNER, True, KINDS[kind], 0, builtins.AMEND.name, builtins.AMEND.version)
    return WorkflowDef(loop("amendments", builtins.ALWAYS.name, builtins.ALWAYS.version, amend))


def _item_def(kind: str) -> Node:
    doc = Node("Item")
    doc.add("TypeName", kind)
    doc.add("Property", name="Name", default="", mutable="false")
    doc.add("Workflow", uuid=BOOTSTRAP[f"WorkflowDesc:{kind}Lifecycle"], version="0")
    return doc


# content checks ---------------------------------------------------------------

def _parse(content: str | bytes | Node) -> Node:
    if isinstance(content, Node):
        return content
    try:
        return parse(content)
    except MalformedXml as exc:
        raise OutcomeInvalid(ValidationReport((Violation("", MALFORMED, str(exc)),))) from None


def _invalid(path: str, message: str) -> OutcomeInvalid:
    return OutcomeInvalid(ValidationReport((Violation(path, MALFORMED, message),)))


def content_name(kind: str, doc: Node) -> str:
    if kind == "ItemDesc":
        t = doc.child("TypeName")
        return t.text if t is not None else ""
    if kind == "WorkflowDesc":
        root = doc.children[0] if doc.children else None
        return root.attrs.get("name", "") if root is not None else ""
    return doc.attrs.get("name", "")


def activity_from_node(doc: Node) -> ActivityDef:
    n = Node("Node", {"kind": "Activity", **{k: v for k, v in doc.attrs.items()}}, "", doc.children)
    act = _node_from_xml(n)
    WorkflowDef(sequence("check", act))
    return act


def check_content(store: ItemStore, kind: str, doc: Node, name: str | None = None) -> None:
    """Raise :class:`OutcomeInvalid` unless ``doc`` is valid, meaningful content of ``kind``."""
    report = store.registry.validate(doc, KINDS[kind], 0)
    if not report.valid:
        raise OutcomeInvalid(report)
    if name is not None and kind in ("SchemaDesc", "ScriptDesc") and content_name(kind, doc) != name:
        raise _invalid(doc.tag, f"content is named {content_name(kind, doc)!r}, description is {name!r}")
    try:
        if kind == "SchemaDesc":
            schema_from_node(doc)
        elif kind == "ScriptDesc":
            Script(doc.attrs["name"], 0, doc.text).check()
        elif kind == "WorkflowDesc":
            check_references(store, workflow_from_node(doc))
        elif kind == "ActivityDesc":
            act = activity_from_node(doc)
            check_references(store, WorkflowDef(sequence("check", act)))
        else:
            _check_item_def(store, doc)
    except OutcomeInvalid:
        raise
    except CristalError as exc:
        raise _invalid(doc.tag, f"{exc.code}: {exc.detail}") from None


def _check_item_def(store: ItemStore, doc: Node) -> None:
    names = [p.attrs["name"] for p in doc.all("Property")]
    if "Type" in names:
        raise _invalid("Item/Property", "Type is reserved for the item kind")
    if len(set(names)) != len(names):
        raise _invalid("Item/Property", "duplicate property names")
    colls = [c.attrs["name"] for c in doc.all("Collection")]
    if len(set(colls)) != len(colls):
        raise _invalid("Item/Collection", "duplicate collection names")
    for c in doc.all("Collection"):
        if int(c.attrs["slots"]) < 0:
            raise _invalid("Item/Collection/@slots", "slot count must not be negative")
    wf = doc.child("Workflow")
    if wf is not None:
        workflow_at(store, wf.attrs["uuid"], int(wf.attrs["version"]))


# reading descriptions -----------------------------------------------------------

def description_kind(store: ItemStore, ref: ItemRef) -> str:
    kind = store.state(ref).type
    if kind not in KINDS:
        raise NotADescription(f"{ref} has type {kind or 'none'}")
    return kind


def description_versions(store: ItemStore, ref: ItemRef) -> list[int]:
    kind = description_kind(store, ref)
    return sorted(int(v) for v in store.state(ref).viewpoint_names(KINDS[kind]) if v != "last")


def resolve_version(store: ItemStore, ref: ItemRef, version: int | str = "last") -> int:
    versions = description_versions(store, ref)
    if version == "last":
        if not versions:
            raise UnknownVersion(f"{ref} has no content yet")
        return versions[-1]
    if int(version) not in versions:
        raise UnknownVersion(f"{ref} has no version {version}")
    return int(version)


def get_description(store: ItemStore, ref: ItemRef, version: int | str = "last") -> str:
    """Canonical content of ``ref`` at ``version``."""
    kind = description_kind(store, ref)
    return store.get_outcome(ref, KINDS[kind], str(resolve_version(store, ref, version))).document


def workflow_at(store: ItemStore, ref: ItemRef, version: int | str = "last") -> WorkflowDef:
    if description_kind(store, ref) != "WorkflowDesc":
        raise NotADescription(f"{ref} is not a WorkflowDesc")
    number = resolve_version(store, ref, version)
    return WorkflowDef(workflow_from_node(parse(get_description(store, ref, number))).root, number)


def find_description(store: ItemStore, kind: str, name: str) -> ItemRef | None:
    """First description of ``kind`` whose Name is ``name`` (creation order)."""
    for ref, state in store.items.items():
        p = state.properties.get("Name")
        if state.type == kind and p is not None and p.value == name:
            return ref
    return None


# writing descriptions -----------------------------------------------------------

def _amend_records(store: ItemStore, agent: Agent, pending: list[Node], ref: ItemRef, doc: Node) -> list[Node]:
    touched = store.preview(pending) if pending else {}
    state = touched.get(ref) or store.state(ref)
    records, _ = transition_records(store, state, agent, AMEND, DONE, request=doc)
    return records


def _side_effect(store: ItemStore, kind: str, doc: Node) -> list[Node]:
    if kind == "SchemaDesc":
        defn = schema_from_node(doc)
        return [store.schema_record(SchemaDef(defn.name, defn.root, store.registry.next_version(defn.name)))]
    if kind == "ScriptDesc":
        name = doc.attrs["name"]
        return [store.script_record(Script(name, store.scripts.next_version(name), doc.text))]
    return []


def _new_ref(store: ItemStore, uuid: str | None) -> ItemRef:
    ref = canonical_uuid(uuid) if uuid is not None else store.id_factory(store)
    if ref in store.items:
        raise DuplicateUuid(ref)
    return ref


def _describe(store: ItemStore, agent: Agent, kind: str, doc: Node, name: str, ref: ItemRef,
              register: bool, creation: list[Node]) -> ItemRef:
    check_content(store, kind, doc)
    effects = _side_effect(store, kind, doc) if register else []
    # content is validated first, so a bad document creates no item
    records = effects + creation
    records += _amend_records(store, agent, records, ref, doc)
    store.commit(records)
    return ref


def bootstrap(store: ItemStore, agent: Agent = SYSTEM) -> dict[str, ItemRef]:
    """Create the self-describing description layer in an empty store."""
    with store._lock:
        if store.journal or store.items:
            raise StoreNotEmpty(f"{len(store.journal)} journal records present")

        def seed(key: str, kind: str, doc: Node, name: str) -> None:
            ref = BOOTSTRAP[key]
            wf_key = f"WorkflowDesc:{kind}Lifecycle"
            creation = [
                store.creation_record(ref, [Property("Type", kind, False), Property("Name", name, False)],
                                      desc=(BOOTSTRAP[f"ItemDesc:{kind}"], 0)),
                workflow_record(ref, WorkflowDef(lifecycle(kind).root, 0), (BOOTSTRAP[wf_key], 0)),
            ]
            _describe(store, agent, kind, doc, name, ref, False, creation)

        for s in builtins.BUILTIN_SCHEMAS:
            seed(f"SchemaDesc:{s.name}", "SchemaDesc", SchemaDef(s.name, s.root).to_node(), s.name)
        for sc in builtins.BUILTIN_SCRIPTS:
            seed(f"ScriptDesc:{sc.name}", "ScriptDesc", Node("Script", {"name": sc.name}, sc.body), sc.name)
        for kind in KINDS:
            seed(f"WorkflowDesc:{kind}Lifecycle", "WorkflowDesc", lifecycle(kind).to_node(), f"{kind}Lifecycle")
        for kind in KINDS:
            seed(f"ItemDesc:{kind}", "ItemDesc", _item_def(kind), kind)
        return dict(BOOTSTRAP)


def _instantiate_records(store: ItemStore, itemdesc: ItemRef, version: int | str, ref: ItemRef,
                         overrides: dict[str, str]) -> list[Node]:
    if description_kind(store, itemdesc) != "ItemDesc":
        raise NotADescription(f"{itemdesc} is not an ItemDesc")
    number = resolve_version(store, itemdesc, version)
    doc = parse(get_description(store, itemdesc, number))
    declared = {p.attrs["name"]: p for p in doc.all("Property")}
    unknown = sorted(set(overrides) - set(declared))
    if unknown:
        raise UnknownProperty(", ".join(unknown))
    props = [Property("Type", doc.child("TypeName").text, False)]
    for name, p in declared.items():
        props.append(Property(name, overrides.get(name, p.attrs.get("default", "")), p.attrs["mutable"] == "true"))
    colls = [(c.attrs["name"], int(c.attrs["slots"]), c.attrs.get("type")) for c in doc.all("Collection")]
    records = [store.creation_record(ref, props, colls, desc=(itemdesc, number))]
    wf = doc.child("Workflow")
    if wf is not None:
        definition = workflow_at(store, wf.attrs["uuid"], int(wf.attrs["version"]))
        check_references(store, definition)
        records.append(workflow_record(ref, definition, (wf.attrs["uuid"], definition.version)))
    return records


def instantiate(store: ItemStore, itemdesc: ItemRef, version: int | str = "last", uuid: str | None = None,
                overrides: dict[str, str] | None = None) -> ItemRef:
    """Create an item from an ItemDesc, pinning the description and workflow versions."""
    with store._lock:
        ref = _new_ref(store, uuid)
        store.commit(_instantiate_records(store, itemdesc, version, ref, dict(overrides or {})))
        return ref


def create_description(store: ItemStore, agent: Agent, kind: str, content: str | Node,
                       name: str | None = None, uuid: str | None = None) -> ItemRef:
    """Create a description item of ``kind`` whose version 0 is ``content``."""
    if kind not in KINDS:
        raise UnknownKind(kind)
    doc = _parse(content)
    with store._lock:
        meta = meta_item_desc(kind)
        if meta not in store.items:
            raise UnknownItem(f"{meta} (store is not bootstrapped)")
        ref = _new_ref(store, uuid)
        name = name if name is not None else content_name(kind, doc)
        creation = _instantiate_records(store, meta, "last", ref, {"Name": name})
        return _describe(store, agent, kind, doc, name, ref, True, creation)


def amend_description(store: ItemStore, agent: Agent, ref: ItemRef, content: str | Node) -> int:
    """Record ``content`` as the next version of description ``ref``; returns its number."""
    doc = _parse(content)
    with store._lock:
        kind = description_kind(store, ref)
        name = store.state(ref).properties["Name"].value
        check_content(store, kind, doc, name)
        version = len(description_versions(store, ref))
        records = _side_effect(store, kind, doc)
        records += _amend_records(store, agent, records, ref, doc)
        store.commit(records)
        return version


def check_closure(store: ItemStore) -> list[str]:
    """Problems that break meta-circularity; empty when every description is described."""
    problems = []
    for ref, state in sorted(store.items.items()):
        kind = state.type
        if kind not in KINDS:
            continue
        if state.desc is None:
            problems.append(f"{ref}: no ItemDesc reference")
            continue
        try:
            item_def = parse(get_description(store, *state.desc))
        except CristalError as exc:
            problems.append(f"{ref}: ItemDesc {state.desc[0]} v{state.desc[1]} unreadable ({exc.code})")
            continue
        if item_def.child("TypeName").text != kind:
            problems.append(f"{ref}: described as {item_def.child('TypeName').text}, is {kind}")
        if state.workflow_ref is None:
            problems.append(f"{ref}: lifecycle has no WorkflowDesc")
        elif store.items.get(state.workflow_ref[0]) is None or \
                store.items[state.workflow_ref[0]].type != "WorkflowDesc":
            problems.append(f"{ref}: lifecycle {state.workflow_ref[0]} is not a WorkflowDesc")
    for s in store.registry.all():
        if find_description(store, "SchemaDesc", s.name) is None:
            problems.append(f"schema {s.name} has no SchemaDesc")
    for sc in store.scripts.all():
        if find_description(store, "ScriptDesc", sc.name) is None:
            problems.append(f"script {sc.name} has no ScriptDesc")
    return problems
