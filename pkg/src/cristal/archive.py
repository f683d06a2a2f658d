"""Long-term XML archive of a store.

The archive groups journal records per item and carries every schema and
script version inline, so it can be read without this software. Each record
keeps its journal position in a ``seq`` attribute; importing sorts by ``seq``
and replays, which reproduces the original item states exactly.
"""

from __future__ import annotations

from . import builtins
from .canon import Node, parse, to_canonical
from .errors import CorruptJournal


def _with_seq(rec: Node, seq: int) -> Node:
    return Node(rec.tag, {"seq": str(seq), **rec.attrs}, rec.text, rec.children)


def _references(state) -> Node:
    refs = Node("References")
    schemas = {(e.schema, e.schema_version) for e in state.events if e.schema is not None}
    if state.workflow is not None:
        schemas |= state.workflow.definition.schemas()
    for name, version in sorted(schemas):
        refs.add("SchemaRef", name=name, version=str(version))
    if state.desc is not None:
        refs.add("DescriptionRef", uuid=state.desc[0], version=str(state.desc[1]), use="item")
    if state.workflow_ref is not None:
        refs.add("DescriptionRef", uuid=state.workflow_ref[0], version=str(state.workflow_ref[1]), use="workflow")
    return refs


def export_archive(store, item: str | None = None) -> str:
    with store._lock:
        if item is not None:
            store.state(item)
        per_item: dict[str, list[Node]] = {}
        schemas, scripts = [], []
        for seq, (line, owner) in enumerate(zip(store.journal, store.record_items)):
            rec = parse(line)
            if owner is None:
                (schemas if rec.tag == "SchemaRegistered" else scripts).append((seq, rec))
            else:
                per_item.setdefault(owner, []).append(_with_seq(rec, seq))

        wanted = sorted(store.items) if item is None else [item]
        if item is not None:
            names = {e.schema for e in store.items[item].events if e.schema is not None}
            if store.items[item].workflow is not None:
                names |= {n for n, _ in store.items[item].workflow.definition.schemas()}
            schemas = [(s, r) for s, r in schemas if r.attrs["name"] in names]
            scripts = []

        root = Node("Archive")
        sec = Node("Schemas")
        for defn in builtins.BUILTIN_SCHEMAS:
            sec.children.append(Node("SchemaRegistered", {"builtin": "true", "name": defn.name,
                                                          "version": str(defn.version)}, "", [defn.to_node()]))
        sec.children.extend(_with_seq(r, s) for s, r in schemas)
        root.children.append(sec)
        sec = Node("Scripts")
        for script in builtins.BUILTIN_SCRIPTS:
            sec.children.append(Node("ScriptRegistered", {"builtin": "true", "name": script.name,
                                                          "version": str(script.version)}, script.body))
        sec.children.extend(_with_seq(r, s) for s, r in scripts)
        root.children.append(sec)
        for ref in wanted:
            state = store.items[ref]
            n = Node("Item", {"uuid": ref, "type": state.type})
            n.children.append(_references(state))
            props = Node("Properties")
            for p in state.properties.values():
                props.add("Property", name=p.name, value=p.value, mutable="true" if p.mutable else "false")
            n.children.append(props)
            n.children.append(Node("Records", {}, "", per_item.get(ref, [])))
            root.children.append(n)
        return to_canonical(root)


def import_archive(document: str | bytes, store):
    """Replay an archive into ``store`` (which must be empty)."""
    root = parse(document)
    if root.tag != "Archive":
        raise CorruptJournal(0, "archive root must be <Archive>")
    records: list[tuple[int, Node]] = []

    def take(rec: Node) -> None:
        if rec.attrs.get("builtin") == "true":
            return
        attrs = dict(rec.attrs)
        try:
            seq = int(attrs.pop("seq"))
        except (KeyError, ValueError):
            raise CorruptJournal(0, f"<{rec.tag}> without a valid seq") from None
        records.append((seq, Node(rec.tag, attrs, rec.text, rec.children)))

    for section in root.children:
        if section.tag in ("Schemas", "Scripts"):
            for rec in section.children:
                take(rec)
        elif section.tag == "Item":
            recs = section.child("Records")
            for rec in recs.children if recs is not None else ():
                take(rec)
    records.sort(key=lambda r: r[0])
    if [s for s, _ in records] != list(range(len(records))):
        raise CorruptJournal(0, "archive records do not form a dense sequence")
    if store.journal:
        raise CorruptJournal(0, "archives can only be imported into an empty store")
    data = "".join(to_canonical(r) + "\n" for _, r in records).encode("utf-8")
    store._replay_bytes(data)
    if store.path is not None:
        store.path.write_bytes(data)
    return store
