"""Command-line front-end.

Every command prints a canonical XML document on stdout (``--summary``
prints short human-readable lines instead). Exit status is 0 on success,
1 for usage errors and 2 for domain errors, which are reported on stderr as
``ERROR <Name>: <detail>``.
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import logging
import os
import sys
from pathlib import Path

from . import descriptions as desc
from . import fixtures, lifecycle, provenance
from .atlas import DataAtlas
from .canon import FixedClock, Node, SystemClock, is_timestamp, parse, to_canonical
from .errors import CristalError, StoreNotEmpty
from .schema import schema_from_xml
from .store import Agent, ItemStore, sequential_uuids

ENV_JOURNAL = "CRISTAL_JOURNAL"
log = logging.getLogger("cristal")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


GLOBAL_DEFAULTS = {"journal": None, "agent": "cli", "role": "", "clock": "system", "summary": False,
                   "verbose": False}


def _global_options(p: argparse.ArgumentParser) -> None:
    # SUPPRESS lets the options appear before or after the subcommand
    p.add_argument("--journal", default=argparse.SUPPRESS, help=f"journal file (default ${ENV_JOURNAL})")
    p.add_argument("--agent", default=argparse.SUPPRESS, help="agent name recorded in events")
    p.add_argument("--role", default=argparse.SUPPRESS, help="comma-separated roles held by the agent")
    p.add_argument("--clock", default=argparse.SUPPRESS, help='"system" or a fixed ISO timestamp')
    p.add_argument("--summary", action="store_true", default=argparse.SUPPRESS,
                   help="print human-readable lines")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cristal", description="Description-driven item repository with provenance.")
    _global_options(p)
    p.set_defaults(**GLOBAL_DEFAULTS)
    common = _Parser(add_help=False)
    _global_options(common)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def group(name: str, help: str | None = None):
        return sub.add_parser(name, help=help, parents=[common]).add_subparsers(dest="action", parser_class=_Parser)

    def leaf(g, name: str, *positional: str, help: str | None = None):
        s = g.add_parser(name, help=help, parents=[common])
        for arg in positional:
            s.add_argument(arg)
        return s

    sub.add_parser("init", help="create a journal holding the bootstrap descriptions", parents=[common])

    g = group("schema", "register and read schemas")
    leaf(g, "add", "file")
    leaf(g, "get", "name").add_argument("--version", default="last")

    g = group("desc", "description items")
    s = leaf(g, "create")
    s.add_argument("kind", choices=sorted(desc.KINDS))
    s.add_argument("file")
    s.add_argument("--name")
    leaf(g, "amend", "uuid", "file")
    leaf(g, "show", "uuid").add_argument("--version", default="last")

    g = group("item", "items, properties and collections")
    s = leaf(g, "new", "itemdesc")
    s.add_argument("--version", default="last")
    s.add_argument("--uuid")
    s.add_argument("--set", action="append", default=[], metavar="NAME=VALUE")
    leaf(g, "props", "uuid")
    leaf(g, "set", "uuid", "name", "value")
    s = leaf(g, "assign", "uuid", "collection")
    s.add_argument("slot", type=int)
    s.add_argument("target")
    leaf(g, "trace", "uuid")

    g = group("act", "workflow activities")
    leaf(g, "list", "uuid")
    leaf(g, "exec", "uuid", "path", "transition").add_argument("--outcome", help="outcome document file")

    leaf(group("auto", "automatic activities"), "run", "uuid")
    leaf(group("atlas", "metadata queries"), "query", "text")

    g = group("prov", "provenance")
    for name in ("graph", "opm"):
        s = leaf(g, name)
        s.add_argument("uuids", nargs="+")
        s.add_argument("--depth", type=int)
    leaf(g, "verify").add_argument("uuid", nargs="?")

    g = group("archive", "XML archive")
    leaf(g, "export").add_argument("--item")
    leaf(g, "import", "file")

    s = leaf(group("fixture", "bundled models"), "ecal", help="load the ECAL model into an empty journal")
    s.add_argument("--run", action="store_true", help="also run the Product/Order/Shipment scenario")
    return p


WRITES = {("init", None), ("schema", "add"), ("desc", "create"), ("desc", "amend"), ("item", "new"),
          ("item", "set"), ("item", "assign"), ("act", "exec"), ("auto", "run"), ("archive", "import"),
          ("fixture", "ecal")}


@contextlib.contextmanager
def _locked(path: Path):
    """Advisory lock preventing concurrent CLI writers on one journal."""
    lock = path.with_name(path.name + ".lock")
    with open(lock, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _open_store(args) -> ItemStore:
    clock = SystemClock() if args.clock == "system" else FixedClock(args.clock)
    ids = sequential_uuids() if args.clock != "system" else None
    return ItemStore.load(args.journal, clock=clock, id_factory=ids)


def _events_node(events) -> Node:
    return Node("Events", {"count": str(len(events))}, "", [e.to_node() for e in events])


def run(args, out) -> None:
    store = _open_store(args)
    agent = Agent(args.agent, {r for r in args.role.split(",") if r})
    cmd = (args.command, getattr(args, "action", None))
    lines: list[str] = []

    if cmd == ("init", None):
        desc.bootstrap(store)
        doc = Node("Bootstrap", {}, "", [Node("Description", {"key": k, "uuid": v})
                                         for k, v in desc.BOOTSTRAP.items()])
        lines.append(f"bootstrapped {len(desc.BOOTSTRAP)} description items")
    elif cmd == ("schema", "add"):
        name, version = store.register_schema(schema_from_xml(_read(args.file)))
        doc = Node("SchemaRef", {"name": name, "version": str(version)})
        lines.append(f"{name} v{version}")
    elif cmd == ("schema", "get"):
        doc = store.registry.get(args.name, args.version).to_node()
    elif cmd == ("desc", "create"):
        ref = desc.create_description(store, agent, args.kind, _read(args.file), args.name)
        doc = Node("Description", {"uuid": ref, "kind": args.kind, "version": "0"})
        lines.append(f"{args.kind} {ref} v0")
    elif cmd == ("desc", "amend"):
        version = desc.amend_description(store, agent, args.uuid, _read(args.file))
        doc = Node("Description", {"uuid": args.uuid, "kind": desc.description_kind(store, args.uuid),
                                   "version": str(version)})
        lines.append(f"{args.uuid} v{version}")
    elif cmd == ("desc", "show"):
        doc = parse(desc.get_description(store, args.uuid, args.version))
    elif cmd == ("item", "new"):
        overrides = {}
        for pair in args.set:
            if "=" not in pair:
                raise UsageError(f"--set expects NAME=VALUE, got {pair!r}")
            k, v = pair.split("=", 1)
            overrides[k] = v
        ref = desc.instantiate(store, args.itemdesc, args.version, args.uuid, overrides)
        doc = Node("Item", {"uuid": ref, "type": store.state(ref).type})
        lines.append(ref)
    elif cmd == ("item", "props"):
        state = store.state(args.uuid)
        doc = Node("Properties", {"item": args.uuid})
        for p in state.properties.values():
            doc.add("Property", name=p.name, value=p.value, mutable="true" if p.mutable else "false")
            lines.append(f"{p.name}={p.value}")
    elif cmd == ("item", "set"):
        state = store.state(args.uuid)
        if args.name in state.properties:
            event = store.set_property(agent, args.uuid, args.name, args.value)
        else:
            event = store.add_property(agent, args.uuid, args.name, args.value)
        doc = _events_node([event])
    elif cmd == ("item", "assign"):
        doc = _events_node([store.assign_slot(agent, args.uuid, args.collection, args.slot, args.target)])
    elif cmd == ("item", "trace"):
        t = provenance.trace(store, args.uuid)
        doc = t.to_node()
        lines += [f"{e.event.id} {e.event.ts} {e.event.activity} {e.event.transition} "
                  f"{e.event.prev}->{e.event.target} {e.agent}/{e.role}" for e in t.entries]
    elif cmd == ("act", "list"):
        state = store.state(args.uuid)
        doc = Node("Active", {"item": args.uuid})
        for path in lifecycle.active_activities(store, args.uuid):
            act = state.workflow.activity(path)
            doc.add("Activity", path=path, role=act.role, automatic="true" if act.automatic else "false")
            lines.append(path)
    elif cmd == ("act", "exec"):
        outcome = _read(args.outcome) if args.outcome else None
        doc = _events_node(lifecycle.request_transition(store, agent, args.uuid, args.path,
                                                        args.transition, outcome))
    elif cmd == ("auto", "run"):
        doc = _events_node(lifecycle.run_automatic(store, args.uuid, agent if agent.roles else None))
    elif cmd == ("atlas", "query"):
        atlas = DataAtlas(store)
        hits = atlas.query(args.text)
        doc = atlas.results_node(hits)
        lines += [f"{i} {e} {s}" for i, e, s in hits]
    elif cmd[0] == "prov" and cmd[1] in ("graph", "opm"):
        graph = provenance.build_graph(store, args.uuids, args.depth)
        if cmd[1] == "opm":
            doc = parse(provenance.export_opm(graph))
        else:
            doc = Node("ProvGraph", {
                "artifacts": str(len(graph.artifacts)), "processes": str(len(graph.processes)),
                "agents": str(len(graph.agents)), "edges": str(len(graph.edges)),
                "acyclic": "true" if graph.is_acyclic() else "false",
            })
            for t in provenance.EDGE_TYPES:
                doc.add("Edges", type=t, count=str(graph.count(t)))
    elif cmd == ("prov", "verify"):
        report = provenance.replay_verify(store, args.uuid)
        doc = report.to_node()
        lines.append("ok" if report.ok else f"divergence at event {report.event}: {report.detail}")
    elif cmd == ("archive", "export"):
        doc = parse(store.export_archive(args.item))
    elif cmd == ("archive", "import"):
        if store.journal:
            raise StoreNotEmpty(f"{args.journal} already holds {len(store.journal)} records")
        from .archive import import_archive
        import_archive(_read(args.file), store)
        doc = Node("Imported", {"records": str(len(store.journal)), "items": str(len(store.items))})
    elif cmd == ("fixture", "ecal"):
        if store.journal:
            raise StoreNotEmpty(f"{args.journal} already holds {len(store.journal)} records")
        data = fixtures.bundled_journal()
        store._replay_bytes(data)
        store.path.write_bytes(data)
        doc = Node("Fixture", {"name": "ecal"})
        for key, ref in fixtures.model_ids(store).items():
            doc.add("Description", key=key, uuid=ref)
        if args.run:
            made = fixtures.run_scenario(store)
            for kind, refs in made.items():
                for ref in refs:
                    doc.add("Item", type=kind, uuid=ref, events=str(len(store.state(ref).events)))
    else:
        raise UsageError(f"unknown command {' '.join(c for c in cmd if c)}")

    if args.summary and lines:
        out.write("\n".join(lines) + "\n")
    else:
        out.write(to_canonical(doc) + "\n")


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None or (args.command != "init" and getattr(args, "action", None) is None):
            parser.print_usage(err)
            raise UsageError("a command is required")
        if args.clock != "system" and not is_timestamp(args.clock):
            raise UsageError("--clock must be 'system' or an ISO timestamp like 2013-10-20T00:00:00.000Z")
        args.journal = args.journal or os.environ.get(ENV_JOURNAL)
        if not args.journal:
            raise UsageError(f"no journal: pass --journal or set {ENV_JOURNAL}")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=err)
        path = Path(args.journal)
        if (args.command, getattr(args, "action", None)) in WRITES:
            with _locked(path):
                run(args, out)
        else:
            if not path.exists():
                raise UsageError(f"journal {path} does not exist")
            run(args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 1
    except CristalError as exc:
        err.write(f"ERROR {exc.code}: {exc.detail}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
