"""End-to-end acceptance criteria, one test each.

Every test records a PASS/FAIL verdict that is printed in the terminal
summary, in addition to pytest's own outcome.
"""

from __future__ import annotations

import contextlib
import itertools
import random
import time
import xml.etree.ElementTree as ET

from cristal import ItemStore
from cristal import descriptions as desc
from cristal import fixtures
from cristal.atlas import DataAtlas
from cristal.canon import canonicalize, parse, to_canonical
from cristal.errors import CristalError
from cristal.lifecycle import request_transition, run_automatic
from cristal.provenance import build_graph, export_opm, parse_opm, replay_verify, spans
from cristal.schema import schema_from_xml, validate_document
from cristal.workflow import ActivityDef, Block, WorkflowDef, sequence, workflow_from_node

from atlas_gen import oracle, random_query, random_store
from conftest import VERDICTS
from corpus import CASES, SCHEMA
from fuzz import drive_to_completion, fuzz_run, journal_bytes, snapshot

# frozen from the trace-enumeration oracle below (3 Products x 6, Order 4, Shipment 10)
GOLDEN_FIXTURE_EVENTS = 32
FUZZ_RUNS = 1000


@contextlib.contextmanager
def criterion(n: int, title: str):
    try:
        yield
    except BaseException:
        VERDICTS[n] = (title, False)
        print(f"FAIL criterion {n}: {title}")
        raise
    VERDICTS[n] = (title, True)
    print(f"PASS criterion {n}: {title}")


# trace-enumeration oracle -----------------------------------------------------

def traces(node, choose) -> list[tuple[str, ...]]:
    """Every admissible order of activity completions through ``node``.

    ``choose(block)`` decides an OrSplit (True for the first branch); loops run
    their body once, which is all the fixture needs.
    """
    if isinstance(node, ActivityDef):
        return [(node.name,)]
    parts = [[tuple(f"{node.name}/{a}" for a in t) for t in traces(c, choose)] for c in node.children]
    if node.kind == "OrSplit":
        return parts[0] if choose(node) else parts[1]
    if node.kind in ("Sequence", "Loop"):
        return [sum(combo, ()) for combo in itertools.product(*parts)]
    out = []
    for combo in itertools.product(*parts):
        out += _interleavings(list(combo))
    return out


def _interleavings(seqs: list[tuple[str, ...]]) -> list[tuple[str, ...]]:
    seqs = [s for s in seqs if s]
    if not seqs:
        return [()]
    return [(s[0],) + rest for i, s in enumerate(seqs)
            for rest in _interleavings(seqs[:i] + [s[1:]] + seqs[i + 1:])]


def root_traces(wf: WorkflowDef, choose) -> set[tuple[str, ...]]:
    # activity paths are relative to the root block
    prefix = wf.root.name + "/"
    return {tuple(a[len(prefix):] for a in t) for t in traces(wf.root, choose)}


def test_fixture_end_to_end():
    with criterion(1, f"fixture end-to-end yields {GOLDEN_FIXTURE_EVENTS} events in < 5 s"):
        began = time.perf_counter()
        store = fixtures.load()
        made = fixtures.run_scenario(store, fixtures.model_ids(store), products=3)
        elapsed = time.perf_counter() - began

        # the scenario orders 3 crystals, below the largeOrder threshold of 10: OrSplit takes its second branch
        expected = {
            "Product": root_traces(fixtures.WORKFLOWS["ProductLifecycle"], lambda b: True),
            "Order": root_traces(fixtures.WORKFLOWS["OrderLifecycle"], lambda b: False),
            "Shipment": root_traces(fixtures.WORKFLOWS["ShipmentLifecycle"], lambda b: True),
        }
        # each completed activity is two events; a Shipment also fills its two collection slots
        maintenance = {kind: sum(slots for _, slots, _ in fixtures.ITEMS[kind][2]) for kind in expected}
        oracle_total = 0
        for kind, refs in made.items():
            lengths = {len(t) for t in expected[kind]}
            assert len(lengths) == 1
            oracle_total += len(refs) * (2 * lengths.pop() + maintenance[kind])
            for ref in refs:
                events = store.state(ref).events
                completed = tuple(e.activity for e in events if e.target == "Completed"
                                  and e.activity != "ItemMaintenance")
                assert completed in expected[kind]
                assert store.state(ref).workflow.status == "completed"
        total = sum(len(store.state(ref).events) for refs in made.values() for ref in refs)
        assert oracle_total == GOLDEN_FIXTURE_EVENTS
        assert total == GOLDEN_FIXTURE_EVENTS
        assert elapsed < 5.0


def _tamper(data: bytes, rng: random.Random) -> tuple[bytes, int] | None:
    """Flip one byte inside a random automatic outcome record, or None if there is none."""
    lines = data.split(b"\n")
    candidates = [i for i in range(1, len(lines)) if lines[i].startswith(b"<Outcome ")
                  and b'transition="Done"' in lines[i - 1] and b'activity="ItemMaintenance"' not in lines[i - 1]]
    if not candidates:
        return None
    i = rng.choice(candidates)
    pos = rng.randrange(len(lines[i]))
    new = rng.choice([b for b in range(256) if b != lines[i][pos]])
    line = bytearray(lines[i])
    line[pos] = new
    lines[i] = bytes(line)
    return b"\n".join(lines), i


def test_replay_determinism():
    with criterion(2, f"replay determinism and tamper detection over {FUZZ_RUNS} fuzz runs"):
        tampered = detected = unverified = 0
        for seed in range(FUZZ_RUNS):
            run = fuzz_run(seed)
            data = journal_bytes(run.store)
            again = ItemStore()
            again._replay_bytes(data)
            assert snapshot(again) == snapshot(run.store), seed
            if not replay_verify(data).ok:
                unverified += 1
            hit = _tamper(data, random.Random(seed))
            if hit is not None:
                tampered += 1
                try:
                    caught = not replay_verify(hit[0]).ok
                except CristalError:
                    caught = True
                detected += caught
        print(f"  {FUZZ_RUNS} runs, {tampered} tampered automatic outcomes, {detected} detected")
        assert unverified == 0
        assert tampered > FUZZ_RUNS // 4
        assert detected == tampered


def test_done_pairing():
    with criterion(3, "automatic executions emit adjacent Done pairs"):
        pairs = violations = 0
        for seed in range(FUZZ_RUNS):
            run = fuzz_run(seed)
            events = [ET.fromstring(line) for line in run.store.journal]
            events = [e for e in events if e.tag == "Event" and e.get("activity") != "ItemMaintenance"]
            i = 0
            while i < len(events):
                e = events[i]
                if e.get("transition") != "Done":
                    i += 1
                    continue
                nxt = events[i + 1] if i + 1 < len(events) else None
                ok = (nxt is not None and nxt.get("transition") == "Done"
                      and (e.get("prev"), e.get("target")) == ("Waiting", "Started")
                      and (nxt.get("prev"), nxt.get("target")) == ("Started", "Completed")
                      and nxt.get("item") == e.get("item") and nxt.get("activity") == e.get("activity")
                      and nxt.get("ts") == e.get("ts") and int(nxt.get("id")) == int(e.get("id")) + 1)
                if ok:
                    pairs += 1
                    i += 2
                else:
                    violations += 1
                    i += 1
            violations += len(run.violations)
        print(f"  {pairs} Done pairs, {violations} violations")
        assert pairs > 0
        assert violations == 0


# amendment content per description kind ----------------------------------------

def _amended(store: ItemStore, kind: str, name: str, ref: str, ids: dict[str, str], k: int) -> str:
    base = parse(desc.get_description(store, ref, 0))
    if kind == "SchemaDesc":
        root = base.child("Element")
        root.add("Element", name=f"Extra{k}", minOccurs="0")
        return to_canonical(base)
    if kind == "ScriptDesc":
        body = base.text
        edits = {"largeOrder": ("> 10", f"> {10 + k}"),
                 "autoApprove": ("small order of ", f"small order (rev {k}) of "),
                 "manifest": ('+ "," +', f'+ "|{k}|" +')}
        old, new = edits[name]
        assert old in body
        base.text = body.replace(old, new)
        return to_canonical(base)
    if kind == "WorkflowDesc":
        wf = workflow_from_node(base)
        root: Block = wf.root
        return WorkflowDef(sequence(root.name, *root.children, ActivityDef(f"extra{k}", "operator"))).canonical()
    lifecycle = fixtures.ITEMS[name][0]
    return canonicalize(fixtures.item_desc_xml(name, ids[f"WorkflowDesc:{lifecycle}"], k))


OUTCOME_SCHEMA = {"SchemaDesc": "SchemaDef", "ScriptDesc": "ScriptDef", "WorkflowDesc": "WorkflowDef",
                  "ItemDesc": "ItemDef"}


def test_immutability_under_evolution():
    with criterion(4, "descriptions amended 3 times mid-run; pinned items complete, viewpoints stable"):
        s = fixtures.load()
        ids = fixtures.model_ids(s)
        assert len(ids) == 18
        op, co, sh = fixtures.OPERATOR, fixtures.COORDINATOR, fixtures.SHIPPER

        # first half of the scenario, under version 0 of everything
        products = [desc.instantiate(s, ids["ItemDesc:Product"]) for _ in range(3)]
        for n, p in enumerate(products, 1):
            request_transition(s, op, p, "register", "Start")
            request_transition(s, op, p, "register", "Complete",
                               f"<Registration><Barcode>ECAL-{n:04d}</Barcode><Centre>CERN</Centre></Registration>")
            request_transition(s, op, p, "characterize", "Start")
        order = desc.instantiate(s, ids["ItemDesc:Order"])
        request_transition(s, co, order, "request", "Start")
        request_transition(s, co, order, "request", "Complete",
                           "<Order><RequestedType>Barrel crystal</RequestedType><Quantity>3</Quantity></Order>")
        shipment = desc.instantiate(s, ids["ItemDesc:Shipment"])

        # three amendments of all 18 descriptions; item descriptions last so their workflow versions exist
        kinds_order = ["SchemaDesc", "ScriptDesc", "WorkflowDesc", "ItemDesc"]
        keys = sorted(ids, key=lambda key: (kinds_order.index(key.split(":")[0]), key))
        submitted = {key: [desc.get_description(s, ids[key], 0)] for key in keys}
        for k in (1, 2, 3):
            for key in keys:
                kind, name = key.split(":")
                content = _amended(s, kind, name, ids[key], ids, k)
                assert desc.amend_description(s, fixtures.DESIGNER, ids[key], content) == k
                submitted[key].append(content)
        first_read = {key: [desc.get_description(s, ids[key], v) for v in range(4)] for key in keys}

        # second half: pre-amendment items finish under their pinned versions
        for n, p in enumerate(products, 1):
            request_transition(s, op, p, "characterize", "Complete",
                               f"<Product><Barcode>ECAL-{n:04d}</Barcode><Weight>1{n}.5</Weight></Product>")
            request_transition(s, op, p, "assign", "Start")
            request_transition(s, op, p, "assign", "Complete",
                               f"<Position><Supermodule>1</Supermodule><Slot>{n}</Slot></Position>")
        run_automatic(s, order, co)
        for slot, p in enumerate(products[:2]):
            s.assign_slot(sh, shipment, "contents", slot, p)
        request_transition(s, sh, shipment, "pack", "Start")
        request_transition(s, sh, shipment, "pack", "Complete", "<Packing><Crate>C-17</Crate></Packing>")
        run_automatic(s, shipment, sh)
        request_transition(s, sh, shipment, "prepare/dispatch", "Start")
        request_transition(s, sh, shipment, "prepare/dispatch", "Complete",
                           "<Dispatch><Carrier>road</Carrier><Sent>2014-01-02T00:00:00.000Z</Sent></Dispatch>")
        request_transition(s, sh, shipment, "receive", "Start")
        request_transition(s, sh, shipment, "receive", "Complete",
                           "<Receipt><Centre>CERN</Centre><Intact>true</Intact></Receipt>")

        for ref in products + [order, shipment]:
            st = s.state(ref)
            assert st.workflow.status == "completed"
            assert st.workflow_ref[1] == 0
            assert not any(path.endswith(("extra1", "extra2", "extra3")) for path in st.workflow.definition.activities())
        assert [len(s.state(r).events) for r in products + [order, shipment]] == [6, 6, 6, 4, 10]
        assert s.get_outcome(order, "ApprovalData").leaf("Approval/Reason") == "small order of 3"
        assert s.get_outcome(shipment, "ManifestData").leaf("Manifest/Barcodes") == "ECAL-0001,ECAL-0002"
        assert all(o.schema_version == 0 for r in products + [order, shipment] for o in s.state(r).outcomes.values()
                   if o.schema not in ("PropertyChange", "CollectionChange"))

        # viewpoints "0".."3" are byte-identical to what was submitted, before and after the run
        for key in keys:
            kind = key.split(":")[0]
            assert desc.description_versions(s, ids[key]) == [0, 1, 2, 3]
            assert [canonicalize(c) for c in submitted[key]] == first_read[key]
            for v in range(4):
                assert desc.get_description(s, ids[key], v) == first_read[key][v]
                assert s.get_outcome(ids[key], OUTCOME_SCHEMA[kind], str(v)).document == first_read[key][v]
            assert len(set(first_read[key])) == 4

        # new instances pick up the latest versions
        late = desc.instantiate(s, ids["ItemDesc:Product"])
        assert list(s.state(late).workflow.definition.activities())[-1] == "extra3"


def test_validation_gate():
    with criterion(5, f"{len(CASES)}-case validation corpus"):
        assert len(CASES) == 50
        defn = schema_from_xml(SCHEMA)
        wrong = []
        for label, doc, expected in CASES:
            report = validate_document(doc, defn)
            got = [(v.code, v.path) for v in report.violations]
            if got != expected or report.valid != (not expected):
                wrong.append(label)
        print(f"  {len(CASES) - len(wrong)}/{len(CASES)} decisions as expected")
        assert wrong == []


def test_atlas_oracle():
    with criterion(6, "atlas equals the document-scan oracle on 100 random stores"):
        queries = nonempty = 0
        for seed in range(100):
            s = random_store(seed, max_outcomes=100)
            assert len(s.outcomes()) <= 100
            atlas = DataAtlas(s)
            rng = random.Random(1000 + seed)
            for _ in range(20):
                q = random_query(rng)
                got = atlas.query(q)
                assert got == oracle(s.journal, q), (seed, q)
                queries += 1
                nonempty += bool(got)
        print(f"  {queries} queries, {nonempty} with hits")
        assert nonempty > queries // 10


def test_graph_conservation():
    with criterion(7, "provenance graph conservation and OPM byte stability"):
        completed = 0
        for seed in range(200):
            run = fuzz_run(seed)
            rng = random.Random(seed)
            for ref in run.items:
                drive_to_completion(run.store, ref, rng)
            s = run.store
            done = [ref for ref in run.items if s.state(ref).workflow.status != "running"]
            completed += len(done)
            g = build_graph(s, run.items)

            # independent counts from the raw journal
            records = [ET.fromstring(line) for line in s.journal]
            work_outcomes = span_starts = 0
            last_event = None
            for rec in records:
                if rec.tag == "Event":
                    last_event = rec
                    if rec.get("activity") != "ItemMaintenance" and rec.get("prev") == "Waiting":
                        span_starts += 1
                elif rec.tag == "Outcome" and last_event.get("activity") != "ItemMaintenance":
                    work_outcomes += 1
            assert g.count("WasGeneratedBy") == work_outcomes
            assert len(g.processes) == span_starts == sum(len(spans(s, ref)) for ref in run.items)
            assert g.is_acyclic()
            doc = export_opm(g)
            assert export_opm(parse_opm(doc)) == doc
        assert completed > 0


def test_archive_round_trip():
    with criterion(8, "archive export/import/export is byte-identical"):
        s = fixtures.load()
        fixtures.run_scenario(s, fixtures.model_ids(s))
        stores = [s] + [fuzz_run(seed).store for seed in range(20)]
        for store in stores:
            doc = store.export_archive()
            again = ItemStore.import_archive(doc)
            assert again.export_archive() == doc
            assert snapshot(again) == snapshot(store)
