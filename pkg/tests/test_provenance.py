from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest

from cristal import Agent, ItemStore, StepClock, fixtures, sequential_uuids
from cristal.canon import to_canonical
from cristal.errors import MissingDescription
from cristal.lifecycle import init_workflow, request_transition, run_automatic
from cristal.provenance import (ProvGraph, build_graph, export_opm, outcome_id, parse_opm, process_id,
                                replay_verify, scope, spans, trace)
from cristal.schema import SchemaDef, element
from cristal.workflow import ActivityDef, InputDecl, WorkflowDef, sequence

from fuzz import drive_to_completion, fuzz_run, journal_bytes

OP = Agent("alice", {"operator"})


def two_items() -> tuple[ItemStore, str, str]:
    """A source item with one manual outcome, and a sink whose automatic step reads it."""
    s = ItemStore(clock=StepClock(), id_factory=sequential_uuids("prov"))
    s.register_schema(SchemaDef("Reading", element("Reading", children=[element("V", "integer")])))
    src = 'input("src",0,"Reading","Reading/V")'
    s.register_script("double", f"Reading/V := 0 + {src} + {src}")
    source = s.create_item()
    init_workflow(s, source, WorkflowDef(sequence("r", ActivityDef("measure", "operator", False, "Reading", 0))))
    request_transition(s, OP, source, "measure", "Start")
    request_transition(s, OP, source, "measure", "Complete", "<Reading><V>21</V></Reading>")
    sink = s.create_item(collections=[("src", 1, None)])
    s.assign_slot(OP, sink, "src", 0, source)
    init_workflow(s, sink, WorkflowDef(sequence("r", ActivityDef(
        "derive", "operator", True, "Reading", 0, "double", 0, (InputDecl("src", 0, "Reading"),)))))
    run_automatic(s, sink, OP)
    return s, source, sink


def test_fixture_product_trace(ecal_run):
    s, _, made = ecal_run
    t = trace(s, made["Product"][0])
    assert len(t.entries) == 6
    assert [e.event.transition for e in t.entries] == ["Start", "Complete"] * 3
    assert [e.outcome is not None for e in t.entries] == [False, True] * 3
    assert trace(s, made["Product"][0]) == t
    assert to_canonical(t.to_node()).count("<OutcomeRef ") == 3


def test_new_item_has_empty_trace(store):
    assert trace(store, store.create_item()).entries == ()


def test_hand_counted_graph():
    s, source, sink = two_items()
    g = build_graph(s, [sink], depth=0)
    assert len(g.processes) == 1
    assert g.artifacts == {outcome_id(source, 1), outcome_id(sink, 2)}
    assert g.agents == {"agent:alice"}
    assert {t: g.count(t) for t in ("Used", "WasGeneratedBy", "WasControlledBy", "WasDerivedFrom",
                                    "WasTriggeredBy")} == \
        {"Used": 1, "WasGeneratedBy": 1, "WasControlledBy": 1, "WasDerivedFrom": 1, "WasTriggeredBy": 0}
    assert s.get_outcome(sink, "Reading").document == "<Reading><V>42</V></Reading>"
    assert g.dangling() == []


def test_shipment_graph_reaches_products(ecal_run):
    s, _, made = ecal_run
    shipment = made["Shipment"][0]
    full = build_graph(s, [shipment])
    shallow = build_graph(s, [shipment], depth=0)
    assert scope(s, [shipment]) == sorted([shipment] + made["Product"][:2])
    # pack, manifest, dispatch, receive
    assert len(shallow.processes) == 4
    # plus register/characterize/assign for the two packed products
    assert len(full.processes) == 4 + 2 * 3
    assert all(p.split(":")[1] == shipment for p in shallow.processes)
    manifest_span = next(sp for sp in spans(s, shipment) if sp.activity == "prepare/manifest")
    pid = process_id(shipment, manifest_span.start)
    assert sum(1 for e in full.edges if e.type == "Used" and e.effect == pid) == 2
    assert full.is_acyclic()


def test_triggers_link_consecutive_processes(ecal_run):
    s, _, made = ecal_run
    g = build_graph(s, [made["Product"][0]])
    triggered = sorted((e.cause, e.effect) for e in g.edges if e.type == "WasTriggeredBy")
    assert len(triggered) == 2


def test_empty_graph_export():
    assert export_opm(ProvGraph()) == "<OPMGraph/>"


def test_opm_round_trip(ecal_run):
    s, _, made = ecal_run
    g = build_graph(s, made["Shipment"])
    doc = export_opm(g)
    assert parse_opm(doc) == g
    assert export_opm(parse_opm(doc)) == doc
    root = ET.fromstring(doc)
    assert len(root.findall("Process")) == len(g.processes)
    assert len(root.findall("Artifact")) == len(g.artifacts)
    assert len(root) == len(g.nodes()) + len(g.edges)
    assert export_opm(build_graph(s, made["Shipment"])) == doc


def test_untouched_fixture_verifies(ecal_run):
    s, _, made = ecal_run
    report = replay_verify(s)
    assert report.ok
    assert report.checked == len(s.outcomes())
    assert replay_verify(s, made["Product"][0]).ok     # manual-only item: validation path


def test_tampered_automatic_outcome_is_caught(ecal_run):
    s, _, made = ecal_run
    shipment = made["Shipment"][0]
    lines = list(s.journal)
    index = next(i for i, line in enumerate(lines) if "ECAL-0001,ECAL-0002" in line)
    lines[index] = lines[index].replace("ECAL-0001,", "ECAL-0007,")
    report = replay_verify(("\n".join(lines) + "\n").encode())
    assert not report.ok
    manifest_end = [e for e in s.state(shipment).events if e.activity == "prepare/manifest"][-1]
    assert (report.item, report.event, report.line) == (shipment, manifest_end.id, index + 1)
    assert report.to_node().attrs["ok"] == "false"


def test_tampered_manual_outcome_must_still_validate(ecal_run):
    s, _, _ = ecal_run
    lines = list(s.journal)
    index = next(i for i, line in enumerate(lines) if "<Weight>11.5</Weight>" in line)
    lines[index] = lines[index].replace("11.5", "11,5")
    report = replay_verify(("\n".join(lines) + "\n").encode())
    assert not report.ok and "TypeMismatch" in report.detail


def test_missing_script_is_reported():
    s, _, sink = two_items()
    lines = [line for line in s.journal if not line.startswith("<ScriptRegistered")]
    with pytest.raises(MissingDescription):
        replay_verify(("\n".join(lines) + "\n").encode())


def test_torn_journal_is_not_ok(ecal_run):
    s, _, _ = ecal_run
    assert not replay_verify(journal_bytes(s)[:-1]).ok


@pytest.mark.parametrize("seed", range(30))
def test_fuzzed_graph_conservation(seed):
    run = fuzz_run(seed)
    rng = random.Random(seed)
    for ref in run.items:
        drive_to_completion(run.store, ref, rng)
    s = run.store
    g = build_graph(s, run.items)
    work = [(ref, e) for ref in run.items for e in s.state(ref).events if e.activity != "ItemMaintenance"]
    assert len(g.processes) == sum(1 for _, e in work if e.prev == "Waiting")
    assert g.count("WasGeneratedBy") == sum(1 for ref, e in work if e.id in s.state(ref).outcomes)
    assert g.count("WasControlledBy") == len(g.processes)
    assert g.is_acyclic() and g.dangling() == []
    assert replay_verify(s).ok


def test_tampered_maintenance_old_value_is_caught(ecal_run):
    s, _, made = ecal_run
    s.set_property(fixtures.OPERATOR, made["Product"][0], "Status", "installed")
    lines = list(s.journal)
    assert lines[-1].endswith("<Old>new</Old><New>installed</New></PropertyChange></Outcome>")
    lines[-1] = lines[-1].replace("<Old>new</Old>", "<Old>old</Old>")
    report = replay_verify(("\n".join(lines) + "\n").encode())
    assert not report.ok and report.line == len(lines)
    assert replay_verify(s).ok
