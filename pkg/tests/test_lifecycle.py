from __future__ import annotations

import pytest

from cristal import Agent
from cristal.canon import parse
from cristal.errors import (EvaluationError, InvalidTransition, MalformedWorkflow, NoSuchActivity, NoWorkflow,
                            OutcomeInvalid, OutcomeRequired, RoleDenied, ScriptFailure, UnknownScript,
                            WorkflowAlreadyAssigned)
from cristal.lifecycle import (active_activities, evaluate_predicate, init_workflow, request_transition,
                               run_automatic)
from cristal.schema import SchemaDef, element
from cristal.workflow import (ActivityDef, Block, WorkflowDef, and_split, loop, or_split, sequence,
                              workflow_from_node)

from fuzz import fuzz_run, journal_bytes

OP = Agent("alice", {"operator"})
NOBODY = Agent("eve", {"visitor"})

# (prev, target, transition) triples allowed by the activity state machine, written out by hand
LEGAL_EVENTS = {
    ("Waiting", "Started", "Start"),
    ("Started", "Completed", "Complete"),
    ("Started", "Suspended", "Suspend"),
    ("Suspended", "Started", "Resume"),
    ("Waiting", "Aborted", "Abort"),
    ("Started", "Aborted", "Abort"),
    ("Suspended", "Aborted", "Abort"),
    ("Waiting", "Started", "Done"),
    ("Started", "Completed", "Done"),
}


def manual(name, schema=None):
    return ActivityDef(name, "operator", False, schema, 0 if schema else None)


def auto(name, script, schema=None):
    return ActivityDef(name, "operator", True, schema, 0 if schema else None, script, 0)


@pytest.fixture
def model(store):
    store.register_schema(SchemaDef("CharacterizeData", element("Product", children=[
        element("Barcode"), element("Weight", "decimal")])))
    store.register_schema(SchemaDef("Stamp", element("Stamp", children=[element("N", "integer")])))
    store.register_script("heavy", 'field("CharacterizeData","last","Product/Weight") > 10.0')
    store.register_script("stamp", 'Stamp/N := prop("n") + 1')
    store.register_script("broken", 'Stamp/N := prop("missing") + 1')
    store.register_script("built", 'prop("Status") == "built"')
    store.register_script("again", 'prop("again") == "yes"')
    return store


def item(store, definition, **props):
    props = {"Status": "built", "n": "1", "again": "no", **props}
    ref = store.create_item(properties=[(k, v, True) for k, v in props.items()])
    init_workflow(store, ref, definition)
    return ref


PRODUCT = WorkflowDef(sequence("product", manual("register"), manual("characterize", "CharacterizeData"),
                               manual("assign")))
WEIGHT = "<Product><Barcode>B1</Barcode><Weight>12.5</Weight></Product>"


def test_sequence_progress(model):
    ref = item(model, PRODUCT)
    assert active_activities(model, ref) == ["register"]
    [start] = request_transition(model, OP, ref, "register", "Start")
    assert (start.prev, start.target, start.schema) == ("Waiting", "Started", None)
    request_transition(model, OP, ref, "register", "Complete")
    assert active_activities(model, ref) == ["characterize"]


def test_and_split_enables_both(model):
    ref = item(model, WorkflowDef(and_split("par", manual("a"), manual("b"))))
    assert active_activities(model, ref) == ["a", "b"]


def test_empty_workflow_is_malformed():
    with pytest.raises(MalformedWorkflow):
        WorkflowDef(sequence("root"))
    with pytest.raises(MalformedWorkflow):
        workflow_from_node(parse("<Workflow/>"))


def test_abort_terminates(model):
    ref = item(model, PRODUCT)
    request_transition(model, OP, ref, "register", "Abort")
    assert active_activities(model, ref) == []
    assert model.state(ref).workflow.status == "aborted"
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "characterize", "Start")


def test_loop_repeats_body(model):
    ref = item(model, WorkflowDef(sequence("root", loop("rework", "again", 0, manual("fix")), manual("ship"))),
               again="yes")
    for _ in range(2):
        assert active_activities(model, ref) == ["rework/fix"]
        request_transition(model, OP, ref, "rework/fix", "Start")
        request_transition(model, OP, ref, "rework/fix", "Complete")
    assert model.state(ref).workflow.iteration["rework"] == 2
    model.set_property(OP, ref, "again", "no")
    request_transition(model, OP, ref, "rework/fix", "Start")
    request_transition(model, OP, ref, "rework/fix", "Complete")
    assert active_activities(model, ref) == ["ship"]
    assert [e.activity for e in model.state(ref).events if e.activity != "ItemMaintenance"] == ["rework/fix"] * 6


@pytest.mark.parametrize("status,branch", [("built", "check/yes"), ("new", "check/no")])
def test_or_split_takes_one_branch(model, status, branch):
    ref = item(model, WorkflowDef(sequence("root", or_split("check", "built", 0, manual("yes"), manual("no")))),
               Status=status)
    assert active_activities(model, ref) == [branch]


def test_automatic_done_pair(model):
    ref = item(model, WorkflowDef(sequence("root", auto("stamp", "stamp", "Stamp"))), n="41")
    start, end = request_transition(model, OP, ref, "stamp", "Done")
    assert (start.prev, start.target, end.prev, end.target) == ("Waiting", "Started", "Started", "Completed")
    assert start.ts == end.ts and end.id == start.id + 1
    assert start.schema is None and (end.schema, end.schema_version) == ("Stamp", 0)
    assert model.get_outcome(ref, "Stamp").document == "<Stamp><N>42</N></Stamp>"
    assert model.state(ref).workflow.status == "completed"


def test_invalid_outcome_is_atomic(model):
    ref = item(model, PRODUCT)
    request_transition(model, OP, ref, "register", "Start")
    request_transition(model, OP, ref, "register", "Complete")
    request_transition(model, OP, ref, "characterize", "Start")
    before = list(model.journal)
    with pytest.raises(OutcomeInvalid):
        request_transition(model, OP, ref, "characterize", "Complete",
                           "<Product><Barcode>B1</Barcode><Weight>heavy</Weight></Product>")
    with pytest.raises(OutcomeRequired):
        request_transition(model, OP, ref, "characterize", "Complete")
    with pytest.raises(OutcomeInvalid):
        request_transition(model, OP, ref, "characterize", "Complete", "<Product>")
    assert model.journal == before
    assert model.state(ref).workflow.states["characterize"] == "Started"


def test_rejections(model):
    ref = item(model, WorkflowDef(sequence("root", manual("m"), auto("a", "stamp", "Stamp"))))
    with pytest.raises(RoleDenied):
        request_transition(model, NOBODY, ref, "m", "Start")
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "m", "Complete")
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "m", "Done")
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "a", "Start")   # not yet enabled
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "m", "Jump")
    with pytest.raises(NoSuchActivity):
        request_transition(model, OP, ref, "zz", "Start")
    with pytest.raises(OutcomeInvalid):
        request_transition(model, OP, ref, "m", "Start", "<X/>")
    request_transition(model, OP, ref, "m", "Start")
    request_transition(model, OP, ref, "m", "Complete")
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "a", "Start")   # automatic takes Done only
    with pytest.raises(NoWorkflow):
        request_transition(model, OP, model.create_item(), "m", "Start")
    with pytest.raises(WorkflowAlreadyAssigned):
        init_workflow(model, ref, PRODUCT)


def test_unknown_script_reference_is_refused(model):
    ref = model.create_item()
    with pytest.raises(UnknownScript):
        init_workflow(model, ref, WorkflowDef(sequence("root", auto("a", "missing"))))
    assert model.state(ref).workflow is None


def test_suspend_resume(model):
    ref = item(model, PRODUCT)
    request_transition(model, OP, ref, "register", "Start")
    request_transition(model, OP, ref, "register", "Suspend")
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "register", "Complete")
    request_transition(model, OP, ref, "register", "Resume")
    request_transition(model, OP, ref, "register", "Complete")
    assert [e.transition for e in model.state(ref).events] == ["Start", "Suspend", "Resume", "Complete"]


def test_composite_abort(model):
    ref = item(model, WorkflowDef(sequence("root", manual("first"),
                                           and_split("par", manual("a"), manual("b")), manual("last"))))
    request_transition(model, OP, ref, "first", "Start")
    request_transition(model, OP, ref, "first", "Complete")
    request_transition(model, OP, ref, "par/a", "Start")
    events = request_transition(model, OP, ref, "par", "Abort")
    assert [(e.activity, e.prev) for e in events] == [("par/a", "Started"), ("par/b", "Waiting")]
    assert len({e.ts for e in events}) == 1
    assert model.state(ref).workflow.status == "aborted"
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "", "Abort")


def test_root_abort_and_block_start(model):
    ref = item(model, PRODUCT)
    with pytest.raises(InvalidTransition):
        request_transition(model, OP, ref, "", "Start")
    events = request_transition(model, OP, ref, "/", "Abort")
    assert [e.activity for e in events] == ["register", "characterize", "assign"]


def test_evaluate_predicate(model):
    ref = item(model, PRODUCT)
    assert evaluate_predicate(model, ref, "built")
    with pytest.raises(EvaluationError):
        evaluate_predicate(model, ref, "heavy")   # "" cannot be ordered against a number
    for path, doc in (("register", None), ("characterize", WEIGHT)):
        request_transition(model, OP, ref, path, "Start")
        request_transition(model, OP, ref, path, "Complete", doc)
    assert evaluate_predicate(model, ref, "heavy")
    with pytest.raises(UnknownScript):
        evaluate_predicate(model, ref, "nope")


def test_run_automatic_two_in_sequence(model):
    ref = item(model, WorkflowDef(sequence("root", auto("one", "stamp", "Stamp"), auto("two", "built"))))
    events = run_automatic(model, ref)
    assert len(events) == 4
    assert [(e.activity, e.target) for e in events] == [
        ("one", "Started"), ("one", "Completed"), ("two", "Started"), ("two", "Completed")]
    assert all(e.agent == "automation" for e in events)
    assert run_automatic(model, ref) == []


def test_run_automatic_idle(model):
    ref = item(model, PRODUCT)
    assert run_automatic(model, ref) == []


def test_script_failure_appends_nothing(model):
    ref = item(model, WorkflowDef(sequence("root", auto("bad", "broken", "Stamp"))))
    before = list(model.journal)
    with pytest.raises(ScriptFailure) as info:
        run_automatic(model, ref)
    assert isinstance(info.value.cause, EvaluationError)
    assert model.journal == before


def test_workflow_document_round_trip():
    wf = WorkflowDef(sequence("root", or_split("o", "built", 0, manual("x"), manual("y")),
                              loop("l", "again", 0, sequence("body", manual("m", "Stamp"))),
                              and_split("p", auto("q", "stamp", "Stamp"))))
    assert workflow_from_node(wf.to_node()) == wf
    assert list(wf.activities()) == ["o/x", "o/y", "l/body/m", "p/q"]
    assert isinstance(wf.root, Block)


@pytest.mark.parametrize("seed", range(200))
def test_fuzzed_state_machine_soundness(seed):
    run = fuzz_run(seed)
    assert run.violations == []
    for st in run.store.items.values():
        for e in st.events:
            if e.activity != "ItemMaintenance":
                assert (e.prev, e.target, e.transition) in LEGAL_EVENTS
        assert [e.id for e in st.events] == list(range(len(st.events)))
    assert journal_bytes(run.store).count(b"\n") == len(run.store.journal)
