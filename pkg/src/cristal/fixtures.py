"""The ECAL construction model: Products, Orders and Shipments.

Products are registered, characterized and assigned to a detector position.
Orders request a product type; small orders are approved automatically,
large ones by a coordinator. Shipments pack two products, build a manifest
from the products' characterization data while being dispatched, and are
received at the destination centre.

The model ships as a journal (``data/ecal.journal``) generated with a fixed
clock, so every load starts from byte-identical history.
"""

from __future__ import annotations

from importlib import resources

from . import descriptions as desc
from .canon import StepClock
from .lifecycle import request_transition, run_automatic
from .store import Agent, ItemRef, ItemStore, sequential_uuids
from .workflow import ActivityDef, InputDecl, WorkflowDef, and_split, or_split, sequence

DESIGNER = Agent("dora", {"designer"})
OPERATOR = Agent("alice", {"operator"})
COORDINATOR = Agent("bob", {"coordinator"})
SHIPPER = Agent("carol", {"shipper"})
FIXTURE_CLOCK_START = "2013-10-20T00:00:00.000Z"
FIXTURE_NAMESPACE = "ecal"

SCHEMAS = {
    "RegisterData": """<Schema name="RegisterData"><Element name="Registration" kind="composite">
        <Element name="Barcode"/><Element name="Centre"/></Element></Schema>""",
    "CharacterizeData": """<Schema name="CharacterizeData"><Element name="Product" kind="composite">
        <Element name="Barcode"/><Element name="Weight" kind="decimal"/></Element></Schema>""",
    "AssignData": """<Schema name="AssignData"><Element name="Position" kind="composite">
        <Element name="Supermodule" kind="integer"/><Element name="Slot" kind="integer"/></Element></Schema>""",
    "OrderData": """<Schema name="OrderData"><Element name="Order" kind="composite">
        <Element name="RequestedType"/><Element name="Quantity" kind="integer"/></Element></Schema>""",
    "ApprovalData": """<Schema name="ApprovalData"><Element name="Approval" kind="composite">
        <Element name="Approved" kind="boolean"/><Element name="Reason"/></Element></Schema>""",
    "PackData": """<Schema name="PackData"><Element name="Packing" kind="composite">
        <Element name="Crate"/></Element></Schema>""",
    "ManifestData": """<Schema name="ManifestData"><Element name="Manifest" kind="composite">
        <Element name="Barcodes"/></Element></Schema>""",
    "DispatchData": """<Schema name="DispatchData"><Element name="Dispatch" kind="composite">
        <Element name="Carrier"/><Element name="Sent" kind="timestamp"/></Element></Schema>""",
    "ReceiveData": """<Schema name="ReceiveData"><Element name="Receipt" kind="composite">
        <Element name="Centre"/><Element name="Intact" kind="boolean"/></Element></Schema>""",
}

SCRIPTS = {
    "largeOrder": 'field("OrderData","last","Order/Quantity") > 10',
    "autoApprove": 'Approval/Approved := true\n'
                   'Approval/Reason := "small order of " + field("OrderData","last","Order/Quantity")',
    "manifest": 'Manifest/Barcodes := input("contents",0,"CharacterizeData","Product/Barcode") + ","'
                ' + input("contents",1,"CharacterizeData","Product/Barcode")',
}


def _manual(name: str, role: str, schema: str) -> ActivityDef:
    return ActivityDef(name, role, False, schema, 0)


WORKFLOWS = {
    "ProductLifecycle": WorkflowDef(sequence(
        "product",
        _manual("register", "operator", "RegisterData"),
        _manual("characterize", "operator", "CharacterizeData"),
        _manual("assign", "operator", "AssignData"),
    )),
    "OrderLifecycle": WorkflowDef(sequence(
        "order",
        _manual("request", "coordinator", "OrderData"),
        or_split("approval", "largeOrder", 0,
                 _manual("approve", "coordinator", "ApprovalData"),
                 ActivityDef("autoApprove", "coordinator", True, "ApprovalData", 0, "autoApprove", 0)),
    )),
    "ShipmentLifecycle": WorkflowDef(sequence(
        "shipment",
        _manual("pack", "shipper", "PackData"),
        and_split(
            "prepare",
            ActivityDef("manifest", "shipper", True, "ManifestData", 0, "manifest", 0, (
                InputDecl("contents", 0, "CharacterizeData"), InputDecl("contents", 1, "CharacterizeData"),
            )),
            _manual("dispatch", "shipper", "DispatchData"),
        ),
        _manual("receive", "shipper", "ReceiveData"),
    )),
}

ITEMS = {
    "Product": ("ProductLifecycle", [("Centre", "CERN"), ("Status", "new")], []),
    "Order": ("OrderLifecycle", [("RequestedType", ""), ("Centre", "CERN")], []),
    "Shipment": ("ShipmentLifecycle", [("Destination", "CERN")], [("contents", 2, "Product")]),
}


def item_desc_xml(type_name: str, workflow: ItemRef, version: int = 0) -> str:
    lifecycle, props, colls = ITEMS[type_name]
    parts = [f"<Item><TypeName>{type_name}</TypeName>"]
    parts += [f'<Property name="{n}" default="{d}" mutable="true"/>' for n, d in props]
    parts.append(f'<Workflow uuid="{workflow}" version="{version}"/>')
    parts += [f'<Collection name="{n}" slots="{s}" type="{t}"/>' for n, s, t in colls]
    return "".join(parts) + "</Item>"


def install(store: ItemStore, agent: Agent = DESIGNER) -> dict[str, ItemRef]:
    """Create the ECAL descriptions in a bootstrapped store."""
    ids: dict[str, ItemRef] = {}
    for name, xml in SCHEMAS.items():
        ids[f"SchemaDesc:{name}"] = desc.create_description(store, agent, "SchemaDesc", xml)
    for name, body in SCRIPTS.items():
        ids[f"ScriptDesc:{name}"] = desc.create_description(
            store, agent, "ScriptDesc", f'<Script name="{name}">{_escape(body)}</Script>')
    for name, wf in WORKFLOWS.items():
        ids[f"WorkflowDesc:{name}"] = desc.create_description(store, agent, "WorkflowDesc", wf.to_node(), name)
    for name, (lifecycle, _, _) in ITEMS.items():
        ids[f"ItemDesc:{name}"] = desc.create_description(
            store, agent, "ItemDesc", item_desc_xml(name, ids[f"WorkflowDesc:{lifecycle}"]))
    return ids


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def model_ids(store: ItemStore) -> dict[str, ItemRef]:
    """Look up the ECAL description uuids in a store that holds the model."""
    ids = {}
    for kind, names in (("SchemaDesc", SCHEMAS), ("ScriptDesc", SCRIPTS),
                        ("WorkflowDesc", WORKFLOWS), ("ItemDesc", ITEMS)):
        for name in names:
            ref = desc.find_description(store, kind, name)
            if ref is None:
                raise KeyError(f"{kind} {name} is not in this store")
            ids[f"{kind}:{name}"] = ref
    return ids


def build_journal() -> bytes:
    """Regenerate the bundled journal: bootstrap plus the ECAL model, fixed clock."""
    store = ItemStore(clock=StepClock(FIXTURE_CLOCK_START), id_factory=sequential_uuids(FIXTURE_NAMESPACE))
    desc.bootstrap(store)
    install(store)
    return "".join(line + "\n" for line in store.journal).encode("utf-8")


def bundled_journal() -> bytes:
    return resources.files("cristal").joinpath("data/ecal.journal").read_bytes()


def load(path=None, clock=None, id_factory=None) -> ItemStore:
    """A store holding the bundled model; with ``path`` the journal is written there."""
    store = ItemStore(None, clock or StepClock("2014-01-01T00:00:00.000Z"),
                      id_factory or sequential_uuids(FIXTURE_NAMESPACE))
    data = bundled_journal()
    store._replay_bytes(data)
    if path is not None:
        from pathlib import Path
        p = Path(path)
        p.write_bytes(data)
        store.path = p
    return store


# scenario ---------------------------------------------------------------------

def run_product(store: ItemStore, ids: dict[str, ItemRef], n: int, weight: str = "12.5",
                agent: Agent = OPERATOR) -> ItemRef:
    ref = desc.instantiate(store, ids["ItemDesc:Product"])
    barcode = f"ECAL-{n:04d}"
    steps = [
        ("register", f"<Registration><Barcode>{barcode}</Barcode><Centre>CERN</Centre></Registration>"),
        ("characterize", f"<Product><Barcode>{barcode}</Barcode><Weight>{weight}</Weight></Product>"),
        ("assign", f"<Position><Supermodule>1</Supermodule><Slot>{n}</Slot></Position>"),
    ]
    for path, doc in steps:
        request_transition(store, agent, ref, path, "Start")
        request_transition(store, agent, ref, path, "Complete", doc)
    return ref


def run_order(store: ItemStore, ids: dict[str, ItemRef], quantity: int = 3) -> ItemRef:
    ref = desc.instantiate(store, ids["ItemDesc:Order"], overrides={"RequestedType": "Barrel crystal"})
    request_transition(store, COORDINATOR, ref, "request", "Start")
    request_transition(store, COORDINATOR, ref, "request", "Complete",
                       f"<Order><RequestedType>Barrel crystal</RequestedType><Quantity>{quantity}</Quantity></Order>")
    if quantity > 10:
        request_transition(store, COORDINATOR, ref, "approval/approve", "Start")
        request_transition(store, COORDINATOR, ref, "approval/approve", "Complete",
                           "<Approval><Approved>true</Approved><Reason>reviewed</Reason></Approval>")
    else:
        run_automatic(store, ref, COORDINATOR)
    return ref


def run_shipment(store: ItemStore, ids: dict[str, ItemRef], products: list[ItemRef]) -> ItemRef:
    ref = desc.instantiate(store, ids["ItemDesc:Shipment"])
    for slot, product in enumerate(products[:2]):
        store.assign_slot(SHIPPER, ref, "contents", slot, product)
    steps = [("pack", "<Packing><Crate>C-17</Crate></Packing>")]
    for path, doc in steps:
        request_transition(store, SHIPPER, ref, path, "Start")
        request_transition(store, SHIPPER, ref, path, "Complete", doc)
    run_automatic(store, ref, SHIPPER)
    request_transition(store, SHIPPER, ref, "prepare/dispatch", "Start")
    request_transition(store, SHIPPER, ref, "prepare/dispatch", "Complete",
                       f"<Dispatch><Carrier>road</Carrier><Sent>{store.clock.now()}</Sent></Dispatch>")
    request_transition(store, SHIPPER, ref, "receive", "Start")
    request_transition(store, SHIPPER, ref, "receive", "Complete",
                       "<Receipt><Centre>CERN</Centre><Intact>true</Intact></Receipt>")
    return ref


def run_scenario(store: ItemStore, ids: dict[str, ItemRef] | None = None, products: int = 3) -> dict[str, list[ItemRef]]:
    """Instantiate and complete ``products`` Products, one Order and one Shipment."""
    ids = ids or model_ids(store)
    made = [run_product(store, ids, n, f"{10 + n}.5") for n in range(1, products + 1)]
    order = run_order(store, ids)
    shipment = run_shipment(store, ids, made)
    return {"Product": made, "Order": [order], "Shipment": [shipment]}
