"""Schemas and scripts present in every store without being journaled."""

from __future__ import annotations

from .schema import AttributeSpec as A
from .schema import SchemaDef, element
from .scripts import Script

UNBOUNDED = None

PROPERTY_CHANGE = SchemaDef("PropertyChange", element("PropertyChange", children=[
    element("Name"), element("Old"), element("New"),
]), 0)

COLLECTION_CHANGE = SchemaDef("CollectionChange", element("CollectionChange", children=[
    element("Collection"), element("Slot", "integer"), element("Old"), element("New"),
]), 0)

SCHEMA_DEF = SchemaDef("SchemaDef", element("Schema", children=[
    element("Element", children=[
        element("Attribute", min_occurs=0, max_occurs=UNBOUNDED, attributes=[
            A("name", "string", True), A("kind", "string", False), A("required", "boolean", False),
        ]),
        element("Value", min_occurs=0, max_occurs=UNBOUNDED),
        element("Element", min_occurs=0, max_occurs=UNBOUNDED, ref="Element"),
    ], attributes=[
        A("name", "string", True), A("kind", "string", False), A("ref", "string", False),
        A("minOccurs", "integer", False), A("maxOccurs", "string", False),
    ]),
], attributes=[A("name", "string", True), A("version", "integer", False)]), 0)

_INPUT = element("Input", min_occurs=0, max_occurs=UNBOUNDED, attributes=[
    A("collection", "string", True), A("slot", "integer", True), A("schema", "string", True),
])

WORKFLOW_DEF = SchemaDef("WorkflowDef", element("Workflow", children=[
    element("Node", children=[
        _INPUT,
        element("Node", min_occurs=0, max_occurs=UNBOUNDED, ref="Node"),
    ], attributes=[
        A("kind", "string", True), A("name", "string", True), A("role", "string", False),
        A("automatic", "boolean", False), A("schema", "string", False), A("schemaVersion", "integer", False),
        A("script", "string", False), A("scriptVersion", "integer", False),
    ]),
], attributes=[A("version", "integer", False)]), 0)

SCRIPT_DEF = SchemaDef("ScriptDef", element("Script", "string", attributes=[
    A("name", "string", True), A("version", "integer", False),
]), 0)

ITEM_DEF = SchemaDef("ItemDef", element("Item", children=[
    element("TypeName"),
    element("Property", min_occurs=0, max_occurs=UNBOUNDED, attributes=[
        A("name", "string", True), A("default", "string", False), A("mutable", "boolean", True),
    ]),
    element("Workflow", min_occurs=0, attributes=[A("uuid", "string", True), A("version", "integer", True)]),
    element("Collection", min_occurs=0, max_occurs=UNBOUNDED, attributes=[
        A("name", "string", True), A("slots", "integer", True), A("type", "string", False),
    ]),
]), 0)

ACTIVITY_DEF = SchemaDef("ActivityDef", element("Activity", "composite", children=[
    _INPUT,
], attributes=[
    A("name", "string", True), A("role", "string", True), A("automatic", "boolean", True),
    A("schema", "string", False), A("schemaVersion", "integer", False),
    A("script", "string", False), A("scriptVersion", "integer", False),
]), 0)

BUILTIN_SCHEMAS = (PROPERTY_CHANGE, COLLECTION_CHANGE, SCHEMA_DEF, ITEM_DEF, WORKFLOW_DEF, SCRIPT_DEF, ACTIVITY_DEF)

ALWAYS = Script("Always", 0, "true")
AMEND = Script("Amend", 0, "request()")
BUILTIN_SCRIPTS = (ALWAYS, AMEND)
