"""Runtime schema registry and outcome validation.

Schemas use a small structural dialect: scalar leaf kinds, composite
elements with ordered children, occurrence bounds, typed attributes and
string enumerations. Definitions are immutable once registered; registering
a name again yields the next version.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

from .canon import Node, is_timestamp, parse, to_canonical
from .errors import MalformedSchema, MalformedXml, UnknownSchema, UnknownVersion

SCALAR_KINDS = ("string", "integer", "decimal", "boolean", "timestamp")
KINDS = SCALAR_KINDS + ("composite",)

# violation codes
MISSING = "MissingElement"
UNEXPECTED = "UnexpectedElement"
TYPE_MISMATCH = "TypeMismatch"
OCCURS = "OccursViolation"
ENUM = "EnumViolation"
ATTRIBUTE = "AttributeViolation"
MALFORMED = "Malformed"

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_INTEGER_RE = re.compile(r"^-?[0-9]+$")
_DECIMAL_RE = re.compile(r"^-?[0-9]+(\.[0-9]+)?$")


def scalar_ok(kind: str, text: str) -> bool:
    if kind == "string":
        return True
    if kind == "integer":
        return bool(_INTEGER_RE.match(text))
    if kind == "decimal":
        return bool(_DECIMAL_RE.match(text))
    if kind == "boolean":
        return text in ("true", "false")
    if kind == "timestamp":
        return is_timestamp(text)
    raise ValueError(kind)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str = "string"
    required: bool = False


@dataclass(frozen=True)
class ElementSpec:
    name: str
    kind: str = "string"
    min_occurs: int = 1
    max_occurs: int | None = 1  # None means unbounded
    children: tuple[ElementSpec, ...] = ()
    attributes: tuple[AttributeSpec, ...] = ()
    allowed_values: tuple[str, ...] | None = None
    ref: str | None = None  # reuse the content model of the nearest ancestor of this name

    @property
    def is_composite(self) -> bool:
        return self.kind == "composite"


@dataclass(frozen=True)
class SchemaDef:
    name: str
    root: ElementSpec
    version: int | None = None

    def with_version(self, version: int) -> SchemaDef:
        return SchemaDef(self.name, self.root, version)

    def to_node(self) -> Node:
        attrs = {"name": self.name}
        if self.version is not None:
            attrs["version"] = str(self.version)
        return Node("Schema", attrs, "", [_element_node(self.root)])

    def canonical(self) -> str:
        return to_canonical(self.to_node())

    def leaf_paths(self) -> dict[str, str]:
        """Map of slash-separated leaf path to scalar kind."""
        out: dict[str, str] = {}

        def walk(spec: ElementSpec, prefix: str) -> None:
            path = f"{prefix}/{spec.name}" if prefix else spec.name
            if spec.ref is not None:
                return
            if spec.is_composite:
                for c in spec.children:
                    walk(c, path)
            else:
                out[path] = spec.kind

        walk(self.root, "")
        return out


def element(name: str, kind: str = "string", min_occurs: int = 1, max_occurs: int | None = 1,
            children=(), attributes=(), allowed_values=None, ref: str | None = None) -> ElementSpec:
    """Convenience constructor accepting lists; ``children`` implies composite."""
    if (children or ref is not None) and kind == "string":
        kind = "composite"
    return ElementSpec(
        name, kind, min_occurs, max_occurs, tuple(children), tuple(attributes),
        tuple(allowed_values) if allowed_values is not None else None, ref,
    )


def _element_node(spec: ElementSpec) -> Node:
    attrs = {"name": spec.name}
    if spec.ref is not None:
        attrs["ref"] = spec.ref
    else:
        attrs["kind"] = spec.kind
    attrs["minOccurs"] = str(spec.min_occurs)
    attrs["maxOccurs"] = "unbounded" if spec.max_occurs is None else str(spec.max_occurs)
    n = Node("Element", attrs)
    for a in spec.attributes:
        n.add("Attribute", name=a.name, kind=a.kind, required="true" if a.required else "false")
    for v in spec.allowed_values or ():
        n.add("Value", v)
    for c in spec.children:
        n.children.append(_element_node(c))
    return n


# parsing and checking -------------------------------------------------------

def _nonneg(text: str, path: str, what: str) -> int:
    if not _INTEGER_RE.match(text) or text.startswith("-"):
        raise MalformedSchema(path, f"{what} must be a non-negative integer, got {text!r}")
    return int(text)


def _element_from_node(n: Node, parent: str) -> ElementSpec:
    path = f"{parent}/{n.attrs.get('name', '?')}" if parent else n.attrs.get("name", "?")
    if n.tag != "Element":
        raise MalformedSchema(path, f"unexpected <{n.tag}>")
    unknown = set(n.attrs) - {"name", "kind", "minOccurs", "maxOccurs", "ref"}
    if unknown:
        raise MalformedSchema(path, f"unknown attribute(s) {sorted(unknown)}")
    if "name" not in n.attrs:
        raise MalformedSchema(path, "element without name")
    kind = n.attrs.get("kind", "string")
    min_occurs = _nonneg(n.attrs.get("minOccurs", "1"), path, "minOccurs")
    max_text = n.attrs.get("maxOccurs", "1")
    max_occurs = None if max_text == "unbounded" else _nonneg(max_text, path, "maxOccurs")
    attributes, values, children = [], [], []
    for c in n.children:
        if c.tag == "Attribute":
            if children or values:
                raise MalformedSchema(path, "<Attribute> must precede <Value> and <Element>")
            req = c.attrs.get("required", "false")
            if req not in ("true", "false"):
                raise MalformedSchema(path, f"required must be true or false, got {req!r}")
            if "name" not in c.attrs:
                raise MalformedSchema(path, "attribute without name")
            attributes.append(AttributeSpec(c.attrs["name"], c.attrs.get("kind", "string"), req == "true"))
        elif c.tag == "Value":
            if children:
                raise MalformedSchema(path, "<Value> must precede <Element>")
            values.append(c.text)
        elif c.tag == "Element":
            children.append(_element_from_node(c, path))
        else:
            raise MalformedSchema(path, f"unexpected <{c.tag}>")
    if n.text:
        raise MalformedSchema(path, "unexpected text content")
    ref = n.attrs.get("ref")
    if ref is not None and ("kind" in n.attrs or n.children):
        raise MalformedSchema(path, "a ref element takes its kind and content from the referenced element")
    spec = ElementSpec(n.attrs["name"], "composite" if ref is not None else kind, min_occurs, max_occurs,
                       tuple(children), tuple(attributes), tuple(values) if values else None, ref)
    return spec


def check_element(spec: ElementSpec, parent: str = "", ancestors: tuple[str, ...] = ()) -> None:
    """Raise :class:`MalformedSchema` if ``spec`` breaks an ElementSpec invariant."""
    path = f"{parent}/{spec.name}" if parent else spec.name
    if not _IDENT_RE.match(spec.name):
        raise MalformedSchema(path, f"invalid element name {spec.name!r}")
    if spec.ref is not None:
        if spec.ref not in ancestors:
            raise MalformedSchema(path, f"ref {spec.ref!r} does not name an enclosing element")
        if spec.children or spec.attributes or spec.allowed_values is not None:
            raise MalformedSchema(path, "a ref element has no content of its own")
        if spec.min_occurs < 0 or (spec.max_occurs is not None and
                                   (spec.max_occurs < 1 or spec.min_occurs > spec.max_occurs)):
            raise MalformedSchema(path, "invalid occurrence bounds")
        return
    if spec.kind not in KINDS:
        raise MalformedSchema(path, f"unknown kind {spec.kind!r}")
    if spec.min_occurs < 0:
        raise MalformedSchema(path, "minOccurs must be non-negative")
    if spec.max_occurs is not None:
        if spec.max_occurs < 1:
            raise MalformedSchema(path, "maxOccurs must be positive or unbounded")
        if spec.min_occurs > spec.max_occurs:
            raise MalformedSchema(path, "minOccurs exceeds maxOccurs")
    if spec.is_composite:
        if not spec.children:
            raise MalformedSchema(path, "composite element needs at least one child")
        if spec.allowed_values is not None:
            raise MalformedSchema(path, "allowed values only apply to string elements")
    else:
        if spec.children:
            raise MalformedSchema(path, f"{spec.kind} element cannot have children")
        if spec.allowed_values is not None and spec.kind != "string":
            raise MalformedSchema(path, "allowed values only apply to string elements")
    names = [c.name for c in spec.children]
    if len(set(names)) != len(names):
        raise MalformedSchema(path, "duplicate child element names")
    anames = [a.name for a in spec.attributes]
    if len(set(anames)) != len(anames):
        raise MalformedSchema(path, "duplicate attribute names")
    for a in spec.attributes:
        if not _IDENT_RE.match(a.name):
            raise MalformedSchema(path, f"invalid attribute name {a.name!r}")
        if a.kind not in SCALAR_KINDS:
            raise MalformedSchema(path, f"attribute {a.name!r} must have a scalar kind")
    for c in spec.children:
        check_element(c, path, ancestors + (spec.name,))


def check_schema(defn: SchemaDef) -> None:
    if not _IDENT_RE.match(defn.name):
        raise MalformedSchema(defn.name, "invalid schema name")
    check_element(defn.root)


def schema_from_node(n: Node) -> SchemaDef:
    if n.tag != "Schema":
        raise MalformedSchema(n.tag, "schema document root must be <Schema>")
    name = n.attrs.get("name", "")
    version = n.attrs.get("version")
    if set(n.attrs) - {"name", "version"}:
        raise MalformedSchema(name, "unknown attribute on <Schema>")
    if len(n.children) != 1 or n.text:
        raise MalformedSchema(name, "<Schema> must contain exactly one root <Element>")
    root = _element_from_node(n.children[0], "")
    defn = SchemaDef(name, root, None if version is None else _nonneg(version, name, "version"))
    check_schema(defn)
    return defn


def schema_from_xml(text: str) -> SchemaDef:
    try:
        n = parse(text)
    except MalformedXml as exc:
        raise MalformedSchema("", str(exc)) from None
    return schema_from_node(n)


# validation -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    path: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def to_node(self) -> Node:
        n = Node("ValidationReport", {"valid": "true" if self.valid else "false"})
        for v in self.violations:
            n.add("Violation", v.message, path=v.path, code=v.code)
        return n


def _check_attributes(n: Node, spec: ElementSpec, path: str, out: list[Violation]) -> None:
    declared = {a.name: a for a in spec.attributes}
    for a in spec.attributes:
        if a.name not in n.attrs:
            if a.required:
                out.append(Violation(f"{path}/@{a.name}", ATTRIBUTE, "required attribute missing"))
        elif not scalar_ok(a.kind, n.attrs[a.name]):
            out.append(Violation(f"{path}/@{a.name}", ATTRIBUTE,
                                 f"value {n.attrs[a.name]!r} is not a valid {a.kind}"))
    for name in n.attrs:
        if name not in declared:
            out.append(Violation(f"{path}/@{name}", ATTRIBUTE, "undeclared attribute"))


def _check_element(n: Node, spec: ElementSpec, path: str, out: list[Violation],
                   ancestors: tuple[ElementSpec, ...] = ()) -> None:
    if spec.ref is not None:
        target = next(a for a in reversed(ancestors) if a.name == spec.ref)
        spec = ElementSpec(spec.name, target.kind, spec.min_occurs, spec.max_occurs, target.children,
                           target.attributes, target.allowed_values)
    _check_attributes(n, spec, path, out)
    if not spec.is_composite:
        if n.children:
            out.append(Violation(path, TYPE_MISMATCH, f"{spec.kind} element has child elements"))
            return
        if not scalar_ok(spec.kind, n.text):
            out.append(Violation(path, TYPE_MISMATCH, f"{n.text!r} is not a valid {spec.kind}"))
        elif spec.allowed_values is not None and n.text not in spec.allowed_values:
            out.append(Violation(path, ENUM, f"{n.text!r} not in {list(spec.allowed_values)}"))
        return
    if n.text:
        out.append(Violation(path, TYPE_MISMATCH, "composite element has text content"))
    specs = spec.children
    counts = [0] * len(specs)
    cursor = 0

    def finalize(k: int) -> None:
        s, c = specs[k], counts[k]
        if c == 0 and s.min_occurs > 0:
            out.append(Violation(f"{path}/{s.name}", MISSING, "required element absent"))
        elif c < s.min_occurs or (s.max_occurs is not None and c > s.max_occurs):
            bound = "unbounded" if s.max_occurs is None else s.max_occurs
            out.append(Violation(f"{path}/{s.name}", OCCURS,
                                 f"{c} occurrence(s), expected {s.min_occurs}..{bound}"))

    for child in n.children:
        match = next((j for j in range(cursor, len(specs)) if specs[j].name == child.tag), None)
        if match is None:
            known = any(s.name == child.tag for s in specs)
            out.append(Violation(f"{path}/{child.tag}", UNEXPECTED,
                                 "element out of order" if known else "undeclared element"))
            continue
        for k in range(cursor, match):
            finalize(k)
        cursor = match
        counts[match] += 1
        _check_element(child, specs[match], f"{path}/{child.tag}", out, ancestors + (spec,))
    for k in range(cursor, len(specs)):
        finalize(k)


def validate_document(document: str | bytes | Node, defn: SchemaDef) -> ValidationReport:
    """Check ``document`` against ``defn`` and report every violation found."""
    if isinstance(document, Node):
        doc = document
    else:
        try:
            doc = parse(document)
        except MalformedXml as exc:
            return ValidationReport((Violation("", MALFORMED, str(exc)),))
    out: list[Violation] = []
    root = defn.root
    if doc.tag != root.name:
        out.append(Violation(doc.tag, UNEXPECTED, f"root element must be <{root.name}>"))
    else:
        _check_element(doc, root, root.name, out)
    return ValidationReport(tuple(out))


# registry -------------------------------------------------------------------

class SchemaRegistry:
    """Append-only, thread-safe store of versioned schema definitions."""

    def __init__(self) -> None:
        self._versions: dict[str, list[SchemaDef]] = {}
        self._lock = threading.Lock()

    def register(self, defn: SchemaDef) -> tuple[str, int]:
        check_schema(defn)
        with self._lock:
            versions = self._versions.setdefault(defn.name, [])
            stored = defn.with_version(len(versions))
            versions.append(stored)
            return stored.name, stored.version

    def add(self, defn: SchemaDef) -> None:
        """Insert an already-versioned definition (journal replay)."""
        check_schema(defn)
        with self._lock:
            expected = self.next_version(defn.name)
            if defn.version != expected:
                raise UnknownVersion(f"{defn.name} version {defn.version} out of sequence (expected {expected})")
            self._versions.setdefault(defn.name, []).append(defn)

    def next_version(self, name: str) -> int:
        return len(self._versions.get(name, ()))

    def get(self, name: str, selector: int | str = "last") -> SchemaDef:
        versions = self._versions.get(name)
        if not versions:
            raise UnknownSchema(name)
        if selector == "last":
            return versions[-1]
        try:
            index = int(selector)
        except (TypeError, ValueError):
            raise UnknownVersion(f"{name} version {selector!r}") from None
        if not 0 <= index < len(versions):
            raise UnknownVersion(f"{name} version {index}")
        return versions[index]

    def validate(self, document: str | bytes | Node, name: str,
                 selector: int | str = "last") -> ValidationReport:
        return validate_document(document, self.get(name, selector))

    def names(self) -> list[str]:
        return sorted(self._versions)

    def versions(self, name: str) -> list[SchemaDef]:
        return list(self._versions.get(name, ()))

    def __contains__(self, name: str) -> bool:
        return name in self._versions

    def all(self) -> list[SchemaDef]:
        return [d for name in self.names() for d in self._versions[name]]
