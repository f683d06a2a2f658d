"""Canonical XML: a minimal element tree, a strict parser and two serializers.

Canonical form is a single line: attributes in insertion order, the five
standard entities escaped, line breaks and tabs written as character
references, empty elements self-closed. The pretty form indents with two
spaces and is accepted back by :func:`parse` (whitespace-only text inside
elements that have children is dropped).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .errors import MalformedXml

_ESCAPES = {
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
    "'": "&apos;",
    "\n": "&#10;",
    "\r": "&#13;",
    "\t": "&#9;",
}
_ESCAPE_RE = re.compile("[&<>\"'\n\r\t]")


def escape(text: str) -> str:
    return _ESCAPE_RE.sub(lambda m: _ESCAPES[m.group()], text)


@dataclass
class Node:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    text: str = ""
    children: list[Node] = field(default_factory=list)

    def child(self, tag: str) -> Node | None:
        for c in self.children:
            if c.tag == tag:
                return c
        return None

    def all(self, tag: str) -> list[Node]:
        return [c for c in self.children if c.tag == tag]

    def add(self, tag: str, text: str = "", **attrs: str) -> Node:
        node = Node(tag, dict(attrs), text)
        self.children.append(node)
        return node


def node(tag: str, attrs: dict[str, str] | None = None, text: str = "",
         children: list[Node] | None = None) -> Node:
    return Node(tag, dict(attrs or {}), text, list(children or []))


def _write(n: Node, out: list[str]) -> None:
    out.append("<")
    out.append(n.tag)
    for k, v in n.attrs.items():
        out.append(f' {k}="{escape(v)}"')
    if not n.text and not n.children:
        out.append("/>")
        return
    out.append(">")
    if n.text:
        out.append(escape(n.text))
    for c in n.children:
        _write(c, out)
    out.append(f"</{n.tag}>")


def to_canonical(n: Node) -> str:
    out: list[str] = []
    _write(n, out)
    return "".join(out)


def _write_pretty(n: Node, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    head = "<" + n.tag + "".join(f' {k}="{escape(v)}"' for k, v in n.attrs.items())
    if not n.children:
        if n.text:
            out.append(f"{pad}{head}>{escape(n.text)}</{n.tag}>")
        else:
            out.append(f"{pad}{head}/>")
        return
    out.append(f"{pad}{head}>" + (escape(n.text) if n.text else ""))
    for c in n.children:
        _write_pretty(c, depth + 1, out)
    out.append(f"{pad}</{n.tag}>")


def to_pretty(n: Node) -> str:
    out: list[str] = []
    _write_pretty(n, 0, out)
    return "\n".join(out) + "\n"


def _convert(el: ET.Element) -> Node:
    children = [_convert(c) for c in el]
    text = el.text or ""
    if children:
        # mixed content is kept only when it is not layout whitespace
        text = text + "".join(c.tail or "" for c in el)
        if not text.strip():
            text = ""
    return Node(el.tag, dict(el.attrib), text, children)


def parse(text: str | bytes) -> Node:
    """Parse one XML document into a :class:`Node` tree.

    DTDs and processing instructions are refused; namespaces are not
    interpreted. Raises :class:`MalformedXml` on any well-formedness error.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedXml(f"invalid UTF-8: {exc}") from None
    if "<!DOCTYPE" in text or "<!ENTITY" in text:
        raise MalformedXml("document type declarations are not permitted")
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    return _convert(root)


def canonicalize(doc: str | Node) -> str:
    return to_canonical(doc if isinstance(doc, Node) else parse(doc))


# timestamps -----------------------------------------------------------------

TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")
_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def format_ts(moment: datetime) -> str:
    moment = moment.astimezone(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%S.") + f"{moment.microsecond // 1000:03d}Z"


def parse_ts(text: str) -> datetime:
    if not TIMESTAMP_RE.match(text):
        raise ValueError(f"not an ISO-8601 UTC millisecond timestamp: {text!r}")
    return datetime.strptime(text, _TS_FORMAT).replace(tzinfo=timezone.utc)


def is_timestamp(text: str) -> bool:
    try:
        parse_ts(text)
    except ValueError:
        return False
    return True


class SystemClock:
    def now(self) -> str:
        return format_ts(datetime.now(timezone.utc))


class FixedClock:
    """Returns the same instant on every call."""

    def __init__(self, ts: str) -> None:
        parse_ts(ts)
        self.ts = ts

    def now(self) -> str:
        return self.ts


class StepClock:
    """Deterministic clock advancing by ``step_ms`` milliseconds per reading."""

    def __init__(self, start: str = "2013-10-20T00:00:00.000Z", step_ms: int = 1) -> None:
        self._t = parse_ts(start)
        self._step = timedelta(milliseconds=step_ms)

    def now(self) -> str:
        ts = format_ts(self._t)
        self._t += self._step
        return ts
