"""A tiny, total expression language for predicates and automatic activities.

Predicate scripts are a single expression evaluating to a boolean::

    field("CharacterizeData", "last", "Product/Weight") > 10.0 and prop("Status") == "built"

Assignment scripts are a list of ``Leaf/Path := expression`` lines (newline or
``;`` separated) that fill leaves of an outcome document. The special body
``request()`` copies the document supplied with the request.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Callable, Union

from .errors import EvaluationError, UnknownScript, UnknownVersion

Value = Union[str, Decimal, bool]

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?[0-9]+(?:\.[0-9]+)?)
  | (?P<op>==|!=|<=|>=|<|>|\+|\(|\)|,)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

FUNCTIONS = {"prop": 1, "field": 3, "input": 4, "request": 0}
KEYWORDS = {"and", "or", "not", "true", "false"}


def _statements(body: str) -> list[str]:
    """Split at ';' or newlines that are not inside a string literal."""
    out, current, quoted, escaped = [], [], False, False
    for ch in body:
        if quoted:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                quoted = False
        elif ch in ";\n":
            out.append("".join(current))
            current = []
            continue
        elif ch == '"':
            quoted = True
        current.append(ch)
    out.append("".join(current))
    return out


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


def _tokenize(src: str, where: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise EvaluationError(where, f"unexpected character {src[pos]!r} at offset {pos}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, src: str, where: str) -> None:
        self.toks = _tokenize(src, where)
        self.i = 0
        self.where = where

    def peek(self) -> tuple[str, str, int] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def fail(self, msg: str):
        tok = self.peek()
        at = tok[2] if tok else "end"
        raise EvaluationError(self.where, f"{msg} at offset {at}")

    def take(self, text: str | None = None, kind: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (text is not None and tok[1] != text) or (kind is not None and tok[0] != kind):
            self.fail(f"expected {text or kind}")
        self.i += 1
        return tok[1]

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok[1] == text and tok[0] in ("op", "name"):
            self.i += 1
            return True
        return False

    def parse(self):
        expr = self.or_()
        if self.peek() is not None:
            self.fail("trailing input")
        return expr

    def or_(self):
        left = self.and_()
        while self.accept("or"):
            left = Binary("or", left, self.and_())
        return left

    def and_(self):
        left = self.not_()
        while self.accept("and"):
            left = Binary("and", left, self.not_())
        return left

    def not_(self):
        if self.accept("not"):
            return Unary("not", self.not_())
        return self.cmp()

    def cmp(self):
        left = self.sum()
        tok = self.peek()
        if tok is not None and tok[1] in ("==", "!=", "<", "<=", ">", ">="):
            self.i += 1
            return Binary(tok[1], left, self.sum())
        return left

    def sum(self):
        left = self.atom()
        while self.accept("+"):
            left = Binary("+", left, self.atom())
        return left

    def atom(self):
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of expression")
        kind, text, _ = tok
        if kind == "string":
            self.i += 1
            return Lit(re.sub(r"\\(.)", r"\1", text[1:-1]))
        if kind == "number":
            self.i += 1
            return Lit(Decimal(text))
        if text == "(":
            self.i += 1
            inner = self.or_()
            self.take(")")
            return inner
        if kind == "name":
            if text in ("true", "false"):
                self.i += 1
                return Lit(text == "true")
            if text in FUNCTIONS:
                self.i += 1
                self.take("(")
                args = []
                if not self.accept(")"):
                    args.append(self.or_())
                    while self.accept(","):
                        args.append(self.or_())
                    self.take(")")
                if len(args) != FUNCTIONS[text]:
                    self.fail(f"{text}() takes {FUNCTIONS[text]} argument(s)")
                return Call(text, tuple(args))
        self.fail(f"unexpected {text!r}")


def parse_expression(src: str, where: str = "<expr>"):
    return _Parser(src, where).parse()


@dataclass(frozen=True)
class Script:
    name: str
    version: int
    body: str

    @property
    def is_copy(self) -> bool:
        return self.body.strip() == "request()"

    @property
    def is_assignment(self) -> bool:
        return ":=" in self.body

    def assignments(self) -> list[tuple[str, object]]:
        out = []
        for n, line in enumerate(_statements(self.body)):
            if not line.strip():
                continue
            if ":=" not in line:
                raise EvaluationError(f"{self.name}:{n}", "assignment line without ':='")
            path, expr = line.split(":=", 1)
            path = path.strip()
            if not re.match(r"^[A-Za-z_][A-Za-z0-9_.\-]*(/[A-Za-z_][A-Za-z0-9_.\-]*)*$", path):
                raise EvaluationError(f"{self.name}:{n}", f"invalid target path {path!r}")
            out.append((path, parse_expression(expr, f"{self.name}:{path}")))
        return out

    def predicate(self):
        return parse_expression(self.body, self.name)

    def check(self) -> None:
        """Parse the body, raising :class:`EvaluationError` on syntax errors."""
        if self.is_copy:
            return
        if self.is_assignment:
            self.assignments()
        else:
            self.predicate()


class Context:
    """Data a script may read; supplied by the lifecycle engine."""

    def __init__(self, prop: Callable[[str], str], field: Callable[[str, str, str], str],
                 input: Callable[[str, int, str, str], str]) -> None:
        self.prop = prop
        self.field = field
        self.input = input


def _to_decimal(v: Value) -> Decimal | None:
    if isinstance(v, bool):
        return None
    if isinstance(v, Decimal):
        return v
    if re.match(r"^-?[0-9]+(\.[0-9]+)?$", v):
        return Decimal(v)
    return None


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Decimal):
        return format(v, "f")
    return v


def evaluate(expr, ctx: Context, where: str = "<expr>") -> Value:
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Call):
        args = [evaluate(a, ctx, where) for a in expr.args]
        if expr.name == "request":
            raise EvaluationError(where, "request() is only valid as a whole script body")
        strs = [format_value(a) for a in args]
        if expr.name == "prop":
            return ctx.prop(strs[0])
        if expr.name == "field":
            return ctx.field(strs[0], strs[1], strs[2])
        slot = _to_decimal(args[1])
        if slot is None or slot != slot.to_integral_value():
            raise EvaluationError(where, f"slot must be an integer, got {strs[1]!r}")
        return ctx.input(strs[0], int(slot), strs[2], strs[3])
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, ctx, where)
        if not isinstance(v, bool):
            raise EvaluationError(where, "'not' needs a boolean operand")
        return not v
    op = expr.op
    if op in ("and", "or"):
        left = evaluate(expr.left, ctx, where)
        if not isinstance(left, bool):
            raise EvaluationError(where, f"{op!r} needs boolean operands")
        if (op == "and" and not left) or (op == "or" and left):
            return left
        right = evaluate(expr.right, ctx, where)
        if not isinstance(right, bool):
            raise EvaluationError(where, f"{op!r} needs boolean operands")
        return right
    left = evaluate(expr.left, ctx, where)
    right = evaluate(expr.right, ctx, where)
    if op == "+":
        if isinstance(left, bool) or isinstance(right, bool):
            raise EvaluationError(where, "'+' does not apply to booleans")
        if isinstance(left, Decimal) or isinstance(right, Decimal):
            a, b = _to_decimal(left), _to_decimal(right)
            if a is None or b is None:
                raise EvaluationError(where, f"cannot add {left!r} and {right!r}")
            return a + b
        return left + right
    return _compare(op, left, right, where)


def _compare(op: str, left: Value, right: Value, where: str) -> bool:
    if isinstance(left, Decimal) or isinstance(right, Decimal):
        a, b = _to_decimal(left), _to_decimal(right)
        if a is None or b is None:
            if op == "==":
                return False
            if op == "!=":
                return True
            raise EvaluationError(where, f"cannot order {left!r} against {right!r}")
    elif isinstance(left, bool) != isinstance(right, bool):
        if op in ("==", "!="):
            return op == "!="
        raise EvaluationError(where, f"cannot order {left!r} against {right!r}")
    else:
        if isinstance(left, bool) and op not in ("==", "!="):
            raise EvaluationError(where, "booleans are not ordered")
        a, b = left, right
    try:
        return {
            "==": lambda: a == b, "!=": lambda: a != b, "<": lambda: a < b,
            "<=": lambda: a <= b, ">": lambda: a > b, ">=": lambda: a >= b,
        }[op]()
    except InvalidOperation as exc:
        raise EvaluationError(where, str(exc)) from None


def evaluate_predicate_script(script: Script, ctx: Context) -> bool:
    result = evaluate(script.predicate(), ctx, script.name)
    if not isinstance(result, bool):
        raise EvaluationError(script.name, f"predicate yielded {format_value(result)!r}, not a boolean")
    return result


class ScriptRegistry:
    """Versioned scripts by name; append-only like the schema registry."""

    def __init__(self) -> None:
        self._versions: dict[str, list[Script]] = {}
        self._lock = threading.Lock()

    def register(self, name: str, body: str) -> Script:
        with self._lock:
            script = Script(name, self.next_version(name), body)
            script.check()
            self._versions.setdefault(name, []).append(script)
            return script

    def add(self, script: Script) -> None:
        with self._lock:
            if script.version != self.next_version(script.name):
                raise UnknownVersion(f"script {script.name} version {script.version} out of sequence")
            self._versions.setdefault(script.name, []).append(script)

    def next_version(self, name: str) -> int:
        return len(self._versions.get(name, ()))

    def get(self, name: str, selector: int | str = "last") -> Script:
        versions = self._versions.get(name)
        if not versions:
            raise UnknownScript(name)
        if selector == "last":
            return versions[-1]
        index = int(selector)
        if not 0 <= index < len(versions):
            raise UnknownScript(f"{name} version {index}")
        return versions[index]

    def names(self) -> list[str]:
        return sorted(self._versions)

    def all(self) -> list[Script]:
        return [s for n in self.names() for s in self._versions[n]]
