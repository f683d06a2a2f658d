"""Exception hierarchy shared by every kernel module.

Each exception exposes ``code`` (the stable error name printed by the CLI as
``ERROR <code>: <detail>``) and a human readable detail string.
"""

from __future__ import annotations


class CristalError(Exception):
    code: str = ""

    def __init__(self, detail: str = "") -> None:
        super().__init__(detail)
        self.detail = detail

    def __init_subclass__(cls, **kwargs) -> None:
        super().__init_subclass__(**kwargs)
        if "code" not in cls.__dict__:
            cls.code = cls.__name__


class MalformedXml(CristalError):
    pass


# schema registry

class MalformedSchema(CristalError):
    def __init__(self, path: str, detail: str) -> None:
        super().__init__(f"{path}: {detail}")
        self.path = path


class UnknownSchema(CristalError):
    pass


class UnknownVersion(CristalError):
    pass


# item store

class UnknownItem(CristalError):
    pass


class DuplicateUuid(CristalError):
    pass


class UnknownProperty(CristalError):
    pass


class DuplicateProperty(CristalError):
    pass


class ImmutableProperty(CristalError):
    pass


class UnknownCollection(CristalError):
    pass


class UnknownSlot(CristalError):
    pass


class UnknownTarget(CristalError):
    pass


class WrongTargetType(CristalError):
    pass


class UnknownViewpoint(CristalError):
    pass


class CorruptJournal(CristalError):
    def __init__(self, line: int, detail: str, offset: int | None = None) -> None:
        where = f"line {line}" if offset is None else f"line {line} (offset {offset})"
        super().__init__(f"{where}: {detail}")
        self.reason = detail
        self.line = line
        self.offset = offset


class OutcomeWithoutEvent(CorruptJournal):
    code = "OutcomeWithoutEvent"


# lifecycle engine

class WorkflowAlreadyAssigned(CristalError):
    pass


class MalformedWorkflow(CristalError):
    pass


class NoWorkflow(CristalError):
    pass


class NoSuchActivity(CristalError):
    pass


class InvalidTransition(CristalError):
    def __init__(self, prev: str, transition: str, detail: str = "") -> None:
        msg = f"{transition} is not legal from {prev}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
        self.prev = prev
        self.transition = transition


class RoleDenied(CristalError):
    def __init__(self, agent_role: str, required_role: str) -> None:
        super().__init__(f"agent roles {agent_role!r} do not include required role {required_role!r}")
        self.agent_role = agent_role
        self.required_role = required_role


class OutcomeRequired(CristalError):
    pass


class OutcomeInvalid(CristalError):
    def __init__(self, report) -> None:
        first = report.violations[0] if report.violations else None
        detail = f"{len(report.violations)} violation(s)"
        if first is not None:
            detail += f"; first {first.code} at {first.path}: {first.message}"
        super().__init__(detail)
        self.report = report


class UnknownScript(CristalError):
    pass


class EvaluationError(CristalError):
    def __init__(self, path: str, detail: str) -> None:
        super().__init__(f"{path}: {detail}")
        self.path = path


class ScriptFailure(CristalError):
    def __init__(self, activity: str, cause: Exception) -> None:
        super().__init__(f"{activity}: {cause}")
        self.activity = activity
        self.cause = cause


# description engine

class StoreNotEmpty(CristalError):
    pass


class UnknownKind(CristalError):
    pass


class NotADescription(CristalError):
    pass


# provenance

class MissingDescription(CristalError):
    pass


# data atlas

class UnknownPath(CristalError):
    def __init__(self, schema: str | None, path: str) -> None:
        super().__init__(f"{path!r} is not a leaf path of {schema or 'any registered schema'}")
        self.schema = schema
        self.path = path


class TypeMismatch(CristalError):
    def __init__(self, op: str, kind: str) -> None:
        super().__init__(f"operator {op!r} cannot be applied to {kind} values")
        self.op = op
        self.kind = kind


class QuerySyntaxError(CristalError):
    code = "SyntaxError"

    def __init__(self, offset: int, detail: str) -> None:
        super().__init__(f"offset {offset}: {detail}")
        self.offset = offset
