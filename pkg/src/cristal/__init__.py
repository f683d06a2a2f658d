"""Description-driven, provenance-preserving item repository."""

from .canon import FixedClock, StepClock, SystemClock
from .errors import CristalError
from .schema import SchemaDef, SchemaRegistry, ValidationReport, Violation
from .store import Agent, Event, ItemStore, Outcome, load_journal, sequential_uuids

__all__ = [
    "Agent", "CristalError", "Event", "FixedClock", "ItemStore", "Outcome", "SchemaDef",
    "SchemaRegistry", "StepClock", "SystemClock", "ValidationReport", "Violation",
    "load_journal", "sequential_uuids",
]
__version__ = "0.1.0"
