"""Ontology distillation from chat-completion language models.

The package grows a domain ontology by looping templated prompts through a
model gateway, parsing the replies into concepts, definitions, relationship
triples and properties, validating every candidate state, and parking each
iteration for human review or auto-acceptance before it becomes history.
"""

from .ontology import (
    Concept,
    HierarchyEdge,
    Ontology,
    OntologyDelta,
    Property,
    Triple,
    apply_delta,
    diff,
    restore,
    snapshot,
)
from .validation import Policy, Rule, ValidationReport, Violation, validate

__version__ = "0.1.0"

__all__ = [
    "Concept",
    "HierarchyEdge",
    "Ontology",
    "OntologyDelta",
    "Policy",
    "Property",
    "Rule",
    "Triple",
    "ValidationReport",
    "Violation",
    "apply_delta",
    "diff",
    "restore",
    "snapshot",
    "validate",
    "__version__",
]
