"""Exception hierarchy shared by every ontodistill module.

Each error that can cross the service boundary carries a stable ``code``
used verbatim by the HTTP API and the CLI exit-code mapping.
"""

from __future__ import annotations


class OntoDistillError(Exception):
    """Base class; ``code`` is the wire-level error identifier."""

    code = "internal_error"

    def __init__(self, message: str, detail=None):
        super().__init__(message)
        self.message = message
        self.detail = detail


# --- ontology model ---------------------------------------------------------

class UnknownConceptError(OntoDistillError):
    code = "unknown_concept"


class InvalidConceptNameError(OntoDistillError):
    code = "invalid_concept_name"


class DuplicateConceptError(OntoDistillError):
    code = "duplicate_concept"


class InvalidEdgeError(OntoDistillError):
    code = "invalid_edge"


class MergeSelfError(OntoDistillError):
    code = "merge_self"


class EditRejectedError(OntoDistillError):
    """Edit would introduce new strict-policy violations; detail carries the report."""

    code = "edit_rejected"


class CyclicHierarchyError(OntoDistillError):
    code = "cyclic_hierarchy"


class CorruptSnapshotError(OntoDistillError):
    code = "corrupt_snapshot"


# --- DOT codec ---------------------------------------------------------------

class DotSyntaxError(OntoDistillError):
    code = "dot_syntax"

    def __init__(self, message: str, line: int, column: int, expected: str = ""):
        super().__init__(message, detail={"line": line, "column": column, "expected": expected})
        self.line = line
        self.column = column
        self.expected = expected


class UndirectedGraphError(OntoDistillError):
    code = "undirected_graph"


class EmptyGraphError(OntoDistillError):
    code = "empty_graph"


class NoDotBlockError(OntoDistillError):
    code = "no_dot_block"


# --- record codec ------------------------------------------------------------

class NoTableFoundError(OntoDistillError):
    code = "no_table_found"


# --- prompt engine -----------------------------------------------------------

class UnresolvedPlaceholderError(OntoDistillError):
    code = "unresolved_placeholder"


class EmptyBatchError(OntoDistillError):
    code = "empty_batch"


class BatchTooLargeError(OntoDistillError):
    code = "batch_too_large"


class ConstraintOverflowError(OntoDistillError):
    code = "constraint_overflow"


# --- gateway -----------------------------------------------------------------

class EmptyPromptError(OntoDistillError):
    code = "empty_prompt"


class GatewayTimeoutError(OntoDistillError):
    code = "gateway_timeout"


class TransportError(OntoDistillError):
    code = "transport_error"


class ReplayMissError(OntoDistillError):
    code = "replay_miss"


# --- normalizer --------------------------------------------------------------

class OverlappingGroupsError(OntoDistillError):
    code = "overlapping_groups"


class RulesFormatError(OntoDistillError):
    code = "rules_format"


# --- orchestrator ------------------------------------------------------------

class InvalidTransitionError(OntoDistillError):
    code = "invalid_transition"


class UnknownIterationError(OntoDistillError):
    code = "unknown_iteration"


class UnknownTaskError(OntoDistillError):
    code = "unknown_task"


# --- session store -----------------------------------------------------------

class StoreIoError(OntoDistillError):
    code = "io_error"


class ChecksumMismatchError(OntoDistillError):
    code = "checksum_mismatch"


class SchemaVersionMismatchError(OntoDistillError):
    code = "schema_version_mismatch"


class UnknownSessionError(OntoDistillError):
    code = "unknown_session"
