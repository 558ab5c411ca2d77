"""Parse line-oriented model responses into definition/relationship/property rows.

Model output is messy by construction, so nothing in here is fatal except a
completely table-free markdown parse: malformed lines are quarantined with a
reason and kept for human review, never silently dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import NoTableFoundError
from .ontology import Ontology, Triple


class RecordKind(str, Enum):
    DEFINITION = "definition"
    RELATIONSHIP = "relationship"
    PROPERTY = "property"


class RejectReason(str, Enum):
    ARITY_MISMATCH = "ArityMismatch"
    HEADER = "Header"
    SEPARATOR = "Separator"
    UNKNOWN_CONCEPT = "UnknownConcept"


DEFAULT_HEADER_WORDS: frozenset[str] = frozenset({
    "concept", "class", "definition", "description", "subject", "predicate",
    "relationship", "relation", "object", "property", "properties", "name",
    "value", "no", "no.", "#", "index",
})


@dataclass(frozen=True)
class RecordRow:
    cells: tuple[str, ...]
    line_no: int
    raw_text: str


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    raw_text: str
    reason: RejectReason

    def to_doc(self) -> dict:
        return {"line_no": self.line_no, "raw_text": self.raw_text,
                "reason": self.reason.value}

    @classmethod
    def from_doc(cls, doc: dict) -> RejectedRow:
        return cls(line_no=doc["line_no"], raw_text=doc["raw_text"],
                   reason=RejectReason(doc["reason"]))


@dataclass(frozen=True)
class RecordBatch:
    kind: RecordKind | None
    rows: tuple[RecordRow, ...] = ()
    rejected: tuple[RejectedRow, ...] = ()


_ENUMERATION = re.compile(r"^\s*\d+\s*[.)]\s*")
_SEPARATOR_ROW = re.compile(r"^[\s|:-]*-[\s|:-]*$")


def _is_header_row(cells: tuple[str, ...], header_words: frozenset[str]) -> bool:
    return bool(cells) and all(c.casefold() in header_words for c in cells)


def _split_line(line: str, delimiter: str) -> tuple[str, ...]:
    cells = [c.strip() for c in line.split(delimiter)]
    if len(cells) > 1 and cells[0] == "":
        cells = cells[1:]
    if len(cells) > 1 and cells[-1] == "":
        cells = cells[:-1]
    return tuple(cells)


def parse_delimited(
    text: str,
    delimiter: str,
    expected_arity: int,
    *,
    kind: RecordKind | None = None,
    header_words: frozenset[str] = DEFAULT_HEADER_WORDS,
    strip_enumeration: bool = False,
) -> RecordBatch:
    """Split non-empty lines on ``delimiter`` into trimmed cells.

    Lines whose arity differs from ``expected_arity`` are quarantined as
    ArityMismatch; lines whose every cell is a known header word are
    quarantined as Header. With ``strip_enumeration``, a leading "1." or
    "2)" is removed before splitting, which is how numbered-list answers
    are read.
    """
    rows: list[RecordRow] = []
    rejected: list[RejectedRow] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if strip_enumeration:
            line = _ENUMERATION.sub("", line)
        cells = _split_line(line, delimiter)
        if _is_header_row(cells, header_words):
            rejected.append(RejectedRow(line_no, raw, RejectReason.HEADER))
        elif len(cells) != expected_arity or any(c == "" for c in cells):
            rejected.append(RejectedRow(line_no, raw, RejectReason.ARITY_MISMATCH))
        else:
            rows.append(RecordRow(cells=cells, line_no=line_no, raw_text=raw))
    return RecordBatch(kind=kind, rows=tuple(rows), rejected=tuple(rejected))


def detect_table_runaway(
    text: str,
    *,
    max_separator_run: int = 200,
    separator_row_factor: int = 3,
    min_separator_rows: int = 4,
) -> bool:
    """Spot the degenerate markdown-table failure mode.

    Fires when a single line carries a run of more than ``max_separator_run``
    consecutive separator characters (dash, pipe, colon, space), or when the
    body is dominated by separator rows: at least ``min_separator_rows`` of
    them and more than ``separator_row_factor`` times the data row count.
    """
    separator_rows = 0
    data_rows = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if _SEPARATOR_ROW.match(line):
            separator_rows += 1
        else:
            data_rows += 1
        run = 0
        for ch in raw:
            if ch in "-|: \t":
                run += 1
                if run > max_separator_run:
                    return True
            else:
                run = 0
    return (separator_rows >= min_separator_rows
            and separator_rows > separator_row_factor * data_rows)


def parse_markdown_table(
    text: str,
    expected_arity: int,
    *,
    kind: RecordKind | None = None,
    header_words: frozenset[str] = DEFAULT_HEADER_WORDS,
) -> RecordBatch:
    """Read pipe-delimited table rows, skipping the header and ``---`` rows.

    The first table row counts as the header when a separator row follows it
    or when its cells are all header words; later all-header-word rows are
    skipped the same way. Raises when the text contains no table rows at all.
    """
    table_lines: list[tuple[int, str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if "|" in raw and raw.strip():
            table_lines.append((line_no, raw))
    if not table_lines:
        raise NoTableFoundError("response contains no markdown table rows")
    rows: list[RecordRow] = []
    rejected: list[RejectedRow] = []
    first_data_seen = False
    for position, (line_no, raw) in enumerate(table_lines):
        line = raw.strip()
        if _SEPARATOR_ROW.match(line):
            rejected.append(RejectedRow(line_no, raw, RejectReason.SEPARATOR))
            continue
        cells = _split_line(line, "|")
        is_first_row = not first_data_seen and not rows
        followed_by_separator = (
            position + 1 < len(table_lines)
            and _SEPARATOR_ROW.match(table_lines[position + 1][1].strip()))
        if _is_header_row(cells, header_words) or (is_first_row and followed_by_separator):
            rejected.append(RejectedRow(line_no, raw, RejectReason.HEADER))
            first_data_seen = True
            continue
        first_data_seen = True
        if len(cells) != expected_arity or any(c == "" for c in cells):
            rejected.append(RejectedRow(line_no, raw, RejectReason.ARITY_MISMATCH))
        else:
            rows.append(RecordRow(cells=cells, line_no=line_no, raw_text=raw))
    return RecordBatch(kind=kind, rows=tuple(rows), rejected=tuple(rejected))


def rows_to_triples(
    batch: RecordBatch,
    ontology: Ontology,
    *,
    provenance: tuple[str, ...] = (),
) -> tuple[list[Triple], list[RejectedRow]]:
    """Resolve 3-cell rows into triples against the ontology's concept names.

    Rows whose subject or object does not resolve are quarantined as
    UnknownConcept. Predicates pass through verbatim; normalization is a
    separate stage.
    """
    triples: list[Triple] = []
    rejected: list[RejectedRow] = []
    for row in batch.rows:
        subject_cell, predicate, object_cell = row.cells
        subject = ontology.resolve(subject_cell)
        obj = ontology.resolve(object_cell)
        if subject is None or obj is None:
            rejected.append(RejectedRow(row.line_no, row.raw_text,
                                        RejectReason.UNKNOWN_CONCEPT))
            continue
        triples.append(Triple(subject=subject.id, predicate=predicate,
                              object=obj.id, provenance=provenance))
    return triples, rejected
