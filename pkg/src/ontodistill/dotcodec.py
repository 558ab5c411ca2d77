"""Parse and emit the DOT subset used for hierarchy exchange.

The model is asked to answer with a plain directed graph, so only that
subset exists here: ``digraph`` with an optional name, quoted or bare
identifiers, ``->`` edges with chains, node statements, attribute lists
(kept as opaque warning text), and both comment styles. Subgraphs, ports
and HTML labels are refused by name. Undirected graphs are refused
outright.

Parsing is hand-rolled (tokenizer plus recursive descent) because the
grammar is tiny and the failure modes matter more than the grammar: every
malformed input must raise a typed error with a line and column, never an
unhandled exception, since raw model output is fed in here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import (
    DotSyntaxError,
    EmptyGraphError,
    NoDotBlockError,
    UndirectedGraphError,
)
from .ontology import Concept, HierarchyEdge, Ontology, make_concept


class EdgeDirection(str, Enum):
    """How a DOT edge maps onto the subclass relation."""

    PARENT_TO_CHILD = "parent-to-child"
    CHILD_TO_PARENT = "child-to-parent"


class WarningKind(str, Enum):
    UNKNOWN_ATTRIBUTE = "UnknownAttribute"
    DUPLICATE_EDGE = "DuplicateEdge"
    IMPLICIT_NODE = "ImplicitNode"


@dataclass(frozen=True)
class ParseWarning:
    line: int
    kind: WarningKind
    text: str

    def to_doc(self) -> dict:
        return {"line": self.line, "kind": self.kind.value, "text": self.text}


@dataclass(frozen=True)
class ParseDiagnostics:
    warnings: tuple[ParseWarning, ...] = ()


@dataclass(frozen=True)
class DotGraph:
    name: str | None
    directed: bool
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]


# --- tokenizer -------------------------------------------------------------------

_KEYWORDS = {"digraph", "graph", "subgraph", "node", "edge", "strict"}

_BARE_START = re.compile(r"[A-Za-z_]")
_BARE_BODY = re.compile(r"[A-Za-z0-9_]")
_NUMERAL = re.compile(r"-?(\.[0-9]+|[0-9]+(\.[0-9]*)?)")


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


def _syntax_error(message: str, line: int, column: int, expected: str) -> DotSyntaxError:
    return DotSyntaxError(f"{message} at line {line}, column {column}",
                          line=line, column=column, expected=expected)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def advance(count: int = 1):
        nonlocal i, line, col
        for _ in range(count):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n\f\v":
            advance()
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                advance()
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                raise _syntax_error("unterminated comment", line, col, "*/")
            advance(end + 2 - i)
            continue
        start_line, start_col = line, col
        if c == '"':
            advance()
            buf: list[str] = []
            closed = False
            while i < n:
                ch = text[i]
                if ch == "\\" and i + 1 < n:
                    nxt = text[i + 1]
                    if nxt in ('"', "\\"):
                        buf.append(nxt)
                    elif nxt == "\n":
                        pass
                    else:
                        buf.append("\\" + nxt)
                    advance(2)
                    continue
                if ch == '"':
                    advance()
                    closed = True
                    break
                buf.append(ch)
                advance()
            if not closed:
                raise _syntax_error("unterminated quoted identifier",
                                    start_line, start_col, '"')
            tokens.append(_Token("qid", "".join(buf), start_line, start_col))
            continue
        if text.startswith("->", i):
            tokens.append(_Token("arrow", "->", line, col))
            advance(2)
            continue
        if text.startswith("--", i):
            tokens.append(_Token("undirected", "--", line, col))
            advance(2)
            continue
        if c in "{}[];,=:":
            kind = {"{": "lbrace", "}": "rbrace", "[": "lbracket",
                    "]": "rbracket", ";": "semi", ",": "comma",
                    "=": "equals", ":": "colon"}[c]
            tokens.append(_Token(kind, c, line, col))
            advance()
            continue
        if c == "<":
            raise _syntax_error("HTML labels are not supported",
                                line, col, "quoted or bare identifier")
        if _BARE_START.match(c):
            j = i
            while j < n and _BARE_BODY.match(text[j]):
                j += 1
            tokens.append(_Token("id", text[i:j], line, col))
            advance(j - i)
            continue
        numeral = _NUMERAL.match(text, i)
        if numeral and numeral.group(0) not in ("-", ""):
            tokens.append(_Token("id", numeral.group(0), line, col))
            advance(numeral.end() - i)
            continue
        raise _syntax_error(f"unexpected character {c!r}", line, col,
                            "identifier, edge, brace or separator")
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.warnings: list[ParseWarning] = []
        self.nodes: dict[str, None] = {}
        self.declared: set[str] = set()
        self.edges: list[tuple[str, str]] = []
        self.edge_set: set[tuple[str, str]] = set()

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, expected: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise _syntax_error(
                f"unexpected {tok.kind} {tok.value!r}", tok.line, tok.column, expected)
        return self.next()

    def warn(self, line: int, kind: WarningKind, text: str):
        self.warnings.append(ParseWarning(line=line, kind=kind, text=text))

    # grammar -----------------------------------------------------------------

    def parse(self) -> DotGraph:
        tok = self.peek()
        if tok.kind == "id" and tok.value.casefold() == "strict":
            self.warn(tok.line, WarningKind.UNKNOWN_ATTRIBUTE,
                      "strict modifier ignored")
            self.next()
        tok = self.next()
        if tok.kind != "id":
            raise _syntax_error(f"expected 'digraph', found {tok.value!r}",
                                tok.line, tok.column, "digraph")
        keyword = tok.value.casefold()
        if keyword == "graph":
            raise UndirectedGraphError(
                "undirected graphs are not accepted; use 'digraph'")
        if keyword != "digraph":
            raise _syntax_error(f"expected 'digraph', found {tok.value!r}",
                                tok.line, tok.column, "digraph")
        name: str | None = None
        tok = self.peek()
        if tok.kind in ("id", "qid"):
            name = tok.value
            self.next()
        self.expect("lbrace", "{")
        self.parse_statements()
        self.expect("rbrace", "}")
        trailing = self.peek()
        if trailing.kind != "eof":
            raise _syntax_error(
                f"unexpected {trailing.value!r} after closing brace",
                trailing.line, trailing.column, "end of input")
        if not self.nodes:
            raise EmptyGraphError("graph declares no nodes or edges")
        return DotGraph(name=name, directed=True,
                        nodes=tuple(self.nodes), edges=tuple(self.edges))

    def parse_statements(self):
        while True:
            tok = self.peek()
            if tok.kind in ("rbrace", "eof"):
                return
            if tok.kind == "semi":
                self.next()
                continue
            if tok.kind == "id" and tok.value.casefold() == "subgraph":
                raise _syntax_error("subgraph is not supported",
                                    tok.line, tok.column, "node or edge statement")
            if tok.kind == "id" and tok.value.casefold() in ("node", "edge", "graph"):
                self.next()
                attr_text = self.parse_attr_lists()
                self.warn(tok.line, WarningKind.UNKNOWN_ATTRIBUTE,
                          f"{tok.value} defaults ignored: [{attr_text or ''}]")
                continue
            if tok.kind in ("id", "qid"):
                self.parse_node_or_edge()
                continue
            raise _syntax_error(f"unexpected {tok.kind} {tok.value!r}",
                                tok.line, tok.column,
                                "identifier, node or edge statement")

    def parse_node_or_edge(self):
        first = self.next()
        self.reject_port()
        nxt = self.peek()
        if nxt.kind == "equals":
            self.next()
            rhs = self.peek()
            if rhs.kind not in ("id", "qid"):
                raise _syntax_error(f"unexpected {rhs.kind} {rhs.value!r}",
                                    rhs.line, rhs.column, "attribute value")
            self.next()
            self.warn(first.line, WarningKind.UNKNOWN_ATTRIBUTE,
                      f"assignment ignored: {first.value}={rhs.value}")
            return
        chain = [first]
        while True:
            tok = self.peek()
            if tok.kind == "undirected":
                raise _syntax_error("undirected edge '--' in a digraph",
                                    tok.line, tok.column, "->")
            if tok.kind != "arrow":
                break
            self.next()
            endpoint = self.peek()
            if endpoint.kind not in ("id", "qid"):
                raise _syntax_error(
                    f"unexpected {endpoint.kind} {endpoint.value!r}",
                    endpoint.line, endpoint.column, "edge endpoint")
            self.next()
            self.reject_port()
            chain.append(endpoint)
        attr_text = self.parse_attr_lists()
        if attr_text is not None:
            self.warn(first.line, WarningKind.UNKNOWN_ATTRIBUTE,
                      f"attributes ignored: [{attr_text}]")
        if len(chain) == 1:
            self.declare_node(first.value)
            return
        for tail, head in zip(chain, chain[1:]):
            self.add_edge(tail, head)

    def reject_port(self):
        tok = self.peek()
        if tok.kind == "colon":
            raise _syntax_error("ports are not supported",
                                tok.line, tok.column, "edge, separator or '}'")

    def parse_attr_lists(self) -> str | None:
        texts: list[str] = []
        while self.peek().kind == "lbracket":
            open_tok = self.next()
            parts: list[str] = []
            while True:
                tok = self.peek()
                if tok.kind == "rbracket":
                    self.next()
                    break
                if tok.kind == "eof":
                    raise _syntax_error("unterminated attribute list",
                                        open_tok.line, open_tok.column, "]")
                if tok.kind == "lbracket":
                    raise _syntax_error("nested '[' in attribute list",
                                        tok.line, tok.column, "]")
                parts.append(tok.value)
                self.next()
            texts.append(" ".join(parts))
        if not texts:
            return None
        return "; ".join(texts)

    def declare_node(self, label: str):
        self.nodes.setdefault(label, None)
        self.declared.add(label)

    def add_edge(self, tail: _Token, head: _Token):
        for endpoint in (tail, head):
            if endpoint.value not in self.nodes:
                self.nodes.setdefault(endpoint.value, None)
                self.warn(endpoint.line, WarningKind.IMPLICIT_NODE,
                          f"node {endpoint.value!r} first appears in an edge")
        pair = (tail.value, head.value)
        if pair in self.edge_set:
            self.warn(tail.line, WarningKind.DUPLICATE_EDGE,
                      f"duplicate edge {tail.value!r} -> {head.value!r}")
            return
        self.edge_set.add(pair)
        self.edges.append(pair)


def parse_dot(text: str) -> tuple[DotGraph, ParseDiagnostics]:
    parser = _Parser(_tokenize(text))
    graph = parser.parse()
    return graph, ParseDiagnostics(warnings=tuple(parser.warnings))


# --- block extraction -------------------------------------------------------------

_DIGRAPH_WORD = re.compile(r"\bdigraph\b", re.IGNORECASE)


def extract_dot_blocks(response: str) -> list[str]:
    """Every balanced ``digraph … { … }`` region in the text, in order.

    Brace balancing respects quoted strings and both comment styles, so a
    brace inside a label or comment never terminates a block early.
    """
    blocks: list[str] = []
    pos = 0
    while True:
        match = _DIGRAPH_WORD.search(response, pos)
        if match is None:
            return blocks
        end = _balance_block(response, match.start())
        if end is None:
            pos = match.end()
        else:
            blocks.append(response[match.start():end])
            pos = end


def extract_dot_block(response: str) -> str:
    """The first balanced DOT block; later blocks are ignored."""
    blocks = extract_dot_blocks(response)
    if not blocks:
        raise NoDotBlockError("no balanced 'digraph' block found in response")
    return blocks[0]


def _skip_trivia(text: str, i: int) -> int:
    n = len(text)
    while i < n:
        if text[i] in " \t\r\n\f\v":
            i += 1
        elif text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl == -1 else nl
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                return n
            i = end + 2
        else:
            return i
    return i


def _skip_quoted(text: str, i: int) -> int | None:
    """``i`` sits on an opening quote; index just past the closing quote."""
    i += 1
    n = len(text)
    while i < n:
        if text[i] == "\\" and i + 1 < n:
            i += 2
            continue
        if text[i] == '"':
            return i + 1
        i += 1
    return None


def _balance_block(text: str, keyword_start: int) -> int | None:
    n = len(text)
    i = _skip_trivia(text, keyword_start + len("digraph"))
    if i < n and text[i] == '"':
        after = _skip_quoted(text, i)
        if after is None:
            return None
        i = _skip_trivia(text, after)
    elif i < n and (text[i].isalnum() or text[i] == "_"):
        while i < n and (text[i].isalnum() or text[i] == "_"):
            i += 1
        i = _skip_trivia(text, i)
    if i >= n or text[i] != "{":
        return None
    depth = 0
    while i < n:
        c = text[i]
        if c == '"':
            after = _skip_quoted(text, i)
            if after is None:
                return None
            i = after
            continue
        if text.startswith("//", i):
            nl = text.find("\n", i)
            if nl == -1:
                return None
            i = nl
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                return None
            i = end + 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


# --- hierarchy mapping --------------------------------------------------------------


def hierarchy_from_dot(
    graph: DotGraph,
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD,
) -> tuple[list[Concept], list[HierarchyEdge]]:
    """Map DOT labels through name canonicalization into concepts and edges.

    Labels that canonicalize to one id collapse into a single concept (the
    first spelling wins). Edges that collapse onto themselves are dropped;
    a subclass edge from a concept to itself carries no information.
    """
    concepts: dict[str, Concept] = {}

    def intern(label: str) -> str:
        concept = make_concept(label)
        concepts.setdefault(concept.id, concept)
        return concept.id

    for label in graph.nodes:
        intern(label)
    edges: list[HierarchyEdge] = []
    seen: set[HierarchyEdge] = set()
    for tail, head in graph.edges:
        tail_id = intern(tail)
        head_id = intern(head)
        if tail_id == head_id:
            continue
        if direction is EdgeDirection.PARENT_TO_CHILD:
            edge = HierarchyEdge(child=head_id, parent=tail_id)
        else:
            edge = HierarchyEdge(child=tail_id, parent=head_id)
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)
    return list(concepts.values()), edges


def ontology_from_dot(
    text: str,
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD,
) -> tuple[Ontology, ParseDiagnostics]:
    """Parse DOT text straight into a hierarchy-only ontology."""
    graph, diagnostics = parse_dot(text)
    concepts, edges = hierarchy_from_dot(graph, direction)
    return Ontology.from_parts(concepts, edges, check=False), diagnostics


# --- emission ----------------------------------------------------------------------


def _quote(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(
    ontology: Ontology,
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD,
) -> str:
    """Deterministic DOT text for the hierarchy: sorted nodes, then sorted edges.

    A pure function of the ontology's canonical sets; two set-equal
    ontologies emit byte-identical text.
    """
    lines = ["digraph ontology {"]
    for cid in sorted(ontology.concepts):
        lines.append(f"  {_quote(ontology.concepts[cid].display_name)};")
    for edge in sorted(ontology.hierarchy, key=lambda e: (e.parent, e.child)):
        parent_label = _quote(ontology.display(edge.parent))
        child_label = _quote(ontology.display(edge.child))
        if direction is EdgeDirection.PARENT_TO_CHILD:
            lines.append(f"  {parent_label} -> {child_label};")
        else:
            lines.append(f"  {child_label} -> {parent_label};")
    lines.append("}")
    return "\n".join(lines) + "\n"
