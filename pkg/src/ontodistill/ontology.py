"""The in-memory ontology model.

An :class:`Ontology` is an immutable value: concepts keyed by slug id, a set
of subclass edges, and a keyed set of relationship triples. Every mutation
returns a new instance with a bumped version counter, which keeps snapshots,
diffs and replay cheap and exact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import (
    CorruptSnapshotError,
    CyclicHierarchyError,
    DuplicateConceptError,
    InvalidConceptNameError,
    InvalidEdgeError,
    UnknownConceptError,
)
from .naming import display_form, predicate_key, slugify

SCHEMA_VERSION = 1

TripleKey = tuple[str, str, str]


@dataclass(frozen=True)
class Property:
    """A named attribute of a concept (e.g. Color, Length)."""

    name: str
    description: str | None = None


@dataclass(frozen=True)
class Concept:
    id: str
    display_name: str
    definition: str | None = None
    properties: tuple[Property, ...] = ()


@dataclass(frozen=True, order=True)
class HierarchyEdge:
    """``child`` is a subclass of ``parent``."""

    child: str
    parent: str


@dataclass(frozen=True)
class Triple:
    """Subject -> predicate -> object record with per-run provenance."""

    subject: str
    predicate: str
    object: str
    provenance: tuple[str, ...] = ()
    variants: tuple[str, ...] = ()

    @property
    def key(self) -> TripleKey:
        return (self.subject, predicate_key(self.predicate), self.object)


def make_concept(display_name: str, definition: str | None = None,
                 properties: tuple[Property, ...] = ()) -> Concept:
    name = display_form(display_name)
    if not name:
        raise InvalidConceptNameError("concept name is empty after trimming")
    return Concept(id=slugify(name), display_name=name,
                   definition=definition, properties=properties)


def make_edge(child: str, parent: str) -> HierarchyEdge:
    if child == parent:
        raise InvalidEdgeError(f"self-edge on {child!r}")
    return HierarchyEdge(child=child, parent=parent)


def merge_triple_pair(a: Triple, b: Triple) -> Triple:
    """Collapse two triples with the same key, unioning their annotations."""
    return Triple(
        subject=a.subject,
        predicate=min(a.predicate, b.predicate),
        object=a.object,
        provenance=tuple(sorted(set(a.provenance) | set(b.provenance))),
        variants=tuple(sorted(set(a.variants) | set(b.variants))),
    )


def _key_triples(triples, merge_duplicates: bool = True) -> dict[TripleKey, Triple]:
    out: dict[TripleKey, Triple] = {}
    for t in triples:
        k = t.key
        if k in out and merge_duplicates:
            out[k] = merge_triple_pair(out[k], t)
        else:
            out[k] = t
    return out


@dataclass(frozen=True, eq=False)
class Ontology:
    concepts: dict[str, Concept]
    hierarchy: frozenset[HierarchyEdge]
    triples: dict[TripleKey, Triple]
    version: int = 0

    # -- construction ---------------------------------------------------

    @classmethod
    def empty(cls) -> Ontology:
        return cls(concepts={}, hierarchy=frozenset(), triples={}, version=0)

    @classmethod
    def from_parts(cls, concepts, edges=(), triples=(), version: int = 0,
                   check: bool = True) -> Ontology:
        """Build from Concept/HierarchyEdge/Triple iterables.

        With ``check`` (the default) edge and triple endpoints must resolve
        and concept ids must be unique; ``check=False`` admits loose states
        (used when loading archives, where validation reports the damage
        instead of refusing to represent it).
        """
        cmap: dict[str, Concept] = {}
        for c in concepts:
            if check and c.id in cmap:
                raise DuplicateConceptError(f"duplicate concept id {c.id!r}")
            cmap[c.id] = c
        edge_set = frozenset(edges)
        if check:
            for e in edge_set:
                if e.child == e.parent:
                    raise InvalidEdgeError(f"self-edge on {e.child!r}")
                for end in (e.child, e.parent):
                    if end not in cmap:
                        raise UnknownConceptError(f"edge endpoint {end!r} not in ontology")
        tmap = _key_triples(triples)
        if check:
            for t in tmap.values():
                for end in (t.subject, t.object):
                    if end not in cmap:
                        raise UnknownConceptError(f"triple endpoint {end!r} not in ontology")
        return cls(concepts=cmap, hierarchy=edge_set, triples=tmap, version=version)

    @classmethod
    def from_names(cls, names, edges=(), version: int = 0) -> Ontology:
        """Convenience builder from display names and (parent, child) name pairs."""
        concepts = [make_concept(n) for n in names]
        edge_objs = [make_edge(child=slugify(c), parent=slugify(p)) for p, c in edges]
        return cls.from_parts(concepts, edge_objs, version=version)

    # -- equality / identity ---------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ontology):
            return NotImplemented
        return self.canonical_json() == other.canonical_json()

    def __hash__(self):
        return hash(self.checksum())

    # -- lookups ----------------------------------------------------------

    def resolve(self, ref: str) -> Concept | None:
        """Find a concept by id, display name, or any spelling of its name."""
        if ref in self.concepts:
            return self.concepts[ref]
        try:
            return self.concepts.get(slugify(ref))
        except InvalidConceptNameError:
            return None

    def require(self, ref: str) -> Concept:
        concept = self.resolve(ref)
        if concept is None:
            raise UnknownConceptError(f"unknown concept {ref!r}")
        return concept

    def parents_of(self, concept_id: str) -> list[str]:
        return sorted(e.parent for e in self.hierarchy if e.child == concept_id)

    def children_of(self, concept_id: str) -> list[str]:
        return sorted(e.child for e in self.hierarchy if e.parent == concept_id)

    def roots(self) -> list[str]:
        children = {e.child for e in self.hierarchy}
        return sorted(cid for cid in self.concepts if cid not in children)

    def display(self, concept_id: str) -> str:
        concept = self.concepts.get(concept_id)
        return concept.display_name if concept else concept_id

    # -- evolution ---------------------------------------------------------

    def evolve(self, *, concepts=None, hierarchy=None, triples=None,
               bump: bool = True) -> Ontology:
        return replace(
            self,
            concepts=self.concepts if concepts is None else dict(concepts),
            hierarchy=self.hierarchy if hierarchy is None else frozenset(hierarchy),
            triples=self.triples if triples is None else dict(triples),
            version=self.version + 1 if bump else self.version,
        )

    def add_triples(self, new_triples) -> Ontology:
        """Union triples into the ontology, merging annotations on key clashes."""
        merged = dict(self.triples)
        for t in new_triples:
            if t.subject not in self.concepts or t.object not in self.concepts:
                raise UnknownConceptError(
                    f"triple {t.subject!r}->{t.object!r} references unknown concept")
            k = t.key
            merged[k] = merge_triple_pair(merged[k], t) if k in merged else t
        return self.evolve(triples=merged)

    # -- statistics ---------------------------------------------------------

    def stats(self) -> OntologyStats:
        report_cycles = _find_cycles(self.hierarchy)
        if report_cycles:
            raise CyclicHierarchyError(
                "hierarchy contains a cycle: "
                + ", ".join(sorted(report_cycles[0])))
        parents: dict[str, list[str]] = {}
        child_count: dict[str, int] = {}
        for e in self.hierarchy:
            parents.setdefault(e.child, []).append(e.parent)
            child_count[e.parent] = child_count.get(e.parent, 0) + 1
        depth_memo: dict[str, int] = {}

        def depth(cid: str) -> int:
            if cid in depth_memo:
                return depth_memo[cid]
            ps = parents.get(cid)
            d = 0 if not ps else 1 + max(depth(p) for p in ps)
            depth_memo[cid] = d
            return d

        max_depth = max((depth(c) for c in self.concepts), default=0)
        root_count = len(self.roots())
        max_breadth = max([root_count, *child_count.values()]) if self.concepts else 0
        undefined = sum(1 for c in self.concepts.values() if not c.definition)
        return OntologyStats(
            concept_count=len(self.concepts),
            max_depth=max_depth,
            max_breadth=max_breadth,
            undefined_count=undefined,
        )

    # -- canonical serialization --------------------------------------------

    def canonical_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": self.version,
            "concepts": [
                {
                    "id": c.id,
                    "display_name": c.display_name,
                    "definition": c.definition,
                    "properties": [
                        {"name": p.name, "description": p.description}
                        for p in c.properties
                    ],
                }
                for _, c in sorted(self.concepts.items())
            ],
            "hierarchy": [
                {"child": e.child, "parent": e.parent}
                for e in sorted(self.hierarchy, key=lambda e: (e.parent, e.child))
            ],
            "triples": [
                {
                    "subject": t.subject,
                    "predicate": t.predicate,
                    "object": t.object,
                    "provenance": list(t.provenance),
                    "variants": list(t.variants),
                }
                for _, t in sorted(self.triples.items())
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_doc(), sort_keys=True,
                          separators=(",", ":"), ensure_ascii=False)

    def checksum(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class OntologyStats:
    concept_count: int
    max_depth: int
    max_breadth: int
    undefined_count: int


# --- snapshots ----------------------------------------------------------------


def snapshot(ontology: Ontology) -> bytes:
    """Canonical document plus content checksum, as UTF-8 bytes."""
    doc = ontology.canonical_doc()
    doc["checksum"] = ontology.checksum()
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def restore(data: bytes) -> Ontology:
    """Rebuild an ontology from snapshot bytes, verifying the checksum."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptSnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "checksum" not in doc:
        raise CorruptSnapshotError("snapshot lacks a checksum field")
    stated = doc.pop("checksum")
    ontology = ontology_from_doc(doc)
    if ontology.checksum() != stated:
        raise CorruptSnapshotError(
            f"checksum mismatch: stated {stated[:12]}…, computed {ontology.checksum()[:12]}…")
    return ontology


def ontology_from_doc(doc: dict) -> Ontology:
    """Rebuild from a canonical document; loose states are admitted."""
    try:
        concepts = [
            Concept(
                id=c["id"],
                display_name=c["display_name"],
                definition=c.get("definition"),
                properties=tuple(
                    Property(name=p["name"], description=p.get("description"))
                    for p in c.get("properties", ())
                ),
            )
            for c in doc["concepts"]
        ]
        edges = [HierarchyEdge(child=e["child"], parent=e["parent"])
                 for e in doc["hierarchy"]]
        triples = [
            Triple(
                subject=t["subject"],
                predicate=t["predicate"],
                object=t["object"],
                provenance=tuple(t.get("provenance", ())),
                variants=tuple(t.get("variants", ())),
            )
            for t in doc["triples"]
        ]
        version = doc["version"]
    except (KeyError, TypeError) as exc:
        raise CorruptSnapshotError(f"snapshot document malformed: {exc}") from exc
    return Ontology.from_parts(concepts, edges, triples, version=version, check=False)


# --- deltas ---------------------------------------------------------------------


@dataclass(frozen=True)
class OntologyDelta:
    """Exact difference between two ontology versions.

    Beyond the added/removed id sets this carries ``redefined_concepts``
    (ids present on both sides whose payload changed, e.g. a definition was
    filled in) and ``concept_records`` with the full payload of every added
    or redefined concept, so applying a delta is an exact inverse of diffing
    and a definitions-only iteration is never mistaken for an empty one.
    """

    added_concepts: frozenset[str] = frozenset()
    removed_concepts: frozenset[str] = frozenset()
    redefined_concepts: frozenset[str] = frozenset()
    added_edges: frozenset[HierarchyEdge] = frozenset()
    removed_edges: frozenset[HierarchyEdge] = frozenset()
    added_triples: tuple[Triple, ...] = ()
    removed_triples: tuple[Triple, ...] = ()
    concept_records: tuple[Concept, ...] = ()

    def __post_init__(self):
        if self.added_concepts & self.removed_concepts:
            raise ValueError("added and removed concept sets overlap")
        if self.added_edges & self.removed_edges:
            raise ValueError("added and removed edge sets overlap")

    def is_empty(self) -> bool:
        return not (self.added_concepts or self.removed_concepts
                    or self.redefined_concepts
                    or self.added_edges or self.removed_edges
                    or self.added_triples or self.removed_triples)

    def to_doc(self) -> dict:
        return {
            "added_concepts": sorted(self.added_concepts),
            "removed_concepts": sorted(self.removed_concepts),
            "redefined_concepts": sorted(self.redefined_concepts),
            "added_edges": [
                {"child": e.child, "parent": e.parent}
                for e in sorted(self.added_edges, key=lambda e: (e.parent, e.child))
            ],
            "removed_edges": [
                {"child": e.child, "parent": e.parent}
                for e in sorted(self.removed_edges, key=lambda e: (e.parent, e.child))
            ],
            "added_triples": [
                {"subject": t.subject, "predicate": t.predicate, "object": t.object,
                 "provenance": list(t.provenance), "variants": list(t.variants)}
                for t in sorted(self.added_triples, key=lambda t: t.key)
            ],
            "removed_triples": [
                {"subject": t.subject, "predicate": t.predicate, "object": t.object,
                 "provenance": list(t.provenance), "variants": list(t.variants)}
                for t in sorted(self.removed_triples, key=lambda t: t.key)
            ],
            "concept_records": [
                {"id": c.id, "display_name": c.display_name,
                 "definition": c.definition,
                 "properties": [{"name": p.name, "description": p.description}
                                for p in c.properties]}
                for c in sorted(self.concept_records, key=lambda c: c.id)
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> OntologyDelta:
        return cls(
            added_concepts=frozenset(doc.get("added_concepts", ())),
            removed_concepts=frozenset(doc.get("removed_concepts", ())),
            redefined_concepts=frozenset(doc.get("redefined_concepts", ())),
            added_edges=frozenset(
                HierarchyEdge(child=e["child"], parent=e["parent"])
                for e in doc.get("added_edges", ())),
            removed_edges=frozenset(
                HierarchyEdge(child=e["child"], parent=e["parent"])
                for e in doc.get("removed_edges", ())),
            added_triples=tuple(
                Triple(subject=t["subject"], predicate=t["predicate"],
                       object=t["object"], provenance=tuple(t.get("provenance", ())),
                       variants=tuple(t.get("variants", ())))
                for t in doc.get("added_triples", ())),
            removed_triples=tuple(
                Triple(subject=t["subject"], predicate=t["predicate"],
                       object=t["object"], provenance=tuple(t.get("provenance", ())),
                       variants=tuple(t.get("variants", ())))
                for t in doc.get("removed_triples", ())),
            concept_records=tuple(
                Concept(id=c["id"], display_name=c["display_name"],
                        definition=c.get("definition"),
                        properties=tuple(
                            Property(name=p["name"], description=p.get("description"))
                            for p in c.get("properties", ())))
                for c in doc.get("concept_records", ())),
        )


def diff(before: Ontology, after: Ontology) -> OntologyDelta:
    """Exact difference keyed by concept id / edge / triple key."""
    before_ids = set(before.concepts)
    after_ids = set(after.concepts)
    added = frozenset(after_ids - before_ids)
    removed = frozenset(before_ids - after_ids)
    redefined = frozenset(
        cid for cid in before_ids & after_ids
        if before.concepts[cid] != after.concepts[cid])
    added_edges = frozenset(after.hierarchy - before.hierarchy)
    removed_edges = frozenset(before.hierarchy - after.hierarchy)
    added_tk = set(after.triples) - set(before.triples)
    removed_tk = set(before.triples) - set(after.triples)
    changed_tk = {k for k in set(after.triples) & set(before.triples)
                  if after.triples[k] != before.triples[k]}
    return OntologyDelta(
        added_concepts=added,
        removed_concepts=removed,
        redefined_concepts=redefined,
        added_edges=added_edges,
        removed_edges=removed_edges,
        added_triples=tuple(after.triples[k] for k in sorted(added_tk | changed_tk)),
        removed_triples=tuple(before.triples[k] for k in sorted(removed_tk)),
        concept_records=tuple(after.concepts[cid] for cid in sorted(added | redefined)),
    )


def apply_delta(before: Ontology, delta: OntologyDelta) -> Ontology:
    """Apply a delta produced by :func:`diff`; exact inverse of diffing."""
    concepts = {cid: c for cid, c in before.concepts.items()
                if cid not in delta.removed_concepts}
    records = {c.id: c for c in delta.concept_records}
    for cid in sorted(delta.added_concepts | delta.redefined_concepts):
        concepts[cid] = records.get(cid, Concept(id=cid, display_name=cid))
    hierarchy = (before.hierarchy - delta.removed_edges) | delta.added_edges
    triples = {k: t for k, t in before.triples.items()
               if k not in {rt.key for rt in delta.removed_triples}}
    for t in delta.added_triples:
        triples[t.key] = t
    return before.evolve(concepts=concepts, hierarchy=hierarchy, triples=triples)


# --- shared cycle detection -----------------------------------------------------


def _find_cycles(edges: frozenset[HierarchyEdge]) -> list[list[str]]:
    """Strongly connected components of size > 1 over child->parent edges.

    Iterative Tarjan; each returned component is one cycle cluster, sorted.
    """
    graph: dict[str, list[str]] = {}
    nodes: set[str] = set()
    for e in edges:
        graph.setdefault(e.child, []).append(e.parent)
        nodes.add(e.child)
        nodes.add(e.parent)
    index: dict[str, int] = {}
    lowlink: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    sccs: list[list[str]] = []

    for start in sorted(nodes):
        if start in index:
            continue
        work = [(start, iter(graph.get(start, ())))]
        index[start] = lowlink[start] = counter[0]
        counter[0] += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = lowlink[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(graph.get(nxt, ()))))
                    advanced = True
                    break
                if nxt in on_stack:
                    lowlink[node] = min(lowlink[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent_node = work[-1][0]
                lowlink[parent_node] = min(lowlink[parent_node], lowlink[node])
            if lowlink[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1:
                    sccs.append(sorted(component))
    return sorted(sccs)
