"""Human edits applied to an ontology during review.

Each edit is a small declarative record with a JSON wire form, so review
decisions can be scripted, stored and replayed. ``apply_edit`` enforces one
guardrail: an edit may repair existing damage but must not introduce strict
violations that were not already present.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    DuplicateConceptError,
    EditRejectedError,
    MergeSelfError,
    UnknownConceptError,
)
from .naming import display_form, slugify
from .ontology import Concept, HierarchyEdge, Ontology, Triple, make_concept, merge_triple_pair
from .validation import Policy, validate


@dataclass(frozen=True)
class AddConcept:
    op = "add_concept"
    name: str
    parent: str | None = None
    definition: str | None = None


@dataclass(frozen=True)
class RemoveConcept:
    """Remove a concept and every edge/triple touching it.

    By default a child left with no parent is re-homed to the removed
    concept's own parents, so pruning one node never silently detaches a
    subtree. With ``cascade`` the whole descendant subtree goes too.
    """

    op = "remove_concept"
    ref: str
    cascade: bool = False


@dataclass(frozen=True)
class Reparent:
    """Replace all parents of ``ref`` with ``new_parent`` (None makes it a root)."""

    op = "reparent"
    ref: str
    new_parent: str | None


@dataclass(frozen=True)
class RenameConcept:
    op = "rename_concept"
    ref: str
    new_name: str


@dataclass(frozen=True)
class MergeConcepts:
    """Fold ``merge`` into ``keep``, rewriting edges and triples."""

    op = "merge_concepts"
    keep: str
    merge: str


Edit = AddConcept | RemoveConcept | Reparent | RenameConcept | MergeConcepts

_EDIT_TYPES: dict[str, type] = {
    cls.op: cls
    for cls in (AddConcept, RemoveConcept, Reparent, RenameConcept, MergeConcepts)
}


def edit_to_doc(edit: Edit) -> dict:
    if isinstance(edit, AddConcept):
        return {"op": edit.op, "name": edit.name, "parent": edit.parent,
                "definition": edit.definition}
    if isinstance(edit, RemoveConcept):
        return {"op": edit.op, "ref": edit.ref, "cascade": edit.cascade}
    if isinstance(edit, Reparent):
        return {"op": edit.op, "ref": edit.ref, "new_parent": edit.new_parent}
    if isinstance(edit, RenameConcept):
        return {"op": edit.op, "ref": edit.ref, "new_name": edit.new_name}
    if isinstance(edit, MergeConcepts):
        return {"op": edit.op, "keep": edit.keep, "merge": edit.merge}
    raise TypeError(f"not an edit: {edit!r}")


def edit_from_doc(doc: dict) -> Edit:
    op = doc.get("op")
    cls = _EDIT_TYPES.get(op)
    if cls is None:
        raise ValueError(f"unknown edit op {op!r}")
    if cls is AddConcept:
        return AddConcept(name=doc["name"], parent=doc.get("parent"),
                          definition=doc.get("definition"))
    if cls is RemoveConcept:
        return RemoveConcept(ref=doc["ref"], cascade=bool(doc.get("cascade", False)))
    if cls is Reparent:
        return Reparent(ref=doc["ref"], new_parent=doc.get("new_parent"))
    if cls is RenameConcept:
        return RenameConcept(ref=doc["ref"], new_name=doc["new_name"])
    return MergeConcepts(keep=doc["keep"], merge=doc["merge"])


def apply_edit(ontology: Ontology, edit: Edit) -> Ontology:
    """Apply one edit; reject it if it introduces new strict violations."""
    before = validate(ontology, Policy.STRICT)
    after_state = _apply(ontology, edit)
    after = validate(after_state, Policy.STRICT)
    introduced = set(after.violations) - set(before.violations)
    if introduced:
        lines = "; ".join(f"{v.rule.value}: {v.detail}" for v in sorted(introduced))
        raise EditRejectedError(
            f"edit would introduce strict violations: {lines}",
            detail={"violations": [v.to_doc() for v in sorted(introduced)]},
        )
    return after_state


def apply_edits(ontology: Ontology, edits) -> Ontology:
    for edit in edits:
        ontology = apply_edit(ontology, edit)
    return ontology


def _apply(ontology: Ontology, edit: Edit) -> Ontology:
    if isinstance(edit, AddConcept):
        return _add_concept(ontology, edit)
    if isinstance(edit, RemoveConcept):
        return _remove_concept(ontology, edit)
    if isinstance(edit, Reparent):
        return _reparent(ontology, edit)
    if isinstance(edit, RenameConcept):
        return _rename(ontology, edit)
    if isinstance(edit, MergeConcepts):
        return _merge(ontology, edit)
    raise TypeError(f"not an edit: {edit!r}")


def _add_concept(ontology: Ontology, edit: AddConcept) -> Ontology:
    concept = make_concept(edit.name, definition=edit.definition)
    if concept.id in ontology.concepts:
        raise DuplicateConceptError(f"concept {concept.display_name!r} already exists")
    concepts = dict(ontology.concepts)
    concepts[concept.id] = concept
    hierarchy = set(ontology.hierarchy)
    if edit.parent is not None:
        parent = ontology.require(edit.parent)
        hierarchy.add(HierarchyEdge(child=concept.id, parent=parent.id))
    return ontology.evolve(concepts=concepts, hierarchy=hierarchy)


def _remove_concept(ontology: Ontology, edit: RemoveConcept) -> Ontology:
    target = ontology.require(edit.ref)
    doomed = {target.id}
    if edit.cascade:
        frontier = [target.id]
        while frontier:
            node = frontier.pop()
            for child in ontology.children_of(node):
                if child not in doomed:
                    doomed.add(child)
                    frontier.append(child)
    concepts = {cid: c for cid, c in ontology.concepts.items() if cid not in doomed}
    hierarchy = {e for e in ontology.hierarchy
                 if e.child not in doomed and e.parent not in doomed}
    if not edit.cascade:
        grandparents = ontology.parents_of(target.id)
        survivors_with_parents = {e.child for e in hierarchy}
        for child in ontology.children_of(target.id):
            if child in doomed or child in survivors_with_parents:
                continue
            for grandparent in grandparents:
                hierarchy.add(HierarchyEdge(child=child, parent=grandparent))
    triples = {k: t for k, t in ontology.triples.items()
               if t.subject not in doomed and t.object not in doomed}
    return ontology.evolve(concepts=concepts, hierarchy=hierarchy, triples=triples)


def _reparent(ontology: Ontology, edit: Reparent) -> Ontology:
    target = ontology.require(edit.ref)
    hierarchy = {e for e in ontology.hierarchy if e.child != target.id}
    if edit.new_parent is not None:
        parent = ontology.require(edit.new_parent)
        hierarchy.add(HierarchyEdge(child=target.id, parent=parent.id))
    return ontology.evolve(hierarchy=hierarchy)


def _rename(ontology: Ontology, edit: RenameConcept) -> Ontology:
    target = ontology.require(edit.ref)
    new_name = display_form(edit.new_name)
    new_id = slugify(new_name)
    if new_id != target.id and new_id in ontology.concepts:
        raise DuplicateConceptError(
            f"cannot rename to {new_name!r}: another concept owns that name"
            " (merge instead)")
    renamed = Concept(id=new_id, display_name=new_name,
                      definition=target.definition, properties=target.properties)
    concepts = {cid: c for cid, c in ontology.concepts.items() if cid != target.id}
    concepts[new_id] = renamed
    hierarchy = {_rewrite_edge(e, target.id, new_id) for e in ontology.hierarchy}
    triples = _rewrite_triples(ontology, target.id, new_id)
    return ontology.evolve(concepts=concepts, hierarchy=hierarchy, triples=triples)


def _merge(ontology: Ontology, edit: MergeConcepts) -> Ontology:
    keep = ontology.require(edit.keep)
    merge = ontology.require(edit.merge)
    if keep.id == merge.id:
        raise MergeSelfError(f"cannot merge {keep.display_name!r} into itself")
    kept = keep
    if not kept.definition and merge.definition:
        kept = Concept(id=keep.id, display_name=keep.display_name,
                       definition=merge.definition, properties=keep.properties)
    concepts = {cid: c for cid, c in ontology.concepts.items() if cid != merge.id}
    concepts[kept.id] = kept
    hierarchy = {_rewrite_edge(e, merge.id, kept.id) for e in ontology.hierarchy}
    hierarchy = {e for e in hierarchy if e.child != e.parent}
    triples = _rewrite_triples(ontology, merge.id, kept.id)
    return ontology.evolve(concepts=concepts, hierarchy=hierarchy, triples=triples)


def _rewrite_edge(edge: HierarchyEdge, old: str, new: str) -> HierarchyEdge:
    return HierarchyEdge(
        child=new if edge.child == old else edge.child,
        parent=new if edge.parent == old else edge.parent,
    )


def _rewrite_triples(ontology: Ontology, old: str, new: str):
    out: dict = {}
    for t in ontology.triples.values():
        moved = Triple(
            subject=new if t.subject == old else t.subject,
            predicate=t.predicate,
            object=new if t.object == old else t.object,
            provenance=t.provenance,
            variants=t.variants,
        )
        k = moved.key
        out[k] = merge_triple_pair(out[k], moved) if k in out else moved
    return out
