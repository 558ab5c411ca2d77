"""Structural validation of an ontology against a named rule policy.

Two policies are defined. ``PERMISSIVE`` checks only referential integrity
(edges and triples must point at existing concepts, names must not collide),
which is the bar for letting a working state exist at all. ``STRICT`` adds
the taxonomy shape rules (single parent, acyclic) that a finished hierarchy
must satisfy before it is safe to build on.

Validation never raises; it reports. Reports are deterministic for a given
ontology: violations sort by rule, then subjects, then detail.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .naming import canonical_name
from .ontology import Ontology, _find_cycles


class Rule(str, Enum):
    MULTI_PARENT = "MultiParent"
    CYCLE = "Cycle"
    DANGLING_EDGE = "DanglingEdge"
    DUPLICATE_NAME = "DuplicateName"
    ORPHAN_CONCEPT = "OrphanConcept"


class Policy(str, Enum):
    PERMISSIVE = "permissive"
    STRICT = "strict"


PERMISSIVE_RULES: frozenset[Rule] = frozenset(
    {Rule.DANGLING_EDGE, Rule.DUPLICATE_NAME, Rule.ORPHAN_CONCEPT})
STRICT_RULES: frozenset[Rule] = PERMISSIVE_RULES | frozenset(
    {Rule.MULTI_PARENT, Rule.CYCLE})

POLICY_RULES: dict[Policy, frozenset[Rule]] = {
    Policy.PERMISSIVE: PERMISSIVE_RULES,
    Policy.STRICT: STRICT_RULES,
}


@dataclass(frozen=True, order=True)
class Violation:
    rule: Rule
    subjects: tuple[str, ...]
    detail: str

    def to_doc(self) -> dict:
        return {"rule": self.rule.value, "subjects": list(self.subjects),
                "detail": self.detail}

    @classmethod
    def from_doc(cls, doc: dict) -> Violation:
        return cls(rule=Rule(doc["rule"]), subjects=tuple(doc["subjects"]),
                   detail=doc["detail"])


@dataclass(frozen=True)
class ValidationReport:
    policy: Policy
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_rule(self, rule: Rule) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.rule == rule)

    def to_doc(self) -> dict:
        return {
            "policy": self.policy.value,
            "ok": self.ok,
            "violations": [v.to_doc() for v in self.violations],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> ValidationReport:
        return cls(
            policy=Policy(doc["policy"]),
            violations=tuple(Violation.from_doc(v) for v in doc["violations"]),
        )


def validate(ontology: Ontology, policy: Policy = Policy.STRICT) -> ValidationReport:
    rules = POLICY_RULES[policy]
    found: list[Violation] = []
    if Rule.DANGLING_EDGE in rules:
        found.extend(_check_dangling_edges(ontology))
    if Rule.DUPLICATE_NAME in rules:
        found.extend(_check_duplicate_names(ontology))
    if Rule.ORPHAN_CONCEPT in rules:
        found.extend(_check_orphan_triples(ontology))
    if Rule.MULTI_PARENT in rules:
        found.extend(_check_multi_parent(ontology))
    if Rule.CYCLE in rules:
        found.extend(_check_cycles(ontology))
    return ValidationReport(policy=policy, violations=tuple(sorted(found)))


def _check_dangling_edges(ontology: Ontology) -> list[Violation]:
    out = []
    for edge in sorted(ontology.hierarchy):
        missing = sorted(end for end in {edge.child, edge.parent}
                         if end not in ontology.concepts)
        if missing:
            out.append(Violation(
                rule=Rule.DANGLING_EDGE,
                subjects=(edge.child, edge.parent),
                detail=(f"edge {edge.child} -> {edge.parent} references"
                        " missing concept: " + ", ".join(missing)),
            ))
    return out


def _check_duplicate_names(ontology: Ontology) -> list[Violation]:
    groups: dict[str, list[str]] = {}
    for cid, concept in ontology.concepts.items():
        groups.setdefault(canonical_name(concept.display_name), []).append(cid)
    out = []
    for canon, ids in sorted(groups.items()):
        if len(ids) > 1:
            names = ", ".join(ontology.display(cid) for cid in sorted(ids))
            out.append(Violation(
                rule=Rule.DUPLICATE_NAME,
                subjects=tuple(sorted(ids)),
                detail=f"concepts share one canonical name ({canon!r}): {names}",
            ))
    return out


def _check_orphan_triples(ontology: Ontology) -> list[Violation]:
    out = []
    for _, triple in sorted(ontology.triples.items()):
        missing = sorted(end for end in {triple.subject, triple.object}
                         if end not in ontology.concepts)
        if missing:
            out.append(Violation(
                rule=Rule.ORPHAN_CONCEPT,
                subjects=tuple(missing),
                detail=(f"triple {triple.subject} -[{triple.predicate}]-> "
                        f"{triple.object} references missing concept: "
                        + ", ".join(missing)),
            ))
    return out


def _check_multi_parent(ontology: Ontology) -> list[Violation]:
    parents: dict[str, list[str]] = {}
    for edge in ontology.hierarchy:
        parents.setdefault(edge.child, []).append(edge.parent)
    out = []
    for child, plist in sorted(parents.items()):
        if len(plist) > 1:
            ordered = sorted(plist)
            parent_names = ", ".join(ontology.display(p) for p in ordered)
            out.append(Violation(
                rule=Rule.MULTI_PARENT,
                subjects=(child, *ordered),
                detail=f"{ontology.display(child)}: {parent_names}",
            ))
    return out


def _check_cycles(ontology: Ontology) -> list[Violation]:
    out = []
    for component in _find_cycles(ontology.hierarchy):
        member_names = ", ".join(ontology.display(m) for m in component)
        out.append(Violation(
            rule=Rule.CYCLE,
            subjects=tuple(component),
            detail=f"subclass cycle through: {member_names}",
        ))
    return out
