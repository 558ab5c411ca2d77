"""Post-processing for distilled relationship triples.

Model answers spread one relationship over many spellings: synonyms
("Races" / "Races with"), voice ("Passes" / "Gets passed by"), narrow
variants of one idea ("Parks behind" / "Parks next to"), plus filler
predicates worth dropping outright. The rules live in a data file, not in
code; these functions apply them mechanically and in a fixed order.

Every operation is pure, idempotent, and never invents a predicate that is
not a canonical, a group name, or already present in the input.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import OverlappingGroupsError, RulesFormatError
from .naming import predicate_key
from .ontology import Triple, _key_triples

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynonymSet:
    canonical: str
    variants: tuple[str, ...]


@dataclass(frozen=True)
class PassivePair:
    active: str
    passive: str


@dataclass(frozen=True)
class PredicateGroup:
    group_name: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class NormalizationRules:
    synonym_sets: tuple[SynonymSet, ...] = ()
    passive_pairs: tuple[PassivePair, ...] = ()
    groups: tuple[PredicateGroup, ...] = ()
    blocklist: tuple[str, ...] = ()
    case_insensitive: bool = True

    def to_doc(self) -> dict:
        return {
            "synonym_sets": [{"canonical": s.canonical, "variants": list(s.variants)}
                             for s in self.synonym_sets],
            "passive_pairs": [{"active": p.active, "passive": p.passive}
                              for p in self.passive_pairs],
            "groups": [{"group_name": g.group_name, "members": list(g.members)}
                       for g in self.groups],
            "blocklist": list(self.blocklist),
            "case_insensitive": self.case_insensitive,
        }


_TOP_KEYS = {"synonym_sets", "passive_pairs", "groups", "blocklist",
             "case_insensitive"}


def _require_str(value, where: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise RulesFormatError(f"{where} must be a non-empty string, got {value!r}")
    return value


def _require_entry(doc, where: str, keys: set[str]) -> dict:
    if not isinstance(doc, dict):
        raise RulesFormatError(f"{where} must be an object, got {type(doc).__name__}")
    unknown = set(doc) - keys
    if unknown:
        raise RulesFormatError(f"{where} has unknown keys: {sorted(unknown)}")
    missing = keys - set(doc)
    if missing:
        raise RulesFormatError(f"{where} is missing keys: {sorted(missing)}")
    return doc


def rules_from_doc(doc: dict) -> NormalizationRules:
    """Parse a rules document, failing loudly on anything unrecognized."""
    if not isinstance(doc, dict):
        raise RulesFormatError("rules document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise RulesFormatError(f"unknown rule sections: {sorted(unknown)}")

    synonym_sets = []
    for i, raw in enumerate(doc.get("synonym_sets", [])):
        entry = _require_entry(raw, f"synonym_sets[{i}]", {"canonical", "variants"})
        canonical = _require_str(entry["canonical"], f"synonym_sets[{i}].canonical")
        variants = tuple(_require_str(v, f"synonym_sets[{i}].variants")
                         for v in entry["variants"])
        synonym_sets.append(SynonymSet(canonical=canonical, variants=variants))

    passive_pairs = []
    for i, raw in enumerate(doc.get("passive_pairs", [])):
        entry = _require_entry(raw, f"passive_pairs[{i}]", {"active", "passive"})
        passive_pairs.append(PassivePair(
            active=_require_str(entry["active"], f"passive_pairs[{i}].active"),
            passive=_require_str(entry["passive"], f"passive_pairs[{i}].passive")))

    groups = []
    for i, raw in enumerate(doc.get("groups", [])):
        entry = _require_entry(raw, f"groups[{i}]", {"group_name", "members"})
        members = tuple(_require_str(m, f"groups[{i}].members")
                        for m in entry["members"])
        groups.append(PredicateGroup(
            group_name=_require_str(entry["group_name"], f"groups[{i}].group_name"),
            members=members))

    blocklist_raw = doc.get("blocklist", [])
    if not isinstance(blocklist_raw, list):
        raise RulesFormatError("blocklist must be a list")
    blocklist = tuple(_require_str(b, "blocklist entry") for b in blocklist_raw)

    case_insensitive = doc.get("case_insensitive", True)
    if not isinstance(case_insensitive, bool):
        raise RulesFormatError("case_insensitive must be a boolean")

    rules = NormalizationRules(
        synonym_sets=tuple(synonym_sets), passive_pairs=tuple(passive_pairs),
        groups=tuple(groups), blocklist=blocklist,
        case_insensitive=case_insensitive)
    _check_rules(rules)
    return rules


def _check_rules(rules: NormalizationRules) -> None:
    key = _matcher(rules)
    seen: dict[str, str] = {}
    for s in rules.synonym_sets:
        if key(s.canonical) in {key(v) for v in s.variants}:
            raise RulesFormatError(
                f"canonical {s.canonical!r} listed among its own variants")
        for name in (s.canonical, *s.variants):
            k = key(name)
            if k in seen and seen[k] != s.canonical:
                raise RulesFormatError(
                    f"predicate {name!r} appears in more than one synonym set")
            seen[k] = s.canonical
    for p in rules.passive_pairs:
        if key(p.active) == key(p.passive):
            raise RulesFormatError(
                f"passive pair {p.active!r} maps a predicate to itself")
    member_owner: dict[str, str] = {}
    for g in rules.groups:
        for member in g.members:
            k = key(member)
            if k in member_owner and member_owner[k] != g.group_name:
                raise OverlappingGroupsError(
                    f"predicate {member!r} belongs to groups"
                    f" {member_owner[k]!r} and {g.group_name!r}")
            member_owner[k] = g.group_name


def load_rules(path: Path) -> NormalizationRules:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RulesFormatError(f"rules file is not valid JSON: {exc}") from exc
    return rules_from_doc(doc)


def default_rules() -> NormalizationRules:
    """The rules shipped with the package; canonicals are editorial choices
    (shortest spelling of each set)."""
    text = (resources.files("ontodistill.data") / "default_rules.json").read_text(
        encoding="utf-8")
    return rules_from_doc(json.loads(text))


def _matcher(rules: NormalizationRules):
    if rules.case_insensitive:
        return predicate_key
    return lambda predicate: " ".join(predicate.split())


def _variants_plus_old_spelling(old: Triple, new_predicate: str) -> tuple[str, ...]:
    if old.predicate == new_predicate or old.predicate in old.variants:
        return old.variants
    return tuple(sorted({*old.variants, old.predicate}))


def merge_synonyms(triples: set[Triple],
                   rules: NormalizationRules) -> set[Triple]:
    key = _matcher(rules)
    target: dict[str, str] = {}
    for s in rules.synonym_sets:
        target[key(s.canonical)] = s.canonical
        for v in s.variants:
            target[key(v)] = s.canonical
    out = []
    for t in triples:
        canonical = target.get(key(t.predicate))
        if canonical is None or t.predicate == canonical:
            out.append(t)
            continue
        logger.debug("synonym: %r -> %r on (%s, %s)", t.predicate, canonical,
                     t.subject, t.object)
        out.append(Triple(subject=t.subject, predicate=canonical, object=t.object,
                          provenance=t.provenance,
                          variants=_variants_plus_old_spelling(t, canonical)))
    return set(_key_triples(out).values())


def fold_active_passive(triples: set[Triple],
                        rules: NormalizationRules) -> set[Triple]:
    key = _matcher(rules)
    active_for = {key(p.passive): p.active for p in rules.passive_pairs}
    out = []
    for t in triples:
        active = active_for.get(key(t.predicate))
        if active is None:
            out.append(t)
            continue
        logger.debug("voice fold: (%s, %r, %s) -> (%s, %r, %s)", t.subject,
                     t.predicate, t.object, t.object, active, t.subject)
        out.append(Triple(subject=t.object, predicate=active, object=t.subject,
                          provenance=t.provenance,
                          variants=_variants_plus_old_spelling(t, active)))
    return set(_key_triples(out).values())


def apply_groups(triples: set[Triple],
                 rules: NormalizationRules) -> set[Triple]:
    key = _matcher(rules)
    group_for: dict[str, str] = {}
    for g in rules.groups:
        for member in g.members:
            k = key(member)
            if k in group_for and group_for[k] != g.group_name:
                raise OverlappingGroupsError(
                    f"predicate {member!r} belongs to groups"
                    f" {group_for[k]!r} and {g.group_name!r}")
            group_for[k] = g.group_name
    out = []
    for t in triples:
        group_name = group_for.get(key(t.predicate))
        if group_name is None or t.predicate == group_name:
            out.append(t)
            continue
        out.append(Triple(subject=t.subject, predicate=group_name, object=t.object,
                          provenance=t.provenance,
                          variants=_variants_plus_old_spelling(t, group_name)))
    return set(_key_triples(out).values())


def filter_blocklist(triples: set[Triple],
                     rules: NormalizationRules) -> set[Triple]:
    key = _matcher(rules)
    blocked = {key(b) for b in rules.blocklist}
    kept = set()
    for t in triples:
        if key(t.predicate) in blocked:
            logger.info("filtered (%s, %r, %s)", t.subject, t.predicate, t.object)
        else:
            kept.add(t)
    return kept


def normalize(triples: set[Triple], rules: NormalizationRules) -> set[Triple]:
    """The full pipeline in its fixed order."""
    step = merge_synonyms(triples, rules)
    step = fold_active_passive(step, rules)
    step = apply_groups(step, rules)
    return filter_blocklist(step, rules)


def union_runs(runs: list[set[Triple]]) -> set[Triple]:
    """Union of independent runs; triples agreeing on (subject, predicate,
    object) under predicate normalization merge with annotation union."""
    merged: list[Triple] = []
    for run in runs:
        merged.extend(run)
    return set(_key_triples(merged).values())


def missing_on_superclass(subclass_triples: set[Triple],
                          superclass_triples: set[Triple]) -> set[Triple]:
    """Report triples a subclass pair produced that the superclass pair did
    not. Inheritance is deliberately not applied automatically; this exists
    so a reviewer can decide."""
    present = {t.key for t in superclass_triples}
    return {t for t in subclass_triples if t.key not in present}
