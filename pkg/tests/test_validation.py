"""Validation rules and policies."""

from __future__ import annotations

from hypothesis import given, settings

from ontodistill.ontology import Concept, HierarchyEdge, Ontology, Triple
from ontodistill.validation import (
    PERMISSIVE_RULES,
    STRICT_RULES,
    Policy,
    Rule,
    ValidationReport,
    validate,
)

from strategies import ontologies, seed_ontology


def _loose(concepts=(), edges=(), triples=()):
    return Ontology.from_parts(
        [Concept(id=c, display_name=c.title()) for c in concepts],
        [HierarchyEdge(child=c, parent=p) for c, p in edges],
        triples,
        check=False,
    )


def test_policies_are_nested():
    assert PERMISSIVE_RULES < STRICT_RULES
    assert Rule.MULTI_PARENT not in PERMISSIVE_RULES
    assert Rule.CYCLE not in PERMISSIVE_RULES


def test_seed_ontology_is_clean_under_strict():
    report = validate(seed_ontology(), Policy.STRICT)
    assert report.ok
    assert report.violations == ()


def test_dual_parent_yields_exactly_one_multi_parent_violation():
    onto = Ontology.from_names(
        ["Car", "Vehicle", "Electric"],
        edges=[("Vehicle", "Car"), ("Electric", "Car")])
    report = validate(onto, Policy.STRICT)
    multi = report.by_rule(Rule.MULTI_PARENT)
    assert len(multi) == 1
    assert len(report.violations) == 1
    violation = multi[0]
    assert violation.subjects[0] == "car"
    assert set(violation.subjects[1:]) == {"vehicle", "electric"}
    assert violation.detail == "Car: Electric, Vehicle"


def test_two_cycle_yields_exactly_one_cycle_violation_listing_both():
    onto = Ontology.from_names(
        ["Pedestrian", "CrosswalkUser"],
        edges=[("CrosswalkUser", "Pedestrian"), ("Pedestrian", "CrosswalkUser")])
    report = validate(onto, Policy.STRICT)
    cycles = report.by_rule(Rule.CYCLE)
    assert len(cycles) == 1
    assert len(report.violations) == 1
    assert set(cycles[0].subjects) == {"pedestrian", "crosswalk-user"}
    assert "CrosswalkUser" in cycles[0].detail
    assert "Pedestrian" in cycles[0].detail


def test_cycle_is_invisible_to_permissive_policy():
    onto = Ontology.from_names(
        ["Pedestrian", "CrosswalkUser"],
        edges=[("CrosswalkUser", "Pedestrian"), ("Pedestrian", "CrosswalkUser")])
    assert validate(onto, Policy.PERMISSIVE).ok


def test_longer_cycle_is_one_violation():
    onto = Ontology.from_names(
        ["A", "B", "C"], edges=[("A", "B"), ("B", "C"), ("C", "A")])
    report = validate(onto, Policy.STRICT)
    cycles = report.by_rule(Rule.CYCLE)
    assert len(cycles) == 1
    assert set(cycles[0].subjects) == {"a", "b", "c"}


def test_two_disjoint_cycles_are_two_violations():
    onto = Ontology.from_names(
        ["A", "B", "C", "D"],
        edges=[("A", "B"), ("B", "A"), ("C", "D"), ("D", "C")])
    report = validate(onto, Policy.STRICT)
    assert len(report.by_rule(Rule.CYCLE)) == 2


def test_dangling_edge_is_reported_under_both_policies():
    onto = _loose(concepts=["car"], edges=[("car", "vehicle")])
    for policy in (Policy.PERMISSIVE, Policy.STRICT):
        report = validate(onto, policy)
        dangling = report.by_rule(Rule.DANGLING_EDGE)
        assert len(dangling) == 1
        assert "vehicle" in dangling[0].detail


def test_orphan_triple_endpoint_is_reported():
    onto = _loose(
        concepts=["car"],
        triples=[Triple(subject="car", predicate="Passes", object="truck")])
    report = validate(onto, Policy.PERMISSIVE)
    orphans = report.by_rule(Rule.ORPHAN_CONCEPT)
    assert len(orphans) == 1
    assert orphans[0].subjects == ("truck",)


def test_duplicate_canonical_names_are_reported():
    onto = _loose(concepts=[])
    concepts = {
        "crosswalk-user": Concept(id="crosswalk-user", display_name="Crosswalk User"),
        "crosswalkuser": Concept(id="crosswalkuser", display_name="CrosswalkUser"),
    }
    onto = onto.evolve(concepts=concepts)
    report = validate(onto, Policy.PERMISSIVE)
    dupes = report.by_rule(Rule.DUPLICATE_NAME)
    assert len(dupes) == 1
    assert set(dupes[0].subjects) == {"crosswalk-user", "crosswalkuser"}


def test_report_document_round_trip():
    onto = Ontology.from_names(
        ["Car", "Vehicle", "Electric"],
        edges=[("Vehicle", "Car"), ("Electric", "Car")])
    report = validate(onto, Policy.STRICT)
    assert ValidationReport.from_doc(report.to_doc()) == report
    assert report.to_doc()["ok"] is False


@settings(max_examples=80)
@given(ontologies())
def test_strict_findings_contain_permissive_findings(onto):
    permissive = set(validate(onto, Policy.PERMISSIVE).violations)
    strict = set(validate(onto, Policy.STRICT).violations)
    assert permissive <= strict


@settings(max_examples=80)
@given(ontologies())
def test_validation_is_deterministic(onto):
    first = validate(onto, Policy.STRICT)
    second = validate(onto, Policy.STRICT)
    assert first == second
    assert list(first.violations) == sorted(first.violations)
