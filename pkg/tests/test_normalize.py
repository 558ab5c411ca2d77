"""Predicate normalization: synonyms, voice, groups, filtering, unions."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontodistill.errors import OverlappingGroupsError, RulesFormatError
from ontodistill.normalize import (
    NormalizationRules,
    PassivePair,
    PredicateGroup,
    SynonymSet,
    apply_groups,
    default_rules,
    filter_blocklist,
    fold_active_passive,
    load_rules,
    merge_synonyms,
    missing_on_superclass,
    normalize,
    rules_from_doc,
    union_runs,
)
from ontodistill.ontology import Triple


def triple(subject: str, predicate: str, obj: str, **kwargs) -> Triple:
    return Triple(subject=subject, predicate=predicate, object=obj, **kwargs)


class TestRulesLoading:
    def test_shipped_rules_cover_the_known_cleanup_cases(self):
        rules = default_rules()
        assert any(s.canonical == "Races" for s in rules.synonym_sets)
        assert any(p.active == "Passes" and p.passive == "Gets passed by"
                   for p in rules.passive_pairs)
        group_names = {g.group_name for g in rules.groups}
        assert "Parks relative to" in group_names
        assert "Turns in front of" in group_names
        assert "Shares the road with" in rules.blocklist
        assert rules.case_insensitive

    def test_round_trip_through_doc(self):
        rules = default_rules()
        assert rules_from_doc(rules.to_doc()) == rules

    def test_unknown_section_fails_loudly(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"synonyms": []})

    def test_entry_with_unknown_key_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"synonym_sets": [
                {"canonical": "Races", "variants": [], "note": "?"}]})

    def test_entry_missing_key_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"passive_pairs": [{"active": "Passes"}]})

    def test_non_string_member_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"blocklist": [42]})

    def test_canonical_inside_its_own_variants_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"synonym_sets": [
                {"canonical": "Races", "variants": ["races"]}]})

    def test_predicate_in_two_synonym_sets_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"synonym_sets": [
                {"canonical": "Races", "variants": ["Races with"]},
                {"canonical": "Competes", "variants": ["races with"]}]})

    def test_self_mapping_passive_pair_fails(self):
        with pytest.raises(RulesFormatError):
            rules_from_doc({"passive_pairs": [
                {"active": "Follows", "passive": "follows"}]})

    def test_member_in_two_groups_is_overlap(self):
        with pytest.raises(OverlappingGroupsError):
            rules_from_doc({"groups": [
                {"group_name": "A", "members": ["Parks behind"]},
                {"group_name": "B", "members": ["parks behind"]}]})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(RulesFormatError):
            load_rules(path)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(json.dumps(default_rules().to_doc()), encoding="utf-8")
        assert load_rules(path) == default_rules()


class TestMergeSynonyms:
    def test_race_spellings_collapse_to_one_triple(self):
        triples = {triple("car", "Races", "car"),
                   triple("car", "Races with", "car"),
                   triple("car", "Races against", "car")}
        merged = merge_synonyms(triples, default_rules())
        assert len(merged) == 1
        survivor = next(iter(merged))
        assert survivor.predicate == "Races"
        assert set(survivor.variants) == {"Races with", "Races against"}

    def test_empty_rules_are_identity(self):
        triples = {triple("car", "Races with", "truck")}
        assert merge_synonyms(triples, NormalizationRules()) == triples

    def test_case_variant_merges_when_case_insensitive(self):
        triples = {triple("car", "RACES WITH", "truck")}
        merged = merge_synonyms(triples, default_rules())
        assert next(iter(merged)).predicate == "Races"

    def test_case_sensitive_rules_leave_other_casing_alone(self):
        rules = NormalizationRules(
            synonym_sets=(SynonymSet("Races", ("Races with",)),),
            case_insensitive=False)
        triples = {triple("car", "races with", "truck")}
        assert merge_synonyms(triples, rules) == triples

    def test_unrelated_predicate_unchanged(self):
        triples = {triple("car", "Drives on", "road")}
        assert merge_synonyms(triples, default_rules()) == triples


class TestFoldActivePassive:
    def test_gets_passed_by_becomes_passes_with_swapped_ends(self):
        folded = fold_active_passive(
            {triple("car", "Gets passed by", "truck")}, default_rules())
        assert folded == {Triple(subject="truck", predicate="Passes", object="car",
                                 variants=("Gets passed by",))}

    def test_active_triple_unchanged(self):
        triples = {triple("truck", "Passes", "car")}
        assert fold_active_passive(triples, default_rules()) == triples

    def test_active_and_passive_statements_of_one_fact_collapse(self):
        folded = fold_active_passive(
            {triple("car", "Passes", "truck", provenance=("run-1",)),
             triple("truck", "Gets passed by", "car", provenance=("run-2",))},
            default_rules())
        assert len(folded) == 1
        survivor = next(iter(folded))
        assert (survivor.subject, survivor.predicate, survivor.object) == (
            "car", "Passes", "truck")
        assert set(survivor.provenance) == {"run-1", "run-2"}


class TestApplyGroups:
    def test_parking_spellings_group_with_three_variants(self):
        triples = {triple("car", "Parks behind", "truck"),
                   triple("car", "Parks in front of", "truck"),
                   triple("car", "Parks next to", "truck")}
        grouped = apply_groups(triples, default_rules())
        assert len(grouped) == 1
        survivor = next(iter(grouped))
        assert survivor.predicate == "Parks relative to"
        assert set(survivor.variants) == {
            "Parks behind", "Parks in front of", "Parks next to"}

    def test_turning_group_keeps_two_variants(self):
        triples = {triple("car", "Turn left in front of", "bus"),
                   triple("car", "Turn right in front of", "bus")}
        grouped = apply_groups(triples, default_rules())
        survivor = next(iter(grouped))
        assert survivor.predicate == "Turns in front of"
        assert set(survivor.variants) == {
            "Turn left in front of", "Turn right in front of"}

    def test_ungrouped_predicate_unchanged(self):
        triples = {triple("car", "Follows", "bus")}
        assert apply_groups(triples, default_rules()) == triples

    def test_overlapping_groups_refused_at_apply_time(self):
        rules = NormalizationRules(groups=(
            PredicateGroup("A", ("Parks behind",)),
            PredicateGroup("B", ("parks behind",))))
        with pytest.raises(OverlappingGroupsError):
            apply_groups({triple("car", "Parks behind", "truck")}, rules)


class TestFilterBlocklist:
    def test_shares_the_road_is_dropped(self):
        triples = {triple("vehicle", "Shares the road with", "vehicle"),
                   triple("vehicle", "Drives on", "road")}
        assert filter_blocklist(triples, default_rules()) == {
            triple("vehicle", "Drives on", "road")}

    def test_empty_blocklist_is_identity(self):
        triples = {triple("vehicle", "Shares the road with", "vehicle")}
        assert filter_blocklist(triples, NormalizationRules()) == triples

    def test_unmatched_blocklist_entry_changes_nothing(self):
        triples = {triple("car", "Follows", "bus")}
        assert filter_blocklist(triples, default_rules()) == triples


class TestUnionRuns:
    def test_five_agreeing_runs_fold_to_one_triple_with_full_provenance(self):
        runs = [{triple("vehicle", "Drives on", "road",
                        provenance=(f"run-{i}",))} for i in range(1, 6)]
        union = union_runs(runs)
        assert len(union) == 1
        assert set(next(iter(union)).provenance) == {
            "run-1", "run-2", "run-3", "run-4", "run-5"}

    def test_disjoint_runs_concatenate(self):
        a = {triple("car", "Follows", "bus")}
        b = {triple("bus", "Stops at", "stop")}
        assert union_runs([a, b]) == a | b

    def test_union_ignores_run_order(self):
        a = {triple("car", "Follows", "bus", provenance=("run-1",))}
        b = {triple("car", "follows", "bus", provenance=("run-2",))}
        c = {triple("bus", "Stops at", "stop", provenance=("run-3",))}
        assert union_runs([a, b, c]) == union_runs([c, b, a])


class TestPipeline:
    def test_full_pipeline_applies_every_stage(self):
        triples = {
            triple("car", "Races with", "car"),
            triple("car", "Gets passed by", "truck"),
            triple("car", "Parks behind", "truck"),
            triple("vehicle", "Shares the road with", "vehicle"),
        }
        result = normalize(triples, default_rules())
        facts = {(t.subject, t.predicate, t.object) for t in result}
        assert facts == {("car", "Races", "car"),
                         ("truck", "Passes", "car"),
                         ("car", "Parks relative to", "truck")}

    def test_superclass_gap_report(self):
        sub = {triple("car", "Follows", "bus"), triple("car", "Passes", "bus")}
        sup = {triple("vehicle", "Follows", "vehicle"),
               triple("car", "passes", "bus")}
        assert missing_on_superclass(sub, sup) == {triple("car", "Follows", "bus")}


_PREDICATES = st.sampled_from([
    "Races", "Races with", "Races against", "Passes", "Gets passed by",
    "Parks behind", "Parks in front of", "Parks next to",
    "Turn left in front of", "Turn right in front of",
    "Shares the road with", "Follows", "Drives on",
])
_NODES = st.sampled_from(["car", "truck", "bus", "road", "vehicle"])
_TRIPLES = st.sets(
    st.builds(triple, _NODES, _PREDICATES, _NODES), max_size=12)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(_TRIPLES)
    def test_each_stage_is_idempotent(self, triples):
        rules = default_rules()
        for stage in (merge_synonyms, fold_active_passive, apply_groups,
                      filter_blocklist, normalize):
            once = stage(triples, rules)
            assert stage(once, rules) == once

    @settings(max_examples=60, deadline=None)
    @given(_TRIPLES)
    def test_no_stage_invents_a_predicate(self, triples):
        rules = default_rules()
        allowed = ({t.predicate for t in triples}
                   | {s.canonical for s in rules.synonym_sets}
                   | {p.active for p in rules.passive_pairs}
                   | {g.group_name for g in rules.groups})
        result = normalize(triples, rules)
        assert {t.predicate for t in result} <= allowed

    @settings(max_examples=40, deadline=None)
    @given(st.lists(_TRIPLES, min_size=1, max_size=4), st.randoms())
    def test_union_runs_is_permutation_invariant(self, runs, rng):
        tagged = [{Triple(subject=t.subject, predicate=t.predicate,
                          object=t.object, provenance=(f"run-{i}",))
                   for t in run} for i, run in enumerate(runs)]
        shuffled = list(tagged)
        rng.shuffle(shuffled)
        assert union_runs(shuffled) == union_runs(tagged)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(_TRIPLES, min_size=2, max_size=3))
    def test_union_runs_is_associative(self, runs):
        folded_left = union_runs([union_runs(runs[:1]), *map(set, runs[1:])])
        assert folded_left == union_runs(runs)

    @settings(max_examples=60, deadline=None)
    @given(_TRIPLES)
    def test_pipeline_is_deterministic(self, triples):
        rules = default_rules()
        assert normalize(set(triples), rules) == normalize(set(triples), rules)
