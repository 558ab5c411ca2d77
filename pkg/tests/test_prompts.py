"""Prompt composition: three parts, placeholders, batching, length warning."""

from __future__ import annotations

import pytest

from ontodistill.dotcodec import EdgeDirection, to_dot
from ontodistill.errors import (
    BatchTooLargeError,
    ConstraintOverflowError,
    EmptyBatchError,
    UnknownConceptError,
    UnresolvedPlaceholderError,
)
from ontodistill.ontology import Ontology
from ontodistill.prompts import (
    PromptEngine,
    PromptTemplate,
    TaskKind,
    check_length,
    default_templates,
    validate_template,
)

from strategies import seed_ontology


def _engine(**overrides) -> PromptEngine:
    return PromptEngine(templates=default_templates(), **overrides)


# --- hierarchy -------------------------------------------------------------------


def test_hierarchy_prompt_embeds_dot_and_count():
    onto = seed_ontology()
    prompt = _engine().render_hierarchy_prompt(onto, batch_size=10)
    assert to_dot(onto) in prompt.text
    assert "Add 10 new relevant concepts" in prompt.text
    assert "exactly one parent" in prompt.text
    assert "acyclic" in prompt.text
    assert "parent -> child" in prompt.text
    assert "Output the new ontology in DOT format." in prompt.text
    assert prompt.task is TaskKind.HIERARCHY
    assert prompt.placeholder_bindings["COUNT"] == "10"


def test_hierarchy_prompt_orders_context_instruction_format():
    prompt = _engine().render_hierarchy_prompt(seed_ontology(), batch_size=5)
    context_at = prompt.text.index("domain ontology")
    instruction_at = prompt.text.index("Add 5 new relevant concepts")
    format_at = prompt.text.index("Output the new ontology")
    assert context_at < instruction_at < format_at


def test_hierarchy_batch_zero_is_refused():
    with pytest.raises(EmptyBatchError):
        _engine().render_hierarchy_prompt(seed_ontology(), batch_size=0)


def test_extra_constraints_are_appended_and_bounded():
    engine = _engine()
    prompt = engine.render_hierarchy_prompt(
        seed_ontology(), 10, constraints=("Keep all concepts in English.",))
    assert "- Keep all concepts in English." in prompt.text
    with pytest.raises(ConstraintOverflowError):
        engine.render_hierarchy_prompt(
            seed_ontology(), 10, constraints=tuple(f"rule {i}" for i in range(7)))


def test_custom_instruction_override_is_verbatim():
    engine = _engine()
    custom = "Add 10 new concepts under the Vehicle class"
    engine.set_template(PromptTemplate(
        task=TaskKind.HIERARCHY,
        context=engine.template(TaskKind.HIERARCHY).context,
        instruction=custom,
        format_spec=engine.template(TaskKind.HIERARCHY).format_spec,
    ))
    prompt = engine.render_hierarchy_prompt(seed_ontology(), batch_size=10)
    assert custom in prompt.text


def test_rendering_is_deterministic():
    engine = _engine()
    first = engine.render_hierarchy_prompt(seed_ontology(), 10)
    second = engine.render_hierarchy_prompt(seed_ontology(), 10)
    assert first.text == second.text


def test_flipped_direction_changes_convention_sentence():
    engine = PromptEngine(
        templates=default_templates(EdgeDirection.CHILD_TO_PARENT),
        direction=EdgeDirection.CHILD_TO_PARENT)
    prompt = engine.render_hierarchy_prompt(seed_ontology(), 10)
    assert "child -> parent" in prompt.text
    assert "parent -> child" not in prompt.text


# --- definitions -----------------------------------------------------------------


def test_definition_prompt_lists_batch_and_delimiter():
    onto = seed_ontology()
    prompt = _engine().render_definition_prompt(
        onto, ["junction", "environmental-condition"])
    assert "Junction" in prompt.text
    assert "EnvironmentalCondition" in prompt.text
    assert "@" in prompt.text
    assert "markdown table" in prompt.text
    assert prompt.placeholder_bindings["COUNT"] == "2"


def test_definition_prompt_embeds_full_hierarchy():
    onto = seed_ontology()
    prompt = _engine().render_definition_prompt(onto, ["junction"])
    assert to_dot(onto) in prompt.text


def test_definition_batch_of_ten_lists_ten_names():
    onto = Ontology.from_names([f"Concept{i}" for i in range(12)])
    batch = sorted(onto.concepts)[:10]
    prompt = _engine().render_definition_prompt(onto, batch)
    listed = prompt.placeholder_bindings["BATCH"].split(", ")
    assert len(listed) == 10


def test_definition_batch_limits():
    onto = Ontology.from_names([f"Concept{i}" for i in range(12)])
    engine = _engine()
    with pytest.raises(EmptyBatchError):
        engine.render_definition_prompt(onto, [])
    with pytest.raises(BatchTooLargeError):
        engine.render_definition_prompt(onto, sorted(onto.concepts)[:11])
    with pytest.raises(UnknownConceptError):
        engine.render_definition_prompt(onto, ["not-there"])


# --- relationships ------------------------------------------------------------------


def test_relationship_prompt_names_ordered_pair():
    onto = Ontology.from_names(["Vehicle", "TrafficLight"])
    prompt = _engine().render_relationship_prompt("vehicle", "traffic-light", onto)
    assert "Vehicle" in prompt.text
    assert "TrafficLight" in prompt.text
    assert "numbered list" in prompt.text


def test_intra_concept_pair_is_allowed():
    onto = Ontology.from_names(["Vehicle"])
    prompt = _engine().render_relationship_prompt("vehicle", "vehicle", onto)
    assert prompt.placeholder_bindings["SUBJECT"] == "Vehicle"
    assert prompt.placeholder_bindings["OBJECT"] == "Vehicle"


def test_relationship_unknown_concept_is_refused():
    onto = Ontology.from_names(["Vehicle"])
    with pytest.raises(UnknownConceptError):
        _engine().render_relationship_prompt("vehicle", "unicorn", onto)


# --- properties --------------------------------------------------------------------


def test_property_prompt_mirrors_definition_batching():
    onto = Ontology.from_names(["Car"])
    prompt = _engine().render_property_prompt(onto, ["car"])
    assert "Car" in prompt.text
    assert "PropertyName" in prompt.text
    with pytest.raises(EmptyBatchError):
        _engine().render_property_prompt(onto, [])


# --- templates and length -------------------------------------------------------------


def test_template_with_undeclared_placeholder_is_refused():
    bad = PromptTemplate(
        task=TaskKind.HIERARCHY,
        context="{ONTOLOGY_DOT}",
        instruction="Add {COUNT} concepts about {SUBJECT}.",
        format_spec="DOT only.")
    with pytest.raises(UnresolvedPlaceholderError):
        validate_template(bad)


def test_engine_refuses_to_store_invalid_template():
    engine = _engine()
    with pytest.raises(UnresolvedPlaceholderError):
        engine.set_template(PromptTemplate(
            task=TaskKind.DEFINITION,
            context="x", instruction="{NOPE}", format_spec="y"))


def test_unbound_placeholder_is_caught_at_render():
    templates = default_templates()
    hier = templates[TaskKind.HIERARCHY]
    templates[TaskKind.HIERARCHY] = PromptTemplate(
        task=TaskKind.HIERARCHY, context=hier.context,
        instruction=hier.instruction + " Also cover {TOPIC}.",
        format_spec=hier.format_spec)
    engine = PromptEngine(templates=templates)
    with pytest.raises(UnresolvedPlaceholderError):
        engine.render_hierarchy_prompt(seed_ontology(), 10)


def test_length_warning_uses_strict_inequality():
    prompt = _engine().render_hierarchy_prompt(seed_ontology(), 10)
    exactly = check_length(prompt, soft_limit_chars=prompt.length_chars)
    below = check_length(prompt, soft_limit_chars=prompt.length_chars - 1)
    assert exactly.length_warning is False
    assert below.length_warning is True


def test_long_prompt_sets_warning_via_engine_default():
    onto = Ontology.from_names([f"VeryLongConceptName{i}" for i in range(400)])
    prompt = _engine().render_hierarchy_prompt(onto, 10)
    assert prompt.length_chars > 8000
    assert prompt.length_warning is True


def test_short_prompt_has_no_warning():
    prompt = _engine().render_hierarchy_prompt(seed_ontology(), 10)
    assert prompt.length_warning is False
