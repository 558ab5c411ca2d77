"""Three-part prompt composition for the four distillation tasks.

Every prompt is context, then instruction, then response format, each part
an independently editable template string. A prompt must be self-sufficient:
the model is spoken to in fresh single-turn conversations, so whatever the
task needs (the full hierarchy, the batch, the pair, the output convention)
is substituted into the text; nothing relies on chat memory.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources

from .dotcodec import EdgeDirection, to_dot
from .errors import (
    BatchTooLargeError,
    ConstraintOverflowError,
    EmptyBatchError,
    UnresolvedPlaceholderError,
)
from .ontology import Ontology


class TaskKind(str, Enum):
    HIERARCHY = "hierarchy"
    DEFINITION = "definition"
    RELATIONSHIP = "relationship"
    PROPERTY = "property"


ALLOWED_PLACEHOLDERS: dict[TaskKind, frozenset[str]] = {
    TaskKind.HIERARCHY: frozenset({"ONTOLOGY_DOT", "COUNT", "DOMAIN"}),
    TaskKind.DEFINITION: frozenset(
        {"ONTOLOGY_DOT", "BATCH", "COUNT", "DELIMITER", "DOMAIN"}),
    TaskKind.RELATIONSHIP: frozenset(
        {"ONTOLOGY_DOT", "SUBJECT", "OBJECT", "DELIMITER", "DOMAIN"}),
    TaskKind.PROPERTY: frozenset(
        {"ONTOLOGY_DOT", "BATCH", "COUNT", "DELIMITER", "DOMAIN"}),
}

_PLACEHOLDER = re.compile(r"\{([A-Z][A-Z_]*)\}")

_PARENT_TO_CHILD_RULE = (
    "Draw every edge from the superclass to its subclass (parent -> child).")
_CHILD_TO_PARENT_RULE = (
    "Draw every edge from the subclass to its superclass (child -> parent).")


@dataclass(frozen=True)
class PromptTemplate:
    task: TaskKind
    context: str
    instruction: str
    format_spec: str

    def parts(self) -> tuple[str, str, str]:
        return (self.context, self.instruction, self.format_spec)

    def to_doc(self) -> dict:
        return {"task": self.task.value, "context": self.context,
                "instruction": self.instruction, "format_spec": self.format_spec}

    @classmethod
    def from_doc(cls, doc: dict) -> PromptTemplate:
        return cls(task=TaskKind(doc["task"]), context=doc["context"],
                   instruction=doc["instruction"], format_spec=doc["format_spec"])


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    task: TaskKind
    placeholder_bindings: dict[str, str]
    length_chars: int
    length_warning: bool = False


def placeholders_in(text: str) -> set[str]:
    return set(_PLACEHOLDER.findall(text))


def validate_template(template: PromptTemplate) -> None:
    """Refuse templates referencing placeholders the task will never bind."""
    allowed = ALLOWED_PLACEHOLDERS[template.task]
    used = set()
    for part in template.parts():
        used |= placeholders_in(part)
    unknown = used - allowed
    if unknown:
        raise UnresolvedPlaceholderError(
            f"template for task {template.task.value!r} uses undeclared"
            f" placeholders: {', '.join(sorted(unknown))}",
            detail={"placeholders": sorted(unknown)},
        )


def check_length(prompt: RenderedPrompt, soft_limit_chars: int = 8000) -> RenderedPrompt:
    """Flag prompts whose length exceeds the soft limit (strictly)."""
    return replace(prompt, length_warning=prompt.length_chars > soft_limit_chars)


def default_templates(
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD,
) -> dict[TaskKind, PromptTemplate]:
    """The shipped template set, with the edge convention worded for ``direction``."""
    templates: dict[TaskKind, PromptTemplate] = {}
    for task in TaskKind:
        raw = resources.files("ontodistill.data.templates").joinpath(
            f"{task.value}.json").read_text(encoding="utf-8")
        template = PromptTemplate.from_doc(json.loads(raw))
        if direction is EdgeDirection.CHILD_TO_PARENT:
            template = replace(
                template,
                format_spec=template.format_spec.replace(
                    _PARENT_TO_CHILD_RULE, _CHILD_TO_PARENT_RULE),
            )
        templates[task] = template
    return templates


def _substitute(text: str, bindings: dict[str, str]) -> str:
    for name, value in bindings.items():
        text = text.replace("{" + name + "}", value)
    return text


@dataclass
class PromptEngine:
    """Holds the per-session template set and rendering configuration."""

    templates: dict[TaskKind, PromptTemplate]
    domain_label: str = "autonomous driving"
    definition_delimiter: str = "@"
    relationship_delimiter: str = "|"
    property_delimiter: str = "@"
    max_batch: int = 10
    max_constraints: int = 6
    soft_limit_chars: int = 8000
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD

    def template(self, task: TaskKind) -> PromptTemplate:
        return self.templates[task]

    def set_template(self, template: PromptTemplate) -> None:
        validate_template(template)
        self.templates[template.task] = template

    # -- rendering -------------------------------------------------------

    def render_hierarchy_prompt(
        self,
        ontology: Ontology,
        batch_size: int,
        constraints: tuple[str, ...] = (),
    ) -> RenderedPrompt:
        if batch_size < 1:
            raise EmptyBatchError("batch_size must be at least 1")
        if len(constraints) > self.max_constraints:
            raise ConstraintOverflowError(
                f"{len(constraints)} extra constraints exceed the limit of"
                f" {self.max_constraints}; long requirement lists get ignored"
                " by the model")
        bindings = {
            "ONTOLOGY_DOT": to_dot(ontology, self.direction),
            "COUNT": str(batch_size),
            "DOMAIN": self.domain_label,
        }
        extra = "".join(f"\n- {c}" for c in constraints)
        return self._render(TaskKind.HIERARCHY, bindings, instruction_suffix=extra)

    def render_definition_prompt(
        self,
        ontology: Ontology,
        concept_batch: list[str],
        delimiter: str | None = None,
    ) -> RenderedPrompt:
        names = self._batch_names(ontology, concept_batch)
        bindings = {
            "ONTOLOGY_DOT": to_dot(ontology, self.direction),
            "BATCH": ", ".join(names),
            "COUNT": str(len(names)),
            "DELIMITER": delimiter or self.definition_delimiter,
            "DOMAIN": self.domain_label,
        }
        return self._render(TaskKind.DEFINITION, bindings)

    def render_relationship_prompt(
        self,
        subject: str,
        object_: str,
        ontology: Ontology,
    ) -> RenderedPrompt:
        subject_name = ontology.require(subject).display_name
        object_name = ontology.require(object_).display_name
        bindings = {
            "ONTOLOGY_DOT": to_dot(ontology, self.direction),
            "SUBJECT": subject_name,
            "OBJECT": object_name,
            "DELIMITER": self.relationship_delimiter,
            "DOMAIN": self.domain_label,
        }
        return self._render(TaskKind.RELATIONSHIP, bindings)

    def render_property_prompt(
        self,
        ontology: Ontology,
        concept_batch: list[str],
    ) -> RenderedPrompt:
        names = self._batch_names(ontology, concept_batch)
        bindings = {
            "ONTOLOGY_DOT": to_dot(ontology, self.direction),
            "BATCH": ", ".join(names),
            "COUNT": str(len(names)),
            "DELIMITER": self.property_delimiter,
            "DOMAIN": self.domain_label,
        }
        return self._render(TaskKind.PROPERTY, bindings)

    # -- internals ----------------------------------------------------------

    def _batch_names(self, ontology: Ontology, concept_batch: list[str]) -> list[str]:
        if not concept_batch:
            raise EmptyBatchError("concept batch is empty")
        if len(concept_batch) > self.max_batch:
            raise BatchTooLargeError(
                f"batch of {len(concept_batch)} exceeds the maximum of"
                f" {self.max_batch}")
        return [ontology.require(ref).display_name for ref in concept_batch]

    def _render(
        self,
        task: TaskKind,
        bindings: dict[str, str],
        instruction_suffix: str = "",
    ) -> RenderedPrompt:
        template = self.templates[task]
        context = _substitute(template.context, bindings)
        instruction = _substitute(template.instruction, bindings) + instruction_suffix
        format_spec = _substitute(template.format_spec, bindings)
        text = "\n\n".join(part for part in (context, instruction, format_spec) if part)
        scan_text = text
        for value in bindings.values():
            if "{" in value:
                scan_text = scan_text.replace(value, "")
        leftovers = sorted(placeholders_in(scan_text))
        if leftovers:
            raise UnresolvedPlaceholderError(
                f"prompt for task {task.value!r} leaves placeholders unresolved:"
                f" {', '.join(leftovers)}",
                detail={"placeholders": leftovers},
            )
        prompt = RenderedPrompt(
            text=text,
            task=task,
            placeholder_bindings=dict(bindings),
            length_chars=len(text),
        )
        return check_length(prompt, self.soft_limit_chars)
