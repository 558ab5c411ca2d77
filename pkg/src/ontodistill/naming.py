"""Name canonicalization.

Model responses mix spellings of the same concept ("CrosswalkUser" in DOT,
"Crosswalk User" in prose), so equality is decided on a canonical form:
CamelCase split into words, whitespace collapsed, case folded. Concept ids
are a hyphen slug of that form.
"""

from __future__ import annotations

import re

from .errors import InvalidConceptNameError

# Split between a lower/digit char and an upper char, and before the last
# upper of an acronym run ("HTTPServer" -> "HTTP Server").
_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_NON_SLUG = re.compile(r"[^a-z0-9]+")


def display_form(name: str) -> str:
    """Collapse whitespace runs and trim; the stored human-facing spelling."""
    return " ".join(name.split())


def canonical_name(name: str) -> str:
    """Case-folded, CamelCase-split, whitespace-collapsed equality key."""
    return " ".join(_CAMEL_BOUNDARY.sub(" ", name).split()).casefold()


def slugify(name: str) -> str:
    """Stable concept id derived from the canonical name."""
    slug = _NON_SLUG.sub("-", canonical_name(name)).strip("-")
    if not slug:
        raise InvalidConceptNameError(f"name {name!r} has no identifier content")
    return slug


def predicate_key(predicate: str) -> str:
    """Equality key for relationship predicates (trimmed, collapsed, folded)."""
    return " ".join(predicate.split()).casefold()
