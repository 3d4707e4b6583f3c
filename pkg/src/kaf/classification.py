"""Taxonomy tables for systems-engineering knowledge resources.

Every classifier keys on the declared resource type only. The mapping lives in
one table (``BUILTIN_TABLE``) so a registry can amend it with an override file
without touching code; see :func:`apply_overrides`.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Union


@dataclass(frozen=True)
class Other:
    """Free-text member of an otherwise closed vocabulary."""

    label: str

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("other(...) needs a non-empty label")
        if "\n" in self.label or "\r" in self.label:
            raise ValueError("other(...) label must be a single line")

    def __str__(self) -> str:
        return f"other:{self.label}"


class ResourceType(str, Enum):
    REQUIREMENTS_SPECIFICATION = "requirements_specification"
    SYSTEM_DIAGRAM = "system_diagram"
    SYSTEM_SPECIFICATION = "system_specification"
    OPERATING_MANUAL = "operating_manual"
    USER_GUIDE = "user_guide"
    TEST_PLAN = "test_plan"
    CONTRACT = "contract"
    USER_FEEDBACK_TICKETS = "user_feedback_tickets"
    FEEDBACK_NEW_REQUIREMENTS = "feedback_new_requirements"
    PROCESS = "process"
    RULESET = "ruleset"
    STANDARD_COMPLIANCE_DOCUMENT = "standard_compliance_document"
    GLOSSARY = "glossary"

    def __str__(self) -> str:
        return self.value


class FormatTag(str, Enum):
    IMAGE = "image"
    WORD_DOCUMENT = "word_document"
    SPREADSHEET = "spreadsheet"
    PDF = "pdf"
    HTML = "html"
    XML = "xml"
    RDF = "rdf"
    OWL = "owl"

    def __str__(self) -> str:
        return self.value


class LifecyclePhase(str, Enum):
    ANALYSIS = "analysis"
    DESIGN = "design"
    DEVELOPMENT = "development"
    INSTALLATION = "installation"
    TESTING = "testing"
    ACCEPTANCE = "acceptance"
    SUPPORT = "support"
    MAINTENANCE = "maintenance"
    LIFECYCLE_INDEPENDENT = "lifecycle_independent"

    def __str__(self) -> str:
        return self.value


class NonakaClass(str, Enum):
    SYSTEMIC = "systemic"
    CONCEPTUAL = "conceptual"
    # tacit classes: labels only, never produced by a classifier
    EXPERIENTIAL = "experiential"
    ROUTINE = "routine"

    def __str__(self) -> str:
        return self.value


class KnowledgeCategory(str, Enum):
    DECLARATIVE = "declarative"
    PROCEDURAL = "procedural"
    CAUSAL = "causal"

    def __str__(self) -> str:
        return self.value


class DimensionTag(str, Enum):
    COGNITIVE = "cognitive"
    ORGANISATIONAL = "organisational"
    TECHNICAL = "technical"

    def __str__(self) -> str:
        return self.value


class Romiszowski(str, Enum):
    FACTS = "facts"
    CONCEPTS = "concepts"
    PROCEDURES = "procedures"
    PRINCIPLES = "principles"

    def __str__(self) -> str:
        return self.value


ROMISZOWSKI_SUBCATEGORIES: dict[Romiszowski, tuple[str, ...]] = {
    Romiszowski.FACTS: ("Concrete Facts", "Verbal Information", "Concrete Associations"),
    Romiszowski.CONCEPTS: ("Concrete Concepts", "Defined Concepts", "Concept Systems"),
    Romiszowski.PROCEDURES: ("Linear Procedures", "Multiple Discriminations", "Algorithms"),
    Romiszowski.PRINCIPLES: ("Rules of Action", "Rules of Nature", "Rule Systems"),
}


@dataclass(frozen=True)
class RomiszowskiCategory:
    category: Romiszowski
    subcategory: str

    def __post_init__(self) -> None:
        if self.subcategory not in ROMISZOWSKI_SUBCATEGORIES[self.category]:
            raise ValueError(
                f"{self.subcategory!r} is not a sub-category of {self.category.value}"
            )

    def __str__(self) -> str:
        return f"{self.category.value}/{self.subcategory}"

    @classmethod
    def parse(cls, text: str) -> RomiszowskiCategory:
        category, sep, sub = text.partition("/")
        if not sep:
            raise ValueError(f"expected <category>/<sub-category>, got {text!r}")
        return cls(Romiszowski(category), sub)


ResourceTypeLike = Union[ResourceType, Other]
FormatLike = Union[FormatTag, Other]

ALLOWED_ROMISZOWSKI = {
    KnowledgeCategory.DECLARATIVE: {Romiszowski.FACTS, Romiszowski.CONCEPTS},
    KnowledgeCategory.PROCEDURAL: {Romiszowski.PROCEDURES, Romiszowski.PRINCIPLES},
    KnowledgeCategory.CAUSAL: {Romiszowski.PRINCIPLES},
}


def parse_resource_type(text: str) -> ResourceTypeLike:
    if text.startswith("other:"):
        return Other(text[len("other:"):])
    try:
        return ResourceType(text)
    except ValueError:
        raise ValueError(f"unknown resource type {text!r}") from None


def parse_format(text: str) -> FormatLike:
    if text.startswith("other:"):
        return Other(text[len("other:"):])
    try:
        return FormatTag(text)
    except ValueError:
        raise ValueError(f"unknown format {text!r}") from None


@dataclass(frozen=True)
class Classification:
    """One row of the classification table."""

    lifecycle_phase: LifecyclePhase
    representation: str
    notation: str
    nonaka_class: NonakaClass
    knowledge_category: KnowledgeCategory
    romiszowski: RomiszowskiCategory


def _row(phase, representation, notation, nonaka, category, rom, sub) -> Classification:
    return Classification(
        LifecyclePhase(phase),
        representation,
        notation,
        NonakaClass(nonaka),
        KnowledgeCategory(category),
        RomiszowskiCategory(Romiszowski(rom), sub),
    )


# Representation and notation strings are kept verbatim from the lifecycle table.
BUILTIN_TABLE: Mapping[str, Classification] = {
    "requirements_specification": _row(
        "analysis", "narrative structured text", "natural language, pseudocode",
        "systemic", "declarative", "concepts", "Defined Concepts"),
    "system_diagram": _row(
        "design", "diagram", "ER, DF, UML",
        "conceptual", "declarative", "concepts", "Concept Systems"),
    "system_specification": _row(
        "development", "narrative structured text", "Natural language pseudocode",
        "systemic", "declarative", "concepts", "Concept Systems"),
    "operating_manual": _row(
        "installation", "narrative diagrams", "Natural language graphics",
        "systemic", "declarative", "concepts", "Defined Concepts"),
    "user_guide": _row(
        "installation", "narrative diagrams", "Natural language graphics",
        "systemic", "declarative", "concepts", "Defined Concepts"),
    "test_plan": _row(
        "testing", "structured text", "natural language charts",
        "systemic", "procedural", "procedures", "Linear Procedures"),
    "contract": _row(
        "acceptance", "narrative", "natural language",
        "systemic", "causal", "principles", "Rules of Action"),
    "user_feedback_tickets": _row(
        "support", "narrative", "natural language",
        "systemic", "declarative", "facts", "Concrete Facts"),
    "feedback_new_requirements": _row(
        "maintenance", "narrative", "natural language",
        "systemic", "declarative", "facts", "Concrete Facts"),
    "process": _row(
        "lifecycle_independent", "", "",
        "systemic", "procedural", "procedures", "Algorithms"),
    "ruleset": _row(
        "lifecycle_independent", "", "",
        "systemic", "procedural", "principles", "Rule Systems"),
    "standard_compliance_document": _row(
        "lifecycle_independent", "", "",
        "systemic", "causal", "principles", "Rules of Action"),
    "glossary": _row(
        "lifecycle_independent", "", "",
        "systemic", "declarative", "facts", "Verbal Information"),
    "other": _row(
        "lifecycle_independent", "", "",
        "systemic", "declarative", "facts", "Concrete Facts"),
}

TABLE_KEYS = tuple(rt.value for rt in ResourceType) + ("other",)


def check_table(table: Mapping[str, Classification]) -> list[str]:
    """Return a list of problems; empty when the table is total and consistent."""
    problems = []
    for key in TABLE_KEYS:
        if key not in table:
            problems.append(f"{key}: missing row")
    for key, row in table.items():
        if key not in TABLE_KEYS:
            problems.append(f"{key}: not a resource type")
            continue
        if row.nonaka_class not in (NonakaClass.SYSTEMIC, NonakaClass.CONCEPTUAL):
            problems.append(f"{key}: tacit class {row.nonaka_class.value} cannot be assigned")
        if row.romiszowski.category not in ALLOWED_ROMISZOWSKI[row.knowledge_category]:
            problems.append(
                f"{key}: {row.romiszowski.category.value} is inconsistent with "
                f"{row.knowledge_category.value} knowledge"
            )
    return problems


def apply_overrides(
    base: Mapping[str, Classification], overrides: Mapping[str, Mapping[str, str]]
) -> dict[str, Classification]:
    """Amend ``base`` with textual overrides keyed by resource-type name.

    Each override maps a :class:`Classification` field name to its text form.
    Raises ``ValueError`` if the amended table breaks totality or consistency.
    """
    names = {f.name for f in fields(Classification)}
    parsers = {
        "lifecycle_phase": LifecyclePhase,
        "representation": str,
        "notation": str,
        "nonaka_class": NonakaClass,
        "knowledge_category": KnowledgeCategory,
        "romiszowski": RomiszowskiCategory.parse,
    }
    table = dict(base)
    for key, changes in overrides.items():
        if key not in TABLE_KEYS:
            raise ValueError(f"unknown resource type {key!r}")
        unknown = set(changes) - names
        if unknown:
            raise ValueError(f"{key}: unknown classification fields {sorted(unknown)}")
        parsed = {name: parsers[name](value) for name, value in changes.items()}
        table[key] = replace(table[key], **parsed)
    problems = check_table(table)
    if problems:
        raise ValueError("; ".join(problems))
    return table


def table_key(rt: ResourceTypeLike) -> str:
    return "other" if isinstance(rt, Other) else rt.value


def classify(rt: ResourceTypeLike, table: Mapping[str, Classification] = BUILTIN_TABLE) -> Classification:
    return table[table_key(rt)]


def lifecycle_of(
    rt: ResourceTypeLike, table: Mapping[str, Classification] = BUILTIN_TABLE
) -> tuple[LifecyclePhase, str, str]:
    row = classify(rt, table)
    return row.lifecycle_phase, row.representation, row.notation


def nonaka_class_of(rt: ResourceTypeLike, table: Mapping[str, Classification] = BUILTIN_TABLE) -> NonakaClass:
    return classify(rt, table).nonaka_class


def knowledge_category_of(
    rt: ResourceTypeLike, table: Mapping[str, Classification] = BUILTIN_TABLE
) -> KnowledgeCategory:
    return classify(rt, table).knowledge_category


def romiszowski_of(
    rt: ResourceTypeLike, table: Mapping[str, Classification] = BUILTIN_TABLE
) -> RomiszowskiCategory:
    return classify(rt, table).romiszowski
