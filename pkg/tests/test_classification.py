from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaf.classification import (
    ALLOWED_ROMISZOWSKI,
    BUILTIN_TABLE,
    ROMISZOWSKI_SUBCATEGORIES,
    TABLE_KEYS,
    KnowledgeCategory,
    LifecyclePhase,
    NonakaClass,
    Other,
    ResourceType,
    Romiszowski,
    RomiszowskiCategory,
    apply_overrides,
    check_table,
    classify,
    knowledge_category_of,
    lifecycle_of,
    nonaka_class_of,
    parse_format,
    parse_resource_type,
    romiszowski_of,
)

FIXTURE = Path(__file__).parent / "fixtures" / "classification_table.tsv"


def load_fixture() -> dict:
    rows = {}
    for line in FIXTURE.read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line:
            continue
        key, phase, representation, notation, nonaka, category, rom = line.split("\t")
        rows[key] = (phase, representation, notation, nonaka, category, rom)
    return rows


ALL_TYPES = list(ResourceType) + [Other("sketch")]


def test_fixture_covers_every_key():
    assert set(load_fixture()) == set(TABLE_KEYS)


@pytest.mark.parametrize("key", TABLE_KEYS)
def test_builtin_table_matches_fixture(key):
    phase, representation, notation, nonaka, category, rom = load_fixture()[key]
    rt = Other("x") if key == "other" else ResourceType(key)
    assert lifecycle_of(rt) == (LifecyclePhase(phase), representation, notation)
    assert nonaka_class_of(rt).value == nonaka
    assert knowledge_category_of(rt).value == category
    assert str(romiszowski_of(rt)) == rom


@pytest.mark.parametrize(
    "rt, expected",
    [
        (ResourceType.TEST_PLAN, (LifecyclePhase.TESTING, "structured text", "natural language charts")),
        (ResourceType.SYSTEM_DIAGRAM, (LifecyclePhase.DESIGN, "diagram", "ER, DF, UML")),
        (ResourceType.RULESET, (LifecyclePhase.LIFECYCLE_INDEPENDENT, "", "")),
        (Other("sketch"), (LifecyclePhase.LIFECYCLE_INDEPENDENT, "", "")),
    ],
)
def test_lifecycle_examples(rt, expected):
    assert lifecycle_of(rt) == expected


def test_nonaka_examples():
    assert nonaka_class_of(ResourceType.OPERATING_MANUAL) is NonakaClass.SYSTEMIC
    assert nonaka_class_of(ResourceType.SYSTEM_DIAGRAM) is NonakaClass.CONCEPTUAL
    assert nonaka_class_of(Other("sketch")) is NonakaClass.SYSTEMIC


def test_category_and_romiszowski_examples():
    assert knowledge_category_of(ResourceType.RULESET) is KnowledgeCategory.PROCEDURAL
    assert knowledge_category_of(ResourceType.GLOSSARY) is KnowledgeCategory.DECLARATIVE
    assert knowledge_category_of(ResourceType.CONTRACT) is KnowledgeCategory.CAUSAL
    assert romiszowski_of(ResourceType.RULESET) == RomiszowskiCategory(Romiszowski.PRINCIPLES, "Rule Systems")
    assert romiszowski_of(ResourceType.GLOSSARY) == RomiszowskiCategory(Romiszowski.FACTS, "Verbal Information")
    assert romiszowski_of(ResourceType.PROCESS) == RomiszowskiCategory(Romiszowski.PROCEDURES, "Algorithms")


@pytest.mark.parametrize("rt", ALL_TYPES, ids=str)
def test_classifiers_total_and_consistent(rt):
    row = classify(rt)
    assert row.nonaka_class in (NonakaClass.SYSTEMIC, NonakaClass.CONCEPTUAL)
    assert romiszowski_of(rt).category in ALLOWED_ROMISZOWSKI[knowledge_category_of(rt)]


def test_builtin_table_has_no_problems():
    assert check_table(BUILTIN_TABLE) == []


def test_check_table_reports_gaps():
    table = dict(BUILTIN_TABLE)
    del table["glossary"]
    assert check_table(table) == ["glossary: missing row"]


def test_romiszowski_subcategory_must_match():
    with pytest.raises(ValueError):
        RomiszowskiCategory(Romiszowski.FACTS, "Algorithms")
    for category, subs in ROMISZOWSKI_SUBCATEGORIES.items():
        for sub in subs:
            assert RomiszowskiCategory.parse(str(RomiszowskiCategory(category, sub))).subcategory == sub


def test_override_applies_and_keeps_other_rows():
    table = apply_overrides(BUILTIN_TABLE, {"glossary": {"notation": "controlled vocabulary"}})
    assert table["glossary"].notation == "controlled vocabulary"
    assert {k: v for k, v in table.items() if k != "glossary"} == {
        k: v for k, v in BUILTIN_TABLE.items() if k != "glossary"
    }


@pytest.mark.parametrize(
    "overrides",
    [
        {"glossary": {"romiszowski": "procedures/Algorithms"}},  # declarative cannot be procedures
        {"contract": {"nonaka_class": "experiential"}},  # tacit
        {"widget": {"notation": "x"}},
        {"glossary": {"colour": "blue"}},
    ],
)
def test_inconsistent_override_rejected(overrides):
    with pytest.raises(ValueError):
        apply_overrides(BUILTIN_TABLE, overrides)


def test_other_label_rules():
    with pytest.raises(ValueError):
        Other("  ")
    with pytest.raises(ValueError):
        Other("a\nb")
    assert str(Other("sketch")) == "other:sketch"


@given(st.sampled_from(ALL_TYPES) | st.builds(Other, st.text("abc xyz", min_size=1).filter(str.strip)))
def test_resource_type_text_round_trip(rt):
    assert parse_resource_type(str(rt)) == rt


def test_parse_rejects_unknown():
    with pytest.raises(ValueError):
        parse_resource_type("diagramme")
    with pytest.raises(ValueError):
        parse_format("docx")
    assert parse_format("other:docx") == Other("docx")


@given(st.sampled_from(ALL_TYPES))
def test_classification_is_pure(rt):
    assert classify(rt) == classify(rt) == BUILTIN_TABLE[rt.value if isinstance(rt, ResourceType) else "other"]
