from dataclasses import replace
from datetime import date
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kaf.comms import (
    DEFAULTS,
    PLACEHOLDERS,
    TEMPLATES,
    LetterKind,
    letter_context,
    letter_placeholders,
    optional_placeholders,
    render_letter,
)
from kaf.errors import MissingPlaceholder
from kaf.model import Audit, KnowledgeResource, Permission, ProjectRecord
from kaf.classification import ResourceType

GOLDEN = Path(__file__).parent / "golden"

FULL_CONTEXT = {
    "funder_contact": "Dr Jane Doe",
    "project_leader": "Prof. John Roe",
    "sender_name": "Maria Auditor",
    "project_list": "- Nectise\n- Open Data Hub",
    "framework_url": "https://kaf.example.org/framework",
    "summary": "Nectise; networked capabilities in systems engineering; https://nectise.example.org",
    "km_contact_name": "A. Smith",
    "resource_count": "7",
    "deadline": "two weeks",
    "recommendations": "- [REC-POLICY] adopt and publish a knowledge-sharing policy (PROJECT)",
}

REQUIRED = [(kind, name) for kind in LetterKind for name in letter_placeholders(kind)]


@pytest.mark.parametrize("kind", list(LetterKind), ids=str)
def test_golden(kind):
    expected = (GOLDEN / f"{kind.value}.txt").read_bytes()
    assert render_letter(kind, FULL_CONTEXT).encode("utf-8") == expected


@pytest.mark.parametrize("kind, name", REQUIRED, ids=[f"{k.value}-{n}" for k, n in REQUIRED])
def test_withheld_placeholder_is_named(kind, name):
    ctx = {k: v for k, v in FULL_CONTEXT.items() if k != name}
    with pytest.raises(MissingPlaceholder) as info:
        render_letter(kind, ctx)
    assert info.value.names == [name]


def test_funder_notice_placeholders():
    assert letter_placeholders("funder_notice") == ["funder_contact", "framework_url", "project_list", "sender_name"]


def test_every_kind_has_placeholders_and_all_are_known():
    for kind in LetterKind:
        assert letter_placeholders(kind)
        assert set(letter_placeholders(kind)) | set(optional_placeholders(kind)) <= set(PLACEHOLDERS)


def test_missing_lists_all_names_in_order():
    with pytest.raises(MissingPlaceholder) as info:
        render_letter(LetterKind.FUNDER_NOTICE, {})
    assert info.value.names == ["funder_contact", "framework_url", "project_list", "sender_name"]
    assert info.value.code == "missing-placeholder"


def test_empty_value_counts_as_missing():
    with pytest.raises(MissingPlaceholder):
        render_letter(LetterKind.FUNDER_NOTICE, {**FULL_CONTEXT, "funder_contact": ""})


def test_verify_findings_bullets():
    body = render_letter(LetterKind.VERIFY_FINDINGS, {**FULL_CONTEXT, "km_contact_name": "A. Smith", "resource_count": "7"})
    bullets = [line for line in body.splitlines() if line.startswith("- ")]
    assert any("A. Smith" in b for b in bullets)
    assert any(b.endswith(": 7") for b in bullets)


def test_deadline_default():
    ctx = {k: v for k, v in FULL_CONTEXT.items() if k != "deadline"}
    assert DEFAULTS["deadline"] in render_letter(LetterKind.VERIFY_FINDINGS, ctx)


def test_guarded_enclosures_are_optional():
    ctx = {k: v for k, v in FULL_CONTEXT.items() if k not in ("project_list", "summary")}
    body = render_letter(LetterKind.LEADER_NOTICE, ctx)
    assert "Encl" not in body
    assert body == (GOLDEN / "leader_notice.txt").read_text(encoding="utf-8").split("\nEncl 1.")[0]


def test_braces_in_values_are_literal():
    body = render_letter(LetterKind.FUNDER_NOTICE, {**FULL_CONTEXT, "funder_contact": "{sender_name}"})
    assert body.startswith("Dear {sender_name}\n")


@given(st.dictionaries(st.sampled_from(PLACEHOLDERS), st.text(min_size=1, max_size=20)))
def test_rendering_is_deterministic(extra):
    ctx = {**FULL_CONTEXT, **extra}
    for kind in LetterKind:
        assert render_letter(kind, ctx) == render_letter(kind, dict(ctx))


def test_templates_bind_one_per_kind():
    assert set(TEMPLATES) == set(LetterKind)


def test_letter_context_from_audit():
    project = ProjectRecord("Nectise", description="systems engineering", funding_body="EPSRC", km_contact="A. Smith")
    rs = (
        KnowledgeResource("R001", "Spec", ResourceType.SYSTEM_SPECIFICATION, url="a.org", permission_required=Permission.NO),
        KnowledgeResource("R002", "Plan", ResourceType.TEST_PLAN),
    )
    audit = Audit("nectise-001", project, date(2024, 1, 1), resources=rs)
    ctx = letter_context(audit, sender_name="M")
    assert ctx["km_contact_name"] == "A. Smith"
    assert ctx["resource_count"] == "1"
    assert ctx["summary"] == "Nectise; systems engineering; funded by EPSRC"
    assert ctx["sender_name"] == "M"
    no_contact = letter_context(replace(audit, project=replace(project, km_contact=None)))
    assert no_contact["km_contact_name"] == "not identified"
