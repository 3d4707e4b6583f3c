"""Letters exchanged with funders and project teams during an audit.

Templates use ``{name}`` placeholders (``{{`` and ``}}`` for literal braces).
A template is a sequence of blocks; a block guarded by a placeholder is only
rendered when that placeholder has a non-empty value in the context.
"""

from __future__ import annotations

import string
from collections.abc import Mapping
from enum import Enum
from typing import Optional

from kaf.assessment import Question, score
from kaf.errors import MissingPlaceholder


class LetterKind(str, Enum):
    FUNDER_NOTICE = "funder_notice"
    LEADER_NOTICE = "leader_notice"
    VERIFY_FINDINGS = "verify_findings"
    FINAL_FINDINGS = "final_findings"

    def __str__(self) -> str:
        return self.value


PLACEHOLDERS = (
    "funder_contact",
    "project_leader",
    "sender_name",
    "project_list",
    "framework_url",
    "summary",
    "km_contact_name",
    "resource_count",
    "deadline",
    "recommendations",
)

DEFAULTS = {"deadline": "the next working week"}

# (text, guard) pairs; guard None means always rendered.
TEMPLATES: dict[LetterKind, tuple] = {
    LetterKind.FUNDER_NOTICE: (
        ("Dear {funder_contact}\n"
         "\n"
         "I am writing to let you know that I am auditing a number of publicly funded\n"
         "research projects, looking at how they share the knowledge they produce.\n"
         "\n"
         "The purpose, scope and method of the audit are described at:\n"
         "\n"
         "{framework_url}\n"
         "\n"
         "The projects funded by your organisation that are included in the audit:\n"
         "\n"
         "{project_list}\n"
         "\n"
         "Each project leader will be contacted shortly. The audit is carried out\n"
         "remotely, through searches and the project websites, and the teams are asked\n"
         "only to point us to repositories and sources we may have missed.\n"
         "\n"
         "You will receive a copy of the summary findings as soon as they are ready.\n"
         "Please get in touch if you have any questions.\n"
         "\n"
         "Best regards\n"
         "\n"
         "{sender_name}\n", None),
    ),
    LetterKind.LEADER_NOTICE: (
        ("Dear {project_leader}\n"
         "\n"
         "I am writing to let you know that your project is part of an audit of\n"
         "knowledge sharing in publicly funded research.\n"
         "\n"
         "The purpose, scope and method of the audit are described at:\n"
         "\n"
         "{framework_url}\n"
         "\n"
         "The audit is carried out remotely, through searches and the project website.\n"
         "Where some information cannot be found online, it would help if you could\n"
         "complete the relevant part of the enclosed form, for example the name of the\n"
         "team member in charge of knowledge sharing.\n"
         "\n"
         "Please also point us to any repositories not listed on the project website\n"
         "so they can be included in the inventory.\n"
         "\n"
         "You will receive the summary findings to approve or correct before the final\n"
         "inventory is included in a public audit report. Please get in touch if you\n"
         "have any questions.\n"
         "\n"
         "Best regards\n"
         "\n"
         "{sender_name}\n", None),
        ("\n"
         "Encl 1. Projects included in the audit\n"
         "{project_list}\n", "project_list"),
        ("\n"
         "Encl 2. Preliminary project information\n"
         "{summary}\n", "summary"),
    ),
    LetterKind.VERIFY_FINDINGS: (
        ("Dear {project_leader}\n"
         "\n"
         "Following our earlier correspondence, here is a summary of the knowledge\n"
         "inventory carried out on your project:\n"
         "\n"
         "- project: {summary}\n"
         "- person in charge of knowledge sharing: {km_contact_name}\n"
         "- publicly available knowledge resources: {resource_count}\n"
         "\n"
         "Please confirm that this is correct, or point us to anything we may have\n"
         "missed, within {deadline}. After that the summary will be finalised and\n"
         "published.\n"
         "\n"
         "Thank you in advance.\n"
         "\n"
         "Best regards\n"
         "\n"
         "{sender_name}\n", None),
    ),
    LetterKind.FINAL_FINDINGS: (
        ("Dear {project_leader}\n"
         "\n"
         "Following our exchanges, I enclose the final summary of the knowledge audit of\n"
         "your project, together with recommendations drawn from good knowledge sharing\n"
         "practice.\n"
         "\n"
         "We would be glad to advise you and your team further, and we would welcome\n"
         "your feedback on the audit process and how it could be improved.\n"
         "\n"
         "Best regards\n"
         "\n"
         "{sender_name}\n"
         "\n"
         "Encl 1. Summary findings\n"
         "{summary}\n"
         "\n"
         "Encl 2. Recommendations\n"
         "{recommendations}\n", None),
    ),
}

_FORMATTER = string.Formatter()


def _names(text: str) -> list[str]:
    return [name for _, name, _, _ in _FORMATTER.parse(text) if name is not None]


def _ordered(names) -> list[str]:
    return list(dict.fromkeys(names))


def letter_placeholders(kind: LetterKind | str) -> list[str]:
    """Placeholders ``render_letter`` requires for ``kind``, in first-occurrence order."""
    names = []
    for text, guard in TEMPLATES[LetterKind(kind)]:
        if guard is None:
            names.extend(_names(text))
    return [n for n in _ordered(names) if n not in DEFAULTS]


def optional_placeholders(kind: LetterKind | str) -> list[str]:
    names = []
    for text, guard in TEMPLATES[LetterKind(kind)]:
        names.extend(_names(text))
    required = set(letter_placeholders(kind))
    return [n for n in _ordered(names) if n not in required]


def _present(ctx: Mapping[str, Optional[str]], name: str) -> bool:
    value = ctx.get(name)
    return value is not None and value != ""


def render_letter(kind: LetterKind | str, ctx: Mapping[str, Optional[str]]) -> str:
    kind = LetterKind(kind)
    missing = [name for name in letter_placeholders(kind) if not _present(ctx, name)]
    if missing:
        raise MissingPlaceholder(missing)
    values = {**DEFAULTS, **{k: v for k, v in ctx.items() if _present(ctx, k)}}
    parts = []
    for text, guard in TEMPLATES[kind]:
        if guard is None or _present(ctx, guard):
            parts.append(text.format_map(values))
    return "".join(parts)


def letter_context(audit, assessment=None, **overrides: str) -> dict:
    """Placeholder values derivable from ``audit``; ``overrides`` win.

    Names, addresses and the framework URL are never guessed and must come
    from ``overrides``.
    """
    if assessment is None:
        assessment = score(audit)
    project = audit.project
    details = [project.project_name]
    if project.description:
        details.append(project.description)
    if project.funding_body:
        details.append(f"funded by {project.funding_body}")
    if project.url:
        details.append(project.url)
    recs = "\n".join(f"- [{r.code}] {r.text} ({r.subject})" for r in assessment.recommendations)
    ctx = {
        "summary": "; ".join(details),
        "km_contact_name": project.km_contact or "not identified",
        "resource_count": str(len(assessment.score(Question.Q1).answer)),
        "project_list": f"- {project.project_name}",
        "recommendations": recs or "- none; current practice matches the checklist",
    }
    ctx.update({k: v for k, v in overrides.items() if v is not None})
    return ctx
