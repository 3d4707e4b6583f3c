"""Scoring of the five core audit questions, the shareability check, and recommendations.

Coverage ratios are exact :class:`~fractions.Fraction` values. A question counts
as answered once its coverage reaches :data:`ANSWERED_THRESHOLD`; the audit is
heuristically valid when at least one question is answered.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Optional

from kaf.classification import BUILTIN_TABLE, Classification, DimensionTag, NonakaClass, nonaka_class_of
from kaf.model import PROJECT, Audit, KnowledgeResource, Permission

ANSWERED_THRESHOLD = Fraction(4, 5)

LOCATION = "url|other_location"


class Question(str, Enum):
    Q1 = "Q1"  # what is shared
    Q2 = "Q2"  # where is it located
    Q3 = "Q3"  # by which mechanisms
    Q4 = "Q4"  # who is responsible
    Q5 = "Q5"  # under which policy

    def __str__(self) -> str:
        return self.value


QUESTION_TEXT = {
    Question.Q1: "Which knowledge resources are shared and publicly reusable?",
    Question.Q2: "Where are the resources located?",
    Question.Q3: "Which sharing mechanisms and techniques are used?",
    Question.Q4: "Who is responsible for making knowledge shareable?",
    Question.Q5: "Is a knowledge sharing and reuse policy followed?",
}


@dataclass(frozen=True)
class QuestionScore:
    question: Question
    coverage: Fraction
    answered: bool
    answer: tuple
    missing: tuple  # ((resource id or PROJECT, field name), ...)


@dataclass(frozen=True)
class Recommendation:
    code: str
    text: str
    subject: str
    dimension: DimensionTag


@dataclass(frozen=True)
class AssessmentResult:
    scores: tuple
    postulate_violations: tuple
    recommendations: tuple
    heuristic_valid: bool

    def score(self, question: Question | str) -> QuestionScore:
        return self.scores[list(Question).index(Question(question))]


def has_location(r: KnowledgeResource) -> bool:
    return bool(r.url or r.other_location)


def shared_status(r: KnowledgeResource) -> Optional[bool]:
    """True/False when decidable, ``None`` when location or permission is unknown."""
    if not has_location(r) or r.permission_required is None:
        return None
    return r.permission_required is Permission.NO


def _fraction(hits: int, total: int) -> Fraction:
    return Fraction(hits, total) if total else Fraction(0)


def _score(question: Question, coverage: Fraction, answer, missing) -> QuestionScore:
    return QuestionScore(
        question, coverage, coverage >= ANSWERED_THRESHOLD, tuple(answer), tuple(sorted(missing))
    )


def _by_id(audit: Audit) -> list[KnowledgeResource]:
    return sorted(audit.resources, key=lambda r: r.resource_id)


def _q1(resources) -> QuestionScore:
    missing = []
    decided = 0
    for r in resources:
        if not has_location(r):
            missing.append((r.resource_id, LOCATION))
        if r.permission_required is None:
            missing.append((r.resource_id, "permission_required"))
        decided += shared_status(r) is not None
    if not resources:
        missing.append((PROJECT, "resources"))
    answer = [r.resource_id for r in resources if shared_status(r)]
    return _score(Question.Q1, _fraction(decided, len(resources)), answer, missing)


def _q2(resources) -> QuestionScore:
    answer = []
    missing = []
    for r in resources:
        if r.url:
            answer.append((r.resource_id, r.url))
        if r.other_location:
            answer.append((r.resource_id, r.other_location))
        if not has_location(r):
            missing.append((r.resource_id, LOCATION))
    if not resources:
        missing.append((PROJECT, "resources"))
    located = sum(has_location(r) for r in resources)
    return _score(Question.Q2, _fraction(located, len(resources)), answer, missing)


MECHANISM_FIELDS = ("format", "standard_compliance", "license")


def _q3(resources) -> QuestionScore:
    answer = []
    missing = []
    total = Fraction(0)
    for r in resources:
        present = tuple(
            (name, str(getattr(r, name))) for name in MECHANISM_FIELDS if getattr(r, name) is not None
        )
        missing.extend((r.resource_id, name) for name in MECHANISM_FIELDS if getattr(r, name) is None)
        total += Fraction(len(present), len(MECHANISM_FIELDS))
        if present:
            answer.append((r.resource_id, present))
    if not resources:
        missing.append((PROJECT, "resources"))
    coverage = total / len(resources) if resources else Fraction(0)
    return _score(Question.Q3, coverage, answer, missing)


def _blend(project_part: bool, hits: int, total: int) -> Fraction:
    return Fraction(1, 2) * int(project_part) + Fraction(1, 2) * _fraction(hits, total)


def _q4(audit: Audit, resources) -> QuestionScore:
    contact = audit.project.km_contact
    maintainers = sorted({r.maintained_by for r in resources if r.maintained_by})
    answer = ([contact] if contact else []) + [m for m in maintainers if m != contact]
    missing = [(r.resource_id, "maintained_by") for r in resources if not r.maintained_by]
    if not contact:
        missing.append((PROJECT, "km_contact"))
    if not resources:
        missing.append((PROJECT, "resources"))
    hits = sum(bool(r.maintained_by) for r in resources)
    return _score(Question.Q4, _blend(bool(contact), hits, len(resources)), answer, missing)


def _q5(audit: Audit, resources) -> QuestionScore:
    project = audit.project
    project_policies = [p for p in (project.ks_policy, project.contractual_clauses) if p]
    prescribed = sorted({r.policy_prescribed for r in resources if r.policy_prescribed})
    answer = project_policies + [p for p in prescribed if p not in project_policies]
    missing = [(r.resource_id, "policy_prescribed") for r in resources if not r.policy_prescribed]
    if not project_policies:
        missing.append((PROJECT, "ks_policy|contractual_clauses"))
    if not resources:
        missing.append((PROJECT, "resources"))
    hits = sum(bool(r.policy_prescribed) for r in resources)
    return _score(Question.Q5, _blend(bool(project_policies), hits, len(resources)), answer, missing)


def check_postulate(audit: Audit, table: Mapping[str, Classification] = BUILTIN_TABLE) -> list[str]:
    """Ids of conceptual resources with no systemic counterpart, sorted.

    A counterpart is either the target of ``corresponds_to`` (when systemic) or
    any systemic resource declaring the same lifecycle phase.
    """
    systemic = [r for r in audit.resources if nonaka_class_of(r.resource_type, table) is NonakaClass.SYSTEMIC]
    systemic_ids = {r.resource_id for r in systemic}
    systemic_phases = {r.lifecycle_phase for r in systemic if r.lifecycle_phase is not None}
    violations = []
    for r in audit.resources:
        if nonaka_class_of(r.resource_type, table) is not NonakaClass.CONCEPTUAL:
            continue
        if r.corresponds_to in systemic_ids:
            continue
        if r.lifecycle_phase is not None and r.lifecycle_phase in systemic_phases:
            continue
        violations.append(r.resource_id)
    return sorted(violations)


# code -> (text template, dimension)
RECOMMENDATION_RULES = {
    "REC-CONTACT": ("designate a knowledge-sharing contact", DimensionTag.ORGANISATIONAL),
    "REC-FORMAT": ("declare format and standard compliance", DimensionTag.TECHNICAL),
    "REC-LANGUAGE": ("declare the language of the resource", DimensionTag.COGNITIVE),
    "REC-LICENSE": ("attach explicit license", DimensionTag.ORGANISATIONAL),
    "REC-POLICY": ("adopt and publish a knowledge-sharing policy", DimensionTag.ORGANISATIONAL),
    "REC-SYSTEMIC": ("produce systemic documentation for {subject}", DimensionTag.TECHNICAL),
}


def _rec(code: str, subject: str) -> Recommendation:
    text, dimension = RECOMMENDATION_RULES[code]
    return Recommendation(code, text.format(subject=subject), subject, dimension)


def recommend(result: AssessmentResult, audit: Audit) -> list[Recommendation]:
    recs = []
    if not result.score(Question.Q5).answered:
        recs.append(_rec("REC-POLICY", PROJECT))
    recs.extend(_rec("REC-SYSTEMIC", rid) for rid in result.postulate_violations)
    if not audit.project.km_contact:
        recs.append(_rec("REC-CONTACT", PROJECT))
    for r in audit.resources:
        if r.license is None:
            recs.append(_rec("REC-LICENSE", r.resource_id))
        if r.format is None or r.standard_compliance is None:
            recs.append(_rec("REC-FORMAT", r.resource_id))
        if r.language is None:
            recs.append(_rec("REC-LANGUAGE", r.resource_id))
    return sorted(recs, key=lambda rec: (rec.code, rec.subject))


def score(audit: Audit, table: Mapping[str, Classification] = BUILTIN_TABLE) -> AssessmentResult:
    resources = _by_id(audit)
    scores = (
        _q1(resources),
        _q2(resources),
        _q3(resources),
        _q4(audit, resources),
        _q5(audit, resources),
    )
    result = AssessmentResult(
        scores=scores,
        postulate_violations=tuple(check_postulate(audit, table)),
        recommendations=(),
        heuristic_valid=any(s.answered for s in scores),
    )
    return replace(result, recommendations=tuple(recommend(result, audit)))
