"""Draft, amended and final audit reports.

Reports are stored in the registry record format with record types
``[report]``, ``[project]``, ``[row]``, ``[score]`` and ``[rec]``, so a stored
report parses back to the same :class:`ReportDocument`.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, replace
from datetime import date
from fractions import Fraction
from typing import Optional

from kaf.assessment import AssessmentResult, Question, QuestionScore, Recommendation, score, shared_status
from kaf.classification import (
    BUILTIN_TABLE,
    Classification,
    DimensionTag,
    KnowledgeCategory,
    LifecyclePhase,
    NonakaClass,
    RomiszowskiCategory,
    classify,
)
from kaf.errors import InvalidInput, NotValidated, ParseError, WrongStage
from kaf.model import Audit, KnowledgeResource, ProjectRecord, ReportStatus, mark_final, record_event, set_report_body
from kaf.records import Record, dump_records, parse_records
from kaf.storage import project_from_record, project_to_record, resource_from_record, resource_to_record
from kaf.workflow import EventKind, Stage, StepId, Verdict, WorkflowEvent, step_completed


@dataclass(frozen=True)
class InventoryRow:
    resource: KnowledgeResource
    classification: Classification
    shared: Optional[bool]


@dataclass(frozen=True)
class ReportDocument:
    audit_id: str
    project_name: str
    date: date
    version: int
    status: ReportStatus
    project: ProjectRecord
    rows: tuple
    scores: tuple
    postulate_violations: tuple
    recommendations: tuple
    heuristic_valid: bool
    feedback: Optional[str] = None


def _report_date(audit: Audit) -> date:
    if audit.events:
        return audit.events[-1].timestamp.date()
    return audit.created_on


def draft_report(
    audit: Audit,
    assessment: Optional[AssessmentResult] = None,
    table: Mapping[str, Classification] = BUILTIN_TABLE,
) -> ReportDocument:
    state = audit.workflow
    if state.stage.rank < Stage.VERIFICATION.rank or state.current_report_version is None:
        raise WrongStage(
            f"a report is drafted once results are consolidated (s3_1); audit is in {state.stage.value}"
        )
    if assessment is None:
        assessment = score(audit, table)
    rows = tuple(InventoryRow(r, classify(r.resource_type, table), shared_status(r)) for r in audit.resources)
    return ReportDocument(
        audit_id=audit.audit_id,
        project_name=audit.project.project_name,
        date=_report_date(audit),
        version=state.current_report_version,
        status=ReportStatus.DRAFT,
        project=audit.project,
        rows=rows,
        scores=assessment.scores,
        postulate_violations=assessment.postulate_violations,
        recommendations=assessment.recommendations,
        heuristic_valid=assessment.heuristic_valid,
    )


def finalize_report(audit: Audit, doc: ReportDocument, feedback: str) -> ReportDocument:
    if audit.final_report is not None:
        raise NotValidated(f"report v{audit.final_report.version} is already final")
    validated = audit.workflow.validated_version
    if validated != doc.version:
        have = f"v{validated} is validated" if validated else "no version is validated yet"
        raise NotValidated(f"cannot finalise v{doc.version}: {have}")
    if "\r" in feedback or ">>>" in feedback.split("\n"):
        raise InvalidInput("feedback may not contain carriage returns or a line that is exactly >>>")
    return replace(doc, status=ReportStatus.FINAL, feedback=feedback or None)


def commit_final(audit: Audit, doc: ReportDocument) -> Audit:
    """Record ``doc`` (already finalised) as the audit's one final report."""
    if doc.status is not ReportStatus.FINAL:
        raise NotValidated("only a finalised document can be committed")
    return mark_final(audit, doc.version, serialize_report(doc))


def refresh_draft(audit: Audit, table: Mapping[str, Classification] = BUILTIN_TABLE) -> Audit:
    """Rebuild the current report version's body while it is still a draft."""
    version = audit.workflow.current_report_version
    if version is None or audit.report_version(version).status is not ReportStatus.DRAFT:
        return audit
    doc = draft_report(audit, table=table)
    return set_report_body(audit, version, serialize_report(doc))


def advance(
    audit: Audit,
    event: WorkflowEvent,
    table: Mapping[str, Classification] = BUILTIN_TABLE,
) -> Audit:
    """Record ``event`` and keep report versions in step with it.

    New versions get a freshly drafted body, a draft is rebuilt just before it
    is sent, and a valid verdict also records s4_1, which the validated report
    satisfies.
    """
    action = event.action
    if action.kind is EventKind.REPORT_SENT:
        audit = refresh_draft(audit, table)
    audit = record_event(audit, event)
    opens_version = action.kind is EventKind.REPORT_AMENDED or (
        action.kind is EventKind.STEP_COMPLETED and action.step is StepId.S3_1
    )
    if opens_version:
        audit = refresh_draft(audit, table)
    if action.kind is EventKind.VALIDATION_RECEIVED and action.verdict is Verdict.VALID:
        auto = WorkflowEvent(event.timestamp, step_completed(StepId.S4_1), f"report v{action.version} validated")
        audit = record_event(audit, auto)
    return audit


# -- serialization -------------------------------------------------------------


def _yes_no(flag: bool) -> str:
    return "yes" if flag else "no"


def _parse_yes_no(text: str) -> bool:
    if text not in ("yes", "no"):
        raise ValueError(f"expected yes/no, got {text!r}")
    return text == "yes"


_SHARED = {True: "yes", False: "no", None: "unknown"}


def _row_record(row: InventoryRow) -> Record:
    c = row.classification
    derived = [
        ("class_lifecycle_phase", c.lifecycle_phase.value),
        ("class_representation", c.representation),
        ("class_notation", c.notation),
        ("class_nonaka", c.nonaka_class.value),
        ("class_category", c.knowledge_category.value),
        ("class_romiszowski", str(c.romiszowski)),
        ("shared", _SHARED[row.shared]),
    ]
    return resource_to_record(row.resource, "row", [(k, v) for k, v in derived if v])


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def score_record(s: QuestionScore) -> Record:
    fields = [
        ("question", s.question.value),
        ("coverage", str(s.coverage)),
        ("answered", _yes_no(s.answered)),
        ("answer", json.dumps(_jsonable(s.answer), ensure_ascii=False)),
    ]
    if s.missing:
        fields.append(("missing", "\n".join(f"{subject} {name}" for subject, name in s.missing)))
    return Record("score", tuple(fields))


def serialize_report(doc: ReportDocument) -> str:
    header = [
        ("audit_id", doc.audit_id),
        ("project_name", doc.project_name),
        ("date", doc.date.isoformat()),
        ("version", str(doc.version)),
        ("status", doc.status.value),
        ("heuristic_valid", _yes_no(doc.heuristic_valid)),
    ]
    header += [("postulate_violation", rid) for rid in doc.postulate_violations]
    if doc.feedback:
        header.append(("feedback", doc.feedback))
    records = [Record("report", tuple(header)), project_to_record(doc.project)]
    records += [_row_record(row) for row in doc.rows]
    records += [score_record(s) for s in doc.scores]
    for r in doc.recommendations:
        records.append(
            Record("rec", (("code", r.code), ("subject", r.subject), ("dimension", r.dimension.value), ("text", r.text)))
        )
    return dump_records(records)


_DERIVED = (
    "class_lifecycle_phase",
    "class_representation",
    "class_notation",
    "class_nonaka",
    "class_category",
    "class_romiszowski",
    "shared",
)


def _parse_row(record: Record) -> InventoryRow:
    derived = {name: record.get(name, "") for name in _DERIVED}
    rest = tuple((k, v) for k, v in record.fields if k not in _DERIVED)
    resource = resource_from_record(Record("resource", rest), "report")
    classification = Classification(
        LifecyclePhase(derived["class_lifecycle_phase"]),
        derived["class_representation"],
        derived["class_notation"],
        NonakaClass(derived["class_nonaka"]),
        KnowledgeCategory(derived["class_category"]),
        RomiszowskiCategory.parse(derived["class_romiszowski"]),
    )
    shared = {v: k for k, v in _SHARED.items()}[derived["shared"]]
    return InventoryRow(resource, classification, shared)


def _parse_score(record: Record) -> QuestionScore:
    missing_text = record.get("missing", "")
    missing = tuple(tuple(line.split(" ", 1)) for line in missing_text.split("\n") if line)
    coverage = Fraction(record.get("coverage"))
    if not 0 <= coverage <= 1:
        raise ValueError("coverage outside [0, 1]")
    return QuestionScore(
        Question(record.get("question")),
        coverage,
        _parse_yes_no(record.get("answered")),
        _tupled(json.loads(record.get("answer"))),
        missing,
    )


def parse_report(text: str) -> ReportDocument:
    records = parse_records(text)
    if len(records) < 2 or records[0].type != "report" or records[1].type != "project":
        raise ParseError(1, "a report starts with [report] and [project] records", "report")
    head = records[0]
    try:
        rows, scores, recs = [], [], []
        for record in records[2:]:
            if record.type == "row":
                rows.append(_parse_row(record))
            elif record.type == "score":
                scores.append(_parse_score(record))
            elif record.type == "rec":
                recs.append(
                    Recommendation(record.get("code"), record.get("text"), record.get("subject"),
                                   DimensionTag(record.get("dimension")))
                )
            else:
                raise ParseError(record.lines[0], f"unexpected record type [{record.type}]", "report")
        return ReportDocument(
            audit_id=head.get("audit_id"),
            project_name=head.get("project_name"),
            date=date.fromisoformat(head.get("date")),
            version=int(head.get("version")),
            status=ReportStatus(head.get("status")),
            project=project_from_record(records[1], "report"),
            rows=tuple(rows),
            scores=tuple(scores),
            postulate_violations=tuple(head.get_all("postulate_violation")),
            recommendations=tuple(recs),
            heuristic_valid=_parse_yes_no(head.get("heuristic_valid")),
            feedback=head.get("feedback"),
        )
    except (ValueError, TypeError, KeyError) as exc:
        raise ParseError(0, f"malformed report: {exc}", "report") from None
