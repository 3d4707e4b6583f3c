"""Audit domain types: project record, knowledge resources, report versions.

All values are frozen; every operation returns a new :class:`Audit`.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, fields, replace
from datetime import date
from enum import Enum
from functools import cached_property
from typing import Optional

from kaf.classification import FormatLike, LifecyclePhase, ResourceTypeLike
from kaf.errors import (
    DanglingReference,
    DuplicateId,
    IllegalTransition,
    InvalidProject,
    InvalidResource,
    NotValidated,
    WrongStage,
)
from kaf.workflow import EventKind, Stage, StepId, Verdict, WorkflowEvent, WorkflowState, apply, replay

RESOURCE_ID_RE = re.compile(r"^R\d{3}$")
DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
LANGUAGE_RE = re.compile(r"^[A-Za-z]{2,3}(-[A-Za-z0-9]{1,8})*$")
URL_RE = re.compile(
    r"^(?:[A-Za-z][A-Za-z0-9+.\-]*://\S+"
    r"|[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?(?:\.[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?)+(?:/\S*)?)$"
)

PROJECT = "PROJECT"


class Permission(str, Enum):
    """Whether access or reuse needs permission. ``None`` on a resource means unknown."""

    YES = "yes"
    NO = "no"

    def __str__(self) -> str:
        return self.value


class ReportStatus(str, Enum):
    DRAFT = "draft"
    SENT_FOR_VALIDATION = "sent_for_validation"
    REJECTED = "rejected"
    VALIDATED = "validated"
    FINAL = "final"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Finding:
    field: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}: {self.message}"


Extra = tuple  # tuple[tuple[str, str], ...] of unknown fields kept from a record file


@dataclass(frozen=True)
class ProjectRecord:
    project_name: str
    description: str = ""
    url: Optional[str] = None
    partners: tuple = ()
    funding_body: str = ""
    ks_policy: Optional[str] = None
    contractual_clauses: Optional[str] = None
    km_contact: Optional[str] = None
    duration: Optional[str] = None
    publications: tuple = ()
    other_comments: Optional[str] = None
    extra: Extra = ()


@dataclass(frozen=True)
class KnowledgeResource:
    resource_id: str
    name: str
    resource_type: ResourceTypeLike
    description: str = ""
    maintained_by: Optional[str] = None
    last_updated: Optional[str] = None
    next_review_due: Optional[str] = None
    language: Optional[str] = None
    standard_compliance: Optional[str] = None
    policy_prescribed: Optional[str] = None
    format: Optional[FormatLike] = None
    license: Optional[str] = None
    url: Optional[str] = None
    other_location: Optional[str] = None
    permission_required: Optional[Permission] = None
    lifecycle_phase: Optional[LifecyclePhase] = None
    corresponds_to: Optional[str] = None
    extra: Extra = ()


PROJECT_FIELDS = tuple(f.name for f in fields(ProjectRecord) if f.name != "extra")
RESOURCE_FIELDS = tuple(f.name for f in fields(KnowledgeResource) if f.name != "extra")

# Appendix-1 form labels (spelling normalised) to model fields.
FORM_PART1 = {
    "PROJECT NAME": ("project_name",),
    "DESCRIPTION": ("description",),
    "URL/PROJECT DOCUMENT/WEBSITE": ("url",),
    "PARTNERS": ("partners",),
    "FUNDING BODY": ("funding_body",),
    "KS POLICY": ("ks_policy",),
    "CONTRACTUAL CLAUSES THAT IMPACT KS OF THIS PROJECT": ("contractual_clauses",),
    "OTHER COMMENTS": ("other_comments",),
}
FORM_PART2 = {
    "RESOURCE NAME/ID": ("name", "resource_id"),
    "RESOURCE TYPE": ("resource_type",),
    "DESCRIPTION": ("description",),
    "MAINTAINED BY": ("maintained_by",),
    "LAST UPDATED": ("last_updated",),
    "NEXT REVIEW DUE": ("next_review_due",),
    "LANGUAGE": ("language",),
    "DOES THIS RESOURCE COMPLY WITH ANY STANDARD?": ("standard_compliance",),
    "IS THE USE OF THIS RESOURCE PRESCRIBED BY ANY POLICY?": ("policy_prescribed",),
    "FORMAT": ("format",),
    "LICENSE": ("license",),
    "URL": ("url",),
    "OTHER LOCATION": ("other_location",),
    "DOES THIS RESOURCE REQUIRE ANY PERMISSION TO BE ACCESSED/REUSED?": ("permission_required",),
    "LIFECYCLE PHASE": ("lifecycle_phase",),
}


@dataclass(frozen=True)
class ReportVersion:
    version: int
    body: str = ""
    status: ReportStatus = ReportStatus.DRAFT
    extra: Extra = ()


@dataclass(frozen=True)
class Audit:
    audit_id: str
    project: ProjectRecord
    created_on: date
    resources: tuple = ()
    events: tuple = ()
    report_versions: tuple = ()
    extra: Extra = ()
    extra_records: tuple = ()

    @cached_property
    def workflow(self) -> WorkflowState:
        return replay(self.events)

    @property
    def stage(self) -> Stage:
        return self.workflow.stage

    def resource(self, resource_id: str) -> KnowledgeResource:
        for r in self.resources:
            if r.resource_id == resource_id:
                return r
        raise KeyError(resource_id)

    def report_version(self, version: int) -> ReportVersion:
        return self.report_versions[version - 1]

    @property
    def final_report(self) -> Optional[ReportVersion]:
        return next((v for v in self.report_versions if v.status is ReportStatus.FINAL), None)


def is_valid_date(text: str) -> bool:
    if not DATE_RE.match(text):
        return False
    try:
        date.fromisoformat(text)
    except ValueError:
        return False
    return True


_FREE_TEXT = ("description", "funding_body")


def _check_text(findings: list, name: str, value, required: bool = False) -> None:
    if value is None:
        if required:
            findings.append(Finding(name, "required", "value is required"))
        return
    if not isinstance(value, str):
        return
    if required and not value.strip():
        findings.append(Finding(name, "required", "must not be empty"))
    elif value == "" and name not in _FREE_TEXT:
        findings.append(Finding(name, "empty-value", "leave unknown values unset instead of empty"))
    if "\n" in value or "\r" in value:
        findings.append(Finding(name, "single-line", "must be a single line"))


def validate_project(project: ProjectRecord) -> list[Finding]:
    findings: list[Finding] = []
    for name in PROJECT_FIELDS:
        value = getattr(project, name)
        if isinstance(value, tuple):
            for item in value:
                if not item.strip() or "\n" in item or "\r" in item:
                    findings.append(Finding(name, "list-item", f"{item!r} must be a non-empty single line"))
            continue
        _check_text(findings, name, value, required=name == "project_name")
        if name == "url" and value and not URL_RE.match(value):
            findings.append(Finding("url", "uri-syntax", f"{value!r} is neither scheme://... nor a bare domain path"))
    return findings


def validate_record(resource: KnowledgeResource, audit: Optional[Audit] = None) -> list[Finding]:
    """Field-level findings for ``resource``, in field declaration order.

    With ``audit`` given, ``corresponds_to`` is also checked for a target.
    """
    findings: list[Finding] = []
    for name in RESOURCE_FIELDS:
        value = getattr(resource, name)
        if name == "resource_id":
            if not RESOURCE_ID_RE.match(value or ""):
                findings.append(Finding(name, "id-pattern", f"{value!r} is not R followed by three digits"))
            continue
        if name in ("resource_type", "format", "permission_required", "lifecycle_phase"):
            continue
        _check_text(findings, name, value, required=name == "name")
        if value is None or value == "":
            continue
        if name in ("last_updated", "next_review_due") and not is_valid_date(value):
            findings.append(Finding(name, "invalid-date", f"{value!r} is not a calendar date YYYY-MM-DD"))
        elif name == "language" and not LANGUAGE_RE.match(value):
            findings.append(Finding(name, "language-tag", f"{value!r} is not a 2/3-letter tag with optional subtags"))
        elif name == "url" and not URL_RE.match(value):
            findings.append(Finding(name, "uri-syntax", f"{value!r} is neither scheme://... nor a bare domain path"))
        elif name == "corresponds_to":
            if value == resource.resource_id:
                findings.append(Finding(name, "self-reference", "a resource cannot correspond to itself"))
            elif audit is not None and all(r.resource_id != value for r in audit.resources):
                findings.append(Finding(name, "dangling-reference", f"{value} is not in this audit"))
    return findings


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


def next_audit_id(project_name: str, taken: Iterable[str] = ()) -> str:
    slug = slugify(project_name) or "audit"
    pattern = re.compile(rf"^{re.escape(slug)}-(\d{{3}})$")
    used = [int(m.group(1)) for m in map(pattern.match, taken) if m]
    return f"{slug}-{max(used, default=0) + 1:03d}"


def new_audit(project: ProjectRecord, created_on: date, taken_ids: Iterable[str] = ()) -> Audit:
    findings = validate_project(project)
    if findings:
        raise InvalidProject(findings)
    return Audit(next_audit_id(project.project_name, taken_ids), project, created_on)


def set_project(audit: Audit, project: ProjectRecord) -> Audit:
    if audit.stage is Stage.CLOSED:
        raise WrongStage("the audit is closed")
    findings = validate_project(project)
    if findings:
        raise InvalidProject(findings)
    return replace(audit, project=project)


def next_resource_id(resources: Iterable[KnowledgeResource]) -> str:
    used = [int(r.resource_id[1:]) for r in resources if RESOURCE_ID_RE.match(r.resource_id)]
    return f"R{max(used, default=0) + 1:03d}"


_EDITABLE_STAGES = (Stage.EXECUTION, Stage.VERIFICATION)


def _check_editable(audit: Audit) -> None:
    if audit.stage not in _EDITABLE_STAGES:
        raise WrongStage(
            f"inventory can only change during execution or verification (audit is in {audit.stage.value})"
        )


def _raise_for(findings: list[Finding]) -> None:
    dangling = [f for f in findings if f.rule == "dangling-reference"]
    if dangling:
        raise DanglingReference(str(dangling[0]))
    if findings:
        raise InvalidResource(findings)


def add_resource(audit: Audit, resource: KnowledgeResource) -> Audit:
    _check_editable(audit)
    if resource.resource_id == "":
        resource = replace(resource, resource_id=next_resource_id(audit.resources))
    elif any(r.resource_id == resource.resource_id for r in audit.resources):
        raise DuplicateId(f"{resource.resource_id} already exists")
    _raise_for(validate_record(resource, audit))
    return replace(audit, resources=audit.resources + (resource,))


def update_resource(audit: Audit, resource: KnowledgeResource) -> Audit:
    _check_editable(audit)
    try:
        index = [r.resource_id for r in audit.resources].index(resource.resource_id)
    except ValueError:
        raise DanglingReference(f"{resource.resource_id} is not in this audit") from None
    _raise_for(validate_record(resource, audit))
    resources = audit.resources[:index] + (resource,) + audit.resources[index + 1:]
    return replace(audit, resources=resources)


def _set_status(versions: tuple, version: int, status: ReportStatus, body: Optional[str] = None) -> tuple:
    old = versions[version - 1]
    new = replace(old, status=status, body=old.body if body is None else body)
    return versions[: version - 1] + (new,) + versions[version:]


def record_event(audit: Audit, event: WorkflowEvent, report_body: str = "") -> Audit:
    """Append ``event`` to the log and keep report versions in step with it.

    ``report_body`` is used when the event opens a new report version
    (``step_completed(s3_1)`` or ``report_amended``).
    """
    if audit.events and event.timestamp < audit.events[-1].timestamp:
        raise IllegalTransition("event timestamp precedes the last logged event")
    state = audit.workflow
    apply(state, event.action)
    action = event.action
    versions = audit.report_versions
    if action.kind is EventKind.STEP_COMPLETED and action.step is StepId.S3_1:
        versions = versions + (ReportVersion(1, report_body),)
    elif action.kind is EventKind.REPORT_AMENDED:
        versions = versions + (ReportVersion(action.version, report_body),)
    elif action.kind is EventKind.REPORT_SENT:
        versions = _set_status(versions, action.version, ReportStatus.SENT_FOR_VALIDATION)
    elif action.kind is EventKind.VALIDATION_RECEIVED:
        status = ReportStatus.VALIDATED if action.verdict is Verdict.VALID else ReportStatus.REJECTED
        versions = _set_status(versions, action.version, status)
    return replace(audit, events=audit.events + (event,), report_versions=versions)


def set_report_body(audit: Audit, version: int, body: str) -> Audit:
    current = audit.report_version(version)
    if current.status is not ReportStatus.DRAFT:
        raise WrongStage(f"report v{version} is {current.status.value}; only drafts can be rewritten")
    return replace(audit, report_versions=_set_status(audit.report_versions, version, ReportStatus.DRAFT, body))


def mark_final(audit: Audit, version: int, body: str) -> Audit:
    if audit.final_report is not None:
        raise NotValidated(f"report v{audit.final_report.version} is already final")
    if audit.workflow.validated_version != version:
        raise NotValidated(f"report v{version} has not been validated")
    return replace(audit, report_versions=_set_status(audit.report_versions, version, ReportStatus.FINAL, body))


def check_report_versions(versions: Iterable[ReportVersion]) -> list[str]:
    problems = []
    finals = 0
    for index, v in enumerate(versions, start=1):
        if v.version != index:
            problems.append(f"report versions must be numbered 1..n; found v{v.version} at position {index}")
        if v.status is ReportStatus.FINAL:
            finals += 1
    if finals > 1:
        problems.append("at most one report version may be final")
    return problems
