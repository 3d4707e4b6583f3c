from dataclasses import replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from kaf.assessment import score
from kaf.classification import FormatTag, ResourceType
from kaf.errors import InvalidInput, NotValidated, ParseError, WrongStage
from kaf.model import KnowledgeResource, Permission, ProjectRecord, ReportStatus, add_resource, new_audit
from kaf.reporting import (
    advance,
    commit_final,
    draft_report,
    finalize_report,
    parse_report,
    refresh_draft,
    serialize_report,
)
from kaf.workflow import (
    StepId,
    WorkflowEvent,
    interview_held,
    report_amended,
    report_sent,
    step_completed,
    validation_received,
)

from strategies import inventories

REPORT_FIXTURE = Path(__file__).parent / "fixtures" / "report.kaf"
T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


class Driver:
    """Feeds events through ``advance`` with increasing timestamps."""

    def __init__(self, audit):
        self.audit = audit
        self.ts = T0

    def __call__(self, *actions):
        for action in actions:
            self.ts += timedelta(hours=1)
            self.audit = advance(self.audit, WorkflowEvent(self.ts, action))
        return self.audit


def verifying(resources=None):
    run = Driver(new_audit(ProjectRecord("Nectise", km_contact="A. Smith"), date(2024, 1, 1)))
    run(*(step_completed(s) for s in ("s1_1", "s1_2", "s1_3", "s1_4")))
    if resources is None:
        for r in default_resources():
            run.audit = add_resource(run.audit, r)
    else:
        # generated inventories may link forward, so install them whole
        run.audit = replace(run.audit, resources=tuple(resources))
    run(step_completed("s2_1"), step_completed("s2_2"), step_completed("s3_1"))
    return run


def default_resources():
    return [
        KnowledgeResource("R001", "Spec", ResourceType.SYSTEM_SPECIFICATION, url="https://n.org/spec",
                          permission_required=Permission.NO, format=FormatTag.PDF),
        KnowledgeResource("R002", "Diagram", ResourceType.SYSTEM_DIAGRAM),
    ]


def test_draft_has_one_row_per_resource():
    doc = draft_report(verifying().audit)
    assert len(doc.rows) == 2
    assert doc.version == 1 and doc.status is ReportStatus.DRAFT
    assert [row.shared for row in doc.rows] == [True, None]
    assert doc.postulate_violations == ("R002",)


def test_draft_during_execution_is_wrong_stage():
    audit = new_audit(ProjectRecord("P"), date(2024, 1, 1))
    with pytest.raises(WrongStage):
        draft_report(audit)


def test_regenerating_is_byte_identical():
    audit = verifying().audit
    assert serialize_report(draft_report(audit)) == serialize_report(draft_report(audit))


def test_new_version_gets_a_body():
    audit = verifying().audit
    assert parse_report(audit.report_version(1).body) == draft_report(audit)


def test_loop_produces_versions_and_auto_step():
    run = verifying()
    run(report_sent(1), validation_received(1, "invalid"), interview_held(1), report_amended(2), report_sent(2),
        validation_received(2, "valid"))
    audit = run.audit
    assert [v.status for v in audit.report_versions] == [ReportStatus.REJECTED, ReportStatus.VALIDATED]
    assert StepId.S4_1 in audit.workflow.completed_steps
    assert audit.events[-1].note == "report v2 validated"


def test_finalize_validated_version():
    run = verifying()
    run(report_sent(1), validation_received(1, "invalid"), interview_held(1), report_amended(2), report_sent(2),
        validation_received(2, "valid"))
    doc = finalize_report(run.audit, draft_report(run.audit), "Team agreed\nwith two caveats")
    assert doc.status is ReportStatus.FINAL and doc.version == 2
    audit = commit_final(run.audit, doc)
    assert audit.final_report.version == 2
    assert parse_report(audit.final_report.body) == doc
    with pytest.raises(NotValidated):
        finalize_report(audit, draft_report(audit), "again")


def test_finalize_stale_version_rejected():
    run = verifying()
    run(report_sent(1), validation_received(1, "invalid"), interview_held(1), report_amended(2))
    stale = replace(draft_report(run.audit), version=1)
    with pytest.raises(NotValidated):
        finalize_report(run.audit, stale, "")
    with pytest.raises(NotValidated):
        finalize_report(run.audit, draft_report(run.audit), "")  # v2 not validated yet


def test_feedback_must_be_storable():
    run = verifying()
    run(report_sent(1), validation_received(1, "valid"))
    with pytest.raises(InvalidInput):
        finalize_report(run.audit, draft_report(run.audit), "a\n>>>\nb")


def test_sent_report_body_frozen():
    run = verifying()
    run(report_sent(1))
    body = run.audit.report_version(1).body
    assert refresh_draft(run.audit) is run.audit
    assert run.audit.report_version(1).body == body


def test_fixture_report_parses_and_reserializes():
    text = REPORT_FIXTURE.read_text(encoding="utf-8")
    doc = parse_report(text)
    assert doc.version == 2 and doc.status is ReportStatus.FINAL
    assert doc.feedback == "Looks right"
    assert [r.code for r in doc.recommendations][:2] == ["REC-FORMAT", "REC-FORMAT"]
    assert serialize_report(doc) == text


@pytest.mark.parametrize(
    "text",
    [
        "",
        "[project]\nproject_name = P\n",
        "[report]\naudit_id = a\n\n[project]\nproject_name = P\n",
        REPORT_FIXTURE.read_text(encoding="utf-8").replace("coverage = 1/2", "coverage = 3/2", 1),
        REPORT_FIXTURE.read_text(encoding="utf-8").replace("[rec]", "[recommendation]", 1),
    ],
)
def test_malformed_reports_are_parse_errors(text):
    with pytest.raises(ParseError):
        parse_report(text)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(inventories(8))
def test_report_round_trip(rs):
    audit = verifying(rs).audit
    doc = draft_report(audit)
    assert len(doc.rows) == len(rs)
    assert parse_report(serialize_report(doc)) == doc
    assert doc.scores == score(audit).scores
