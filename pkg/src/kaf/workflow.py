"""Event-sourced state machine for the four audit stages.

State is never stored; it is the left fold of :func:`apply` over the event
log. :func:`legal_events` enumerates exactly the actions ``apply`` accepts,
which is what the CLI offers the auditor as next steps.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Optional

from kaf.errors import IllegalTransition, KafError, ReplayError, StaleVersion


class Stage(str, Enum):
    PLANNING = "planning"
    EXECUTION = "execution"
    VERIFICATION = "verification"
    REPORTING = "reporting"
    CLOSED = "closed"

    @property
    def rank(self) -> int:
        return list(Stage).index(self)

    def __str__(self) -> str:
        return self.value


class StepId(str, Enum):
    S1_1 = "s1_1"
    S1_2 = "s1_2"
    S1_3 = "s1_3"
    S1_4 = "s1_4"
    S2_1 = "s2_1"
    S2_2 = "s2_2"
    S3_1 = "s3_1"
    S3_2 = "s3_2"
    S3_3 = "s3_3"
    S4_1 = "s4_1"
    S4_2 = "s4_2"
    S4_3 = "s4_3"

    @property
    def stage(self) -> Stage:
        return _STAGE_BY_DIGIT[self.value[1]]

    def __str__(self) -> str:
        return self.value


_STAGE_BY_DIGIT = {
    "1": Stage.PLANNING,
    "2": Stage.EXECUTION,
    "3": Stage.VERIFICATION,
    "4": Stage.REPORTING,
}

# Steps the auditor completes with an explicit step_completed event, in order.
# s3_2 and s3_3 are recorded by report_sent and the closing verdict instead.
EXPLICIT_STEPS = {
    Stage.PLANNING: (StepId.S1_1, StepId.S1_2, StepId.S1_3, StepId.S1_4),
    Stage.EXECUTION: (StepId.S2_1, StepId.S2_2),
    Stage.VERIFICATION: (StepId.S3_1,),
    Stage.REPORTING: (StepId.S4_1, StepId.S4_2, StepId.S4_3),
}

STEP_TITLES = {
    StepId.S1_1: "identify the project",
    StepId.S1_2: "inform the project leader",
    StepId.S1_3: "initial analysis of the repository",
    StepId.S1_4: "initiate audit",
    StepId.S2_1: "analyse knowledge resources",
    StepId.S2_2: "fill out the inventory form",
    StepId.S3_1: "consolidate results in a report",
    StepId.S3_2: "send report for validation",
    StepId.S3_3: "interview and amend until validated",
    StepId.S4_1: "finalise the validated report",
    StepId.S4_2: "compare with good practice, issue recommendations",
    StepId.S4_3: "collect feedback on the process",
}


class EventKind(str, Enum):
    STEP_COMPLETED = "step_completed"
    REPORT_SENT = "report_sent"
    VALIDATION_RECEIVED = "validation_received"
    INTERVIEW_HELD = "interview_held"
    REPORT_AMENDED = "report_amended"
    AUDIT_CLOSED = "audit_closed"

    def __str__(self) -> str:
        return self.value


class Verdict(str, Enum):
    VALID = "valid"
    INVALID = "invalid"

    def __str__(self) -> str:
        return self.value


class Phase(str, Enum):
    """Position inside the stage-3 validation loop."""

    IDLE = "idle"
    AWAITING_SEND = "awaiting_send"
    AWAITING_VERDICT = "awaiting_verdict"
    AWAITING_INTERVIEW = "awaiting_interview"
    AWAITING_AMENDMENT = "awaiting_amendment"


@dataclass(frozen=True)
class Action:
    """An event kind together with its payload; what :func:`legal_events` returns."""

    kind: EventKind
    step: Optional[StepId] = None
    version: Optional[int] = None
    verdict: Optional[Verdict] = None

    def __post_init__(self) -> None:
        wants_step = self.kind is EventKind.STEP_COMPLETED
        wants_version = self.kind not in (EventKind.STEP_COMPLETED, EventKind.AUDIT_CLOSED)
        wants_verdict = self.kind is EventKind.VALIDATION_RECEIVED
        if (self.step is not None) != wants_step:
            raise ValueError(f"{self.kind.value}: step argument {'required' if wants_step else 'not allowed'}")
        if (self.version is not None) != wants_version:
            raise ValueError(f"{self.kind.value}: version argument {'required' if wants_version else 'not allowed'}")
        if (self.verdict is not None) != wants_verdict:
            raise ValueError(f"{self.kind.value}: verdict argument {'required' if wants_verdict else 'not allowed'}")
        if self.version is not None and self.version < 1:
            raise ValueError("report versions start at 1")

    @property
    def argument(self) -> Optional[str]:
        if self.step is not None:
            return self.step.value
        if self.verdict is not None:
            return f"{self.version},{self.verdict.value}"
        if self.version is not None:
            return str(self.version)
        return None

    def __str__(self) -> str:
        arg = self.argument
        return self.kind.value if arg is None else f"{self.kind.value}({arg})"

    @classmethod
    def parse(cls, text: str) -> Action:
        """Inverse of ``str``: ``kind`` or ``kind(arg)``."""
        name, sep, rest = text.partition("(")
        kind = EventKind(name)
        if not sep:
            return cls(kind)
        if not rest.endswith(")"):
            raise ValueError(f"unbalanced parenthesis in {text!r}")
        arg = rest[:-1]
        if kind is EventKind.STEP_COMPLETED:
            return cls(kind, step=StepId(arg))
        if kind is EventKind.VALIDATION_RECEIVED:
            version, comma, verdict = arg.partition(",")
            if not comma:
                raise ValueError(f"expected <version>,<verdict> in {text!r}")
            return cls(kind, version=_parse_version(version), verdict=Verdict(verdict))
        return cls(kind, version=_parse_version(arg))


def _parse_version(text: str) -> int:
    if not text.isdigit() or text.startswith("0"):
        raise ValueError(f"bad report version {text!r}")
    return int(text)


def step_completed(step: StepId | str) -> Action:
    return Action(EventKind.STEP_COMPLETED, step=StepId(step))


def report_sent(version: int) -> Action:
    return Action(EventKind.REPORT_SENT, version=version)


def validation_received(version: int, verdict: Verdict | str) -> Action:
    return Action(EventKind.VALIDATION_RECEIVED, version=version, verdict=Verdict(verdict))


def interview_held(version: int) -> Action:
    return Action(EventKind.INTERVIEW_HELD, version=version)


def report_amended(new_version: int) -> Action:
    return Action(EventKind.REPORT_AMENDED, version=new_version)


def audit_closed() -> Action:
    return Action(EventKind.AUDIT_CLOSED)


@dataclass(frozen=True)
class WorkflowEvent:
    timestamp: datetime
    action: Action
    note: Optional[str] = None

    def __post_init__(self) -> None:
        if self.timestamp.tzinfo is None:
            raise ValueError("event timestamps must be timezone-aware (UTC)")
        if self.note is not None and ("\n" in self.note or "\r" in self.note):
            raise ValueError("event notes are single-line")


@dataclass(frozen=True)
class WorkflowState:
    stage: Stage = Stage.PLANNING
    completed_steps: frozenset = field(default_factory=frozenset)
    current_report_version: Optional[int] = None
    loop_count: int = 0
    phase: Phase = Phase.IDLE
    validated_version: Optional[int] = None

    def describe(self) -> str:
        steps = ", ".join(s.value for s in StepId if s in self.completed_steps) or "none"
        return f"stage={self.stage.value} steps=[{steps}] report=v{self.current_report_version or 0} loops={self.loop_count}"


INITIAL_STATE = WorkflowState()


def _illegal(state: WorkflowState, action: Action, rule: str) -> IllegalTransition:
    return IllegalTransition(rule, state, action)


def apply(state: WorkflowState, action: Action | WorkflowEvent) -> WorkflowState:
    """Return the state after ``action``; raise if the action is not legal."""
    if isinstance(action, WorkflowEvent):
        action = action.action
    if state.stage is Stage.CLOSED:
        raise _illegal(state, action, "the audit is closed")
    kind = action.kind

    if kind is EventKind.STEP_COMPLETED:
        step = action.step
        if step.stage is not state.stage:
            raise _illegal(state, action, f"{step.value} belongs to stage {step.stage.value}")
        explicit = EXPLICIT_STEPS[state.stage]
        if step not in explicit:
            raise _illegal(state, action, f"{step.value} is recorded by the validation loop, not completed directly")
        pending = [s for s in explicit if s not in state.completed_steps]
        if not pending or pending[0] is not step:
            expected = pending[0].value if pending else "none"
            raise _illegal(state, action, f"steps complete in order; next is {expected}")
        done = state.completed_steps | {step}
        if step is StepId.S1_4:
            return replace(state, stage=Stage.EXECUTION, completed_steps=done)
        if step is StepId.S2_2:
            return replace(state, stage=Stage.VERIFICATION, completed_steps=done)
        if step is StepId.S3_1:
            return replace(state, completed_steps=done, current_report_version=1, phase=Phase.AWAITING_SEND)
        return replace(state, completed_steps=done)

    if kind is EventKind.AUDIT_CLOSED:
        if state.stage is not Stage.REPORTING:
            raise _illegal(state, action, "only a reporting-stage audit can be closed")
        if StepId.S4_3 not in state.completed_steps:
            raise _illegal(state, action, "s4_3 must be completed before closing")
        return replace(state, stage=Stage.CLOSED)

    # the remaining kinds all belong to the stage-3 loop
    if state.stage is not Stage.VERIFICATION:
        raise _illegal(state, action, f"{kind.value} only happens during verification")
    expected_phase = {
        EventKind.REPORT_SENT: Phase.AWAITING_SEND,
        EventKind.VALIDATION_RECEIVED: Phase.AWAITING_VERDICT,
        EventKind.INTERVIEW_HELD: Phase.AWAITING_INTERVIEW,
        EventKind.REPORT_AMENDED: Phase.AWAITING_AMENDMENT,
    }[kind]
    if state.phase is not expected_phase:
        if state.phase is Phase.IDLE:
            rule = "s3_1 must be completed first"
        else:
            rule = f"loop is {state.phase.value}"
        raise _illegal(state, action, rule)
    current = state.current_report_version
    wanted = current + 1 if kind is EventKind.REPORT_AMENDED else current
    if action.version != wanted:
        raise StaleVersion(f"expected version {wanted}", state, action)

    if kind is EventKind.REPORT_SENT:
        return replace(state, completed_steps=state.completed_steps | {StepId.S3_2}, phase=Phase.AWAITING_VERDICT)
    if kind is EventKind.VALIDATION_RECEIVED:
        if action.verdict is Verdict.VALID:
            return replace(
                state,
                stage=Stage.REPORTING,
                completed_steps=state.completed_steps | {StepId.S3_3},
                phase=Phase.IDLE,
                validated_version=current,
            )
        return replace(state, loop_count=state.loop_count + 1, phase=Phase.AWAITING_INTERVIEW)
    if kind is EventKind.INTERVIEW_HELD:
        return replace(state, phase=Phase.AWAITING_AMENDMENT)
    return replace(state, current_report_version=action.version, phase=Phase.AWAITING_SEND)


def replay(events: Iterable[WorkflowEvent], start: WorkflowState = INITIAL_STATE) -> WorkflowState:
    """Fold ``apply`` over ``events``; the first failure is reported with its index."""
    state = start
    previous = None
    for index, event in enumerate(events):
        if previous is not None and event.timestamp < previous:
            raise ReplayError(index, IllegalTransition("timestamps must not decrease"))
        try:
            state = apply(state, event.action)
        except KafError as exc:
            raise ReplayError(index, exc) from exc
        previous = event.timestamp
    return state


def legal_events(state: WorkflowState) -> frozenset[Action]:
    if state.stage is Stage.CLOSED:
        return frozenset()
    if state.stage is Stage.VERIFICATION and state.phase is not Phase.IDLE:
        v = state.current_report_version
        return frozenset({
            Phase.AWAITING_SEND: {report_sent(v)},
            Phase.AWAITING_VERDICT: {validation_received(v, Verdict.VALID), validation_received(v, Verdict.INVALID)},
            Phase.AWAITING_INTERVIEW: {interview_held(v)},
            Phase.AWAITING_AMENDMENT: {report_amended(v + 1)},
        }[state.phase])
    pending = [s for s in EXPLICIT_STEPS[state.stage] if s not in state.completed_steps]
    if pending:
        return frozenset({step_completed(pending[0])})
    if state.stage is Stage.REPORTING:
        return frozenset({audit_closed()})
    return frozenset()
