"""Command-line interface: ``kaf <group> <command> ...``.

Exit status is 0 on success, 1 on a domain error (printed with its error
code), and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import io
import sys
from contextlib import redirect_stderr
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional, TextIO

from kaf import comms, crosswalk, model, reporting, workflow
from kaf.assessment import QUESTION_TEXT, score
from kaf.classification import LifecyclePhase, parse_format, parse_resource_type
from kaf.errors import InvalidInput, KafError, NotFound
from kaf.model import KnowledgeResource, Permission, ProjectRecord
from kaf.records import dump_records
from kaf.storage import Registry, parse_timestamp, project_to_record, resource_to_record
from kaf.workflow import EventKind, STEP_TITLES, StepId, Verdict, WorkflowEvent

RESOURCE_OPTIONS = {
    # field: (flag, argparse type)
    "name": ("--name", str),
    "resource_type": ("--type", parse_resource_type),
    "description": ("--description", str),
    "maintained_by": ("--maintained-by", str),
    "last_updated": ("--last-updated", str),
    "next_review_due": ("--next-review-due", str),
    "language": ("--language", str),
    "standard_compliance": ("--standard-compliance", str),
    "policy_prescribed": ("--policy-prescribed", str),
    "format": ("--format", parse_format),
    "license": ("--license", str),
    "url": ("--url", str),
    "other_location": ("--other-location", str),
    "permission_required": ("--permission-required", lambda t: None if t == "unknown" else Permission(t)),
    "lifecycle_phase": ("--lifecycle-phase", LifecyclePhase),
    "corresponds_to": ("--corresponds-to", str),
}

PROJECT_LIST_FIELDS = ("partners", "publications")


class UsageError(Exception):
    pass


def _registry(args) -> Registry:
    return Registry.from_env(args.registry)


def _audit_id(args, registry: Registry) -> str:
    if args.audit:
        return args.audit
    ids = registry.audit_ids()
    if len(ids) == 1:
        return ids[0]
    if not ids:
        raise NotFound(f"registry {registry.root} holds no audits; run 'kaf init'")
    raise UsageError("several audits in the registry; choose one with --audit")


def _timestamp(args) -> datetime:
    if getattr(args, "at", None):
        try:
            return parse_timestamp(args.at)
        except ValueError:
            raise UsageError(f"--at expects YYYY-MM-DDTHH:MM:SSZ, got {args.at!r}") from None
    return datetime.now(timezone.utc).replace(microsecond=0)


def _mutate(args, fn) -> model.Audit:
    """Load, transform and save the selected audit under its lock."""
    registry = _registry(args)
    audit_id = _audit_id(args, registry)
    with registry.lock(audit_id):
        audit = registry.load_audit(audit_id)
        audit = fn(registry, audit)
        registry.save_audit(audit)
    return audit


def _load(args) -> tuple[Registry, model.Audit]:
    registry = _registry(args)
    return registry, registry.load_audit(_audit_id(args, registry))


# -- commands ------------------------------------------------------------------


def cmd_init(args, out: TextIO) -> None:
    project = ProjectRecord(
        project_name=args.name,
        description=args.description or "",
        url=args.url,
        partners=tuple(args.partner or ()),
        funding_body=args.funding_body or "",
        ks_policy=args.ks_policy,
        contractual_clauses=args.contractual_clauses,
        km_contact=args.km_contact,
        duration=args.duration,
        publications=tuple(args.publication or ()),
    )
    created = date.fromisoformat(args.date) if args.date else datetime.now(timezone.utc).date()
    audit = _registry(args).create_audit(project, created)
    print(audit.audit_id, file=out)


def cmd_project_set(args, out: TextIO) -> None:
    if args.field not in model.PROJECT_FIELDS:
        raise UsageError(f"unknown project field {args.field!r}; choose from {', '.join(model.PROJECT_FIELDS)}")
    if args.field in PROJECT_LIST_FIELDS:
        value = tuple(args.value)
    elif len(args.value) > 1:
        raise UsageError(f"{args.field} takes a single value (quote it)")
    elif not args.value:
        value = "" if args.field in ("description", "funding_body") else None
    else:
        value = args.value[0]

    def change(registry, audit):
        return model.set_project(audit, replace(audit.project, **{args.field: value}))

    _mutate(args, change)


def cmd_project_show(args, out: TextIO) -> None:
    _, audit = _load(args)
    out.write(dump_records([project_to_record(audit.project)]))


def _resource_from_args(args, base: Optional[KnowledgeResource] = None) -> KnowledgeResource:
    values = {}
    for name in RESOURCE_OPTIONS:
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    if args.permission_required == "unknown":
        values["permission_required"] = None
    for name in getattr(args, "unset", None) or ():
        if name not in RESOURCE_OPTIONS or name in ("name", "resource_type"):
            raise UsageError(f"cannot unset {name!r}")
        values[name] = "" if name == "description" else None
    if base is not None:
        return replace(base, **values)
    missing = [RESOURCE_OPTIONS[n][0] for n in ("name", "resource_type") if n not in values]
    if missing:
        raise UsageError(f"resource add needs {' and '.join(missing)} (or --interactive)")
    return KnowledgeResource(resource_id=args.id or "", **values)


def _prompt_resource(audit: model.Audit, stdin: TextIO, out: TextIO) -> KnowledgeResource:
    """Ask for each field in turn, showing that field's findings until it is clean."""
    parsers = {name: typ for name, (_, typ) in RESOURCE_OPTIONS.items()}
    values: dict = {}
    for name in RESOURCE_OPTIONS:
        required = name in ("name", "resource_type")
        while True:
            out.write(f"{name}{' (required)' if required else ''}: ")
            out.flush()
            line = stdin.readline()
            if line == "":
                raise InvalidInput(f"input ended while reading {name}")
            text = line.rstrip("\n")
            if not text and not required:
                break
            try:
                value = parsers[name](text) if text else None
            except ValueError as exc:
                out.write(f"  ! {exc}\n")
                continue
            candidate = KnowledgeResource("R000", **{"name": "x", "resource_type": parse_resource_type("glossary"), **values, name: value})
            problems = [f for f in model.validate_record(candidate, audit) if f.field == name]
            if value is None and required:
                problems = problems or [model.Finding(name, "required", "value is required")]
            if problems:
                for finding in problems:
                    out.write(f"  ! {finding}\n")
                continue
            values[name] = value
            break
    return KnowledgeResource(resource_id="", **values)


def cmd_resource_add(args, out: TextIO) -> None:
    def change(registry, audit):
        if args.interactive:
            resource = _prompt_resource(audit, args.stdin, out)
        else:
            resource = _resource_from_args(args)
        audit = model.add_resource(audit, resource)
        print(audit.resources[-1].resource_id, file=out)
        return audit

    _mutate(args, change)


def cmd_resource_edit(args, out: TextIO) -> None:
    def change(registry, audit):
        try:
            current = audit.resource(args.resource_id)
        except KeyError:
            raise NotFound(f"no resource {args.resource_id}") from None
        return model.update_resource(audit, _resource_from_args(args, current))

    _mutate(args, change)


def cmd_resource_list(args, out: TextIO) -> None:
    _, audit = _load(args)
    for r in audit.resources:
        print(f"{r.resource_id}  {r.resource_type}  {r.name}", file=out)


def cmd_resource_show(args, out: TextIO) -> None:
    _, audit = _load(args)
    try:
        resource = audit.resource(args.resource_id)
    except KeyError:
        raise NotFound(f"no resource {args.resource_id}") from None
    out.write(dump_records([resource_to_record(resource)]))
    for finding in model.validate_record(resource, audit):
        print(f"! {finding}", file=out)


def cmd_stage_status(args, out: TextIO) -> None:
    _, audit = _load(args)
    state = audit.workflow
    done = [s.value for s in StepId if s in state.completed_steps]
    print(f"audit: {audit.audit_id} ({audit.project.project_name})", file=out)
    print(f"stage: {state.stage.value}", file=out)
    print(f"completed: {', '.join(done) or 'none'}", file=out)
    if state.current_report_version is not None:
        print(f"report: v{state.current_report_version} (loops: {state.loop_count})", file=out)
    print("next:", file=out)
    actions = sorted(workflow.legal_events(state), key=str)
    if not actions:
        print("  none (audit closed)", file=out)
    for action in actions:
        title = STEP_TITLES.get(action.step, "") if action.step else ""
        print(f"  {action}{'  ' + title if title else ''}", file=out)


def _record(args, action: workflow.Action) -> None:
    event = WorkflowEvent(_timestamp(args), action, args.note)

    def change(registry, audit):
        return reporting.advance(audit, event, registry.classification_table())

    audit = _mutate(args, change)
    print(f"{action} -> stage {audit.stage.value}", file=args.out)


def cmd_stage_step(args, out: TextIO) -> None:
    _record(args, workflow.step_completed(args.step))


def cmd_stage_event(args, out: TextIO) -> None:
    kind = EventKind(args.kind)
    if kind is EventKind.STEP_COMPLETED:
        raise UsageError("use 'kaf stage step <id>' to complete a step")
    if kind is EventKind.AUDIT_CLOSED:
        _record(args, workflow.audit_closed())
        return
    _, audit = _load(args)
    current = audit.workflow.current_report_version or 1
    if kind is EventKind.VALIDATION_RECEIVED:
        if args.verdict is None:
            raise UsageError("validation_received needs --verdict valid|invalid")
        action = workflow.validation_received(args.version or current, args.verdict)
    elif kind is EventKind.REPORT_AMENDED:
        action = workflow.report_amended(args.version or current + 1)
    else:
        action = workflow.Action(kind, version=args.version or current)
    _record(args, action)


def cmd_letter_render(args, out: TextIO) -> None:
    registry, audit = _load(args)
    overrides = {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep or key not in comms.PLACEHOLDERS:
            raise UsageError(f"--set expects <placeholder>=<value> with one of {', '.join(comms.PLACEHOLDERS)}")
        overrides[key] = value.replace("\\n", "\n")
    ctx = comms.letter_context(audit, score(audit, registry.classification_table()), **overrides)
    text = comms.render_letter(args.kind, ctx)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        version = audit.workflow.current_report_version or 0
        with registry.lock(audit.audit_id):
            registry.write_report_file(audit.audit_id, f"{args.kind}-{version}.txt", text)
    out.write(text)


def cmd_export_dc(args, out: TextIO) -> None:
    _, audit = _load(args)
    try:
        resource = audit.resource(args.resource_id)
    except KeyError:
        raise NotFound(f"no resource {args.resource_id}") from None
    text = crosswalk.serialize_dc(crosswalk.export_dc(resource))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_score(args, out: TextIO) -> None:
    registry, audit = _load(args)
    result = score(audit, registry.classification_table())
    if args.records:
        out.write(dump_records(reporting.score_record(s) for s in result.scores))
        return
    for s in result.scores:
        mark = "answered" if s.answered else "open"
        print(f"{s.question.value} {float(s.coverage):.2f} ({s.coverage}) {mark}  {QUESTION_TEXT[s.question]}", file=out)
    print(f"heuristically valid: {'yes' if result.heuristic_valid else 'no'}", file=out)
    print(f"postulate violations: {', '.join(result.postulate_violations) or 'none'}", file=out)
    print("recommendations:", file=out)
    for r in result.recommendations:
        print(f"  {r.code} {r.subject}: {r.text} [{r.dimension.value}]", file=out)
    if not result.recommendations:
        print("  none", file=out)


def cmd_report_draft(args, out: TextIO) -> None:
    def change(registry, audit):
        return reporting.refresh_draft(audit, registry.classification_table())

    audit = _mutate(args, change)
    version = audit.workflow.current_report_version
    if version is None:
        reporting.draft_report(audit)  # raises wrong-stage
    out.write(audit.report_version(version).body)


def cmd_report_finalize(args, out: TextIO) -> None:
    final = {}

    def change(registry, audit):
        doc = reporting.draft_report(audit, table=registry.classification_table())
        doc = reporting.finalize_report(audit, doc, args.feedback)
        final["doc"] = doc
        return reporting.commit_final(audit, doc)

    _mutate(args, change)
    out.write(reporting.serialize_report(final["doc"]))


def cmd_registry_list(args, out: TextIO) -> None:
    rows, warnings = _registry(args).list_audits()
    for row in rows:
        print(f"{row.audit_id}  {row.stage.value}  {row.project_name}", file=out)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)


def cmd_registry_unlock(args, out: TextIO) -> None:
    removed = _registry(args).unlock(args.audit_id)
    print("lock removed" if removed else "no lock present", file=out)


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kaf", description="Knowledge audit registry and workflow tool.")
    parser.add_argument("--registry", metavar="PATH", help="registry root (default: $KAF_REGISTRY)")
    parser.add_argument("--audit", metavar="ID", help="audit to operate on (default: the only one)")
    groups = parser.add_subparsers(dest="group", required=True)

    p = groups.add_parser("init", help="start a new audit")
    p.add_argument("--name", required=True)
    p.add_argument("--description")
    p.add_argument("--url")
    p.add_argument("--partner", action="append")
    p.add_argument("--funding-body")
    p.add_argument("--ks-policy")
    p.add_argument("--contractual-clauses")
    p.add_argument("--km-contact")
    p.add_argument("--duration")
    p.add_argument("--publication", action="append")
    p.add_argument("--date", help="creation date YYYY-MM-DD (default: today)")
    p.set_defaults(func=cmd_init)

    project = groups.add_parser("project", help="project record").add_subparsers(dest="command", required=True)
    p = project.add_parser("set", help="set or clear a project field")
    p.add_argument("field")
    p.add_argument("value", nargs="*")
    p.set_defaults(func=cmd_project_set)
    project.add_parser("show").set_defaults(func=cmd_project_show)

    resource = groups.add_parser("resource", help="inventory").add_subparsers(dest="command", required=True)
    for name in ("add", "edit"):
        p = resource.add_parser(name)
        if name == "edit":
            p.add_argument("resource_id")
            p.add_argument("--unset", action="append", metavar="FIELD")
        else:
            p.add_argument("--id", help="explicit id (default: next free Rnnn)")
            p.add_argument("--interactive", action="store_true", help="prompt field by field")
        for field, (flag, typ) in RESOURCE_OPTIONS.items():
            if field == "permission_required":
                p.add_argument(flag, dest=field, choices=("yes", "no", "unknown"))
            else:
                p.add_argument(flag, dest=field, type=typ)
        p.set_defaults(func=cmd_resource_add if name == "add" else cmd_resource_edit)
    resource.add_parser("list").set_defaults(func=cmd_resource_list)
    p = resource.add_parser("show")
    p.add_argument("resource_id")
    p.set_defaults(func=cmd_resource_show)

    stage = groups.add_parser("stage", help="audit workflow").add_subparsers(dest="command", required=True)
    stage.add_parser("status").set_defaults(func=cmd_stage_status)
    p = stage.add_parser("step", help="complete a step")
    p.add_argument("step", type=StepId, choices=list(StepId), metavar="STEP")
    p.add_argument("--note")
    p.add_argument("--at", help="event time YYYY-MM-DDTHH:MM:SSZ (default: now)")
    p.set_defaults(func=cmd_stage_step)
    p = stage.add_parser("event", help="record a verification-loop event or close the audit")
    p.add_argument("kind", choices=[k.value for k in EventKind])
    p.add_argument("--version", type=int)
    p.add_argument("--verdict", choices=[v.value for v in Verdict])
    p.add_argument("--note")
    p.add_argument("--at", help="event time YYYY-MM-DDTHH:MM:SSZ (default: now)")
    p.set_defaults(func=cmd_stage_event)

    letter = groups.add_parser("letter", help="letters").add_subparsers(dest="command", required=True)
    p = letter.add_parser("render")
    p.add_argument("kind", choices=[k.value for k in comms.LetterKind])
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--output", metavar="PATH")
    p.set_defaults(func=cmd_letter_render)

    export = groups.add_parser("export", help="metadata export").add_subparsers(dest="command", required=True)
    p = export.add_parser("dc", help="Dublin Core record for one resource")
    p.add_argument("resource_id")
    p.add_argument("--output", metavar="PATH")
    p.set_defaults(func=cmd_export_dc)

    p = groups.add_parser("score", help="score the five questions")
    p.add_argument("--records", action="store_true", help="machine-readable [score] records")
    p.set_defaults(func=cmd_score)

    report = groups.add_parser("report", help="reports").add_subparsers(dest="command", required=True)
    report.add_parser("draft").set_defaults(func=cmd_report_draft)
    p = report.add_parser("finalize")
    p.add_argument("--feedback", required=True)
    p.set_defaults(func=cmd_report_finalize)

    reg = groups.add_parser("registry", help="registry maintenance").add_subparsers(dest="command", required=True)
    reg.add_parser("list").set_defaults(func=cmd_registry_list)
    p = reg.add_parser("unlock", help="clear a stale lock")
    p.add_argument("audit_id")
    p.set_defaults(func=cmd_registry_unlock)
    return parser


@dataclass
class CliResult:
    status: int
    output: str
    errors: str


def _execute(argv, out: TextIO, err: TextIO, stdin: TextIO) -> int:
    parser = build_parser()
    try:
        with redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.stdin = stdin
    args.out = out
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"kaf: usage error: {exc}", file=err)
        return 2
    except KafError as exc:
        print(f"error: {exc.code}: {exc}", file=err)
        return 1
    return 0


def run(argv: list[str], stdin: Optional[TextIO] = None) -> CliResult:
    """Run the CLI in-process and capture its output."""
    out, err = io.StringIO(), io.StringIO()
    old_stderr = sys.stderr
    sys.stderr = err
    try:
        status = _execute(argv, out, err, stdin or io.StringIO())
    finally:
        sys.stderr = old_stderr
    return CliResult(status, out.getvalue(), err.getvalue())


def main(argv: Optional[list[str]] = None) -> int:
    return _execute(sys.argv[1:] if argv is None else argv, sys.stdout, sys.stderr, sys.stdin)


if __name__ == "__main__":
    sys.exit(main())
