"""Local audit registry: directory layout, codecs, event log, locking.

Layout under the registry root::

    <audit_id>/audit.kaf        audit header, project record, report version statuses
    <audit_id>/resources.kaf    one [resource] record per inventory row
    <audit_id>/events.log       workflow events, one per line, append-only
    <audit_id>/reports/         report-v<N>.kaf, report-final.kaf, letters
    classification.kaf          optional classification table overrides

Workflow state is never written; it is rebuilt from ``events.log`` on load.
"""

from __future__ import annotations

import json
import logging
import os
import re
import socket
import tempfile
from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional

from kaf.classification import (
    BUILTIN_TABLE,
    Classification,
    LifecyclePhase,
    apply_overrides,
    parse_format,
    parse_resource_type,
)
from kaf.errors import IoFailure, KafError, LockContended, NotFound, ParseError
from kaf.model import (
    PROJECT_FIELDS,
    RESOURCE_FIELDS,
    Audit,
    KnowledgeResource,
    Permission,
    ProjectRecord,
    ReportStatus,
    ReportVersion,
    check_report_versions,
    new_audit,
    validate_project,
    validate_record,
)
from kaf.records import Record, dump_records, parse_records
from kaf.workflow import Action, Stage, WorkflowEvent, replay

log = logging.getLogger(__name__)

ENV_VAR = "KAF_REGISTRY"
LOCK_NAME = ".lock"

_LIST_FIELDS = {"partners": "partner", "publications": "publication"}


# -- record codecs -------------------------------------------------------------


def _encode_fields(obj, names) -> list:
    out = []
    for name in names:
        value = getattr(obj, name)
        if isinstance(value, tuple):
            out.extend((_LIST_FIELDS[name], item) for item in value)
        elif value is not None and value != "":
            out.append((name, str(value)))
    return out + list(obj.extra)


def _decode_fields(record: Record, names, parsers: Mapping, source: str) -> dict:
    """Collect known fields (parsed) and unknown ones (verbatim, under ``extra``)."""
    list_names = {v: k for k, v in _LIST_FIELDS.items() if k in names}
    values: dict = {}
    lists: dict = {k: [] for k in list_names.values()}
    extra = []
    for (name, text), line in zip(record.fields, record.lines[1:] or [0] * len(record.fields)):
        if name in list_names:
            lists[list_names[name]].append(text)
        elif name in names:
            if name in values:
                raise ParseError(line, f"field {name!r} repeated", source)
            try:
                values[name] = parsers.get(name, str)(text)
            except ValueError as exc:
                raise ParseError(line, f"{name}: {exc}", source) from None
        else:
            extra.append((name, text))
    values.update({k: tuple(v) for k, v in lists.items()})
    values["extra"] = tuple(extra)
    return values


def _require(record: Record, values: dict, names, source: str) -> None:
    for name in names:
        if name not in values:
            raise ParseError(record.lines[0] if record.lines else 0, f"[{record.type}] lacks {name!r}", source)


def _reject_findings(record: Record, findings, source: str) -> None:
    if findings:
        first = findings[0]
        raise ParseError(record.line_of(_LIST_FIELDS.get(first.field, first.field)), str(first), source)


def project_to_record(project: ProjectRecord) -> Record:
    return Record("project", tuple(_encode_fields(project, PROJECT_FIELDS)))


def project_from_record(record: Record, source: str = "audit.kaf") -> ProjectRecord:
    values = _decode_fields(record, PROJECT_FIELDS, {}, source)
    _require(record, values, ("project_name",), source)
    project = ProjectRecord(**values)
    _reject_findings(record, validate_project(project), source)
    return project


_RESOURCE_PARSERS = {
    "resource_type": parse_resource_type,
    "format": parse_format,
    "permission_required": Permission,
    "lifecycle_phase": LifecyclePhase,
}


def resource_to_record(resource: KnowledgeResource, rtype: str = "resource", extra_fields=()) -> Record:
    fields = _encode_fields(resource, RESOURCE_FIELDS)
    # derived fields go before unknown ones so canonical order stays fixed
    known = fields[: len(fields) - len(resource.extra)]
    return Record(rtype, tuple(known + list(extra_fields) + list(resource.extra)))


def resource_from_record(record: Record, source: str = "resources.kaf") -> KnowledgeResource:
    values = _decode_fields(record, RESOURCE_FIELDS, _RESOURCE_PARSERS, source)
    _require(record, values, ("resource_id", "name", "resource_type"), source)
    resource = KnowledgeResource(**values)
    _reject_findings(record, validate_record(resource), source)
    return resource


def _parse_int(text: str) -> int:
    if not re.fullmatch(r"[1-9]\d*", text):
        raise ValueError(f"{text!r} is not a positive integer")
    return int(text)


def _parse_date(text: str) -> date:
    if not re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
        raise ValueError(f"{text!r} is not YYYY-MM-DD")
    return date.fromisoformat(text)


def audit_to_text(audit: Audit) -> str:
    records = [
        Record("audit", (("audit_id", audit.audit_id), ("created_on", audit.created_on.isoformat())) + audit.extra),
        project_to_record(audit.project),
    ]
    for v in audit.report_versions:
        records.append(Record("report_version", (("version", str(v.version)), ("status", v.status.value)) + v.extra))
    records.extend(audit.extra_records)
    return dump_records(records)


def audit_header_from_text(text: str, source: str = "audit.kaf") -> dict:
    """Decode audit.kaf into keyword arguments for :class:`Audit` (bodies left empty)."""
    records = parse_records_from(text, source)
    header = project = None
    versions = []
    extra_records = []
    for record in records:
        if record.type == "audit":
            if header is not None:
                raise ParseError(record.lines[0], "more than one [audit] record", source)
            header = _decode_fields(
                record, ("audit_id", "created_on"), {"created_on": _parse_date}, source
            )
            _require(record, header, ("audit_id", "created_on"), source)
        elif record.type == "project":
            if project is not None:
                raise ParseError(record.lines[0], "more than one [project] record", source)
            project = project_from_record(record, source)
        elif record.type == "report_version":
            values = _decode_fields(
                record, ("version", "status"), {"version": _parse_int, "status": ReportStatus}, source
            )
            _require(record, values, ("version", "status"), source)
            versions.append((record, ReportVersion(values["version"], "", values["status"], values["extra"])))
        else:
            extra_records.append(record)
    if header is None or project is None:
        raise ParseError(1, "audit.kaf needs one [audit] and one [project] record", source)
    problems = check_report_versions(v for _, v in versions)
    if problems:
        raise ParseError(versions[0][0].lines[0], problems[0], source)
    return dict(
        audit_id=header["audit_id"],
        created_on=header["created_on"],
        extra=header["extra"],
        project=project,
        report_versions=tuple(v for _, v in versions),
        extra_records=tuple(Record(r.type, r.fields) for r in extra_records),
    )


def resources_to_text(resources) -> str:
    return dump_records(resource_to_record(r) for r in resources)


def resources_from_text(text: str, source: str = "resources.kaf") -> tuple:
    out = []
    seen: dict = {}
    for record in parse_records_from(text, source):
        if record.type != "resource":
            raise ParseError(record.lines[0], f"unexpected record type [{record.type}]", source)
        resource = resource_from_record(record, source)
        if resource.resource_id in seen:
            raise ParseError(record.lines[0], f"duplicate resource id {resource.resource_id}", source)
        seen[resource.resource_id] = resource
        out.append(resource)
    for resource in out:
        if resource.corresponds_to is not None and resource.corresponds_to not in seen:
            raise ParseError(0, f"{resource.resource_id}: corresponds_to {resource.corresponds_to} is dangling", source)
    return tuple(out)


def parse_records_from(text: str, source: str) -> list[Record]:
    try:
        return parse_records(text)
    except ParseError as exc:
        raise ParseError(exc.line, exc.reason, source) from None


# -- event log -----------------------------------------------------------------

_EVENT_RE = re.compile(
    r"^(?P<ts>\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d{6})?Z) "
    r"(?P<action>[a-z_]+(?:\([^()\s]*\))?)"
    r"(?P<rest>(?: [a-z_]+=.*)?)$"
)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    fmt = "%Y-%m-%dT%H:%M:%S.%fZ" if "." in text else "%Y-%m-%dT%H:%M:%SZ"
    return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)


def format_event(event: WorkflowEvent) -> str:
    line = f"{format_timestamp(event.timestamp)} {event.action}"
    if event.note is not None:
        line += " note=" + json.dumps(event.note, ensure_ascii=False)
    return line


def parse_event(line: str) -> WorkflowEvent:
    m = _EVENT_RE.match(line)
    if not m:
        raise ValueError("expected '<timestamp> <event>[(arg)] [key=value ...]'")
    timestamp = parse_timestamp(m["ts"])
    action = Action.parse(m["action"])
    note = None
    rest = m["rest"]
    decoder = json.JSONDecoder()
    while rest:
        key, sep, tail = rest[1:].partition("=")
        if key != "note" or note is not None:
            raise ValueError(f"unexpected payload key {key!r}")
        if not tail.startswith('"'):
            raise ValueError("note must be a quoted string")
        try:
            note, end = decoder.raw_decode(tail)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad note: {exc.msg}") from None
        rest = tail[end:]
        if rest and not rest.startswith(" "):
            raise ValueError("payload pairs are space-separated")
    event = WorkflowEvent(timestamp, action, note)
    if format_event(event) != line:
        raise ValueError("event line is not in canonical form")
    return event


def events_to_text(events) -> str:
    return "".join(format_event(e) + "\n" for e in events)


def events_from_text(text: str, source: str = "events.log") -> tuple:
    if "\r" in text:
        raise ParseError(text[: text.index("\r")].count("\n") + 1, "carriage return in event log", source)
    if text and not text.endswith("\n"):
        raise ParseError(text.count("\n") + 1, "event log must end with a line feed", source)
    events = []
    for number, line in enumerate(text.split("\n")[:-1], start=1):
        try:
            events.append(parse_event(line))
        except ValueError as exc:
            raise ParseError(number, str(exc), source) from None
    return tuple(events)


# -- registry ------------------------------------------------------------------


@dataclass(frozen=True)
class AuditSummary:
    audit_id: str
    project_name: str
    stage: Stage


def _atomic_write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc


def _read(path: Path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(1, f"not UTF-8: {exc.reason}", path.name) from None
    except OSError as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc


class Registry:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.owner = f"{socket.gethostname()}:{os.getpid()}"
        self._held: set = set()

    @classmethod
    def from_env(cls, root: Optional[str] = None) -> Registry:
        root = root or os.environ.get(ENV_VAR)
        if not root:
            raise NotFound(f"no registry given; pass --registry or set {ENV_VAR}")
        return cls(root)

    def audit_dir(self, audit_id: str) -> Path:
        if not re.fullmatch(r"[a-z0-9][a-z0-9\-]*", audit_id):
            raise NotFound(f"{audit_id!r} is not a valid audit id")
        return self.root / audit_id

    def reports_dir(self, audit_id: str) -> Path:
        return self.audit_dir(audit_id) / "reports"

    def audit_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and not p.name.startswith("."))

    # locking

    @contextmanager
    def lock(self, audit_id: str) -> Iterator[None]:
        if audit_id in self._held:
            yield
            return
        path = self.audit_dir(audit_id) / LOCK_NAME
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            try:
                owner = path.read_text(encoding="utf-8").strip()
            except OSError:
                owner = "unknown"
            raise LockContended(f"{audit_id} is locked by {owner}; use 'registry unlock' to clear a stale lock") from None
        except OSError as exc:
            raise IoFailure(f"creating lock {path}: {exc}") from exc
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.owner + "\n")
        self._held.add(audit_id)
        try:
            yield
        finally:
            self._held.discard(audit_id)
            try:
                path.unlink()
            except FileNotFoundError:
                pass

    def unlock(self, audit_id: str) -> bool:
        """Remove a (stale) lock file; returns whether one existed."""
        path = self.audit_dir(audit_id) / LOCK_NAME
        try:
            path.unlink()
        except FileNotFoundError:
            return False
        return True

    # audits

    def create_audit(self, project: ProjectRecord, created_on: date) -> Audit:
        self.root.mkdir(parents=True, exist_ok=True)
        taken = set(self.audit_ids())
        while True:
            audit = new_audit(project, created_on, taken)
            try:
                self.audit_dir(audit.audit_id).mkdir()
            except FileExistsError:
                taken.add(audit.audit_id)
                continue
            break
        self.save_audit(audit)
        return audit

    def save_audit(self, audit: Audit) -> None:
        directory = self.audit_dir(audit.audit_id)
        with self.lock(audit.audit_id):
            _atomic_write(directory / "audit.kaf", audit_to_text(audit))
            _atomic_write(directory / "resources.kaf", resources_to_text(audit.resources))
            _atomic_write(directory / "events.log", events_to_text(audit.events))
            reports = directory / "reports"
            for v in audit.report_versions:
                _atomic_write(reports / f"report-v{v.version}.kaf", v.body)
                if v.status is ReportStatus.FINAL:
                    _atomic_write(reports / "report-final.kaf", v.body)

    def load_audit(self, audit_id: str) -> Audit:
        directory = self.audit_dir(audit_id)
        if not (directory / "audit.kaf").is_file():
            raise NotFound(f"no audit {audit_id!r} in {self.root}")
        header = audit_header_from_text(_read(directory / "audit.kaf"))
        if header["audit_id"] != audit_id:
            raise ParseError(1, f"audit_id {header['audit_id']!r} does not match directory {audit_id!r}", "audit.kaf")
        resources_path = directory / "resources.kaf"
        resources = resources_from_text(_read(resources_path)) if resources_path.exists() else ()
        events_path = directory / "events.log"
        events = events_from_text(_read(events_path)) if events_path.exists() else ()
        versions = []
        for v in header.pop("report_versions"):
            body_path = directory / "reports" / f"report-v{v.version}.kaf"
            body = _read(body_path) if body_path.exists() else ""
            versions.append(ReportVersion(v.version, body, v.status, v.extra))
        audit = Audit(resources=resources, events=events, report_versions=tuple(versions), **header)
        replay(audit.events)  # raises ReplayError with the failing index
        return audit

    def list_audits(self) -> tuple[list[AuditSummary], list[str]]:
        """Rows for readable audits, plus one warning per audit that failed to load."""
        rows, warnings = [], []
        for audit_id in self.audit_ids():
            try:
                audit = self.load_audit(audit_id)
            except KafError as exc:
                warnings.append(f"{audit_id}: {exc.code}: {exc}")
                log.warning("skipping %s: %s", audit_id, exc)
                continue
            rows.append(AuditSummary(audit.audit_id, audit.project.project_name, audit.stage))
        return rows, warnings

    def write_report_file(self, audit_id: str, name: str, text: str) -> Path:
        path = self.reports_dir(audit_id) / name
        _atomic_write(path, text)
        return path

    # classification overrides

    @property
    def classification_path(self) -> Path:
        return self.root / "classification.kaf"

    def classification_table(self) -> Mapping[str, Classification]:
        path = self.classification_path
        if not path.exists():
            return BUILTIN_TABLE
        return load_classification(_read(path), "classification.kaf")


def load_classification(text: str, source: str = "classification.kaf") -> dict:
    overrides = {}
    for record in parse_records_from(text, source):
        if record.type != "classification":
            raise ParseError(record.lines[0], f"unexpected record type [{record.type}]", source)
        fields = dict(record.fields)
        key = fields.pop("resource_type", None)
        if key is None:
            raise ParseError(record.lines[0], "[classification] needs resource_type", source)
        overrides[key] = fields
    try:
        return apply_overrides(BUILTIN_TABLE, overrides)
    except ValueError as exc:
        raise ParseError(1, str(exc), source) from None
