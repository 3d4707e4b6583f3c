"""Inventory fields to Dublin Core, and the ``dc.<element> = <value>`` text format."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from kaf.classification import LifecyclePhase, parse_format, parse_resource_type
from kaf.errors import InvalidResource
from kaf.model import DATE_RE, LANGUAGE_RE, RESOURCE_FIELDS, KnowledgeResource, Permission, is_valid_date, validate_record


class DcElement(str, Enum):
    # Order is significant: records are emitted in this order.
    TITLE = "title"
    SUBJECT = "subject"
    DESCRIPTION = "description"
    TYPE = "type"
    SOURCE = "source"
    RELATION = "relation"  # listed as "Related" in the element table
    COVERAGE = "coverage"
    CREATOR = "creator"
    PUBLISHER = "publisher"
    CONTRIBUTOR = "contributor"
    RIGHTS = "rights"
    DATE = "date"
    FORMAT = "format"
    IDENTIFIER = "identifier"
    LANGUAGE = "language"
    AUDIENCE = "audience"
    PROVENANCE = "provenance"
    RIGHTS_HOLDER = "rights_holder"
    INSTRUCTIONAL_METHOD = "instructional_method"
    ACCRUAL_METHOD = "accrual_method"
    ACCRUAL_PERIODICITY = "accrual_periodicity"
    ACCRUAL_POLICY = "accrual_policy"

    @property
    def rank(self) -> int:
        return _RANK[self]

    def __str__(self) -> str:
        return self.value


_RANK = {element: index for index, element in enumerate(DcElement)}

EXTENSION = "EXTENSION"


@dataclass(frozen=True)
class MappingRow:
    kaf_field: str
    target: object  # DcElement or EXTENSION
    prefix: str = ""


# Prefixes keep fields that share an element distinguishable, so export is lossless.
CANONICAL_TABLE: tuple = (
    MappingRow("name", DcElement.TITLE),
    MappingRow("resource_id", DcElement.IDENTIFIER),
    MappingRow("url", DcElement.IDENTIFIER),
    MappingRow("description", DcElement.DESCRIPTION),
    MappingRow("resource_type", DcElement.TYPE),
    MappingRow("maintained_by", DcElement.CONTRIBUTOR),
    MappingRow("last_updated", DcElement.DATE),
    MappingRow("language", DcElement.LANGUAGE),
    MappingRow("format", DcElement.FORMAT),
    MappingRow("license", DcElement.RIGHTS, "license: "),
    MappingRow("permission_required", DcElement.RIGHTS, "access: "),
    MappingRow("standard_compliance", DcElement.RELATION, "standard: "),
    MappingRow("other_location", DcElement.RELATION, "location: "),
    MappingRow("policy_prescribed", DcElement.PROVENANCE),
    MappingRow("next_review_due", EXTENSION),
    MappingRow("lifecycle_phase", EXTENSION),
    MappingRow("corresponds_to", DcElement.RELATION, "counterpart: "),
)

_ACCESS = {
    Permission.YES: "permission required",
    Permission.NO: "no permission required",
}


def check_table(table: Sequence[MappingRow]) -> list[str]:
    problems = []
    names = [row.kaf_field for row in table]
    for name in RESOURCE_FIELDS:
        count = names.count(name)
        if count != 1:
            problems.append(f"{name}: mapped {count} times")
    for row in table:
        if row.kaf_field not in RESOURCE_FIELDS:
            problems.append(f"{row.kaf_field}: not a resource field")
        if row.target != EXTENSION and not isinstance(row.target, DcElement):
            problems.append(f"{row.kaf_field}: bad target {row.target!r}")
    # shared elements must be told apart by prefix
    by_target: dict = {}
    for row in table:
        if row.target != EXTENSION:
            by_target.setdefault(row.target, []).append(row)
    for target, rows in by_target.items():
        prefixes = [r.prefix for r in rows if r.prefix]
        if len(set(prefixes)) != len(prefixes):
            problems.append(f"{target}: duplicate prefixes")
    return problems


def unmapped_fields(table: Sequence[MappingRow] = CANONICAL_TABLE) -> list[str]:
    return [row.kaf_field for row in table if row.target == EXTENSION]


@dataclass(frozen=True)
class DublinCoreRecord:
    pairs: tuple  # tuple[tuple[DcElement, str], ...]

    def __post_init__(self) -> None:
        last = -1
        for element, value in self.pairs:
            if not isinstance(element, DcElement):
                raise ValueError(f"{element!r} is not a Dublin Core element")
            if element.rank < last:
                raise ValueError(f"{element.value} out of element order")
            last = element.rank
            if not value or "\n" in value or "\r" in value:
                raise ValueError(f"dc.{element.value}: values are non-empty single lines")
            if element is DcElement.DATE and not (DATE_RE.match(value) and is_valid_date(value)):
                raise ValueError(f"dc.date: {value!r} is not YYYY-MM-DD")
            if element is DcElement.LANGUAGE and not LANGUAGE_RE.match(value):
                raise ValueError(f"dc.language: {value!r} is not a language tag")

    def values(self, element: DcElement) -> list[str]:
        return [v for e, v in self.pairs if e is element]


def _text(value) -> Optional[str]:
    if value is None or value == "":
        return None
    if isinstance(value, Permission):
        return _ACCESS[value]
    return str(value)


def export_dc(resource: KnowledgeResource, table: Sequence[MappingRow] = CANONICAL_TABLE) -> DublinCoreRecord:
    findings = validate_record(resource)
    if findings:
        raise InvalidResource(findings)
    pairs = []
    for row in table:
        if row.target == EXTENSION:
            continue
        text = _text(getattr(resource, row.kaf_field))
        if text is not None:
            pairs.append((row.target, row.prefix + text))
    # stable sort: ties keep table order
    pairs.sort(key=lambda pair: pair[0].rank)
    return DublinCoreRecord(tuple(pairs))


_PARSERS = {
    "resource_type": parse_resource_type,
    "format": parse_format,
    "permission_required": {text: p for p, text in _ACCESS.items()}.__getitem__,
    "lifecycle_phase": LifecyclePhase,
}


def recover_fields(record: DublinCoreRecord, table: Sequence[MappingRow] = CANONICAL_TABLE) -> dict:
    """Map an exported record back to resource field values, using ``table``."""
    recovered: dict = {}
    for element, value in record.pairs:
        rows = [r for r in table if r.target is element]
        prefixed = [r for r in rows if r.prefix and value.startswith(r.prefix)]
        if prefixed:
            row = prefixed[0]
        else:
            plain = [r for r in rows if not r.prefix]
            if not plain:
                raise ValueError(f"dc.{element.value} = {value!r} matches no mapping row")
            # resource_id and url share identifier; ids are R + 3 digits, urls never are
            row = plain[0]
            if len(plain) > 1:
                row = next((r for r in plain if r.kaf_field == "resource_id" and _looks_like_id(value)), plain[-1])
        text = value[len(row.prefix):]
        parse = _PARSERS.get(row.kaf_field, str)
        recovered[row.kaf_field] = parse(text)
    return recovered


def _looks_like_id(value: str) -> bool:
    return len(value) == 4 and value[0] == "R" and value[1:].isdigit()


def serialize_dc(record: DublinCoreRecord) -> str:
    return "".join(f"dc.{element.value} = {value}\n" for element, value in record.pairs)


def parse_dc(text: str) -> DublinCoreRecord:
    if text and not text.endswith("\n"):
        raise ValueError("DC export must end with a line feed")
    pairs = []
    for number, line in enumerate(text.split("\n")[:-1], start=1):
        head, sep, value = line.partition(" = ")
        if not sep or not head.startswith("dc."):
            raise ValueError(f"line {number}: expected 'dc.<element> = <value>'")
        try:
            element = DcElement(head[3:])
        except ValueError:
            raise ValueError(f"line {number}: unknown element {head[3:]!r}") from None
        pairs.append((element, value))
    return DublinCoreRecord(tuple(pairs))
