"""The plain-text record format shared by every registry file.

A file is a sequence of records separated by one blank line::

    [resource]
    resource_id = R001
    name = API Spec
    notes = <<<
    first line
    second line
    >>>

Names match ``[a-z][a-z0-9_]*``. A field name may repeat (list values). Values
containing a line feed, or equal to ``<<<``, use the block form; a block line
may not be exactly ``>>>``. Files use LF only and end with one LF; a file with
no records is empty.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, field

from kaf.errors import ParseError

NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")
BLOCK_OPEN = "<<<"
BLOCK_CLOSE = ">>>"


@dataclass(frozen=True)
class Record:
    type: str
    fields: tuple = ()  # ((name, value), ...)
    lines: tuple = field(default=(), compare=False)  # source line of the header, then of each field

    def get(self, name: str, default=None):
        for key, value in self.fields:
            if key == name:
                return value
        return default

    def get_all(self, name: str) -> list[str]:
        return [value for key, value in self.fields if key == name]

    def line_of(self, name: str) -> int:
        for (key, _), line in zip(self.fields, self.lines[1:]):
            if key == name:
                return line
        return self.lines[0] if self.lines else 0


def _check_value(name: str, value: str) -> None:
    if not isinstance(value, str):
        raise TypeError(f"{name}: values must be text, got {type(value).__name__}")
    if value == "":
        raise ValueError(f"{name}: empty values are not stored; omit the field")
    if "\r" in value:
        raise ValueError(f"{name}: carriage returns are not allowed")
    if "\n" in value and BLOCK_CLOSE in value.split("\n"):
        raise ValueError(f"{name}: a block value cannot contain a line that is exactly {BLOCK_CLOSE}")


def dump_records(records: Iterable[Record]) -> str:
    chunks = []
    for record in records:
        if not NAME_RE.match(record.type):
            raise ValueError(f"bad record type {record.type!r}")
        lines = [f"[{record.type}]"]
        for name, value in record.fields:
            if not NAME_RE.match(name):
                raise ValueError(f"bad field name {name!r}")
            _check_value(name, value)
            if "\n" in value or value == BLOCK_OPEN:
                lines.append(f"{name} = {BLOCK_OPEN}")
                lines.extend(value.split("\n"))
                lines.append(BLOCK_CLOSE)
            else:
                lines.append(f"{name} = {value}")
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)


def parse_records(text: str) -> list[Record]:
    """Parse ``text``; any deviation from the grammar raises :class:`ParseError`."""
    if text == "":
        return []
    if "\r" in text:
        line = text[: text.index("\r")].count("\n") + 1
        raise ParseError(line, "carriage return; files use LF line endings only")
    if not text.endswith("\n"):
        raise ParseError(text.count("\n") + 1, "file must end with a line feed")
    lines = text.split("\n")[:-1]
    records: list[Record] = []
    i = 0
    n = len(lines)
    while i < n:
        number = i + 1
        header = lines[i]
        if not (header.startswith("[") and header.endswith("]") and NAME_RE.match(header[1:-1])):
            raise ParseError(number, f"expected a record header like [name], got {header!r}")
        rtype = header[1:-1]
        fields_: list = []
        field_lines = [number]
        i += 1
        while i < n and lines[i] != "":
            number = i + 1
            line = lines[i]
            name, sep, value = line.partition(" = ")
            if not sep:
                raise ParseError(number, f"expected 'name = value', got {line!r}")
            if not NAME_RE.match(name):
                raise ParseError(number, f"bad field name {name!r}")
            if value == "":
                raise ParseError(number, "empty value")
            if value == BLOCK_OPEN:
                block = []
                i += 1
                while i < n and lines[i] != BLOCK_CLOSE:
                    block.append(lines[i])
                    i += 1
                if i >= n:
                    raise ParseError(number, f"unterminated {BLOCK_OPEN} block for {name!r}")
                value = "\n".join(block)
                if value == "":
                    raise ParseError(number, "empty block value")
                if "\n" not in value and value != BLOCK_OPEN:
                    raise ParseError(number, "single-line value written as a block")
            fields_.append((name, value))
            field_lines.append(number)
            i += 1
        if i < n:
            # blank separator; exactly one, and something must follow it
            if i + 1 >= n:
                raise ParseError(i + 1, "trailing blank line")
            if lines[i + 1] == "":
                raise ParseError(i + 2, "records are separated by exactly one blank line")
            i += 1
        records.append(Record(rtype, tuple(fields_), tuple(field_lines)))
    return records
