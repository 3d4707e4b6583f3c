"""Exception hierarchy. Every error carries a stable ``code`` the CLI prints."""

from __future__ import annotations


class KafError(Exception):
    code = "kaf-error"


class InvalidProject(KafError):
    code = "invalid-project"

    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__("; ".join(str(f) for f in self.findings))


class InvalidResource(KafError):
    code = "invalid-resource"

    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__("; ".join(str(f) for f in self.findings))


class InvalidInput(KafError):
    code = "invalid-input"


class WrongStage(KafError):
    code = "wrong-stage"


class DuplicateId(KafError):
    code = "duplicate-id"


class DanglingReference(KafError):
    code = "dangling-reference"


class IllegalTransition(KafError):
    code = "illegal-transition"

    def __init__(self, reason: str, state=None, action=None):
        super().__init__(reason)
        self.reason = reason
        self.state = state
        self.action = action

    def __str__(self) -> str:
        # rejections are frequent while probing legal moves; describe the state only when shown
        if self.state is None:
            return self.reason
        return f"{self.action} not allowed in {self.state.describe()}: {self.reason}"


class StaleVersion(IllegalTransition):
    code = "stale-version"


class ReplayError(KafError):
    code = "replay-error"

    def __init__(self, index: int, cause: KafError):
        self.index = index
        self.cause = cause
        super().__init__(f"event {index}: {cause.code}: {cause}")


class MissingPlaceholder(KafError):
    code = "missing-placeholder"

    def __init__(self, names):
        self.names = list(names)
        super().__init__("missing placeholders: " + ", ".join(self.names))


class NotValidated(KafError):
    code = "not-validated"


class NotFound(KafError):
    code = "not-found"


class LockContended(KafError):
    code = "lock-contended"


class IoFailure(KafError):
    code = "io-failure"


class ParseError(KafError):
    code = "parse-error"

    def __init__(self, line: int, reason: str, source: str | None = None):
        self.line = line
        self.reason = reason
        self.source = source
        where = f"{source}, line {line}" if source else f"line {line}"
        super().__init__(f"{where}: {reason}")
