"""Exception hierarchy. The CLI maps each family onto an exit status."""

from __future__ import annotations


class DisjaxError(Exception):
    """Base class for all library errors."""


class ValidationError(DisjaxError, ValueError):
    pass


class ConfigError(DisjaxError):
    pass


class ParseError(DisjaxError):
    """Malformed N-Triples input at a 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


class LoadError(DisjaxError):
    """A TSV / JSON-lines artifact could not be loaded."""


class OracleError(DisjaxError):
    pass


class OracleTransportError(OracleError):
    def __init__(self, message: str, pair: tuple[str, str]):
        super().__init__(f"{message} (pair {pair[0]!r}, {pair[1]!r})")
        self.pair = pair


class OracleProtocolError(OracleError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class AmbiguousVerdictError(OracleError):
    def __init__(self, raw: str, pair: tuple[str, str]):
        super().__init__(f"no yes/no answer for {pair!r} after retries: {raw[:80]!r}")
        self.raw = raw
        self.pair = pair


class InvariantViolation(DisjaxError):
    """An internal contract was broken (e.g. querying an already-labeled pair)."""
