"""Engine errors and their wire-format diagnostic strings.

The diagnostic strings are part of the tool protocol: they are fed back to the
policy verbatim as observations, so their exact shape is load-bearing.
"""

from __future__ import annotations


def _fmt_seconds(seconds: float) -> str:
    return str(int(seconds)) if float(seconds).is_integer() else f"{seconds:g}"


class SparqlError(Exception):
    """Base class; str() of any subclass is the observation-ready diagnostic."""


class SparqlParseError(SparqlError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"SPARQL parse error at line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class SparqlEvalError(SparqlError):
    def __init__(self, message: str):
        super().__init__(f"SPARQL evaluation error: {message}")
        self.message = message


class SparqlResourceError(SparqlEvalError):
    """Intermediate-binding budget exceeded."""


class SparqlContractError(SparqlEvalError):
    """Evaluation was handed an AST violating its invariants."""


class SparqlTimeout(SparqlError):
    def __init__(self, limit_seconds: float, elapsed_seconds: float):
        super().__init__(f"SPARQL timeout after {_fmt_seconds(limit_seconds)}s")
        self.limit_seconds = limit_seconds
        self.elapsed_seconds = elapsed_seconds
