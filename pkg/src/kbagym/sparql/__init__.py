"""Parser and sandboxed evaluator for the SPARQL subset used by the KB tools."""

from .ast import (
    EvalLimits,
    FilterExpr,
    OrderBy,
    QueryAst,
    ResultSet,
    TriplePattern,
    Variable,
)
from .errors import (
    SparqlContractError,
    SparqlError,
    SparqlEvalError,
    SparqlParseError,
    SparqlResourceError,
    SparqlTimeout,
)
from .evaluator import evaluate
from .parser import parse_query
from .render import render_results, render_term

__all__ = [
    "EvalLimits",
    "FilterExpr",
    "OrderBy",
    "QueryAst",
    "ResultSet",
    "TriplePattern",
    "Variable",
    "SparqlContractError",
    "SparqlError",
    "SparqlEvalError",
    "SparqlParseError",
    "SparqlResourceError",
    "SparqlTimeout",
    "evaluate",
    "parse_query",
    "render_results",
    "render_term",
]
