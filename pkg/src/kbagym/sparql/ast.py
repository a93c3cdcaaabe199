"""Query AST, result set, and evaluation limits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..kb import Term

CAST_DATATYPES = ("xsd:date", "xsd:integer", "xsd:float")

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
ORDERED_OPS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


PatternSlot = Union[Term, Variable]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternSlot
    predicate: PatternSlot
    object: PatternSlot

    def __post_init__(self):
        if isinstance(self.predicate, Term) and not self.predicate.is_iri:
            raise ValueError("pattern predicate cannot be a literal")

    def variables(self) -> set[str]:
        return {slot.name for slot in (self.subject, self.predicate, self.object) if isinstance(slot, Variable)}


@dataclass(frozen=True)
class FilterExpr:
    """Comparison of a (possibly datatype-cast) variable against a literal."""

    var: str
    op: str
    rhs: Term
    cast: Optional[str] = None

    def __post_init__(self):
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"bad filter op {self.op!r}")
        if self.rhs.is_iri:
            raise ValueError("filter rhs must be a literal")
        if self.cast is not None and self.cast not in CAST_DATATYPES:
            raise ValueError(f"unsupported cast datatype {self.cast!r}")

    @property
    def comparison_datatype(self) -> Optional[str]:
        return self.cast or self.rhs.datatype


@dataclass(frozen=True)
class OrderBy:
    var: str
    descending: bool = False
    cast: Optional[str] = None

    def __post_init__(self):
        if self.cast is not None and self.cast not in CAST_DATATYPES:
            raise ValueError(f"unsupported cast datatype {self.cast!r}")


@dataclass(frozen=True)
class QueryAst:
    select_vars: tuple[str, ...]
    distinct: bool = False
    patterns: tuple[TriplePattern, ...] = ()
    values_blocks: tuple[tuple[str, tuple[Term, ...]], ...] = ()
    filters: tuple[FilterExpr, ...] = ()
    order_by: Optional[OrderBy] = None
    limit: Optional[int] = None

    def bound_variables(self) -> set[str]:
        """Variables bound by at least one pattern or VALUES block."""
        bound = {v for v, _ in self.values_blocks}
        for p in self.patterns:
            bound |= p.variables()
        return bound

    def all_variables(self) -> set[str]:
        out = self.bound_variables()
        out.update(self.select_vars)
        return out

    def validate(self) -> None:
        if not self.select_vars:
            raise ValueError("empty SELECT variable list")
        if len(set(self.select_vars)) != len(self.select_vars):
            raise ValueError("duplicate SELECT variable")
        bound = self.bound_variables()
        for v in self.select_vars:
            if v not in bound:
                raise ValueError(f"SELECT variable ?{v} is never bound")
        for f in self.filters:
            if f.var not in bound:
                raise ValueError(f"FILTER variable ?{f.var} is never bound")
            if f.op in ORDERED_OPS and f.comparison_datatype is None:
                raise ValueError(f"ordered comparison on ?{f.var} needs a cast or typed literal")
        if self.order_by is not None and self.order_by.var not in bound:
            raise ValueError(f"ORDER BY variable ?{self.order_by.var} is never bound")
        seen_values = [v for v, _ in self.values_blocks]
        if len(set(seen_values)) != len(seen_values):
            raise ValueError("multiple VALUES blocks bind the same variable")
        if self.limit is not None and self.limit < 1:
            raise ValueError("LIMIT must be a positive integer")


@dataclass(frozen=True)
class EvalLimits:
    """Sandbox guards; the 300 s timeout is the protocol default."""

    timeout: float = 300.0
    max_rows: int = 1000
    max_intermediate_bindings: int = 100_000

    def __post_init__(self):
        if self.timeout <= 0 or self.max_rows <= 0 or self.max_intermediate_bindings <= 0:
            raise ValueError("evaluation limits must be strictly positive")


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[dict[str, Term], ...]
    truncated: bool = False

    def column(self, name: str) -> list[Term]:
        return [row[name] for row in self.rows]
