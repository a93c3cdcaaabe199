"""Index nested-loop join evaluation with sandbox limits.

Join order is greedy most-bound-pattern-first; ties keep source order. The
final row order is the ORDER BY key when present, otherwise ascending
intern-id lexicographic order, so results are reproducible byte-for-byte.
"""

from __future__ import annotations

import time
from datetime import date
from typing import Callable, Optional

from ..kb import KnowledgeBase, Term
from .ast import EvalLimits, FilterExpr, OrderBy, QueryAst, ResultSet, TriplePattern, Variable
from .errors import SparqlContractError, SparqlResourceError, SparqlTimeout

_TIME_CHECK_EVERY = 256

Binding = dict[str, Term]


def cast_value(term: Term, datatype: str):
    """Coerce a term under a cast datatype; None signals failure."""
    if term.is_iri:
        return None
    text = term.value.strip()
    try:
        if datatype == "xsd:integer":
            return int(text)
        if datatype == "xsd:float":
            return float(text)
        if datatype == "xsd:date":
            parts = text.split("T")[0].split("-")
            if len(parts) > 3 or not parts:
                return None
            # Accept gYear / gYearMonth shapes by padding to January 1st.
            y = int(parts[0])
            m = int(parts[1]) if len(parts) > 1 else 1
            d = int(parts[2]) if len(parts) > 2 else 1
            return date(y, m, d)
    except (ValueError, OverflowError):
        return None
    return None


def filter_accepts(expr: FilterExpr, term: Term) -> bool:
    datatype = expr.comparison_datatype
    if expr.op in ("=", "!=") and expr.cast is None:
        equal = (not term.is_iri) and term.value == expr.rhs.value
        return equal if expr.op == "=" else not equal
    lhs = cast_value(term, datatype)
    rhs = cast_value(expr.rhs, datatype)
    if lhs is None or rhs is None:
        return False
    if expr.op == "=":
        return lhs == rhs
    if expr.op == "!=":
        return lhs != rhs
    if expr.op == "<":
        return lhs < rhs
    if expr.op == "<=":
        return lhs <= rhs
    if expr.op == ">":
        return lhs > rhs
    return lhs >= rhs


def term_sort_key(kb: KnowledgeBase, term: Term) -> tuple:
    """Total deterministic order: interned terms by id, then foreign terms."""
    tid = kb.term_id(term)
    if tid is not None:
        return (0, tid)
    return (1, term.kind, term.value, term.datatype or "")


def row_sort_key(kb: KnowledgeBase, columns: tuple[str, ...], row: Binding) -> tuple:
    return tuple(term_sort_key(kb, row[c]) for c in columns)


class _Joiner:
    def __init__(self, kb: KnowledgeBase, limits: EvalLimits, clock: Callable[[], float]):
        self.kb = kb
        self.limits = limits
        self.clock = clock
        self.start = clock()
        self.deadline = self.start + limits.timeout
        self.ticks = 0

    def check_time(self, force: bool = False) -> None:
        self.ticks += 1
        if force or self.ticks % _TIME_CHECK_EVERY == 0:
            now = self.clock()
            if now > self.deadline:
                raise SparqlTimeout(self.limits.timeout, now - self.start)

    def resolve(self, pattern: TriplePattern, binding: Binding):
        slots = []
        for slot in (pattern.subject, pattern.predicate, pattern.object):
            if isinstance(slot, Variable):
                slots.append((slot.name, binding.get(slot.name)))
            else:
                slots.append((None, slot))
        return slots

    def bound_count(self, pattern: TriplePattern, bound_vars: set[str]) -> int:
        n = 0
        for slot in (pattern.subject, pattern.predicate, pattern.object):
            if isinstance(slot, Term) or slot.name in bound_vars:
                n += 1
        return n

    def extend(self, bindings: list[Binding], pattern: TriplePattern) -> list[Binding]:
        out: list[Binding] = []
        for binding in bindings:
            slots = self.resolve(pattern, binding)
            matches = self.kb.triples_matching(slots[0][1], slots[1][1], slots[2][1])
            for triple in matches:
                self.check_time()
                new = dict(binding)
                ok = True
                for (name, value), actual in zip(slots, (triple.subject, triple.predicate, triple.object)):
                    if name is not None and value is None:
                        if name in new and new[name] != actual:
                            ok = False
                            break
                        new[name] = actual
                if ok:
                    out.append(new)
                    if len(out) > self.limits.max_intermediate_bindings:
                        raise SparqlResourceError(
                            f"intermediate bindings exceeded {self.limits.max_intermediate_bindings}"
                        )
        return out

    def join(self, ast: QueryAst) -> list[Binding]:
        bindings: list[Binding] = [{}]
        for var, terms in ast.values_blocks:
            bindings = [dict(b, **{var: t}) for b in bindings for t in terms]
            if len(bindings) > self.limits.max_intermediate_bindings:
                raise SparqlResourceError(f"intermediate bindings exceeded {self.limits.max_intermediate_bindings}")
        remaining = list(ast.patterns)
        bound_vars = {v for v, _ in ast.values_blocks}
        while remaining:
            self.check_time(force=True)
            best = max(range(len(remaining)), key=lambda i: (self.bound_count(remaining[i], bound_vars), -i))
            pattern = remaining.pop(best)
            bindings = self.extend(bindings, pattern)
            bound_vars |= pattern.variables()
            if not bindings:
                break
        self.check_time(force=True)
        return bindings


def _order_bindings(kb: KnowledgeBase, ast: QueryAst, bindings: list[Binding]) -> list[Binding]:
    """Canonical intern-id order, then a stable ORDER BY sort on full bindings.

    Ordering runs before projection so ORDER BY may reference non-projected
    variables (the two-hop date-sort idiom); ties keep the canonical order,
    which is keyed on the projected row first.
    """
    extra = sorted(ast.bound_variables() - set(ast.select_vars))
    bindings.sort(
        key=lambda b: (
            row_sort_key(kb, ast.select_vars, b),
            tuple(term_sort_key(kb, b[v]) for v in extra if v in b),
        )
    )
    order: Optional[OrderBy] = ast.order_by
    if order is None:
        return bindings
    if order.cast is not None:
        keyed = [(cast_value(b[order.var], order.cast), b) for b in bindings]
        ok = [(k, b) for k, b in keyed if k is not None]
        failed = [b for k, b in keyed if k is None]
    else:
        ok = [(b[order.var].value, b) for b in bindings]
        failed = []
    ok.sort(key=lambda kb_: kb_[0], reverse=order.descending)
    return [b for _, b in ok] + failed


def evaluate(
    ast: QueryAst,
    kb: KnowledgeBase,
    limits: EvalLimits = EvalLimits(),
    clock: Optional[Callable[[], float]] = None,
) -> ResultSet:
    """Evaluate a validated AST against the KB under sandbox limits.

    The injectable clock exists so timeout behaviour can be tested without
    real waiting; production callers use the monotonic default.
    """
    try:
        ast.validate()
    except ValueError as exc:
        raise SparqlContractError(str(exc)) from exc
    joiner = _Joiner(kb, limits, clock or time.monotonic)
    bindings = [b for b in joiner.join(ast) if all(filter_accepts(f, b[f.var]) for f in ast.filters)]
    bindings = _order_bindings(kb, ast, bindings)

    rows: list[Binding] = []
    seen: set = set()
    for binding in bindings:
        row = {v: binding[v] for v in ast.select_vars}
        if ast.distinct:
            key = tuple(row[c] for c in ast.select_vars)
            if key in seen:
                continue
            seen.add(key)
        rows.append(row)
    # A user LIMIT that drops rows is the query's own semantics, not a
    # truncation; only the sandbox row cap marks the result incomplete.
    cap = min(ast.limit if ast.limit is not None else limits.max_rows, limits.max_rows)
    truncated = len(rows) > cap and (ast.limit is None or ast.limit > limits.max_rows)
    return ResultSet(tuple(ast.select_vars), tuple(rows[:cap]), truncated)
