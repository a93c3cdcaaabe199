"""Observation rendering: result sets to the bracketed list format the policy sees."""

from __future__ import annotations

from ..kb import KnowledgeBase, Term
from .ast import ResultSet


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_term(term: Term, kb: KnowledgeBase) -> str:
    """Labels and literals render double-quoted; unlabeled IRIs render bare."""
    if term.is_iri:
        label = kb.label_of(term)
        return _quote(label) if label is not None else term.value
    return _quote(term.value)


def render_results(rs: ResultSet, kb: KnowledgeBase, max_items: int = 10) -> str:
    if max_items < 1:
        raise ValueError("max_items must be positive")
    if not rs.rows:
        return "[]"
    if len(rs.columns) == 1:
        col = rs.columns[0]
        items = [render_term(row[col], kb) for row in rs.rows[:max_items]]
    else:
        items = [
            "(" + ", ".join(render_term(row[c], kb) for c in rs.columns) + ")" for row in rs.rows[:max_items]
        ]
    if len(rs.rows) > max_items or rs.truncated:
        items.append("...")
    return "[" + ", ".join(items) + "]"
