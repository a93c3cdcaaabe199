"""The three agent-facing KB tools with deterministic similarity ranking.

Every operation here is total: any string input produces an observation
string, with engine diagnostics standing in for results when parsing or
evaluation fails.
"""

from __future__ import annotations

import json
import math
import re
import urllib.request
from dataclasses import dataclass
from typing import Optional, Sequence

from .kb import KnowledgeBase, Term, iri
from .sparql import EvalLimits, QueryAst, SparqlError, evaluate, parse_query, render_term
from .sparql.evaluator import term_sort_key
from .sparql.render import render_results

DEFAULT_TYPE_PREDICATE = "type.object.type"
MAX_PATTERNS = 10

_SPLIT_RE = re.compile(r"[._/\s]+")


def normalize_text(text: str) -> str:
    """Lowercase and split on dots, underscores, slashes and whitespace."""
    return " ".join(t for t in _SPLIT_RE.split(text.lower()) if t)


def _trigrams(text: str) -> set[str]:
    return {text[i : i + 3] for i in range(len(text) - 2)}


class TrigramDiceScorer:
    """Dice coefficient over character trigrams of normalized strings."""

    kind = "trigram-dice"

    def score(self, a: str, b: str) -> float:
        na, nb = normalize_text(a), normalize_text(b)
        if len(na) < 3 or len(nb) < 3:
            return 1.0 if na == nb else 0.0
        ta, tb = _trigrams(na), _trigrams(nb)
        return 2 * len(ta & tb) / (len(ta) + len(tb))


class TokenJaccardScorer:
    kind = "token-jaccard"

    def score(self, a: str, b: str) -> float:
        ta = set(normalize_text(a).split())
        tb = set(normalize_text(b).split())
        if not ta and not tb:
            return 1.0
        if not ta or not tb:
            return 0.0
        return len(ta & tb) / len(ta | tb)


class RemoteEmbeddingScorer:
    """Cosine similarity from an OpenAI-compatible /embeddings endpoint,
    mapped to [0, 1]. Stateless; safe for concurrent in-flight calls."""

    kind = "remote-embedding"

    def __init__(self, endpoint_url: str, model_name: str, api_key: Optional[str] = None, timeout: float = 30.0):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.model_name = model_name
        self.api_key = api_key
        self.timeout = timeout

    def _embed(self, texts: Sequence[str]) -> list[list[float]]:
        body = json.dumps({"model": self.model_name, "input": list(texts)}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(f"{self.endpoint_url}/embeddings", data=body, headers=headers)
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        data = sorted(payload["data"], key=lambda d: d.get("index", 0))
        return [d["embedding"] for d in data]

    def score(self, a: str, b: str) -> float:
        va, vb = self._embed([a, b])
        dot = sum(x * y for x, y in zip(va, vb))
        norm = math.sqrt(sum(x * x for x in va)) * math.sqrt(sum(y * y for y in vb))
        if norm == 0:
            return 0.0
        return min(1.0, max(0.0, (1.0 + dot / norm) / 2.0))


def make_scorer(kind: str = "trigram-dice", **kwargs):
    if kind == "trigram-dice":
        return TrigramDiceScorer()
    if kind == "token-jaccard":
        return TokenJaccardScorer()
    if kind == "remote-embedding":
        return RemoteEmbeddingScorer(**kwargs)
    raise ValueError(f"unknown similarity scorer {kind!r}")


def similarity(scorer, a: str, b: str) -> float:
    return scorer.score(a, b)


@dataclass(frozen=True)
class PatternSummary:
    """One ranked subgraph shape around the anchor variable."""

    anchor_role: str  # head | tail
    path: tuple[str, ...]  # 1 or 2 predicate IRIs
    sample_value: Term
    support: int

    def render(self, anchor_var: str, kb: KnowledgeBase) -> str:
        pred = " -> ".join(self.path)
        sample = render_term(self.sample_value, kb)
        if self.anchor_role == "head":
            return f"(?{anchor_var}, {pred}, {sample})"
        return f"({sample}, {pred}, ?{anchor_var})"


def search_types(
    kb: KnowledgeBase,
    query: str,
    k: int = 10,
    scorer=None,
    type_predicate: str = DEFAULT_TYPE_PREDICATE,
) -> list[tuple[str, float]]:
    """Top-k type IRIs by similarity to the query; ties break lexicographically."""
    scorer = scorer or TrigramDiceScorer()
    universe = sorted({t.object.value for t in kb.triples_matching(predicate=iri(type_predicate)) if t.object.is_iri})
    ranked = sorted(((name, scorer.score(query, name)) for name in universe), key=lambda ns: (-ns[1], ns[0]))
    return ranked[:k]


def _anchor_variable(ast: QueryAst) -> Optional[str]:
    if "x" in ast.all_variables():
        return "x"
    if len(ast.select_vars) == 1:
        return ast.select_vars[0]
    return None


def enumerate_patterns(kb: KnowledgeBase, anchors: Sequence[Term]) -> list[PatternSummary]:
    """Distinct one- and two-hop shapes around the anchors, deduplicated by
    (anchor_role, path); the sample is the smallest-id instantiation."""
    groups: dict[tuple[str, tuple[str, ...]], list[Term]] = {}

    def add(role: str, path: tuple[str, ...], sample: Term) -> None:
        groups.setdefault((role, path), []).append(sample)

    for anchor in anchors:
        if anchor.is_iri:
            for t1 in kb.triples_matching(subject=anchor):
                add("head", (t1.predicate.value,), t1.object)
                mid = t1.object
                if mid.is_iri and mid != anchor:
                    for t2 in kb.triples_matching(subject=mid):
                        add("head", (t1.predicate.value, t2.predicate.value), t2.object)
        for t1 in kb.triples_matching(object=anchor):
            add("tail", (t1.predicate.value,), t1.subject)
            mid = t1.subject
            if mid != anchor:
                for t2 in kb.triples_matching(object=mid):
                    add("tail", (t2.predicate.value, t1.predicate.value), t2.subject)

    out = []
    for (role, path), samples in groups.items():
        sample = min(samples, key=lambda s: term_sort_key(kb, s))
        out.append(PatternSummary(role, path, sample, len(samples)))
    return out


def search_graph_patterns(
    kb: KnowledgeBase,
    sketch: str,
    semantic: Optional[str] = None,
    limits: EvalLimits = EvalLimits(),
    scorer=None,
) -> str:
    """Evaluate the sketch, enumerate subgraphs around its anchor variable,
    rank them, and render at most 10; failures render as engine diagnostics."""
    scorer = scorer or TrigramDiceScorer()
    try:
        ast = parse_query(sketch)
        anchor = _anchor_variable(ast)
        if anchor is None:
            return "SPARQL evaluation error: sketch does not bind ?x and has no single select variable"
        anchor_ast = QueryAst(
            select_vars=(anchor,),
            distinct=True,
            patterns=ast.patterns,
            values_blocks=ast.values_blocks,
            filters=ast.filters,
            order_by=ast.order_by,
            limit=ast.limit,
        )
        result = evaluate(anchor_ast, kb, limits)
    except SparqlError as exc:
        return str(exc)

    anchors = [row[anchor] for row in result.rows]
    summaries = enumerate_patterns(kb, anchors)
    if semantic is not None:
        key = lambda s: (-scorer.score(semantic, ".".join(s.path)), -s.support, s.path, s.anchor_role)
    else:
        key = lambda s: (-s.support, s.path, s.anchor_role)
    summaries.sort(key=key)
    return "[" + ", ".join(s.render(anchor, kb) for s in summaries[:MAX_PATTERNS]) + "]"


def execute_sparql(kb: KnowledgeBase, text: str, limits: EvalLimits = EvalLimits()) -> str:
    """Parse, evaluate and render; any engine failure becomes the observation."""
    try:
        result = evaluate(parse_query(text), kb, limits)
    except SparqlError as exc:
        return str(exc)
    return render_results(result, kb, max_items=MAX_PATTERNS)
