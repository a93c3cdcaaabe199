"""Shared test utilities: fixture paths, random KB construction, result comparison."""

import random
from pathlib import Path

from kbagym.kb import KnowledgeBase, Triple, iri, literal

DATA_DIR = Path(__file__).parent / "data"


def random_kb(rng: random.Random, n_triples: int, n_entities: int = 8, n_predicates: int = 4) -> KnowledgeBase:
    """Small random graph mixing IRI and literal objects, with some labels."""
    entities = [f"m.e{i}" for i in range(n_entities)]
    predicates = [f"dom{i}.type{i}.prop{i}" for i in range(n_predicates)]
    triples = []
    for _ in range(n_triples):
        s = iri(rng.choice(entities))
        p = iri(rng.choice(predicates))
        if rng.random() < 0.25:
            if rng.random() < 0.5:
                o = literal(str(rng.randint(0, 30)), "xsd:integer" if rng.random() < 0.5 else None)
            else:
                o = literal(f"{rng.randint(1900, 2020)}-0{rng.randint(1, 9)}-1{rng.randint(0, 9)}", "xsd:date")
        else:
            o = iri(rng.choice(entities))
        triples.append(Triple(s, p, o))
    for i in range(0, n_entities, 3):
        triples.append(Triple(iri(entities[i]), iri("type.object.name"), literal(f"Entity {i}")))
    return KnowledgeBase(triples)


def assert_same_results(result, oracle_out):
    columns, oracle_rows, oracle_truncated = oracle_out
    assert list(result.columns) == columns
    got = [tuple(row[c] for c in result.columns) for row in result.rows]
    assert got == oracle_rows
    assert result.truncated == oracle_truncated
