import json
from pathlib import Path

import numpy as np
import pytest

from kgrelex import ingestion
from kgrelex.kg import KnowledgeGraph, Provenance, Triple

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def hand_counts() -> dict:
    return json.loads((FIXTURES / "hand_counts.json").read_text())


@pytest.fixture()
def docs():
    return ingestion.parse_documents((FIXTURES / "docs.json").read_bytes())


def make_random_graph(rng: np.random.Generator, n_entities: int, n_relations: int,
                      n_triples: int) -> KnowledgeGraph:
    """Random directed multigraph without self-loops, all CORE_LABEL."""
    g = KnowledgeGraph()
    for i in range(n_entities):
        g.entities.add(f"e{i}")
    for i in range(n_relations):
        g.relations.add(f"r{i}")
    n_rel_total = len(g.relations)
    added = 0
    while added < n_triples:
        h = int(rng.integers(0, n_entities))
        t = int(rng.integers(0, n_entities))
        r = int(rng.integers(0, n_rel_total))
        if h == t:
            continue
        if g.add_triple(Triple(h, r, t, Provenance.CORE_LABEL)):
            added += 1
    return g


def make_bipartite_graph(rng: np.random.Generator, n_entities: int, n_relations: int,
                         n_triples: int) -> KnowledgeGraph:
    """Random graph where each relation only links head-side to tail-side
    entities, so the symmetric decoder faces no reverse-direction confounders."""
    g = KnowledgeGraph()
    for i in range(n_entities):
        g.entities.add(f"e{i}")
    for i in range(n_relations):
        g.relations.add(f"r{i}")
    half = n_entities // 2
    first = g.relations.id_of("r0")
    added = 0
    while added < n_triples:
        r = int(rng.integers(first, first + n_relations))
        h = int(rng.integers(0, half))
        t = int(rng.integers(half, n_entities))
        if g.add_triple(Triple(h, r, t, Provenance.CORE_LABEL)):
            added += 1
    return g


def finite_difference(f, arr: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. every entry of arr,
    mutating and restoring the array in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        fp = f()
        arr[idx] = orig - eps
        fm = f()
        arr[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * eps)
        it.iternext()
    return grad
