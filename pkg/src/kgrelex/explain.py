"""Path-based beam search over the augmented graph, producing traversal-path
explanations for predicted relations.

A path's score is the sum of log-sigmoid DistMult scores of its edges plus a
terminal bonus tying the endpoint back to the query relation. The search keeps
the top `beam` partial paths per step, collects every entity reached at any
depth up to `max_len`, keeps the best-scoring path per entity, and returns the
top entities by score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .aggregation import PredictedFact
from .errors import DataError, VocabError
from .kg import KnowledgeGraph, NameTriple, Provenance
from .linkpred import ModelParams, distmult_score, log_sigmoid, rgcn_forward

# Friendlier rendering for the reserved context relations, matching the
# traversal-path output style; bijective so rendered paths parse back.
_DISPLAY_NAMES = {"hasSynonym": "synonym", "hasEntityType": "entity_type"}
_DISPLAY_INVERSE = {v: k for k, v in _DISPLAY_NAMES.items()}


@dataclass(frozen=True)
class ExplanationPath:
    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    score: float


@dataclass(frozen=True)
class ExplanationAnswer:
    entity: int
    best_path: ExplanationPath
    score: float


def build_explanation_graph(train_graph: KnowledgeGraph,
                            predictions: Iterable[PredictedFact]) -> KnowledgeGraph:
    """Union of the training graph and the model's predicted facts, inserted
    with PREDICTED provenance. Entities and relations must already exist."""
    graph = train_graph.copy()
    for fact in predictions:
        if fact.head_name not in graph.entities:
            raise VocabError(f"predicted fact references unknown entity {fact.head_name!r}")
        if fact.tail_name not in graph.entities:
            raise VocabError(f"predicted fact references unknown entity {fact.tail_name!r}")
        if fact.relation not in graph.relations:
            raise VocabError(f"predicted fact references unknown relation {fact.relation!r}")
        graph.add_names(NameTriple(fact.head_name, fact.relation, fact.tail_name,
                                   Provenance.PREDICTED))
    return graph


def _better(score_a: float, path_a: tuple, score_b: float, path_b: tuple) -> bool:
    """True when (score_a, path_a) should replace (score_b, path_b): higher
    score wins, then shorter path, then lexicographically smaller sequence."""
    if score_a != score_b:
        return score_a > score_b
    return (len(path_a[0]), path_a[0], path_a[1]) < (len(path_b[0]), path_b[0], path_b[1])


def beam_search(graph: KnowledgeGraph, head: int, relation: int,
                params: ModelParams, beam: int = 128, max_len: int = 4,
                top_n: int = 10) -> list[ExplanationAnswer]:
    """Answer a (head, relation, ?) query with scored entities and the best
    traversal path reaching each. Deterministic; ties in the final ranking
    break by entity id."""
    if beam < 1:
        raise ValueError(f"beam must be >= 1, got {beam}")
    if not 1 <= max_len <= 4:
        raise ValueError(f"max_len must be in 1..4, got {max_len}")
    if not 0 <= head < len(graph.entities):
        raise VocabError(f"query head id {head} not in vocabulary")
    if not 0 <= relation < len(graph.relations):
        raise VocabError(f"query relation id {relation} not in vocabulary")

    states = rgcn_forward(graph, params)
    # terminal bonus: consistency of each candidate endpoint with the query
    bonus = np.array([
        float(log_sigmoid(distmult_score(params, states, head, relation, e)))
        for e in range(len(graph.entities))
    ])

    # partial path: (edge_score_sum, nodes, edges); total = edge sum + bonus(end)
    frontier: list[tuple[float, tuple[int, ...], tuple[int, ...]]] = [(0.0, (head,), ())]
    best: dict[int, tuple[float, tuple[tuple[int, ...], tuple[int, ...]]]] = {}
    edge_score: dict[tuple[int, int, int], float] = {}

    for _ in range(max_len):
        candidates = []
        for edge_sum, nodes, rels in frontier:
            u = nodes[-1]
            for r, v in graph.out_edges(u):
                s = edge_score.get((u, r, v))
                if s is None:
                    s = float(log_sigmoid(distmult_score(params, states, u, r, v)))
                    edge_score[(u, r, v)] = s
                candidates.append((edge_sum + s, nodes + (v,), rels + (r,)))
        if not candidates:
            break
        candidates.sort(key=lambda c: (-(c[0] + bonus[c[1][-1]]), c[1], c[2]))
        frontier = candidates[:beam]
        for edge_sum, nodes, rels in frontier:
            end = nodes[-1]
            total = edge_sum + float(bonus[end])
            prev = best.get(end)
            if prev is None or _better(total, (nodes, rels), prev[0], prev[1]):
                best[end] = (total, (nodes, rels))

    answers = [
        ExplanationAnswer(entity=e, score=score,
                          best_path=ExplanationPath(nodes, rels, score))
        for e, (score, (nodes, rels)) in best.items()
    ]
    answers.sort(key=lambda a: (-a.score, a.entity))
    return answers[:top_n]


def format_explanation(answer: ExplanationAnswer, graph: KnowledgeGraph) -> list[str]:
    """Render the answer's best path as one '{node, relation, node}' line per hop."""
    path = answer.best_path
    lines = []
    for i, rel in enumerate(path.edges):
        h = graph.entities.name_of(path.nodes[i])
        t = graph.entities.name_of(path.nodes[i + 1])
        r = graph.relations.name_of(rel)
        r = _DISPLAY_NAMES.get(r, r)
        lines.append(f"{{{h}, {r}, {t}}}")
    return lines


def parse_explanation_lines(lines: list[str]) -> tuple[list[str], list[str]]:
    """Invert format_explanation: recover the node and relation name sequences."""
    nodes: list[str] = []
    rels: list[str] = []
    for line in lines:
        line = line.strip()
        if not (line.startswith("{") and line.endswith("}")):
            raise DataError(f"explanation line not in '{{h, r, t}}' form: {line!r}")
        parts = [p.strip() for p in line[1:-1].split(", ")]
        if len(parts) != 3:
            raise DataError(f"explanation line needs three comma-separated fields: {line!r}")
        h, r, t = parts
        r = _DISPLAY_INVERSE.get(r, r)
        if not nodes:
            nodes.append(h)
        elif nodes[-1] != h:
            raise DataError(f"explanation lines do not chain at {h!r}")
        nodes.append(t)
        rels.append(r)
    return nodes, rels
