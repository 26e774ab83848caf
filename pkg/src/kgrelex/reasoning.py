"""Reasoning paths between entity pairs in a document and their scoring.

Three path kinds are extracted from sentence/mention structure: intra-sentence
co-occurrence, a two-sentence hop through a bridge entity's mentions, and a
two-sentence link licensed by a third entity mentioned in both sentences. Each
path is mapped to an explicit structural feature vector and scored by a
per-relation sigmoid classifier; a pair's probability for a relation is the
maximum over its paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DataError
from .ingestion import Document, Mention
from .kg import KnowledgeGraph


class PathKind(Enum):
    INTRA_SENTENCE = "intra"
    LOGICAL_BRIDGE = "bridge"
    COREFERENCE = "coref"


_KIND_ORDER = {PathKind.INTRA_SENTENCE: 0, PathKind.LOGICAL_BRIDGE: 1, PathKind.COREFERENCE: 2}


@dataclass(frozen=True)
class ReasoningPath:
    kind: PathKind
    head_mention: Mention
    tail_mention: Mention
    bridge_mentions: tuple[Mention, ...]
    sentence_ids: tuple[int, ...]

    def sort_key(self):
        def mpos(m: Mention):
            return (m.sent_id, m.start, m.end, m.entity_index)

        return (
            _KIND_ORDER[self.kind],
            self.sentence_ids,
            mpos(self.head_mention),
            mpos(self.tail_mention),
            tuple(mpos(m) for m in self.bridge_mentions),
        )


def extract_paths(doc: Document, head_idx: int, tail_idx: int) -> list[ReasoningPath]:
    """All reasoning paths between two entity clusters, in deterministic order."""
    n = len(doc.entity_clusters)
    if not (0 <= head_idx < n and 0 <= tail_idx < n):
        raise DataError(f"entity index out of range for document {doc.doc_id!r}")
    if head_idx == tail_idx:
        raise DataError("head and tail entity must differ")
    head_mentions = doc.entity_clusters[head_idx]
    tail_mentions = doc.entity_clusters[tail_idx]

    # mentions of every other cluster grouped by sentence
    other_by_sent: dict[int, list[Mention]] = {}
    other_clusters_by_sent: dict[int, set[int]] = {}
    for e, cluster in enumerate(doc.entity_clusters):
        if e in (head_idx, tail_idx):
            continue
        for m in cluster:
            other_by_sent.setdefault(m.sent_id, []).append(m)
            other_clusters_by_sent.setdefault(m.sent_id, set()).add(e)

    paths: list[ReasoningPath] = []
    for hm in head_mentions:
        for tm in tail_mentions:
            if hm.sent_id == tm.sent_id:
                paths.append(ReasoningPath(
                    PathKind.INTRA_SENTENCE, hm, tm, (), (hm.sent_id,)))
                continue
            s1, s2 = hm.sent_id, tm.sent_id
            # bridge hop: a third entity mentioned in both sentences
            for bm1 in other_by_sent.get(s1, []):
                for bm2 in other_by_sent.get(s2, []):
                    if bm1.entity_index == bm2.entity_index:
                        paths.append(ReasoningPath(
                            PathKind.LOGICAL_BRIDGE, hm, tm, (bm1, bm2), (s1, s2)))
            # co-reference link: some third cluster spans both sentences
            shared = other_clusters_by_sent.get(s1, set()) & other_clusters_by_sent.get(s2, set())
            if shared:
                paths.append(ReasoningPath(
                    PathKind.COREFERENCE, hm, tm, (), (s1, s2)))
    paths.sort(key=lambda p: p.sort_key())
    return paths


class PathFeaturizer:
    """Maps a reasoning path to a fixed-width numeric feature vector.

    Layout: path-kind one-hot (3), sentence distance, bridge cluster mention
    count, head/tail cluster mention counts, head/tail entity-type one-hots
    over `type_names`, count of graph relations already linking the pair in
    either direction, and the number of sentences mentioning both entities.
    """

    def __init__(self, type_names: list[str]) -> None:
        self.type_names = list(type_names)
        self._type_ids = {t: i for i, t in enumerate(self.type_names)}

    @classmethod
    def from_documents(cls, docs: list[Document]) -> "PathFeaturizer":
        types = sorted({
            doc.entity_type(i) for doc in docs for i in range(len(doc.entity_clusters))
        })
        return cls(types)

    @property
    def dim(self) -> int:
        return 9 + 2 * len(self.type_names)

    def _type_onehot(self, etype: str) -> np.ndarray:
        v = np.zeros(len(self.type_names))
        idx = self._type_ids.get(etype)
        if idx is not None:
            v[idx] = 1.0
        return v

    def featurize(self, path: ReasoningPath, doc: Document,
                  graph: KnowledgeGraph) -> np.ndarray:
        head_idx = path.head_mention.entity_index
        tail_idx = path.tail_mention.entity_index
        kind = np.zeros(3)
        kind[_KIND_ORDER[path.kind]] = 1.0
        if len(path.sentence_ids) == 1:
            distance = 0.0
        else:
            distance = float(abs(path.sentence_ids[1] - path.sentence_ids[0]))
        bridge_count = 0.0
        if path.bridge_mentions:
            bridge_count = float(len(doc.entity_clusters[path.bridge_mentions[0].entity_index]))
        head_count = float(len(doc.entity_clusters[head_idx]))
        tail_count = float(len(doc.entity_clusters[tail_idx]))

        kg_links = 0.0
        h_name, t_name = doc.canonical_name(head_idx), doc.canonical_name(tail_idx)
        if h_name in graph.entities and t_name in graph.entities:
            h = graph.entities.id_of(h_name)
            t = graph.entities.id_of(t_name)
            for r in range(len(graph.relations)):
                if graph.has_triple(h, r, t):
                    kg_links += 1.0
                if graph.has_triple(t, r, h):
                    kg_links += 1.0

        overlap = float(len(doc.mention_sentences(head_idx) & doc.mention_sentences(tail_idx)))
        return np.concatenate([
            kind,
            [distance, bridge_count, head_count, tail_count],
            self._type_onehot(doc.entity_type(head_idx)),
            self._type_onehot(doc.entity_type(tail_idx)),
            [kg_links, overlap],
        ])


@dataclass
class ScorerConfig:
    lr: float = 0.5
    epochs: int = 300
    seed: int = 0
    hidden: int = 0  # 0 = one-layer (logistic) scorer per relation

    def validate(self) -> None:
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.hidden < 0:
            raise ConfigError(f"hidden must be >= 0, got {self.hidden}")


class ReasoningScorer:
    """Per-relation path scorer: sigmoid over a linear (or one-hidden-layer)
    transform of the path features."""

    def __init__(self, relation_names: list[str], featurizer: PathFeaturizer,
                 hidden: int = 0) -> None:
        self.relation_names = list(relation_names)
        self.featurizer = featurizer
        self.hidden = hidden
        n_rel, dim = len(relation_names), featurizer.dim
        if hidden:
            self.w1 = np.zeros((n_rel, hidden, dim))
            self.b1 = np.zeros((n_rel, hidden))
            self.w2 = np.zeros((n_rel, hidden))
            self.b2 = np.zeros(n_rel)
        else:
            self.weights = np.zeros((n_rel, dim))
            self.bias = np.zeros(n_rel)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def arrays(self) -> list[np.ndarray]:
        if self.hidden:
            return [self.w1, self.b1, self.w2, self.b2]
        return [self.weights, self.bias]

    def logits(self, features: np.ndarray) -> np.ndarray:
        """(n_paths, n_relations) pre-sigmoid scores for a feature matrix."""
        features = np.atleast_2d(features)
        if features.shape[1] != self.featurizer.dim:
            raise ConfigError(
                f"feature width {features.shape[1]} does not match scorer "
                f"dimensionality {self.featurizer.dim}"
            )
        if self.hidden:
            pre = np.einsum("rhf,pf->prh", self.w1, features) + self.b1[None]
            act = np.maximum(pre, 0.0)
            return np.einsum("prh,rh->pr", act, self.w2) + self.b2[None]
        return features @ self.weights.T + self.bias[None]


def score_pair(paths: list[ReasoningPath], features: np.ndarray,
               scorer: ReasoningScorer) -> tuple[np.ndarray, PathKind | None]:
    """Per-relation probability (max over paths of each path's sigmoid score)
    and the kind of the globally best path. No paths -> zeros and no kind."""
    if not paths:
        return np.zeros(scorer.n_relations), None
    features = np.atleast_2d(features)
    if features.shape[0] != len(paths):
        raise ConfigError("one feature row per path required")
    probs = 1.0 / (1.0 + np.exp(-scorer.logits(features)))
    best_per_relation = probs.max(axis=0)
    flat = np.argmax(probs)  # first maximum in path order wins ties
    winning = paths[int(flat // probs.shape[1])]
    return best_per_relation, winning.kind


def train_scorer(pairs: list[tuple[int, int, int]], docs: list[Document],
                 graph: KnowledgeGraph, config: ScorerConfig,
                 featurizer: PathFeaturizer | None = None) -> ReasoningScorer:
    """Fit the per-relation scorer on (doc position, head, tail) pairs by
    full-batch gradient descent on binary cross-entropy, with the gradient
    routed through the best-scoring path per (pair, relation) cell.

    Pairs without any extracted path contribute nothing. Raises when no pair
    carries a positive label for any relation.
    """
    config.validate()
    if featurizer is None:
        featurizer = PathFeaturizer.from_documents(docs)
    relation_names = graph.relations.names()
    rel_ids = {name: i for i, name in enumerate(relation_names)}
    scorer = ReasoningScorer(relation_names, featurizer, config.hidden)

    samples = []  # (feature matrix, label vector)
    n_pos = 0
    for doc_pos, head_idx, tail_idx in pairs:
        doc = docs[doc_pos]
        paths = extract_paths(doc, head_idx, tail_idx)
        if not paths:
            continue
        feats = np.stack([featurizer.featurize(p, doc, graph) for p in paths])
        labels = np.zeros(len(relation_names))
        for fact in doc.gold_facts:
            if fact.head_idx == head_idx and fact.tail_idx == tail_idx:
                rid = rel_ids.get(fact.relation)
                if rid is not None:
                    labels[rid] = 1.0
        n_pos += int(labels.sum())
        samples.append((feats, labels))
    if n_pos == 0:
        raise DataError("no positive (pair, relation) examples to train the path scorer")

    if config.hidden:
        rng = np.random.default_rng(config.seed)
        scorer.w1 = rng.normal(0.0, 0.1, size=scorer.w1.shape)
        scorer.w2 = rng.normal(0.0, 0.1, size=scorer.w2.shape)

    n_cells = len(samples) * len(relation_names)
    for _ in range(config.epochs):
        grads = [np.zeros_like(a) for a in scorer.arrays()]
        for feats, labels in samples:
            logits = scorer.logits(feats)           # (n_paths, n_rel)
            best = np.argmax(logits, axis=0)        # argmax path per relation
            z = logits[best, np.arange(len(relation_names))]
            p = 1.0 / (1.0 + np.exp(-z))
            g = (p - labels) / n_cells              # d loss / d z per relation
            x = feats[best]                         # (n_rel, dim)
            if config.hidden:
                pre = np.einsum("rhf,rf->rh", scorer.w1, x) + scorer.b1
                act = np.maximum(pre, 0.0)
                grads[2] += g[:, None] * act
                grads[3] += g
                dact = g[:, None] * scorer.w2 * (pre > 0)
                grads[0] += dact[:, :, None] * x[:, None, :]
                grads[1] += dact
            else:
                grads[0] += g[:, None] * x
                grads[1] += g
        for a, ga in zip(scorer.arrays(), grads):
            a -= config.lr * ga
    return scorer
