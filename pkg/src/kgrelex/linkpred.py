"""Relational graph convolution encoder with a DistMult decoder.

Node states are computed by per-relation message passing with mean
normalization over surviving in-edges plus an unnormalized self-loop term;
triples are scored by the bilinear diagonal form of the final states. Training
is full-batch Adam on binary cross-entropy over positive triples and uniformly
corrupted negatives, with edge dropout applied before normalization and an l2
penalty on the decoder's relation vectors. All gradients are computed
analytically in numpy so they can be audited against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .kg import KnowledgeGraph


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_sigmoid(x):
    # log(sigmoid(x)) = -log(1 + exp(-x)), computed without overflow
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 100
    dropout_self: float = 0.2
    dropout_other: float = 0.4
    l2_decoder: float = 0.01
    dim: int = 200
    neg_per_pos: int = 10
    seed: int = 0
    rgcn_layers: int = 1
    num_blocks: int = 1
    encoder: str = "rgcn"  # "rgcn" or "none" (decoder-only DistMult)
    batch_size: int = 0    # positives per update; 0 = full batch

    def validate(self) -> None:
        # lr == 0 is allowed as a degenerate no-op setting for tests
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("dropout_self", "dropout_other"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.neg_per_pos < 0:
            raise ConfigError(f"neg_per_pos must be >= 0, got {self.neg_per_pos}")
        if self.rgcn_layers < 0:
            raise ConfigError(f"rgcn_layers must be >= 0, got {self.rgcn_layers}")
        if self.num_blocks < 1 or self.dim % self.num_blocks != 0:
            raise ConfigError(
                f"num_blocks must divide dim ({self.dim}), got {self.num_blocks}"
            )
        if self.encoder not in ("rgcn", "none"):
            raise ConfigError(f"encoder must be 'rgcn' or 'none', got {self.encoder!r}")
        if self.batch_size < 0:
            raise ConfigError(f"batch_size must be >= 0, got {self.batch_size}")


@dataclass
class RgcnLayer:
    """Per-relation block weights (R, B, d/B, d/B) and a self-loop weight (B, d/B, d/B)."""

    w_rel: np.ndarray
    w_self: np.ndarray


@dataclass
class ModelParams:
    entity_emb: np.ndarray     # (|E|, d)
    relation_diag: np.ndarray  # (|R|, d)
    layers: list[RgcnLayer] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.entity_emb.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entity_emb.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_diag.shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = [self.entity_emb, self.relation_diag]
        for layer in self.layers:
            out.extend((layer.w_rel, layer.w_self))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.entity_emb.copy(),
            self.relation_diag.copy(),
            [RgcnLayer(l.w_rel.copy(), l.w_self.copy()) for l in self.layers],
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            np.zeros_like(self.entity_emb),
            np.zeros_like(self.relation_diag),
            [RgcnLayer(np.zeros_like(l.w_rel), np.zeros_like(l.w_self)) for l in self.layers],
        )

    def check_finite(self) -> None:
        for a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise NumericalError("non-finite values in model parameters")


@dataclass
class EdgeDropout:
    """Edge survival masks drawn once per training step, applied before
    the in-degree normalization is computed."""

    edge_keep: np.ndarray  # bool (n_edges,)
    self_keep: np.ndarray  # bool (n_entities,)

    @classmethod
    def draw(cls, rng: np.random.Generator, n_edges: int, n_entities: int,
             p_self: float, p_other: float) -> "EdgeDropout":
        return cls(
            edge_keep=rng.random(n_edges) >= p_other,
            self_keep=rng.random(n_entities) >= p_self,
        )


@dataclass(frozen=True)
class RankMetrics:
    hits1: float
    hits3: float
    hits10: float
    mrr: float


class _EdgeSet:
    """Graph triples as flat arrays, heads/relations/tails in sorted triple order."""

    def __init__(self, graph: KnowledgeGraph) -> None:
        triples = graph.triples()
        self.n_entities = len(graph.entities)
        self.n_relations = len(graph.relations)
        self.heads = np.array([t.head for t in triples], dtype=np.int64)
        self.rels = np.array([t.relation for t in triples], dtype=np.int64)
        self.tails = np.array([t.tail for t in triples], dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return self.heads.shape[0]


def _block_apply(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply a block-diagonal weight (B, ob, ib) to rows of x (m, B*ib)."""
    b, ob, ib = w.shape
    m = x.shape[0]
    return np.einsum("boi,mbi->mbo", w, x.reshape(m, b, ib)).reshape(m, b * ob)


def _block_apply_t(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Backpropagate g (m, B*ob) through a block-diagonal weight to the input."""
    b, ob, ib = w.shape
    m = g.shape[0]
    return np.einsum("boi,mbo->mbi", w, g.reshape(m, b, ob)).reshape(m, b * ib)


def _block_weight_grad(g: np.ndarray, x: np.ndarray, b: int) -> np.ndarray:
    m = g.shape[0]
    return np.einsum("mbo,mbi->boi", g.reshape(m, b, -1), x.reshape(m, b, -1))


@dataclass
class _LayerCache:
    h_in: np.ndarray
    z: np.ndarray
    rel_edges: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]]  # (r, src, dst, coeff)
    self_idx: np.ndarray


def _check_shapes(edges: _EdgeSet, params: ModelParams) -> None:
    if params.entity_emb.shape[0] != edges.n_entities:
        raise ConfigError(
            f"entity embedding rows ({params.entity_emb.shape[0]}) do not match "
            f"graph entities ({edges.n_entities})"
        )
    if params.relation_diag.shape[0] != edges.n_relations:
        raise ConfigError(
            f"relation vectors ({params.relation_diag.shape[0]}) do not match "
            f"graph relations ({edges.n_relations})"
        )
    if params.relation_diag.shape[1] != params.dim:
        raise ConfigError("relation vector width does not match embedding width")
    d = params.dim
    for i, layer in enumerate(params.layers):
        r, b, ob, ib = layer.w_rel.shape
        if r != edges.n_relations:
            raise ConfigError(f"layer {i}: one weight block per relation required")
        if layer.w_self.shape != (b, ob, ib):
            raise ConfigError(f"layer {i}: self-loop weight shape mismatch")
        if b * ib != d or b * ob != d:
            raise ConfigError(f"layer {i}: weight dims {b * ib}->{b * ob} do not chain with d={d}")


def _forward(edges: _EdgeSet, params: ModelParams, dropout: EdgeDropout | None,
             activation: str) -> tuple[np.ndarray, list[_LayerCache]]:
    _check_shapes(edges, params)
    if activation not in ("relu", "identity"):
        raise ConfigError(f"activation must be 'relu' or 'identity', got {activation!r}")
    n = edges.n_entities
    if dropout is None:
        edge_keep = np.ones(edges.n_edges, dtype=bool)
        self_idx = np.arange(n)
    else:
        if dropout.edge_keep.shape[0] != edges.n_edges or dropout.self_keep.shape[0] != n:
            raise ConfigError("dropout mask sizes do not match the graph")
        edge_keep = dropout.edge_keep
        self_idx = np.flatnonzero(dropout.self_keep)

    h = params.entity_emb
    caches: list[_LayerCache] = []
    for layer in params.layers:
        z = np.zeros_like(h)
        if self_idx.size:
            z[self_idx] += _block_apply(layer.w_self, h[self_idx])
        rel_edges = []
        for r in np.unique(edges.rels[edge_keep]) if edges.n_edges else []:
            sel = edge_keep & (edges.rels == r)
            src = edges.heads[sel]
            dst = edges.tails[sel]
            deg = np.bincount(dst, minlength=n)
            coeff = 1.0 / deg[dst]
            msg = _block_apply(layer.w_rel[int(r)], h[src]) * coeff[:, None]
            np.add.at(z, dst, msg)
            rel_edges.append((int(r), src, dst, coeff))
        caches.append(_LayerCache(h_in=h, z=z, rel_edges=rel_edges, self_idx=self_idx))
        h = np.maximum(z, 0.0) if activation == "relu" else z
    return h, caches


def _backward(params: ModelParams, caches: list[_LayerCache], d_states: np.ndarray,
              grads: ModelParams, activation: str) -> None:
    dh = d_states
    for layer, cache, glayer in zip(reversed(params.layers), reversed(caches),
                                    reversed(grads.layers)):
        dz = dh * (cache.z > 0.0) if activation == "relu" else dh
        dh_in = np.zeros_like(cache.h_in)
        b = layer.w_self.shape[0]
        if cache.self_idx.size:
            gs = dz[cache.self_idx]
            xs = cache.h_in[cache.self_idx]
            glayer.w_self += _block_weight_grad(gs, xs, b)
            dh_in[cache.self_idx] += _block_apply_t(layer.w_self, gs)
        for r, src, dst, coeff in cache.rel_edges:
            g = dz[dst] * coeff[:, None]
            x = cache.h_in[src]
            glayer.w_rel[r] += _block_weight_grad(g, x, b)
            np.add.at(dh_in, src, _block_apply_t(layer.w_rel[r], g))
        dh = dh_in
    grads.entity_emb += dh


def rgcn_forward(graph: KnowledgeGraph, params: ModelParams,
                 dropout: EdgeDropout | None = None,
                 activation: str = "relu") -> np.ndarray:
    """Node states after the configured propagation layers (h^(0) = embeddings
    when there are none). Messages flow along incoming edges; each (node,
    relation) sum is divided by its surviving in-degree; the self-loop term is
    left unnormalized."""
    states, _ = _forward(_EdgeSet(graph), params, dropout, activation)
    return states


def distmult_score(params: ModelParams, node_states: np.ndarray,
                   h: int, r: int, t: int) -> float:
    """Bilinear diagonal score of (h, r, t) over the given node states. The
    product is grouped as diag * (h * t) so head/tail symmetry holds exactly
    in floating point."""
    n = node_states.shape[0]
    if not (0 <= h < n and 0 <= t < n):
        raise ConfigError(f"entity id out of range for {n} node states")
    if not 0 <= r < params.relation_diag.shape[0]:
        raise ConfigError(f"relation id {r} out of range")
    return float(np.sum(params.relation_diag[r] * (node_states[h] * node_states[t])))


def triple_scores(params: ModelParams, node_states: np.ndarray,
                  examples: np.ndarray) -> np.ndarray:
    """Vectorized scores for an (m, 3) array of (head, relation, tail) rows."""
    h, r, t = examples[:, 0], examples[:, 1], examples[:, 2]
    return np.sum(params.relation_diag[r] * (node_states[h] * node_states[t]), axis=1)


def objective(graph: KnowledgeGraph, params: ModelParams, examples: np.ndarray,
              labels: np.ndarray, l2_decoder: float = 0.0,
              dropout: EdgeDropout | None = None) -> float:
    """Mean binary cross-entropy of the labeled examples plus the decoder
    l2 penalty, evaluated at the given parameters."""
    states, _ = _forward(_EdgeSet(graph), params, dropout, "relu")
    s = triple_scores(params, states, examples)
    y = np.asarray(labels, dtype=np.float64)
    bce = np.mean(y * np.logaddexp(0.0, -s) + (1.0 - y) * np.logaddexp(0.0, s))
    return float(bce + l2_decoder * np.mean(params.relation_diag ** 2))


def objective_grads(graph: KnowledgeGraph, params: ModelParams, examples: np.ndarray,
                    labels: np.ndarray, l2_decoder: float = 0.0,
                    dropout: EdgeDropout | None = None) -> tuple[float, ModelParams]:
    """Objective value and its analytic gradients for every parameter block."""
    edges = _EdgeSet(graph)
    states, caches = _forward(edges, params, dropout, "relu")
    s = triple_scores(params, states, examples)
    y = np.asarray(labels, dtype=np.float64)
    m = examples.shape[0]
    bce = np.mean(y * np.logaddexp(0.0, -s) + (1.0 - y) * np.logaddexp(0.0, s))
    loss = float(bce + l2_decoder * np.mean(params.relation_diag ** 2))

    grads = params.zeros_like()
    g = (sigmoid(s) - y) / m
    eh, er, et = examples[:, 0], examples[:, 1], examples[:, 2]
    d = params.relation_diag
    d_states = np.zeros_like(states)
    np.add.at(d_states, eh, g[:, None] * d[er] * states[et])
    np.add.at(d_states, et, g[:, None] * d[er] * states[eh])
    np.add.at(grads.relation_diag, er, g[:, None] * states[eh] * states[et])
    grads.relation_diag += (2.0 * l2_decoder / params.relation_diag.size) * params.relation_diag
    _backward(params, caches, d_states, grads, "relu")
    return loss, grads


def init_params(n_entities: int, n_relations: int, config: TrainConfig,
                rng: np.random.Generator) -> ModelParams:
    """Zero-mean embeddings with identity-plus-noise self-loop weights, so the
    initial propagation is near-identity and gradients reach every entity
    through its own surviving rectified units."""
    d = config.dim
    b = config.num_blocks
    scale = 1.0 / np.sqrt(d)
    entity_emb = rng.normal(0.0, scale, size=(n_entities, d))
    relation_diag = rng.normal(0.0, scale, size=(n_relations, d))
    layers = []
    n_layers = config.rgcn_layers if config.encoder == "rgcn" else 0
    w_scale = np.sqrt(float(b) / d)
    eye = np.broadcast_to(np.eye(d // b), (b, d // b, d // b))
    for _ in range(n_layers):
        layers.append(RgcnLayer(
            w_rel=rng.normal(0.0, w_scale, size=(n_relations, b, d // b, d // b)),
            w_self=eye + rng.normal(0.0, 0.1 * w_scale, size=(b, d // b, d // b)),
        ))
    return ModelParams(entity_emb.astype(np.float64), relation_diag, layers)


def _sample_negatives(positives: np.ndarray, n_entities: int, neg_per_pos: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Corrupt each positive `neg_per_pos` times, replacing the head or tail
    with a uniformly drawn entity different from the original."""
    if neg_per_pos == 0:
        return np.empty((0, 3), dtype=np.int64)
    rep = np.repeat(positives, neg_per_pos, axis=0)
    m = rep.shape[0]
    side = rng.integers(0, 2, size=m)
    orig = np.where(side == 0, rep[:, 0], rep[:, 2])
    repl = rng.integers(0, n_entities, size=m)
    bad = repl == orig
    while bad.any():
        repl[bad] = rng.integers(0, n_entities, size=int(bad.sum()))
        bad = repl == orig
    neg = rep.copy()
    neg[side == 0, 0] = repl[side == 0]
    neg[side == 1, 2] = repl[side == 1]
    return neg


class _Adam:
    def __init__(self, shapes: list[tuple[int, ...]], beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def train(graph: KnowledgeGraph, config: TrainConfig) -> ModelParams:
    """Fit embeddings, relation vectors, and propagation weights on all graph
    triples. Deterministic for a fixed seed; raises on an empty graph or a
    non-finite loss."""
    config.validate()
    if len(graph) == 0:
        raise DataError("cannot train on an empty graph")
    edges = _EdgeSet(graph)
    if edges.n_entities < 2:
        raise DataError("training requires at least two entities for negative sampling")
    rng = np.random.default_rng(config.seed)
    params = init_params(edges.n_entities, edges.n_relations, config, rng)
    positives = np.stack([edges.heads, edges.rels, edges.tails], axis=1)

    adam = _Adam([a.shape for a in params.arrays()])
    use_dropout = config.encoder == "rgcn" and (config.dropout_self > 0 or config.dropout_other > 0)
    n_pos = positives.shape[0]
    batch = config.batch_size if config.batch_size > 0 else n_pos
    for epoch in range(config.epochs):
        order = rng.permutation(n_pos)
        for start in range(0, n_pos, batch):
            pos = positives[order[start:start + batch]]
            dropout = None
            if use_dropout:
                dropout = EdgeDropout.draw(rng, edges.n_edges, edges.n_entities,
                                           config.dropout_self, config.dropout_other)
            negatives = _sample_negatives(pos, edges.n_entities, config.neg_per_pos, rng)
            examples = np.concatenate([pos, negatives], axis=0)
            labels = np.concatenate([
                np.ones(pos.shape[0]), np.zeros(negatives.shape[0])])
            loss, grads = objective_grads(graph, params, examples, labels,
                                          config.l2_decoder, dropout)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"training diverged: non-finite loss at epoch {epoch} "
                    f"(lr={config.lr}, dim={config.dim})"
                )
            adam.step(params.arrays(), grads.arrays(), config.lr)
    params.check_finite()
    return params


def _known_candidates(graph: KnowledgeGraph, test: np.ndarray):
    tails: dict[tuple[int, int], set[int]] = {}
    heads: dict[tuple[int, int], set[int]] = {}
    for t in graph.triples():
        tails.setdefault((t.head, t.relation), set()).add(t.tail)
        heads.setdefault((t.tail, t.relation), set()).add(t.head)
    for h, r, t in test:
        tails.setdefault((int(h), int(r)), set()).add(int(t))
        heads.setdefault((int(t), int(r)), set()).add(int(h))
    return tails, heads


def _rank(scores: np.ndarray, true_id: int, exclude: set[int]) -> int:
    """Rank of `true_id` under descending score with ties broken by entity id.

    Candidates listed in `exclude` (other known-true answers) are removed
    before ranking; `true_id` itself always competes.
    """
    s_true = scores[true_id]
    keep = np.ones(scores.shape[0], dtype=bool)
    if exclude:
        keep[list(exclude)] = False
    keep[true_id] = True
    better = np.sum(keep & (scores > s_true))
    ids = np.arange(scores.shape[0])
    tied_before = np.sum(keep & (scores == s_true) & (ids < true_id))
    return int(better + tied_before + 1)


def rank_metrics(params: ModelParams, graph: KnowledgeGraph,
                 test: list | np.ndarray, filtered: bool = True) -> RankMetrics:
    """Hits@{1,3,10} and MRR over head and tail ranking queries for each test
    triple. Filtered mode removes other answers known from the graph or the
    test set itself before ranking."""
    test_arr = np.asarray(
        [(t.head, t.relation, t.tail) if hasattr(t, "head") else tuple(t) for t in test],
        dtype=np.int64,
    ).reshape(-1, 3)
    if test_arr.shape[0] == 0:
        return RankMetrics(0.0, 0.0, 0.0, 0.0)
    states = rgcn_forward(graph, params)
    d = params.relation_diag
    known_tails, known_heads = _known_candidates(graph, test_arr)

    ranks = []
    for h, r, t in test_arr:
        h, r, t = int(h), int(r), int(t)
        tail_scores = (states[h] * d[r]) @ states.T
        exclude = known_tails.get((h, r), set()) - {t} if filtered else set()
        ranks.append(_rank(tail_scores, t, exclude))
        head_scores = (states[t] * d[r]) @ states.T
        exclude = known_heads.get((t, r), set()) - {h} if filtered else set()
        ranks.append(_rank(head_scores, h, exclude))

    ranks_arr = np.array(ranks, dtype=np.float64)
    return RankMetrics(
        hits1=float(np.mean(ranks_arr <= 1)),
        hits3=float(np.mean(ranks_arr <= 3)),
        hits10=float(np.mean(ranks_arr <= 10)),
        mrr=float(np.mean(1.0 / ranks_arr)),
    )
