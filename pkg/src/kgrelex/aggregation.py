"""Fusion of reasoning and link-prediction probabilities into relation
predictions, plus the micro-F1 metrics used to evaluate them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .reasoning import PathKind

PROB_EPS = 1e-7

Fact = tuple  # (doc_id, head, relation, tail); train facts are (head, relation, tail)


@dataclass
class PairScore:
    doc_id: str
    head_idx: int
    tail_idx: int
    head_name: str
    tail_name: str
    reasoning: np.ndarray   # per-relation probabilities
    linkpred: np.ndarray
    final: np.ndarray
    winning_kind: PathKind | None


@dataclass(frozen=True)
class PredictedFact:
    doc_id: str
    head_idx: int
    tail_idx: int
    head_name: str
    tail_name: str
    relation: str
    score: float


def aggregate(reasoning_prob: float, linkpred_prob: float, lam: float,
              mode: str = "convex") -> float:
    """Fuse the two probabilities: lam-weighted convex combination by default,
    or their maximum when mode == 'max'."""
    for name, v in (("reasoning_prob", reasoning_prob),
                    ("linkpred_prob", linkpred_prob), ("lambda", lam)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    if mode == "max":
        return max(reasoning_prob, linkpred_prob)
    if mode != "convex":
        raise ValueError(f"mode must be 'convex' or 'max', got {mode!r}")
    return lam * reasoning_prob + (1.0 - lam) * linkpred_prob


def predict(pair_scores: list[PairScore], threshold: float,
            relation_names: list[str],
            exclude_relations: set[str] | None = None,
            per_relation_thresholds: dict[str, float] | None = None) -> list[PredictedFact]:
    """Emit every (head, relation, tail) whose fused probability reaches the
    relation's threshold, in deterministic (doc, head, tail, relation) order.

    threshold = 1.0 is allowed as an effectively-empty decision rule."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    exclude = exclude_relations or set()
    per_rel = per_relation_thresholds or {}
    out = []
    for ps in pair_scores:
        for rid, rel in enumerate(relation_names):
            if rel in exclude:
                continue
            cut = per_rel.get(rel, threshold)
            score = float(ps.final[rid])
            if score >= cut:
                out.append(PredictedFact(ps.doc_id, ps.head_idx, ps.tail_idx,
                                         ps.head_name, ps.tail_name, rel, score))
    out.sort(key=lambda f: (f.doc_id, f.head_idx, f.tail_idx, f.relation))
    return out


def _micro_f1(pred: set, gold: set) -> float:
    if not pred or not gold:
        if not pred and not gold:
            warnings.warn("micro F1 over empty prediction and gold sets; returning 0")
        return 0.0
    tp = len(pred & gold)
    precision = tp / len(pred)
    recall = tp / len(gold)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_metrics(pred: set, gold: set, train_facts: set) -> tuple[float, float]:
    """Micro F1 and Ign F1 over (doc_id, head, relation, tail) fact sets.

    Ign F1 first drops, from predictions and gold alike, every fact whose
    (head, relation, tail) appears in the annotated training facts; empty
    denominators yield 0 with a warning.
    """
    f1 = _micro_f1(pred, gold)
    pred_ign = {f for f in pred if (f[1], f[2], f[3]) not in train_facts}
    gold_ign = {f for f in gold if (f[1], f[2], f[3]) not in train_facts}
    ign_f1 = _micro_f1(pred_ign, gold_ign)
    return f1, ign_f1


def bce_loss(final_probs: np.ndarray, gold_labels: np.ndarray) -> float:
    """Mean binary cross-entropy over all (pair, relation) cells, with
    probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(final_probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(gold_labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: probs {p.shape} vs labels {y.shape}")
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
