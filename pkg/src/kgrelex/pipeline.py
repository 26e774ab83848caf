"""End-to-end wiring used by the CLI: ingestion into a graph, training of both
scorers, pair scoring, evaluation reports, and explanation queries."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import aggregation, context, ingestion, linkpred, reasoning
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import PipelineConfig
from .errors import DataError
from .explain import beam_search, build_explanation_graph, format_explanation
from .ingestion import Document
from .kg import KnowledgeGraph, Provenance
from .reasoning import PathFeaturizer


def read_documents(path: str) -> list[Document]:
    return ingestion.parse_documents(Path(path).read_bytes())


def build_graph(config: PipelineConfig, docs_train: list[Document]) -> tuple[KnowledgeGraph, dict]:
    """Assemble the training graph from gold facts, extracted triples, entity
    context, and one best context path per entity pair."""
    graph = KnowledgeGraph()
    counts = {}
    counts["core"] = ingestion.core_triples(docs_train, graph)
    if config.external_triples:
        counts["extracted"] = ingestion.load_external_triples(
            Path(config.external_triples).read_bytes(), Provenance.EXTRACTED, graph)
    if config.entity_context:
        records = context.parse_entity_context(Path(config.entity_context).read_bytes())
        n = 0
        for rec in records:
            for nt in context.synonym_triples(rec) + context.type_triples(rec):
                n += int(graph.add_names(nt))
        counts["context"] = n
    if config.context_paths:
        paths = context.parse_context_paths(Path(config.context_paths).read_bytes())
        by_pair: dict[tuple[str, str], list[context.ContextPath]] = {}
        for p in paths:
            by_pair.setdefault((p.head, p.tail), []).append(p)
        n = 0
        for key in sorted(by_pair):
            best = context.select_context_path(by_pair[key], config.max_context_hops)
            if best is None:
                continue
            for nt in context.path_to_triples(best):
                n += int(graph.add_names(nt))
        counts["paths"] = n
    return graph, counts


def _ordered_pairs(doc: Document) -> list[tuple[int, int]]:
    n = len(doc.entity_clusters)
    return [(h, t) for h in range(n) for t in range(n) if h != t]


def score_pairs(docs: list[Document], graph: KnowledgeGraph,
                params: linkpred.ModelParams, scorer: reasoning.ReasoningScorer,
                config: PipelineConfig) -> list[aggregation.PairScore]:
    """Fused per-relation probabilities for every ordered entity pair."""
    states = linkpred.rgcn_forward(graph, params)
    diag = params.relation_diag
    lam = config.fusion_lambda
    out = []
    for doc in docs:
        for h_idx, t_idx in _ordered_pairs(doc):
            paths = reasoning.extract_paths(doc, h_idx, t_idx)
            if paths:
                feats = np.stack([
                    scorer.featurizer.featurize(p, doc, graph) for p in paths])
                r_probs, kind = reasoning.score_pair(paths, feats, scorer)
            else:
                r_probs, kind = np.zeros(scorer.n_relations), None
            h_name = doc.canonical_name(h_idx)
            t_name = doc.canonical_name(t_idx)
            if h_name in graph.entities and t_name in graph.entities:
                h = graph.entities.id_of(h_name)
                t = graph.entities.id_of(t_name)
                lp_probs = linkpred.sigmoid(diag @ (states[h] * states[t]))
            else:
                lp_probs = np.zeros(scorer.n_relations)
            final = np.array([
                aggregation.aggregate(float(r_probs[i]), float(lp_probs[i]), lam,
                                      config.aggregator)
                for i in range(scorer.n_relations)
            ])
            out.append(aggregation.PairScore(doc.doc_id, h_idx, t_idx, h_name, t_name,
                                             r_probs, lp_probs, final, kind))
    return out


def checkpoint_path(config: PipelineConfig) -> Path:
    return Path(config.output_dir) / "model.ckpt"


def train_pipeline(config: PipelineConfig) -> Path:
    """Ingest, freeze the vocabulary, train both models, write the checkpoint."""
    config.validate_inputs(required=("documents_train",))
    docs = read_documents(config.documents_train)
    graph, _ = build_graph(config, docs)
    graph.freeze_vocab()

    params = linkpred.train(graph, config.train_config())
    featurizer = PathFeaturizer.from_documents(docs)
    pairs = [(i, h, t) for i, doc in enumerate(docs) for h, t in _ordered_pairs(doc)]
    scorer = reasoning.train_scorer(pairs, docs, graph, config.scorer_config(), featurizer)

    out = checkpoint_path(config)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, params, graph.entities.names(), graph.relations.names(),
                    asdict(config), scorer)
    return out


def _rebuild_graph(config: PipelineConfig, ckpt: Checkpoint) -> tuple[list[Document], KnowledgeGraph]:
    config.validate_inputs(required=("documents_train",))
    docs = read_documents(config.documents_train)
    graph, _ = build_graph(config, docs)
    graph.freeze_vocab()
    if (graph.entities.names() != ckpt.entity_names
            or graph.relations.names() != ckpt.relation_names):
        raise DataError(
            "vocabulary mismatch between checkpoint and the configured input "
            "files; retrain or restore the original inputs"
        )
    return docs, graph


def _eval_documents(config: PipelineConfig) -> list[Document]:
    path = config.documents_dev or config.documents_test
    if path is None:
        raise DataError("evaluation requires documents_dev or documents_test")
    return read_documents(path)


def _gold_fact_set(docs: list[Document]) -> set[tuple]:
    return {
        (doc.doc_id, doc.canonical_name(f.head_idx), f.relation, doc.canonical_name(f.tail_idx))
        for doc in docs for f in doc.gold_facts
    }


def _predicted_fact_set(facts: list[aggregation.PredictedFact]) -> set[tuple]:
    return {(f.doc_id, f.head_name, f.relation, f.tail_name) for f in facts}


def predictions_for(config: PipelineConfig, ckpt: Checkpoint,
                    docs_eval: list[Document], graph: KnowledgeGraph
                    ) -> tuple[list[aggregation.PairScore], list[aggregation.PredictedFact]]:
    pair_scores = score_pairs(docs_eval, graph, ckpt.params, ckpt.scorer, config)
    predicted = aggregation.predict(
        pair_scores, config.threshold, ckpt.relation_names,
        exclude_relations={context.SYNONYM_RELATION, context.TYPE_RELATION})
    return pair_scores, predicted


def evaluate_pipeline(config: PipelineConfig, ckpt_file: str | Path) -> dict:
    """Metrics report: micro F1 / Ign F1 of thresholded predictions plus
    filtered ranking metrics over the evaluation gold facts."""
    ckpt = load_checkpoint(ckpt_file)
    docs_train, graph = _rebuild_graph(config, ckpt)
    docs_eval = _eval_documents(config)

    _, predicted = predictions_for(config, ckpt, docs_eval, graph)
    gold = _gold_fact_set(docs_eval)
    train_facts = {
        (doc.canonical_name(f.head_idx), f.relation, doc.canonical_name(f.tail_idx))
        for doc in docs_train for f in doc.gold_facts
    }
    f1, ign_f1 = aggregation.f1_metrics(_predicted_fact_set(predicted), gold, train_facts)

    test_triples = []
    skipped = 0
    for doc in docs_eval:
        for f in doc.gold_facts:
            h_name = doc.canonical_name(f.head_idx)
            t_name = doc.canonical_name(f.tail_idx)
            if (h_name in graph.entities and t_name in graph.entities
                    and f.relation in graph.relations):
                test_triples.append((graph.entities.id_of(h_name),
                                     graph.relations.id_of(f.relation),
                                     graph.entities.id_of(t_name)))
            else:
                skipped += 1
    if test_triples:
        rm = linkpred.rank_metrics(ckpt.params, graph, test_triples, filtered=True)
    else:
        rm = linkpred.RankMetrics(0.0, 0.0, 0.0, 0.0)

    return {
        "f1": f1,
        "ign_f1": ign_f1,
        "hits1": rm.hits1,
        "hits3": rm.hits3,
        "hits10": rm.hits10,
        "mrr": rm.mrr,
        "n_predictions": len(predicted),
        "n_gold": len(gold),
        "n_ranking_queries": 2 * len(test_triples),
        "n_unrankable_facts": skipped,
    }


def write_predictions(path: Path, predicted: list[aggregation.PredictedFact]) -> None:
    lines = [
        json.dumps({"title": f.doc_id, "h_idx": f.head_idx, "t_idx": f.tail_idx,
                    "r": f.relation, "score": f.score},
                   ensure_ascii=False, sort_keys=True)
        for f in predicted
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def explain_pipeline(config: PipelineConfig, ckpt_file: str | Path,
                     head_name: str, relation_name: str) -> dict:
    """Answer one (head, relation, ?) query over the training graph augmented
    with the model's predictions on the evaluation documents (when configured)."""
    ckpt = load_checkpoint(ckpt_file)
    _, graph = _rebuild_graph(config, ckpt)
    if config.documents_dev or config.documents_test:
        docs_eval = _eval_documents(config)
        _, predicted = predictions_for(config, ckpt, docs_eval, graph)
        explanation_graph = build_explanation_graph(graph, predicted)
    else:
        explanation_graph = graph

    head = explanation_graph.entities.id_of(head_name)
    relation = explanation_graph.relations.id_of(relation_name)
    answers = beam_search(explanation_graph, head, relation, ckpt.params,
                          beam=config.beam, max_len=config.max_len, top_n=config.top_n)
    rendered = []
    for a in answers:
        path_triples = [
            {"h": explanation_graph.entities.name_of(a.best_path.nodes[i]),
             "r": explanation_graph.relations.name_of(a.best_path.edges[i]),
             "t": explanation_graph.entities.name_of(a.best_path.nodes[i + 1])}
            for i in range(len(a.best_path.edges))
        ]
        rendered.append({
            "entity": explanation_graph.entities.name_of(a.entity),
            "score": a.score,
            "path": path_triples,
            "lines": format_explanation(a, explanation_graph),
        })
    return {"query": {"h": head_name, "r": relation_name}, "answers": rendered}
