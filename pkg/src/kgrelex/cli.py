"""Command-line surface: stats | train | evaluate | predict | explain.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ingestion, pipeline
from .config import PipelineConfig, apply_env_overrides, load_config
from .errors import ConfigError, DataError, NumericalError


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to a key = value config file")


_OVERRIDABLE = ("seed", "epochs", "dim", "threshold", "beam", "max_len", "top_n",
                "output_dir", "documents_train", "documents_dev", "documents_test")


def _add_override_args(p: argparse.ArgumentParser) -> None:
    for name in _OVERRIDABLE:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config)
    for name in _OVERRIDABLE:
        raw = getattr(args, name, None)
        if raw is not None:
            current = getattr(cfg, name)
            if isinstance(current, int):
                setattr(cfg, name, int(raw))
            elif isinstance(current, float):
                setattr(cfg, name, float(raw))
            else:
                setattr(cfg, name, raw)
    return apply_env_overrides(cfg)


def _doc_paths(cfg: PipelineConfig) -> list[str]:
    return [p for p in (cfg.documents_train, cfg.documents_dev, cfg.documents_test) if p]


def cmd_stats(args) -> int:
    cfg = _load(args)
    paths = _doc_paths(cfg)
    if not paths:
        raise ConfigError("stats needs at least one documents_* file in the config")
    cfg.validate_inputs(required=())
    docs = []
    for p in paths:
        docs.extend(pipeline.read_documents(p))
    stats = ingestion.dataset_stats(docs)
    print(f"documents      {stats.n_docs}")
    print(f"gold triples   {stats.n_triples}")
    print(f"relations      {stats.n_relations}")
    print(f"entities       {stats.n_entities}")
    print(f"entity types   {stats.n_entity_types}")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "stats.json").write_text(
        json.dumps({
            "n_docs": stats.n_docs, "n_triples": stats.n_triples,
            "n_relations": stats.n_relations, "n_entities": stats.n_entities,
            "n_entity_types": stats.n_entity_types,
        }, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    out = pipeline.train_pipeline(cfg)
    print(f"checkpoint written to {out}")
    return 0


def _checkpoint_arg(args, cfg: PipelineConfig) -> Path:
    path = Path(args.checkpoint) if args.checkpoint else pipeline.checkpoint_path(cfg)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    return path


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    ckpt = _checkpoint_arg(args, cfg)
    report = pipeline.evaluate_pipeline(cfg, ckpt)
    width = max(len(k) for k in report)
    for key in ("f1", "ign_f1", "hits1", "hits3", "hits10", "mrr",
                "n_predictions", "n_gold", "n_ranking_queries", "n_unrankable_facts"):
        print(f"{key:<{width}}  {report[key]}")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    cfg = _load(args)
    ckpt_file = _checkpoint_arg(args, cfg)
    ckpt = pipeline.load_checkpoint(ckpt_file)
    docs_train, graph = pipeline._rebuild_graph(cfg, ckpt)
    docs_eval = pipeline._eval_documents(cfg)
    _, predicted = pipeline.predictions_for(cfg, ckpt, docs_eval, graph)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "predictions.jsonl"
    pipeline.write_predictions(out, predicted)
    print(f"{len(predicted)} predictions written to {out}")
    return 0


def cmd_explain(args) -> int:
    cfg = _load(args)
    ckpt = _checkpoint_arg(args, cfg)
    result = pipeline.explain_pipeline(cfg, ckpt, args.head, args.relation)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {"query": result["query"],
              "answers": [{"entity": a["entity"], "score": a["score"], "path": a["path"]}
                          for a in result["answers"]]}
    (out_dir / "explanations.jsonl").write_text(
        json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
    print(f"Query: ({result['query']['h']}, {result['query']['r']}, ?x)")
    if not result["answers"]:
        print("No answers reachable.")
        return 0
    for a in result["answers"]:
        print(f"Answer: {a['entity']} (score {a['score']:.4f})")
        for line in a["lines"]:
            print(f"  {line}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kgrelex",
        description="Document-level relation extraction via knowledge-graph "
                    "link prediction, with traversal-path explanations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics over the configured document files")
    _add_config_arg(p)
    _add_override_args(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="ingest, train, and write a checkpoint")
    _add_config_arg(p)
    _add_override_args(p)
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (
        ("evaluate", cmd_evaluate, "F1/IgnF1 and ranking metrics on the eval split"),
        ("predict", cmd_predict, "write thresholded predictions as JSON lines"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_arg(p)
        _add_override_args(p)
        p.add_argument("--checkpoint", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("explain", help="beam-search traversal paths for a (head, relation) query")
    _add_config_arg(p)
    _add_override_args(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("head", help="query head entity name")
    p.add_argument("relation", help="query relation name")
    p.set_defaults(func=cmd_explain)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
