"""Parsing of DocRED-format document files and JSON-Lines triple files into
documents, gold facts, and provenance-tagged graph triples."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DataError
from .kg import KnowledgeGraph, NameTriple, Provenance


@dataclass(frozen=True)
class Mention:
    entity_index: int
    sent_id: int
    start: int
    end: int
    surface: str
    etype: str


@dataclass(frozen=True)
class LabeledFact:
    head_idx: int
    tail_idx: int
    relation: str
    evidence: tuple[int, ...] = ()


@dataclass
class Document:
    doc_id: str
    sentences: list[list[str]] = field(default_factory=list)
    entity_clusters: list[list[Mention]] = field(default_factory=list)
    gold_facts: list[LabeledFact] = field(default_factory=list)

    def canonical_name(self, entity_idx: int) -> str:
        """Canonical entity name: surface form of the cluster's first mention."""
        return self.entity_clusters[entity_idx][0].surface

    def entity_type(self, entity_idx: int) -> str:
        return self.entity_clusters[entity_idx][0].etype

    def mention_sentences(self, entity_idx: int) -> set[int]:
        return {m.sent_id for m in self.entity_clusters[entity_idx]}


@dataclass(frozen=True)
class DatasetStats:
    n_triples: int
    n_relations: int
    n_entities: int
    n_entity_types: int
    n_docs: int


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise DataError(f"{where}: missing field {key!r}")
    return record[key]


def parse_documents(data: bytes | str) -> list[Document]:
    """Parse a DocRED-style JSON array into validated documents."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DataError(f"document file is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError("document file must be a JSON array of documents")

    docs = []
    for i, rec in enumerate(raw):
        where = f"doc {i}"
        if not isinstance(rec, dict):
            raise DataError(f"{where}: record must be a JSON object")
        title = _require(rec, "title", where)
        sents = _require(rec, "sents", where)
        vertex_set = _require(rec, "vertexSet", where)
        labels = rec.get("labels", [])
        if not isinstance(title, str):
            raise DataError(f"{where}: field 'title' must be a string")
        if not isinstance(sents, list) or not sents:
            raise DataError(f"{where}: field 'sents' must be a non-empty array")
        for k, sent in enumerate(sents):
            if not isinstance(sent, list) or not all(isinstance(tok, str) for tok in sent):
                raise DataError(f"{where}: field 'sents'[{k}] must be an array of tokens")

        clusters: list[list[Mention]] = []
        for e, cluster in enumerate(vertex_set):
            if not isinstance(cluster, list) or not cluster:
                raise DataError(f"{where}: field 'vertexSet'[{e}] must be a non-empty array")
            mentions = []
            for m, raw_m in enumerate(cluster):
                mwhere = f"{where}: vertexSet[{e}][{m}]"
                name = _require(raw_m, "name", mwhere)
                sent_id = _require(raw_m, "sent_id", mwhere)
                pos = _require(raw_m, "pos", mwhere)
                etype = _require(raw_m, "type", mwhere)
                if not isinstance(sent_id, int) or not 0 <= sent_id < len(sents):
                    raise DataError(f"{mwhere}: field 'sent_id' out of range")
                if (not isinstance(pos, list) or len(pos) != 2
                        or not all(isinstance(p, int) for p in pos)):
                    raise DataError(f"{mwhere}: field 'pos' must be [start, end]")
                start, end = pos
                if not 0 <= start < end <= len(sents[sent_id]):
                    raise DataError(
                        f"{mwhere}: field 'pos' span [{start}, {end}) exceeds sentence "
                        f"length {len(sents[sent_id])}"
                    )
                mentions.append(Mention(e, sent_id, start, end, str(name), str(etype)))
            clusters.append(mentions)

        facts = []
        for j, raw_f in enumerate(labels):
            fwhere = f"{where}: labels[{j}]"
            h = _require(raw_f, "h", fwhere)
            t = _require(raw_f, "t", fwhere)
            r = _require(raw_f, "r", fwhere)
            evidence = raw_f.get("evidence", [])
            if not isinstance(h, int) or not 0 <= h < len(clusters):
                raise DataError(f"{fwhere}: field 'h' out of range")
            if not isinstance(t, int) or not 0 <= t < len(clusters):
                raise DataError(f"{fwhere}: field 't' out of range")
            if h == t:
                raise DataError(f"{fwhere}: head and tail must differ")
            if not isinstance(r, str):
                raise DataError(f"{fwhere}: field 'r' must be a string")
            for s in evidence:
                if not isinstance(s, int) or not 0 <= s < len(sents):
                    raise DataError(f"{fwhere}: field 'evidence' sentence id {s} out of range")
            facts.append(LabeledFact(h, t, r, tuple(evidence)))

        docs.append(Document(title, [list(s) for s in sents], clusters, facts))
    return docs


def documents_to_json(docs: list[Document]) -> str:
    """Serialize documents back to the DocRED file schema (round-trip safe)."""
    out = []
    for doc in docs:
        out.append({
            "title": doc.doc_id,
            "sents": doc.sentences,
            "vertexSet": [
                [
                    {"name": m.surface, "sent_id": m.sent_id,
                     "pos": [m.start, m.end], "type": m.etype}
                    for m in cluster
                ]
                for cluster in doc.entity_clusters
            ],
            "labels": [
                {"h": f.head_idx, "t": f.tail_idx, "r": f.relation,
                 "evidence": list(f.evidence)}
                for f in doc.gold_facts
            ],
        })
    return json.dumps(out, ensure_ascii=False, sort_keys=True)


def core_triples(docs: list[Document], graph: KnowledgeGraph) -> int:
    """Insert one CORE_LABEL triple per gold fact; returns the number newly added."""
    added = 0
    for doc in docs:
        for fact in doc.gold_facts:
            nt = NameTriple(
                doc.canonical_name(fact.head_idx),
                fact.relation,
                doc.canonical_name(fact.tail_idx),
                Provenance.CORE_LABEL,
            )
            if graph.add_names(nt):
                added += 1
    return added


def load_external_triples(data: bytes | str, provenance: Provenance,
                          graph: KnowledgeGraph) -> int:
    """Insert triples from a JSON-Lines file ({"h", "r", "t"}, optional "score")."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    added = 0
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"triple file line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise DataError(f"triple file line {lineno}: record must be a JSON object")
        for key in ("h", "r", "t"):
            if key not in rec or not isinstance(rec[key], str) or not rec[key]:
                raise DataError(f"triple file line {lineno}: field {key!r} must be a non-empty string")
        if "score" in rec and not isinstance(rec["score"], (int, float)):
            raise DataError(f"triple file line {lineno}: field 'score' must be a number")
        if graph.add_names(NameTriple(rec["h"], rec["r"], rec["t"], provenance)):
            added += 1
    return added


def dataset_stats(docs: list[Document]) -> DatasetStats:
    """Counts over gold facts, distinct relations, entities, and types."""
    n_triples = 0
    relations: set[str] = set()
    entities: set[str] = set()
    etypes: set[str] = set()
    for doc in docs:
        n_triples += len(doc.gold_facts)
        relations.update(f.relation for f in doc.gold_facts)
        for idx in range(len(doc.entity_clusters)):
            entities.add(doc.canonical_name(idx))
            etypes.add(doc.entity_type(idx))
    return DatasetStats(n_triples, len(relations), len(entities), len(etypes), len(docs))
