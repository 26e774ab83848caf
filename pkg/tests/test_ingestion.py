import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgrelex import ingestion
from kgrelex.errors import DataError
from kgrelex.ingestion import (
    DatasetStats,
    core_triples,
    dataset_stats,
    documents_to_json,
    load_external_triples,
    parse_documents,
)
from kgrelex.kg import KnowledgeGraph, Provenance


MINIMAL_DOC = [{
    "title": "minimal",
    "sents": [["Ontario", "is", "in", "Canada"]],
    "vertexSet": [
        [{"name": "Ontario", "sent_id": 0, "pos": [0, 1], "type": "LOC"}],
        [{"name": "Canada", "sent_id": 0, "pos": [3, 4], "type": "LOC"}],
    ],
    "labels": [],
}]


class TestParseDocuments:
    def test_minimal_valid_record(self):
        docs = parse_documents(json.dumps(MINIMAL_DOC))
        assert len(docs) == 1
        doc = docs[0]
        assert len(doc.sentences) == 1
        assert len(doc.entity_clusters) == 2
        assert doc.canonical_name(0) == "Ontario"

    def test_cross_sentence_mentions_stay_one_cluster(self, docs):
        congress_doc = docs[0]
        cluster = congress_doc.entity_clusters[0]
        assert len(cluster) == 2
        assert sorted(m.sent_id for m in cluster) == [0, 3]
        assert congress_doc.gold_facts[0].relation == "applies_to_jurisdiction"

    def test_span_past_sentence_end_rejected(self):
        bad = json.loads(json.dumps(MINIMAL_DOC))
        bad[0]["vertexSet"][0][0]["pos"] = [3, 5]
        with pytest.raises(DataError, match="pos"):
            parse_documents(json.dumps(bad))

    def test_missing_field_names_doc_index(self):
        bad = json.loads(json.dumps(MINIMAL_DOC))
        del bad[0]["sents"]
        with pytest.raises(DataError, match="doc 0"):
            parse_documents(json.dumps(bad))

    def test_bad_sent_id_rejected(self):
        bad = json.loads(json.dumps(MINIMAL_DOC))
        bad[0]["vertexSet"][0][0]["sent_id"] = 5
        with pytest.raises(DataError, match="sent_id"):
            parse_documents(json.dumps(bad))

    def test_empty_cluster_rejected(self):
        bad = json.loads(json.dumps(MINIMAL_DOC))
        bad[0]["vertexSet"].append([])
        with pytest.raises(DataError, match="vertexSet"):
            parse_documents(json.dumps(bad))

    def test_self_relation_rejected(self):
        bad = json.loads(json.dumps(MINIMAL_DOC))
        bad[0]["labels"] = [{"h": 0, "t": 0, "r": "country", "evidence": []}]
        with pytest.raises(DataError, match="differ"):
            parse_documents(json.dumps(bad))

    def test_not_json_rejected(self):
        with pytest.raises(DataError, match="JSON"):
            parse_documents(b"not json at all")

    def test_fixture_round_trip(self, docs):
        again = parse_documents(documents_to_json(docs))
        assert again == docs


class TestCoreTriples:
    def test_one_triple_per_gold_fact(self, docs):
        g = KnowledgeGraph()
        assert core_triples([docs[0]], g) == 1
        h = g.entities.id_of("Congress")
        t = g.entities.id_of("United States")
        r = g.relations.id_of("applies_to_jurisdiction")
        assert g.has_triple(h, r, t)
        assert g.provenance_of(h, r, t) == Provenance.CORE_LABEL

    def test_doc_without_facts_adds_nothing(self):
        g = KnowledgeGraph()
        docs = parse_documents(json.dumps(MINIMAL_DOC))
        assert core_triples(docs, g) == 0

    def test_shared_fact_across_docs_collapses(self, docs):
        # docs 1 and 3 both label (Ontario, country, Canada)
        g = KnowledgeGraph()
        inserted = core_triples(docs, g)
        facts = {(d.canonical_name(f.head_idx), f.relation, d.canonical_name(f.tail_idx))
                 for d in docs for f in d.gold_facts}
        assert inserted == len(facts) == 4
        assert len(g) == 4


class TestLoadExternalTriples:
    def test_three_distinct_lines(self):
        g = KnowledgeGraph()
        text = "\n".join([
            '{"h": "a", "r": "p", "t": "b"}',
            '{"h": "a", "r": "p", "t": "c"}',
            '{"h": "b", "r": "q", "t": "c", "score": 0.5}',
        ])
        assert load_external_triples(text, Provenance.EXTRACTED, g) == 3

    def test_duplicate_of_core_label_keeps_core(self, docs):
        g = KnowledgeGraph()
        core_triples(docs, g)
        n = load_external_triples('{"h": "Ontario", "r": "country", "t": "Canada"}',
                                  Provenance.EXTRACTED, g)
        assert n == 0
        key = (g.entities.id_of("Ontario"), g.relations.id_of("country"),
               g.entities.id_of("Canada"))
        assert g.provenance_of(*key) == Provenance.CORE_LABEL

    def test_duplicates_within_file_counted_once(self):
        g = KnowledgeGraph()
        lines = ['{"h": "a", "r": "p", "t": "b"}'] * 4 + ['{"h": "a", "r": "p", "t": "c"}']
        assert load_external_triples("\n".join(lines), Provenance.EXTRACTED, g) == 2

    def test_malformed_line_reports_line_number(self):
        g = KnowledgeGraph()
        text = '{"h": "a", "r": "p", "t": "b"}\n{"h": "a", "r": "p"}\n'
        with pytest.raises(DataError, match="line 2"):
            load_external_triples(text, Provenance.EXTRACTED, g)

    def test_empty_file_inserts_nothing(self):
        g = KnowledgeGraph()
        assert load_external_triples("", Provenance.EXTRACTED, g) == 0
        assert load_external_triples("\n\n", Provenance.EXTRACTED, g) == 0


class TestDatasetStats:
    def test_fixture_matches_hand_counts(self, docs, hand_counts):
        stats = dataset_stats(docs)
        assert stats == DatasetStats(
            n_triples=hand_counts["n_triples"],
            n_relations=hand_counts["n_relations"],
            n_entities=hand_counts["n_entities"],
            n_entity_types=hand_counts["n_entity_types"],
            n_docs=hand_counts["n_docs"],
        )

    def test_empty_input_all_zero(self):
        assert dataset_stats([]) == DatasetStats(0, 0, 0, 0, 0)

    def test_permutation_invariant(self, docs):
        assert dataset_stats(docs) == dataset_stats(list(reversed(docs)))

    def test_counts_follow_definitions(self, docs):
        stats = dataset_stats(docs)
        assert stats.n_triples == sum(len(d.gold_facts) for d in docs)
        names = {d.canonical_name(i) for d in docs for i in range(len(d.entity_clusters))}
        assert stats.n_entities == len(names)


def _token_lists():
    token = st.text(alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd")),
                    min_size=1, max_size=6)
    return st.lists(st.lists(token, min_size=1, max_size=6), min_size=1, max_size=3)


@settings(max_examples=40, deadline=None)
@given(_token_lists(), st.data())
def test_round_trip_random_documents(sents, data):
    clusters = []
    n_clusters = data.draw(st.integers(0, 3))
    for e in range(n_clusters):
        n_mentions = data.draw(st.integers(1, 3))
        mentions = []
        for _ in range(n_mentions):
            sid = data.draw(st.integers(0, len(sents) - 1))
            start = data.draw(st.integers(0, len(sents[sid]) - 1))
            end = data.draw(st.integers(start + 1, len(sents[sid])))
            mentions.append({"name": f"ent{e}", "sent_id": sid, "pos": [start, end],
                             "type": "T"})
        clusters.append(mentions)
    record = [{"title": "doc", "sents": sents, "vertexSet": clusters, "labels": []}]
    docs = ingestion.parse_documents(json.dumps(record))
    assert ingestion.parse_documents(documents_to_json(docs)) == docs
