import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgrelex.errors import VocabError
from kgrelex.kg import (
    RESERVED_RELATIONS,
    KnowledgeGraph,
    NameTriple,
    Provenance,
    Triple,
    Vocabulary,
)

from conftest import make_random_graph


def small_graph():
    g = KnowledgeGraph()
    for name in ("a", "b", "c"):
        g.entities.add(name)
    g.relations.add("r")
    return g


class TestVocabulary:
    def test_dense_ids_in_insertion_order(self):
        v = Vocabulary()
        assert [v.add(n) for n in ("x", "y", "z")] == [0, 1, 2]
        assert v.add("y") == 1
        assert v.name_of(2) == "z"
        assert len(v) == 3

    def test_frozen_rejects_new_names(self):
        v = Vocabulary()
        v.add("x")
        v.freeze()
        assert v.add("x") == 0
        with pytest.raises(VocabError):
            v.add("new")

    def test_unknown_lookups_raise(self):
        v = Vocabulary()
        with pytest.raises(VocabError):
            v.id_of("missing")
        with pytest.raises(VocabError):
            v.name_of(0)

    def test_reserved_relations_always_present(self):
        g = KnowledgeGraph()
        for name in RESERVED_RELATIONS:
            assert name in g.relations


class TestAddTriple:
    def test_insert_synonym_triple_into_empty_graph(self):
        g = KnowledgeGraph()
        assert g.add_names(NameTriple("USA", "hasSynonym", "US",
                                      Provenance.SYNONYM_CONTEXT)) is True
        assert len(g) == 1

    def test_reinsert_is_noop(self):
        g = small_graph()
        t = Triple(0, g.relations.id_of("r"), 1, Provenance.EXTRACTED)
        assert g.add_triple(t) is True
        assert g.add_triple(t) is False
        assert len(g) == 1

    def test_unknown_ids_raise(self):
        g = small_graph()
        r = g.relations.id_of("r")
        with pytest.raises(VocabError):
            g.add_triple(Triple(99, r, 1, Provenance.EXTRACTED))
        with pytest.raises(VocabError):
            g.add_triple(Triple(0, 99, 1, Provenance.EXTRACTED))
        with pytest.raises(VocabError):
            g.add_triple(Triple(0, r, -1, Provenance.EXTRACTED))

    def test_stronger_provenance_wins_all_pairs(self):
        # enumerate the full 6x6 matrix of (existing, inserted) provenances
        for existing, inserted in itertools.product(Provenance, Provenance):
            g = small_graph()
            r = g.relations.id_of("r")
            assert g.add_triple(Triple(0, r, 1, existing)) is True
            assert g.add_triple(Triple(0, r, 1, inserted)) is False
            expected = existing if existing <= inserted else inserted
            assert g.provenance_of(0, r, 1) == expected
            assert len(g) == 1

    def test_core_label_upgrades_extracted(self):
        g = small_graph()
        r = g.relations.id_of("r")
        g.add_triple(Triple(0, r, 1, Provenance.EXTRACTED))
        assert g.add_triple(Triple(0, r, 1, Provenance.CORE_LABEL)) is False
        assert g.provenance_of(0, r, 1) == Provenance.CORE_LABEL


class TestNeighbors:
    def test_out_neighbors_sorted(self):
        g = small_graph()
        r = g.relations.id_of("r")
        g.add_triple(Triple(0, r, 2, Provenance.CORE_LABEL))
        g.add_triple(Triple(0, r, 1, Provenance.CORE_LABEL))
        assert g.neighbors(0, r, "out") == [1, 2]

    def test_in_neighbors(self):
        g = small_graph()
        r = g.relations.id_of("r")
        g.add_triple(Triple(0, r, 1, Provenance.CORE_LABEL))
        g.add_triple(Triple(0, r, 2, Provenance.CORE_LABEL))
        assert g.neighbors(1, r, "in") == [0]
        assert g.neighbors(1, r, "out") == []

    def test_unknown_ids_raise(self):
        g = small_graph()
        with pytest.raises(VocabError):
            g.neighbors(99, 0, "out")
        with pytest.raises(VocabError):
            g.neighbors(0, 99, "out")

    def test_bad_direction_raises(self):
        g = small_graph()
        with pytest.raises(ValueError):
            g.neighbors(0, 0, "sideways")

    def test_matches_linear_scan_on_random_graph(self):
        rng = np.random.default_rng(7)
        g = make_random_graph(rng, 15, 4, 200)
        triples = g.triples()
        for e in range(len(g.entities)):
            for r in range(len(g.relations)):
                out = sorted({t.tail for t in triples if t.head == e and t.relation == r})
                inn = sorted({t.head for t in triples if t.tail == e and t.relation == r})
                assert g.neighbors(e, r, "out") == out
                assert g.neighbors(e, r, "in") == inn

    def test_out_edges_orders_by_relation_then_tail(self):
        g = small_graph()
        r2 = g.relations.add("r2")
        r = g.relations.id_of("r")
        g.add_triple(Triple(0, r2, 1, Provenance.CORE_LABEL))
        g.add_triple(Triple(0, r, 2, Provenance.CORE_LABEL))
        g.add_triple(Triple(0, r, 1, Provenance.CORE_LABEL))
        assert g.out_edges(0) == [(r, 1), (r, 2), (r2, 1)]


class TestFreezeVocab:
    def test_empty_graph_summary(self):
        g = KnowledgeGraph()
        summary = g.freeze_vocab()
        assert summary.n_entities == 0
        assert summary.n_relations == 2  # the reserved relations
        assert summary.n_triples == 0

    def test_usa_context_box(self):
        g = KnowledgeGraph()
        for syn in ("US", "America", "United States"):
            g.add_names(NameTriple("USA", "hasSynonym", syn, Provenance.SYNONYM_CONTEXT))
        g.add_names(NameTriple("USA", "hasEntityType", "Country", Provenance.TYPE_CONTEXT))
        summary = g.freeze_vocab()
        assert summary.n_entities == 5  # USA, US, America, United States, Country
        assert summary.n_relations == 2
        assert summary.n_triples == 4
        counts = summary.provenance_counts()
        assert counts[Provenance.SYNONYM_CONTEXT] == 3
        assert counts[Provenance.TYPE_CONTEXT] == 1

    def test_vocab_immutable_but_triples_insertable_after_freeze(self):
        g = small_graph()
        r = g.relations.id_of("r")
        g.freeze_vocab()
        with pytest.raises(VocabError):
            g.entities.add("new entity")
        assert g.add_triple(Triple(0, r, 1, Provenance.PREDICTED)) is True


class TestGraphInvariants:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 2), st.integers(0, 7),
                              st.sampled_from(list(Provenance))),
                    max_size=60))
    def test_index_coherence_after_random_insertions(self, raw):
        g = KnowledgeGraph()
        for i in range(8):
            g.entities.add(f"e{i}")
        for i in range(3):
            g.relations.add(f"r{i}")
        base = g.relations.id_of("r0")
        for h, r, t, p in raw:
            g.add_triple(Triple(h, base + r, t, p))
        rebuilt_fwd, rebuilt_rev = {}, {}
        for t in g.triples():
            rebuilt_fwd.setdefault((t.head, t.relation), set()).add(t.tail)
            rebuilt_rev.setdefault((t.tail, t.relation), set()).add(t.head)
        for e in range(8):
            for r in range(len(g.relations)):
                assert g.neighbors(e, r, "out") == sorted(rebuilt_fwd.get((e, r), set()))
                assert g.neighbors(e, r, "in") == sorted(rebuilt_rev.get((e, r), set()))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1), st.integers(0, 5),
                              st.sampled_from(list(Provenance))),
                    max_size=40),
           st.randoms(use_true_random=False))
    def test_insertion_commutative_up_to_provenance(self, raw, shuffler):
        def build(seq):
            g = KnowledgeGraph()
            for i in range(6):
                g.entities.add(f"e{i}")
            base = g.relations.add("rel0")
            g.relations.add("rel1")
            for h, r, t, p in seq:
                g.add_triple(Triple(h, base + r, t, p))
            return g

        permuted = list(raw)
        shuffler.shuffle(permuted)
        g1, g2 = build(raw), build(permuted)
        assert g1 == g2
        assert {t.key(): t.provenance for t in g1.triples()} == \
               {t.key(): t.provenance for t in g2.triples()}

    def test_copy_is_independent(self):
        g = small_graph()
        r = g.relations.id_of("r")
        g.add_triple(Triple(0, r, 1, Provenance.CORE_LABEL))
        c = g.copy()
        c.add_triple(Triple(0, r, 2, Provenance.CORE_LABEL))
        assert len(g) == 1 and len(c) == 2
        assert g.neighbors(0, r, "out") == [1]
