import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgrelex.context import (
    ContextPath,
    EntityContextRecord,
    parse_context_paths,
    parse_entity_context,
    path_to_triples,
    select_context_path,
    synonym_triples,
    type_triples,
)
from kgrelex.errors import DataError
from kgrelex.kg import Provenance


class TestSynonymTriples:
    def test_usa_box(self):
        rec = EntityContextRecord("USA", ("US", "America", "United States"), "Country")
        triples = synonym_triples(rec)
        assert [(t.head, t.relation, t.tail) for t in triples] == [
            ("USA", "hasSynonym", "US"),
            ("USA", "hasSynonym", "America"),
            ("USA", "hasSynonym", "United States"),
        ]
        assert all(t.provenance == Provenance.SYNONYM_CONTEXT for t in triples)

    def test_empty_synonyms(self):
        assert synonym_triples(EntityContextRecord("X", (), None)) == []

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 20))
    def test_count_equals_synonym_count(self, n):
        rec = EntityContextRecord("e", tuple(f"s{i}" for i in range(n)), None)
        assert len(synonym_triples(rec)) == n

    def test_self_synonym_rejected(self):
        with pytest.raises(DataError, match="own synonym"):
            EntityContextRecord("X", ("X",), None)

    def test_duplicate_synonym_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            EntityContextRecord("X", ("a", "a"), None)


class TestTypeTriples:
    def test_usa_type(self):
        rec = EntityContextRecord("USA", (), "Country")
        [t] = type_triples(rec)
        assert (t.head, t.relation, t.tail) == ("USA", "hasEntityType", "Country")
        assert t.provenance == Provenance.TYPE_CONTEXT

    def test_absent_type_gives_nothing(self):
        assert type_triples(EntityContextRecord("USA", (), None)) == []

    def test_usa_box_totals_four_triples(self):
        rec = EntityContextRecord("USA", ("US", "America", "United States"), "Country")
        assert len(synonym_triples(rec) + type_triples(rec)) == 4


class TestPathToTriples:
    def test_two_hop_canadian_ontario(self):
        path = ContextPath("Canadian", "Ontario",
                           (("ethnic_group", "Canada"), ("country", "Ontario")), 0.7)
        triples = path_to_triples(path)
        assert [(t.head, t.relation, t.tail) for t in triples] == [
            ("Canadian", "ethnic_group", "Canada"),
            ("Canada", "country", "Ontario"),
        ]
        assert all(t.provenance == Provenance.PATH_CONTEXT for t in triples)

    def test_one_hop_is_direct_edge(self):
        path = ContextPath("a", "b", (("r", "b"),))
        [t] = path_to_triples(path)
        assert (t.head, t.relation, t.tail) == ("a", "r", "b")

    def test_broken_chain_rejected_at_construction(self):
        with pytest.raises(DataError, match="last hop"):
            ContextPath("a", "b", (("r", "c"),))

    def test_hop_count_bounds(self):
        with pytest.raises(DataError, match="hops"):
            ContextPath("a", "b", ())
        with pytest.raises(DataError, match="hops"):
            ContextPath("a", "b", tuple((f"r{i}", f"n{i}") for i in range(4)) + (("r", "b"),))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4))
    def test_reconstruction_inverts_emission(self, k):
        nodes = [f"n{i}" for i in range(1, k)] + ["tail"]
        hops = tuple((f"rel{i}", nodes[i]) for i in range(k))
        triples = path_to_triples(ContextPath("head", "tail", hops))
        assert len(triples) == k
        # walking the emitted triples reconstructs the original chain
        node = "head"
        for t, (rel, nxt) in zip(triples, hops):
            assert t.head == node and t.relation == rel and t.tail == nxt
            node = t.tail
        assert node == "tail"


class TestSelectContextPath:
    def test_highest_pagerank_wins(self):
        low = ContextPath("a", "b", (("r1", "b"),), 0.3)
        high = ContextPath("a", "b", (("r2", "x"), ("r3", "b")), 0.7)
        assert select_context_path([low, high], 4) is high

    def test_all_candidates_too_long(self):
        p = ContextPath("a", "b", (("r", "x"), ("r", "y"), ("r", "b")), 0.9)
        assert select_context_path([p], 2) is None

    def test_no_pagerank_shortest_then_lexicographic(self):
        long_path = ContextPath("a", "b", (("r", "x"), ("r", "b")))
        short_z = ContextPath("a", "b", (("z_rel", "b"),))
        short_a = ContextPath("a", "b", (("a_rel", "b"),))
        assert select_context_path([long_path, short_z, short_a], 4) is short_a

    def test_missing_pagerank_ranks_below_any_present(self):
        with_pr = ContextPath("a", "b", (("r", "x"), ("r", "b")), 0.01)
        without = ContextPath("a", "b", (("q", "b"),), None)
        assert select_context_path([without, with_pr], 4) is with_pr

    def test_empty_candidates(self):
        assert select_context_path([], 4) is None

    def test_invalid_max_hops(self):
        with pytest.raises(ValueError):
            select_context_path([], 0)
        with pytest.raises(ValueError):
            select_context_path([], 5)

    @settings(max_examples=30, deadline=None)
    @given(st.permutations(list(range(6))))
    def test_permutation_invariant(self, order):
        candidates = [
            ContextPath("a", "b", (("r%d" % i, "b"),), pr)
            for i, pr in enumerate((0.5, 0.1, None, 0.5, 0.9, None))
        ]
        shuffled = [candidates[i] for i in order]
        assert select_context_path(shuffled, 4) == select_context_path(candidates, 4)


class TestParsers:
    def test_parse_entity_context_file(self, fixture_dir):
        records = parse_entity_context((fixture_dir / "entity_context.jsonl").read_bytes())
        assert records[0].entity == "USA"
        assert records[0].synonyms == ("US", "America", "United States")
        assert records[0].etype == "Country"
        assert records[1].etype == "Country"

    def test_parse_context_paths_file(self, fixture_dir):
        paths = parse_context_paths((fixture_dir / "context_paths.jsonl").read_bytes())
        assert len(paths) == 2
        assert paths[0].hops == (("ethnic_group", "Canada"), ("country", "Ontario"))
        assert paths[1].pagerank == 0.3

    def test_entity_context_bad_line_number(self):
        text = '{"entity": "a", "synonyms": []}\n{"entity": 3}\n'
        with pytest.raises(DataError, match="line 2"):
            parse_entity_context(text)

    def test_context_path_bad_hops(self):
        with pytest.raises(DataError, match="line 1"):
            parse_context_paths('{"head": "a", "tail": "b", "hops": []}')

    def test_context_path_validation_propagates_line(self):
        rec = {"head": "a", "tail": "b", "hops": [{"rel": "r", "node": "WRONG"}]}
        with pytest.raises(DataError, match="line 1"):
            parse_context_paths(json.dumps(rec))
