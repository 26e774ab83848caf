"""In-memory knowledge graph: provenance-tagged triples over dense vocabularies,
with forward/reverse adjacency indexes for per-relation neighborhood queries."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import IntEnum

from .errors import VocabError

# Relations every graph carries, used by the context generators.
RESERVED_RELATIONS = ("hasSynonym", "hasEntityType")


class Provenance(IntEnum):
    """Origin of a triple. Lower value = stronger claim; the stronger tag is
    retained when the same (head, relation, tail) is inserted twice."""

    CORE_LABEL = 0
    EXTRACTED = 1
    PATH_CONTEXT = 2
    SYNONYM_CONTEXT = 3
    TYPE_CONTEXT = 4
    PREDICTED = 5


@dataclass(frozen=True, order=True)
class Triple:
    head: int
    relation: int
    tail: int
    provenance: Provenance

    def key(self) -> tuple[int, int, int]:
        return (self.head, self.relation, self.tail)


@dataclass(frozen=True)
class NameTriple:
    """A triple keyed by names, before vocabulary resolution."""

    head: str
    relation: str
    tail: str
    provenance: Provenance


@dataclass(frozen=True)
class VocabSummary:
    n_entities: int
    n_relations: int
    n_triples: int
    by_provenance: tuple[tuple[Provenance, int], ...]

    def provenance_counts(self) -> dict[Provenance, int]:
        return dict(self.by_provenance)


class Vocabulary:
    """Dense name <-> id mapping. Append-only until frozen, immutable after."""

    def __init__(self, reserved: tuple[str, ...] = ()) -> None:
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        self._frozen = False
        for name in reserved:
            self.add(name)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    @property
    def frozen(self) -> bool:
        return self._frozen

    def add(self, name: str) -> int:
        """Return the id for `name`, registering it if new."""
        idx = self._ids.get(name)
        if idx is not None:
            return idx
        if self._frozen:
            raise VocabError(f"vocabulary is frozen; cannot add {name!r}")
        idx = len(self._names)
        self._names.append(name)
        self._ids[name] = idx
        return idx

    def id_of(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            raise VocabError(f"unknown name {name!r}")
        return idx

    def name_of(self, idx: int) -> str:
        if not 0 <= idx < len(self._names):
            raise VocabError(f"id {idx} out of range (size {len(self._names)})")
        return self._names[idx]

    def names(self) -> list[str]:
        return list(self._names)

    def freeze(self) -> None:
        self._frozen = True

    def copy(self) -> "Vocabulary":
        out = Vocabulary()
        out._names = list(self._names)
        out._ids = dict(self._ids)
        out._frozen = self._frozen
        return out


class KnowledgeGraph:
    """Deduplicated triple set with sorted per-(entity, relation) adjacency."""

    def __init__(self) -> None:
        self.entities = Vocabulary()
        self.relations = Vocabulary(reserved=RESERVED_RELATIONS)
        self._triples: dict[tuple[int, int, int], Provenance] = {}
        self._fwd: dict[tuple[int, int], list[int]] = {}
        self._rev: dict[tuple[int, int], list[int]] = {}
        self._out_rels: dict[int, list[int]] = {}

    # -- construction ------------------------------------------------------

    def _check_entity(self, idx: int) -> None:
        if not 0 <= idx < len(self.entities):
            raise VocabError(f"entity id {idx} not in vocabulary (size {len(self.entities)})")

    def _check_relation(self, idx: int) -> None:
        if not 0 <= idx < len(self.relations):
            raise VocabError(f"relation id {idx} not in vocabulary (size {len(self.relations)})")

    def add_triple(self, t: Triple) -> bool:
        """Insert a triple. Returns True only if (head, relation, tail) is new;
        a duplicate keeps the stronger provenance and returns False."""
        self._check_entity(t.head)
        self._check_entity(t.tail)
        self._check_relation(t.relation)
        key = t.key()
        existing = self._triples.get(key)
        if existing is not None:
            if t.provenance < existing:
                self._triples[key] = t.provenance
            return False
        self._triples[key] = t.provenance
        bisect.insort(self._fwd.setdefault((t.head, t.relation), []), t.tail)
        bisect.insort(self._rev.setdefault((t.tail, t.relation), []), t.head)
        rels = self._out_rels.setdefault(t.head, [])
        pos = bisect.bisect_left(rels, t.relation)
        if pos == len(rels) or rels[pos] != t.relation:
            rels.insert(pos, t.relation)
        return True

    def add_names(self, nt: NameTriple) -> bool:
        """Resolve names (registering new ones if the vocabulary allows) and insert."""
        h = self.entities.add(nt.head)
        t = self.entities.add(nt.tail)
        r = self.relations.add(nt.relation)
        return self.add_triple(Triple(h, r, t, nt.provenance))

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def has_triple(self, head: int, relation: int, tail: int) -> bool:
        return (head, relation, tail) in self._triples

    def provenance_of(self, head: int, relation: int, tail: int) -> Provenance:
        try:
            return self._triples[(head, relation, tail)]
        except KeyError:
            raise VocabError(f"triple ({head}, {relation}, {tail}) not in graph") from None

    def neighbors(self, e: int, r: int, direction: str = "out") -> list[int]:
        """Sorted, duplicate-free neighbor ids of `e` under relation `r`."""
        self._check_entity(e)
        self._check_relation(r)
        if direction == "out":
            return list(self._fwd.get((e, r), []))
        if direction == "in":
            return list(self._rev.get((e, r), []))
        raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")

    def out_edges(self, e: int) -> list[tuple[int, int]]:
        """All (relation, tail) pairs leaving `e`, in (relation, tail) order."""
        self._check_entity(e)
        out: list[tuple[int, int]] = []
        for r in self._out_rels.get(e, []):
            out.extend((r, t) for t in self._fwd[(e, r)])
        return out

    def triples(self) -> list[Triple]:
        """All triples in (head, relation, tail) order."""
        return [
            Triple(h, r, t, p)
            for (h, r, t), p in sorted(self._triples.items())
        ]

    def triple_keys(self) -> set[tuple[int, int, int]]:
        return set(self._triples)

    def freeze_vocab(self) -> VocabSummary:
        """Freeze both vocabularies and return exact counts."""
        self.entities.freeze()
        self.relations.freeze()
        counts = {p: 0 for p in Provenance}
        for prov in self._triples.values():
            counts[prov] += 1
        return VocabSummary(
            n_entities=len(self.entities),
            n_relations=len(self.relations),
            n_triples=len(self._triples),
            by_provenance=tuple((p, counts[p]) for p in Provenance),
        )

    def copy(self) -> "KnowledgeGraph":
        out = KnowledgeGraph.__new__(KnowledgeGraph)
        out.entities = self.entities.copy()
        out.relations = self.relations.copy()
        out._triples = dict(self._triples)
        out._fwd = {k: list(v) for k, v in self._fwd.items()}
        out._rev = {k: list(v) for k, v in self._rev.items()}
        out._out_rels = {k: list(v) for k, v in self._out_rels.items()}
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.entities.names() == other.entities.names()
            and self.relations.names() == other.relations.names()
            and self._triples == other._triples
        )
