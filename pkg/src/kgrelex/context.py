"""Context generation: synonym/type triples from entity metadata and
conversion of N-hop external paths into chains of triples."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DataError
from .kg import NameTriple, Provenance

MAX_CONTEXT_HOPS = 4
SYNONYM_RELATION = "hasSynonym"
TYPE_RELATION = "hasEntityType"


@dataclass(frozen=True)
class EntityContextRecord:
    entity: str
    synonyms: tuple[str, ...] = ()
    etype: str | None = None

    def __post_init__(self) -> None:
        seen = set()
        for s in self.synonyms:
            if s == self.entity:
                raise DataError(f"entity {self.entity!r} listed as its own synonym")
            if s in seen:
                raise DataError(f"duplicate synonym {s!r} for entity {self.entity!r}")
            seen.add(s)


@dataclass(frozen=True)
class ContextPath:
    head: str
    tail: str
    hops: tuple[tuple[str, str], ...]  # (relation, node), last node == tail
    pagerank: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= len(self.hops) <= MAX_CONTEXT_HOPS:
            raise DataError(
                f"context path {self.head!r} -> {self.tail!r} has {len(self.hops)} hops; "
                f"expected 1..{MAX_CONTEXT_HOPS}"
            )
        if self.hops[-1][1] != self.tail:
            raise DataError(
                f"context path {self.head!r} -> {self.tail!r}: last hop ends at "
                f"{self.hops[-1][1]!r}, not the tail"
            )


def synonym_triples(rec: EntityContextRecord) -> list[NameTriple]:
    """One hasSynonym triple per synonym of the record's entity."""
    return [
        NameTriple(rec.entity, SYNONYM_RELATION, s, Provenance.SYNONYM_CONTEXT)
        for s in rec.synonyms
    ]


def type_triples(rec: EntityContextRecord) -> list[NameTriple]:
    """One hasEntityType triple when the record carries a type, else none."""
    if rec.etype is None:
        return []
    return [NameTriple(rec.entity, TYPE_RELATION, rec.etype, Provenance.TYPE_CONTEXT)]


def path_to_triples(path: ContextPath) -> list[NameTriple]:
    """Chain a k-hop path into k PATH_CONTEXT triples head -> ... -> tail."""
    out = []
    node = path.head
    for rel, nxt in path.hops:
        out.append(NameTriple(node, rel, nxt, Provenance.PATH_CONTEXT))
        node = nxt
    return out


def select_context_path(candidates: list[ContextPath],
                        max_hops: int = MAX_CONTEXT_HOPS) -> ContextPath | None:
    """Pick the candidate with the highest pagerank among those within max_hops.

    When no candidate carries a pagerank, the shortest path wins; remaining ties
    go to the lexicographically smallest relation-name sequence. A missing
    pagerank ranks below any present one.
    """
    if not 1 <= max_hops <= MAX_CONTEXT_HOPS:
        raise ValueError(f"max_hops must be in 1..{MAX_CONTEXT_HOPS}, got {max_hops}")
    eligible = [p for p in candidates if len(p.hops) <= max_hops]
    if not eligible:
        return None

    def sort_key(p: ContextPath):
        pr = p.pagerank if p.pagerank is not None else float("-inf")
        rels = tuple(rel for rel, _ in p.hops)
        nodes = tuple(node for _, node in p.hops)
        return (-pr, len(p.hops), rels, nodes, p.head, p.tail)

    return min(eligible, key=sort_key)


def parse_entity_context(data: bytes | str) -> list[EntityContextRecord]:
    """Parse a JSON-Lines entity context file ({"entity", "synonyms", "type"})."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"entity context line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or not isinstance(rec.get("entity"), str):
            raise DataError(f"entity context line {lineno}: field 'entity' must be a string")
        synonyms = rec.get("synonyms", [])
        if not isinstance(synonyms, list) or not all(isinstance(s, str) for s in synonyms):
            raise DataError(f"entity context line {lineno}: field 'synonyms' must be an array of strings")
        etype = rec.get("type")
        if etype is not None and not isinstance(etype, str):
            raise DataError(f"entity context line {lineno}: field 'type' must be a string or null")
        try:
            records.append(EntityContextRecord(rec["entity"], tuple(synonyms), etype))
        except DataError as exc:
            raise DataError(f"entity context line {lineno}: {exc}") from exc
    return records


def parse_context_paths(data: bytes | str) -> list[ContextPath]:
    """Parse a JSON-Lines context path file ({"head", "tail", "hops", "pagerank"})."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    paths = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"context path line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise DataError(f"context path line {lineno}: record must be a JSON object")
        for key in ("head", "tail"):
            if not isinstance(rec.get(key), str):
                raise DataError(f"context path line {lineno}: field {key!r} must be a string")
        raw_hops = rec.get("hops")
        if not isinstance(raw_hops, list) or not raw_hops:
            raise DataError(f"context path line {lineno}: field 'hops' must be a non-empty array")
        hops = []
        for hop in raw_hops:
            if (not isinstance(hop, dict) or not isinstance(hop.get("rel"), str)
                    or not isinstance(hop.get("node"), str)):
                raise DataError(
                    f"context path line {lineno}: each hop must be {{'rel': str, 'node': str}}"
                )
            hops.append((hop["rel"], hop["node"]))
        pagerank = rec.get("pagerank")
        if pagerank is not None and not isinstance(pagerank, (int, float)):
            raise DataError(f"context path line {lineno}: field 'pagerank' must be a number or null")
        try:
            paths.append(ContextPath(rec["head"], rec["tail"], tuple(hops),
                                     None if pagerank is None else float(pagerank)))
        except DataError as exc:
            raise DataError(f"context path line {lineno}: {exc}") from exc
    return paths
