"""Document-level relation extraction as knowledge-graph link prediction."""

from .kg import KnowledgeGraph, NameTriple, Provenance, Triple, VocabSummary

__version__ = "0.1.0"

__all__ = [
    "KnowledgeGraph",
    "NameTriple",
    "Provenance",
    "Triple",
    "VocabSummary",
    "__version__",
]
