"""Per-domain configuration bundles tying together notation, similarity, and
constraint checking defaults."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import UnknownDomain
from .notation import Notation
from .similarity import BuiltinProvider, CachingProvider, EmbeddingProvider, SimilarityMode

FLOWCHART = "flowchart"
TAXONOMY = "taxonomy"
CLEVR = "clevr"

DOMAINS = (FLOWCHART, TAXONOMY, CLEVR)


@dataclass
class DomainProfile:
    name: str
    notation: Notation
    similarity_mode: SimilarityMode
    provider: EmbeddingProvider = field(default_factory=lambda: CachingProvider(BuiltinProvider()))
    tau: float = 0.5
    match_timeout: float = 5.0
    solve_timeout: float = 60.0
    case_sensitive_labels: bool = False
    taxonomy_require_connected: bool = True
    nonunique_is_error: bool = True
    seed_selection: str = "first"  # or "largest"


def profile(domain: str, **overrides) -> DomainProfile:
    if domain == FLOWCHART:
        p = DomainProfile(FLOWCHART, Notation.MERMAID_FLOWCHART, SimilarityMode.EMBEDDING)
    elif domain == TAXONOMY:
        p = DomainProfile(TAXONOMY, Notation.TAXONOMY_EDGES, SimilarityMode.EXACT_LABEL)
    elif domain == CLEVR:
        p = DomainProfile(CLEVR, Notation.CLEVR_PROGRAM, SimilarityMode.EXACT_LABEL)
    else:
        raise UnknownDomain(domain)
    return replace(p, **overrides) if overrides else p
