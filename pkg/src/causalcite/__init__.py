"""Causal citation-impact indices via text-matched counterfactuals."""

from causalcite.corpus import CorpusStore, PaperRecord
from causalcite.errors import (
    CausalCiteError,
    ConflictError,
    ContractError,
    FormatError,
    MissingEmbeddingError,
    NotFoundError,
)
from causalcite.graph import CitationGraph

__version__ = "0.1.0"

__all__ = [
    "CausalCiteError",
    "CitationGraph",
    "ConflictError",
    "ContractError",
    "CorpusStore",
    "FormatError",
    "MissingEmbeddingError",
    "NotFoundError",
    "PaperRecord",
]
