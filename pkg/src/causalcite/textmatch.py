"""Counterfactual synthesis by text matching, and pairwise causal impact.

For a cited paper ``a`` and a follow-up ``b``, the control pool is every
paper that is neither ``a`` nor one of its descendants, restricted to
``b``'s publication year. BM25 narrows that pool to a coarse candidate
list, embedding cosine similarity reranks it, and the counterfactual
outcome of ``b`` is the similarity-weighted mean outcome of the top
matches above a threshold (zero if none qualify).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

from causalcite.bm25 import Bm25Index, CoarseCandidateList
from causalcite.config import EngineConfig
from causalcite.corpus import CorpusStore
from causalcite.embeddings import cosine_similarity
from causalcite.errors import ContractError, MissingEmbeddingError
from causalcite.graph import CitationGraph
from causalcite.textprep import CleanedText, MediatorRemover, clean_paper, default_remover

PCI_SCHEMA = "causalcite.pci/1"


def outcome(citation_count: int) -> float:
    """log10(1 + citations); the shift keeps uncited papers finite."""
    if citation_count < 0:
        raise ContractError("citation count must be non-negative")
    return math.log10(1 + citation_count)


@dataclass(frozen=True)
class MatchEntry:
    candidate_id: str
    similarity: float
    weight: float
    outcome: float


@dataclass
class MatchSet:
    treated_id: str
    threshold: float
    entries: list[MatchEntry] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.entries

    def to_dict(self) -> dict:
        return {
            "treated_id": self.treated_id,
            "threshold": self.threshold,
            "empty": self.empty,
            "entries": [
                {
                    "candidate_id": e.candidate_id,
                    "similarity": e.similarity,
                    "weight": e.weight,
                    "outcome": e.outcome,
                }
                for e in self.entries
            ],
        }


def select_matches(treated_id: str, scored, threshold: float,
                   max_matches: int) -> tuple[MatchSet, int, int]:
    """Build a MatchSet from ``(candidate_id, similarity, outcome)`` triples.

    Returns the set plus the counts dropped by the threshold and by the
    ``max_matches`` cap.
    """
    passing = [s for s in scored if s[1] >= threshold]
    below = len(scored) - len(passing)
    passing.sort(key=lambda s: (-s[1], s[0]))
    kept = passing[:max_matches]
    total = math.fsum(s[1] for s in kept)
    entries = [MatchEntry(cid, m, m / total, y) for cid, m, y in kept]
    return MatchSet(treated_id, threshold, entries), below, len(passing) - len(kept)


def synthesize_counterfactual(match_set: MatchSet) -> float:
    """Similarity-weighted mean outcome of the matches; 0.0 when there are none."""
    if match_set.empty:
        return 0.0
    ys = [e.outcome for e in match_set.entries]
    y_hat = math.fsum(e.weight * e.outcome for e in match_set.entries)
    # a convex combination; clamp away last-ulp rounding
    return min(max(y_hat, min(ys)), max(ys))


@dataclass
class PciResult:
    a_id: str
    b_id: str
    y_b: float
    y_hat_t0: float
    pci: float
    match_set: MatchSet
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "schema": PCI_SCHEMA,
            "a_id": self.a_id,
            "b_id": self.b_id,
            "y_b": self.y_b,
            "y_hat_t0": self.y_hat_t0,
            "pci": self.pci,
            "match_set": self.match_set.to_dict(),
            "diagnostics": self.diagnostics,
        }


class TextMatcher:
    """PCI engine over an immutable corpus, graph, and embedding provider.

    Safe to share between threads: per-year BM25 indexes are built once
    under a per-year lock, and everything else is read-only or an
    lru_cache.
    """

    def __init__(self, corpus: CorpusStore, graph: CitationGraph, embeddings,
                 config: EngineConfig | None = None,
                 remover: MediatorRemover | None = None):
        self.corpus = corpus
        self.graph = graph
        self.embeddings = embeddings
        self.config = config or EngineConfig()
        self.remover = remover or default_remover()
        self._indexes: dict[int, Bm25Index] = {}
        self._year_locks: dict[int, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.cleaned = lru_cache(maxsize=1 << 16)(self._clean)

    def _clean(self, paper_id: str) -> CleanedText:
        rec = self.corpus.get_paper(paper_id)
        return clean_paper(paper_id, rec.title, rec.abstract, self.remover)

    def year_index(self, year: int) -> Bm25Index:
        index = self._indexes.get(year)
        if index is not None:
            return index
        with self._locks_guard:
            lock = self._year_locks.setdefault(year, threading.Lock())
        with lock:
            index = self._indexes.get(year)
            if index is None:
                index = self._build_index(year)
                self._indexes[year] = index
        return index

    def _build_index(self, year: int) -> Bm25Index:
        get = self.corpus.get_paper
        remover = self.remover

        def docs():
            for pid in self.corpus.year_ids(year):
                rec = get(pid)
                yield pid, clean_paper(pid, rec.title, rec.abstract, remover).tokens

        return Bm25Index(docs(), k1=self.config.bm25.k1, b=self.config.bm25.b)

    def vector(self, paper_id: str):
        return self.embeddings.vector(paper_id)

    def coarse_candidates(self, b: str, excluded) -> CoarseCandidateList:
        year = self.corpus.get_paper(b).year
        return self.year_index(year).top_k(
            self.cleaned(b).tokens, self.config.match.coarse_k,
            exclude=excluded, query_id=b,
        )

    def rerank(self, b: str, coarse: CoarseCandidateList) -> tuple[MatchSet, dict]:
        vb = self.vector(b)
        if vb is None:
            raise MissingEmbeddingError(f"no embedding for treated paper {b!r}")
        scored = []
        missing = 0
        for cid, _ in coarse.entries:
            vc = self.vector(cid)
            if vc is None:
                missing += 1
                continue
            m = cosine_similarity(vb, vc)
            scored.append((cid, m, outcome(self.corpus.get_paper(cid).citation_count)))
        cfg = self.config.match
        ms, below, capped = select_matches(b, scored, cfg.threshold, cfg.max_matches)
        return ms, {
            "missing_embedding": missing,
            "below_threshold": below,
            "beyond_max_matches": capped,
        }

    def pci(self, a: str, b: str) -> PciResult:
        rec_b = self.corpus.get_paper(b)
        self.corpus.get_paper(a)
        if not self.graph.has_edge(a, b):
            raise ContractError(f"b is not a follow-up of a ({b!r} does not cite {a!r})")
        if self.vector(b) is None:
            raise MissingEmbeddingError(f"no embedding for treated paper {b!r}")

        excluded = self.graph.excluded(a)
        year_ids = self.corpus.year_ids(rec_b.year)
        year_excluded = sum(1 for pid in excluded if self.corpus.get_paper(pid).year == rec_b.year)
        pool_size = len(self.corpus) - len(excluded)
        same_year = len(year_ids) - year_excluded

        coarse = self.coarse_candidates(b, excluded)
        match_set, rerank_diag = self.rerank(b, coarse)
        y_b = outcome(rec_b.citation_count)
        y_hat = synthesize_counterfactual(match_set)
        diagnostics = {
            "corpus_size": len(self.corpus),
            "excluded_descendants": len(excluded) - 1,
            "pool_size": pool_size,
            "dropped_year_filter": pool_size - same_year,
            "same_year_pool": same_year,
            "dropped_coarse": same_year - len(coarse),
            "coarse_candidates": len(coarse),
            **rerank_diag,
            "matched": len(match_set.entries),
            "embedding_source": getattr(self.embeddings, "label", "unknown"),
        }
        return PciResult(a, b, y_b, y_hat, y_b - y_hat, match_set, diagnostics)
