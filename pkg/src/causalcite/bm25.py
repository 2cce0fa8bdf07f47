"""Okapi BM25 over an in-memory inverted index (CSR postings)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Sequence

import numpy as np

from causalcite.errors import ContractError, NotFoundError
from causalcite.textprep import CleanedText


@dataclass
class CoarseCandidateList:
    query_id: str | None
    k_requested: int
    entries: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [doc for doc, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def idf(n_docs: int, df: int) -> float:
    return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)


class Bm25Index:
    """Inverted index over (doc_id, tokens) pairs.

    Documents are stored in byte order of their ids, so building from the
    same set of documents in any order yields identical arrays.
    """

    def __init__(self, docs: Iterable[tuple[str, Sequence[str]]],
                 k1: float = 1.5, b: float = 0.75):
        if not k1 > 0:
            raise ContractError("bm25.k1 must be > 0")
        if not 0.0 <= b <= 1.0:
            raise ContractError("bm25.b must be in [0, 1]")
        self.k1 = float(k1)
        self.b = float(b)

        pairs = list(docs)
        if not pairs:
            raise ContractError("cannot index an empty document set")
        pairs.sort(key=lambda p: p[0])
        ids = [p[0] for p in pairs]
        for prev, cur in zip(ids, ids[1:]):
            if prev == cur:
                raise ContractError(f"duplicate doc_id {cur!r}")
        self.doc_ids: list[str] = ids
        self._pos = {d: i for i, d in enumerate(ids)}
        n = len(ids)

        token_lists = [p[1] for p in pairs]
        del pairs
        lengths = np.fromiter((len(t) for t in token_lists), dtype=np.int64, count=n)
        flat = list(chain.from_iterable(token_lists))
        del token_lists
        terms = sorted(dict.fromkeys(flat))
        self.vocab = {t: i for i, t in enumerate(terms)}
        tids = np.fromiter(map(self.vocab.__getitem__, flat), dtype=np.int64, count=len(flat))
        del flat
        doc_idx = np.repeat(np.arange(n, dtype=np.int64), lengths)
        keys, tf = np.unique(tids * n + doc_idx, return_counts=True)
        del tids, doc_idx
        post_terms = keys // n
        self.post_docs = (keys % n).astype(np.int64)
        self.post_tf = tf.astype(np.float64)
        self.indptr = np.zeros(len(terms) + 1, dtype=np.int64)
        np.cumsum(np.bincount(post_terms, minlength=len(terms)), out=self.indptr[1:])

        self.doc_count = n
        self.doc_lengths = lengths
        self.avg_doc_len = float(lengths.mean())
        if self.avg_doc_len > 0:
            rel = lengths / self.avg_doc_len
        else:
            rel = np.ones(n)
        self._len_norm = self.k1 * (1.0 - self.b + self.b * rel)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._pos

    def doc_length(self, doc_id: str) -> int:
        return int(self.doc_lengths[self._index_of(doc_id)])

    def document_frequency(self, term: str) -> int:
        tid = self.vocab.get(term)
        return 0 if tid is None else int(self.indptr[tid + 1] - self.indptr[tid])

    def postings(self, term: str) -> list[tuple[str, int]]:
        tid = self.vocab.get(term)
        if tid is None:
            return []
        s, e = self.indptr[tid], self.indptr[tid + 1]
        return [(self.doc_ids[d], int(f)) for d, f in zip(self.post_docs[s:e], self.post_tf[s:e])]

    def _index_of(self, doc_id: str) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise NotFoundError(f"doc_id {doc_id!r} not in index") from None

    def _query_terms(self, query) -> list[int]:
        tokens = query.tokens if isinstance(query, CleanedText) else query
        return [self.vocab[t] for t in sorted(set(tokens)) if t in self.vocab]

    def _term_weights(self, tid: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.indptr[tid], self.indptr[tid + 1]
        docs = self.post_docs[s:e]
        tf = self.post_tf[s:e]
        w = idf(self.doc_count, e - s) * tf * (self.k1 + 1.0) / (tf + self._len_norm[docs])
        return docs, w

    def score(self, query, doc_id: str) -> float:
        """BM25 score of one document; repeated query terms count once."""
        d = self._index_of(doc_id)
        total = 0.0
        for tid in self._query_terms(query):
            s, e = self.indptr[tid], self.indptr[tid + 1]
            j = s + int(np.searchsorted(self.post_docs[s:e], d))
            if j < e and self.post_docs[j] == d:
                tf = self.post_tf[j]
                total += idf(self.doc_count, e - s) * tf * (self.k1 + 1.0) / (tf + self._len_norm[d])
        return float(total)

    def score_all(self, query) -> np.ndarray:
        scores = np.zeros(self.doc_count, dtype=np.float64)
        for tid in self._query_terms(query):
            docs, w = self._term_weights(tid)
            scores[docs] += w
        return scores

    def mask_for(self, doc_ids: Iterable[str], strict: bool = True) -> np.ndarray:
        mask = np.zeros(self.doc_count, dtype=bool)
        for d in doc_ids:
            i = self._pos.get(d)
            if i is None:
                if strict:
                    raise ContractError(f"pool member {d!r} is not indexed")
                continue
            mask[i] = True
        return mask

    def top_k(self, query, k: int, pool: Iterable[str] | None = None,
              exclude: Iterable[str] | None = None,
              query_id: str | None = None) -> CoarseCandidateList:
        """Highest-scoring pool members, ties broken by ascending doc_id.

        ``pool`` defaults to every indexed document; ``exclude`` names ids
        removed from it. The query's own id is always removed. Documents
        with zero score are still eligible, so a large enough ``k`` returns
        the whole pool.
        """
        if k < 1:
            raise ContractError("k must be >= 1")
        if query_id is None and isinstance(query, CleanedText):
            query_id = query.paper_id
        out = CoarseCandidateList(query_id, k)
        tokens = query.tokens if isinstance(query, CleanedText) else query
        if not tokens:
            return out

        if pool is None:
            mask = np.ones(self.doc_count, dtype=bool)
        else:
            mask = self.mask_for(pool)
        if exclude is not None:
            mask &= ~self.mask_for(exclude, strict=False)
        if query_id is not None and query_id in self._pos:
            mask[self._pos[query_id]] = False

        cand = np.flatnonzero(mask)
        if cand.size == 0:
            return out
        scores = self.score_all(tokens)[cand]
        if cand.size > k:
            kth = np.partition(scores, cand.size - k)[cand.size - k]
            above = scores > kth
            ties = np.flatnonzero(scores == kth)[: k - int(above.sum())]
            keep = np.concatenate([np.flatnonzero(above), ties])
            cand, scores = cand[keep], scores[keep]
        # doc index order is byte order of ids, so it doubles as the tie-break
        order = np.lexsort((cand, -scores))
        out.entries = [(self.doc_ids[cand[i]], float(scores[i])) for i in order]
        return out
