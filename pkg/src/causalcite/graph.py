"""Directed citation graph: children, descendants, and control pools."""

from __future__ import annotations

import os
import threading
from collections import defaultdict, deque
from dataclasses import dataclass, field

from causalcite.corpus import CorpusStore
from causalcite.errors import NotFoundError


@dataclass(frozen=True, slots=True)
class CitationEdge:
    from_id: str  # the cited, earlier paper
    to_id: str  # the citing follow-up
    is_influential: bool = False


@dataclass(frozen=True)
class DescendantSet:
    root: str
    members: frozenset[str]


@dataclass
class EdgeReport:
    accepted: int = 0
    duplicates: int = 0
    rejected: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "duplicates": self.duplicates,
            "rejected": len(self.rejected),
            "rejections": self.rejected,
        }


def parse_edge_line(line: str) -> CitationEdge:
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) not in (2, 3):
        raise ValueError("expected 2 or 3 tab-separated columns")
    src, dst = parts[0], parts[1]
    if not src or not dst:
        raise ValueError("empty endpoint")
    flag = parts[2].strip() if len(parts) == 3 else "0"
    if flag not in ("0", "1", ""):
        raise ValueError(f"is_influential must be 0 or 1, got {flag!r}")
    return CitationEdge(src, dst, flag == "1")


class CitationGraph:
    """Adjacency in both directions over a fixed corpus.

    Immutable after ingest. Descendant sets are memoized behind a lock so
    concurrent readers are safe.
    """

    MEMO_LIMIT = 4096

    def __init__(self, corpus: CorpusStore) -> None:
        self.corpus = corpus
        self._fwd: dict[str, set[str]] = defaultdict(set)
        self._rev: dict[str, set[str]] = defaultdict(set)
        self._influential: set[tuple[str, str]] = set()
        self._memo: dict[str, frozenset[str]] = {}
        self._memo_lock = threading.Lock()
        self.edge_count = 0

    def ingest(self, source) -> EdgeReport:
        """Read TSV edges from a path or an iterable of lines."""
        if isinstance(source, (str, os.PathLike)):
            with open(source, encoding="utf-8") as fh:
                return self._ingest_lines(fh)
        return self._ingest_lines(source)

    def _ingest_lines(self, lines) -> EdgeReport:
        report = EdgeReport()
        for row_no, line in enumerate(lines, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                edge = parse_edge_line(line)
            except ValueError as exc:
                report.rejected.append({"row": row_no, "reason": str(exc)})
                continue
            reason = self._add(edge, report)
            if reason:
                report.rejected.append({"row": row_no, "reason": reason})
        with self._memo_lock:
            self._memo.clear()
        return report

    def add_edges(self, edges) -> EdgeReport:
        report = EdgeReport()
        for row_no, edge in enumerate(edges, start=1):
            if not isinstance(edge, CitationEdge):
                edge = CitationEdge(*edge)
            reason = self._add(edge, report)
            if reason:
                report.rejected.append({"row": row_no, "reason": reason})
        with self._memo_lock:
            self._memo.clear()
        return report

    def _add(self, edge: CitationEdge, report: EdgeReport) -> str | None:
        if edge.from_id == edge.to_id:
            return "self-citation"
        for end in (edge.from_id, edge.to_id):
            if end not in self.corpus:
                return f"unknown endpoint {end!r}"
        if edge.to_id in self._fwd.get(edge.from_id, ()):
            report.duplicates += 1
        else:
            self._fwd[edge.from_id].add(edge.to_id)
            self._rev[edge.to_id].add(edge.from_id)
            self.edge_count += 1
            report.accepted += 1
        if edge.is_influential:
            self._influential.add((edge.from_id, edge.to_id))
        return None

    def _check(self, paper_id: str) -> None:
        if paper_id not in self.corpus:
            raise NotFoundError(f"unknown paper_id {paper_id!r}")

    def has_edge(self, a: str, b: str) -> bool:
        return b in self._fwd.get(a, ())

    def is_influential(self, a: str, b: str) -> bool:
        return (a, b) in self._influential

    def children(self, a: str, influential_only: bool = False) -> set[str]:
        self._check(a)
        kids = self._fwd.get(a, set())
        if influential_only:
            return {b for b in kids if (a, b) in self._influential}
        return set(kids)

    def references(self, b: str) -> set[str]:
        self._check(b)
        return set(self._rev.get(b, ()))

    def _reach(self, a: str) -> frozenset[str]:
        with self._memo_lock:
            hit = self._memo.get(a)
        if hit is not None:
            return hit
        seen: set[str] = set()
        queue = deque(self._fwd.get(a, ()))
        while queue:
            node = queue.popleft()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(n for n in self._fwd.get(node, ()) if n not in seen)
        seen.discard(a)  # a cycle back to the root does not make it a member
        members = frozenset(seen)
        with self._memo_lock:
            if len(self._memo) >= self.MEMO_LIMIT:
                self._memo.pop(next(iter(self._memo)))
            self._memo[a] = members
        return members

    def descendants(self, a: str) -> DescendantSet:
        self._check(a)
        return DescendantSet(a, self._reach(a))

    def excluded(self, a: str) -> frozenset[str]:
        """Descendants of ``a`` plus ``a`` itself: never eligible as controls."""
        self._check(a)
        return self._reach(a) | {a}

    def non_descendant_pool(self, a: str) -> set[str]:
        excl = self.excluded(a)
        return {pid for pid in self.corpus.ids() if pid not in excl}

    def edges(self):
        for a in sorted(self._fwd):
            for b in sorted(self._fwd[a]):
                yield CitationEdge(a, b, (a, b) in self._influential)

    def export(self, dest) -> int:
        n = 0
        with open(dest, "w", encoding="utf-8") as fh:
            for e in self.edges():
                fh.write(f"{e.from_id}\t{e.to_id}\t{int(e.is_influential)}\n")
                n += 1
        return n
