"""Paper metadata store with year-partitioned access."""

from __future__ import annotations

import json
import os
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

from causalcite.errors import ConflictError, NotFoundError

YEAR_MIN = 1000
YEAR_MAX = 3000

_FIELDS = (
    "paper_id",
    "title",
    "abstract",
    "year",
    "citation_count",
    "influential_citation_count",
)


@dataclass(frozen=True, slots=True)
class PaperRecord:
    paper_id: str
    title: str
    abstract: str
    year: int
    citation_count: int
    influential_citation_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list[dict] = field(default_factory=list)
    duplicates: int = 0

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": len(self.rejected),
            "duplicates": self.duplicates,
            "rejections": self.rejected,
        }


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def validate_row(obj) -> PaperRecord:
    """Turn one decoded JSON object into a record or raise ValueError(reason)."""
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    unknown = sorted(set(obj) - set(_FIELDS))
    if unknown:
        raise ValueError(f"unknown field {unknown[0]!r}")

    paper_id = obj.get("paper_id")
    if not isinstance(paper_id, str):
        raise ValueError("missing paper_id")
    if not paper_id:
        raise ValueError("empty paper_id")
    title = obj.get("title")
    if not isinstance(title, str):
        raise ValueError("missing title")
    abstract = obj.get("abstract")
    if abstract is None:
        abstract = ""
    elif not isinstance(abstract, str):
        raise ValueError("abstract not a string")

    year = obj.get("year")
    if year is None:
        raise ValueError("missing year")
    if not _is_int(year):
        raise ValueError("year not an integer")
    if not YEAR_MIN <= year <= YEAR_MAX:
        raise ValueError("year out of range")

    cites = obj.get("citation_count")
    if cites is None:
        raise ValueError("missing citation_count")
    if not _is_int(cites):
        raise ValueError("citation_count not an integer")
    if cites < 0:
        raise ValueError("negative citation_count")

    infl = obj.get("influential_citation_count", 0)
    if infl is None:
        infl = 0
    if not _is_int(infl):
        raise ValueError("influential_citation_count not an integer")
    if infl < 0:
        raise ValueError("negative influential_citation_count")
    if infl > cites:
        raise ValueError("influential_citation_count exceeds citation_count")

    return PaperRecord(paper_id, title, abstract, year, cites, infl)


def _read_lines(source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


class CorpusStore:
    """In-memory paper store.

    Single writer while ingesting; treat as read-only afterwards, at which
    point any number of threads may query it.
    """

    def __init__(self) -> None:
        self._papers: dict[str, PaperRecord] = {}
        self._row_of: dict[str, int] = {}
        self._years: dict[int, list[str]] = defaultdict(list)
        self._sorted_years: dict[int, tuple[str, ...]] = {}

    def __len__(self) -> int:
        return len(self._papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._papers

    def ingest(self, source) -> IngestReport:
        """Ingest JSON-lines rows from a path or an iterable of lines.

        Invalid rows are rejected and reported; a duplicate id whose
        fields differ from the stored one aborts the whole batch.
        """
        report = IngestReport()
        staged: dict[str, tuple[int, PaperRecord]] = {}
        for row_no, line in enumerate(_read_lines(source), start=1):
            if not line.strip():
                continue
            try:
                record = validate_row(json.loads(line))
            except json.JSONDecodeError:
                report.rejected.append({"row": row_no, "reason": "malformed JSON"})
                continue
            except ValueError as exc:
                report.rejected.append({"row": row_no, "reason": str(exc)})
                continue
            self._stage(record, row_no, staged, report)
        self._commit(staged)
        return report

    def add_records(self, records: Iterable[PaperRecord]) -> IngestReport:
        """Bulk-add already-built records (programmatic ingest)."""
        report = IngestReport()
        staged: dict[str, tuple[int, PaperRecord]] = {}
        for row_no, rec in enumerate(records, start=1):
            try:
                record = validate_row(rec.to_dict())
            except ValueError as exc:
                report.rejected.append({"row": row_no, "reason": str(exc)})
                continue
            self._stage(record, row_no, staged, report)
        self._commit(staged)
        return report

    def _stage(self, record, row_no, staged, report) -> None:
        pid = record.paper_id
        prior = staged.get(pid)
        if prior is None and pid in self._papers:
            prior = (self._row_of[pid], self._papers[pid])
        if prior is not None:
            if prior[1] != record:
                raise ConflictError(
                    f"paper_id {pid!r} at row {row_no} conflicts with row {prior[0]}",
                    line=row_no,
                )
            report.duplicates += 1
            return
        staged[pid] = (row_no, record)
        report.accepted += 1

    def _commit(self, staged) -> None:
        for pid, (row_no, record) in staged.items():
            self._papers[pid] = record
            self._row_of[pid] = row_no
            self._years[record.year].append(pid)
            self._sorted_years.pop(record.year, None)

    def get_paper(self, paper_id: str) -> PaperRecord:
        try:
            return self._papers[paper_id]
        except KeyError:
            raise NotFoundError(f"unknown paper_id {paper_id!r}") from None

    def papers_in_year(self, year: int) -> set[str]:
        return set(self._years.get(year, ()))

    def year_ids(self, year: int) -> tuple[str, ...]:
        """Ids published in ``year``, in byte order."""
        ids = self._sorted_years.get(year)
        if ids is None:
            ids = tuple(sorted(self._years.get(year, ())))
            self._sorted_years[year] = ids
        return ids

    def years(self) -> list[int]:
        return sorted(y for y, ids in self._years.items() if ids)

    def ids(self) -> Iterator[str]:
        return iter(self._papers)

    def records(self) -> Iterator[PaperRecord]:
        for pid in sorted(self._papers):
            yield self._papers[pid]

    def export(self, dest) -> int:
        """Write the canonical JSON-lines export, sorted by paper_id."""
        n = 0
        with open(dest, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
                n += 1
        return n
