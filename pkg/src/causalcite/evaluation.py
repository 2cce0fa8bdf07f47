"""Metric-agnostic evaluation: reference-impact accuracy, point-biserial
correlation against award labels, and citation outlier classification."""

from __future__ import annotations

import json
import math
import os
from contextlib import nullcontext
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Sequence

import numpy as np

from causalcite.errors import ContractError, FormatError

SIG_LABELS = {"sig": True, "significant": True, "nonsig": False, "non_significant": False}


@dataclass
class ReferenceBatch:
    pivot_paper_id: str
    rows: list[tuple[str, bool, float]]  # (reference_id, is_significant, score)

    def problem(self) -> str | None:
        """Why this batch cannot contribute, or None."""
        if not any(sig for _, sig, _ in self.rows):
            return "no significant references"
        if all(sig for _, sig, _ in self.rows):
            return "no non-significant references"
        for ref, _, score in self.rows:
            if not math.isfinite(score):
                return f"non-finite score for {ref!r}"
        return None


def _conformities(batch: ReferenceBatch) -> list[float]:
    sig = [s for _, is_sig, s in batch.rows if is_sig]
    return [sum(1 for s in sig if s > x) / len(sig)
            for _, is_sig, x in batch.rows if not is_sig]


def batch_accuracy(batch: ReferenceBatch) -> float:
    """Mean over non-significant references of the share of significant
    references scoring strictly higher."""
    reason = batch.problem()
    if reason:
        raise ContractError(f"batch {batch.pivot_paper_id!r} skipped: {reason}")
    conf = _conformities(batch)
    return math.fsum(conf) / len(conf)


@dataclass
class AccuracyReport:
    accuracy: float
    mode: str
    batches_used: int
    nonsig_rows: int
    per_batch: dict[str, float] = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mode": self.mode,
            "batches_used": self.batches_used,
            "nonsig_rows": self.nonsig_rows,
            "per_batch": self.per_batch,
            "skipped": self.skipped,
        }


def dataset_accuracy(batches: Iterable[ReferenceBatch], mode: str = "rows") -> AccuracyReport:
    """Pool conformity over every non-significant row (``rows``), or average
    the per-batch accuracies (``batches``)."""
    if mode not in ("rows", "batches"):
        raise ContractError(f"unknown accuracy mode {mode!r}")
    pooled: list[float] = []
    per_batch: dict[str, float] = {}
    skipped = []
    for batch in batches:
        reason = batch.problem()
        if reason:
            skipped.append({"pivot": batch.pivot_paper_id, "reason": reason})
            continue
        conf = _conformities(batch)
        pooled.extend(conf)
        per_batch[batch.pivot_paper_id] = math.fsum(conf) / len(conf)
    if not per_batch:
        raise ContractError("no contributing batches")
    if mode == "rows":
        acc = math.fsum(pooled) / len(pooled)
    else:
        acc = math.fsum(per_batch.values()) / len(per_batch)
    return AccuracyReport(acc, mode, len(per_batch), len(pooled), per_batch, skipped)


def point_biserial(labels: Sequence[int], scores: Sequence[float]) -> float:
    """(M1 - M0) / s * sqrt(p q), with s the population standard deviation."""
    if len(labels) != len(scores):
        raise ContractError("labels and scores differ in length")
    if len(labels) < 2:
        raise ContractError("need at least two observations")
    y = np.asarray(labels)
    if not np.isin(y, (0, 1)).all():
        raise ContractError("labels must be 0 or 1")
    x = np.asarray(scores, dtype=np.float64)
    ones, zeros = x[y == 1], x[y == 0]
    if ones.size == 0 or zeros.size == 0:
        raise ContractError("both label classes must be present")
    s = float(x.std())
    if s == 0.0:
        raise ContractError("scores have zero variance")
    p = ones.size / x.size
    r = (ones.mean() - zeros.mean()) / s * math.sqrt(p * (1.0 - p))
    return float(min(1.0, max(-1.0, r)))


@dataclass
class OutlierPoint:
    paper_id: str
    tci: float
    citations: float


@dataclass
class LogLinearFit:
    slope: float
    intercept: float
    rmse: float
    n_used: int
    dropped: list[str] = field(default_factory=list)

    def predict(self, citations: float) -> float:
        return self.slope * math.log10(citations) + self.intercept

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "rmse": self.rmse,
            "n_used": self.n_used,
            "dropped": self.dropped,
        }


def _as_points(points) -> list[OutlierPoint]:
    out = []
    for i, p in enumerate(points):
        if isinstance(p, OutlierPoint):
            out.append(p)
        elif len(p) == 3:
            out.append(OutlierPoint(str(p[0]), float(p[1]), float(p[2])))
        else:
            out.append(OutlierPoint(str(i), float(p[0]), float(p[1])))
    return out


def fit_log_linear(points) -> LogLinearFit:
    """Least squares of log10(tci) on log10(citations).

    ``points`` holds :class:`OutlierPoint` objects, ``(tci, citations)``
    pairs, or ``(paper_id, tci, citations)`` triples. Points with a
    non-positive coordinate are dropped and listed in ``dropped``.
    """
    pts = _as_points(points)
    keep = [p for p in pts if p.tci > 0 and p.citations > 0]
    dropped = [p.paper_id for p in pts if not (p.tci > 0 and p.citations > 0)]
    if len(keep) < 2:
        raise ContractError("log-linear fit needs at least two positive points")
    x = np.log10([p.citations for p in keep])
    y = np.log10([p.tci for p in keep])
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ContractError("all retained points share one citation count")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    rmse = float(np.sqrt(np.mean(resid**2)))
    return LogLinearFit(slope, intercept, rmse, len(keep), dropped)


@dataclass
class OutlierClassification:
    paper_id: str
    log_tci: float | None
    log_citations: float | None
    residual: float | None
    category: str


def iqr_fences(residuals: Sequence[float]) -> tuple[float, float]:
    # numpy's default percentile is linear interpolation between order statistics
    q1, q3 = np.percentile(np.asarray(residuals, dtype=np.float64), [25, 75])
    iqr = q3 - q1
    return float(q1 - 1.5 * iqr), float(q3 + 1.5 * iqr)


def category_for(residual: float, lower: float, upper: float) -> str:
    # a residual sitting exactly on a fence is not an outlier
    if residual < lower:
        return "overcited"
    if residual > upper:
        return "undercited"
    return "aligned"


def classify_residuals(residuals: Sequence[float]) -> list[str]:
    lower, upper = iqr_fences(residuals)
    return [category_for(r, lower, upper) for r in residuals]


def classify_outliers(points, fit: LogLinearFit | None = None) -> list[OutlierClassification]:
    """Label each paper overcited, aligned, or undercited by its residual.

    Papers with tci <= 0 are reported as ``negative-impact`` and those with
    no citations as ``excluded``; neither enters the fit or the fences.
    """
    pts = _as_points(points)
    fit = fit or fit_log_linear(pts)
    usable = [p for p in pts if p.tci > 0 and p.citations > 0]
    resid = [math.log10(p.tci) - fit.predict(p.citations) for p in usable]
    cats = dict(zip((id(p) for p in usable), zip(resid, classify_residuals(resid))))
    out = []
    for p in pts:
        hit = cats.get(id(p))
        if hit is None:
            cat = "negative-impact" if p.tci <= 0 else "excluded"
            lc = math.log10(p.citations) if p.citations > 0 else None
            out.append(OutlierClassification(p.paper_id, None, lc, None, cat))
        else:
            out.append(OutlierClassification(p.paper_id, math.log10(p.tci),
                                             math.log10(p.citations), hit[0], hit[1]))
    return out


def distribution_curve(values: Iterable[tuple[str, float]]) -> list[tuple[int, str, float, float]]:
    """Rank-ordered values with the empirical complementary CDF, for long-tail plots."""
    ordered = sorted(values, key=lambda kv: (-kv[1], kv[0]))
    n = len(ordered)
    return [(i + 1, pid, v, (i + 1) / n) for i, (pid, v) in enumerate(ordered)]


# --- file formats ---------------------------------------------------------

@dataclass
class RawReference:
    ref_id: str
    significant: bool
    overrides: dict


@dataclass
class RawBatch:
    pivot: str
    refs: list[RawReference]


def read_reference_batches(path) -> list[RawBatch]:
    batches = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed JSON ({exc.msg})", line=line_no) from None
            if not isinstance(obj, dict) or not isinstance(obj.get("pivot"), str):
                raise FormatError("expected an object with a string 'pivot'", line=line_no)
            refs = obj.get("refs")
            if not isinstance(refs, list):
                raise FormatError("'refs' must be a list", line=line_no)
            parsed = []
            for ref in refs:
                if not isinstance(ref, dict) or not isinstance(ref.get("id"), str):
                    raise FormatError("each ref needs a string 'id'", line=line_no)
                label = ref.get("label")
                if label not in SIG_LABELS:
                    raise FormatError(f"label must be 'sig' or 'nonsig', got {label!r}", line=line_no)
                overrides = ref.get("score_overrides") or {}
                if not isinstance(overrides, dict) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in overrides.values()
                ):
                    raise FormatError("score_overrides must map names to numbers", line=line_no)
                parsed.append(RawReference(ref["id"], SIG_LABELS[label], overrides))
            batches.append(RawBatch(obj["pivot"], parsed))
    return batches


def metric_key(metric: str) -> str:
    if metric in ("pci", "citations"):
        return metric
    if metric.startswith("column:") and len(metric) > len("column:"):
        return metric[len("column:"):]
    raise ContractError(f"unknown metric {metric!r}; use pci, citations, or column:NAME")


def score_batches(raw: Iterable[RawBatch], metric: str,
                  compute: Callable[[str, str], float] | None = None) -> list[ReferenceBatch]:
    """Attach one score per reference.

    A matching ``score_overrides`` entry wins; otherwise ``compute(pivot,
    ref_id)`` supplies it. Without either the reference is an error.
    """
    key = metric_key(metric)
    out = []
    for batch in raw:
        rows = []
        for ref in batch.refs:
            if key in ref.overrides:
                score = float(ref.overrides[key])
            elif compute is not None and metric in ("pci", "citations"):
                score = float(compute(batch.pivot, ref.ref_id))
            else:
                raise ContractError(f"no {key!r} score for reference {ref.ref_id!r}")
            rows.append((ref.ref_id, ref.significant, score))
        out.append(ReferenceBatch(batch.pivot, rows))
    return out


def bundled_batch_path():
    """Bundled reference batch for 'Sorting improves word-aligned bitmap indexes'."""
    return resources.files("causalcite.data").joinpath("bitmap_index_batch.jsonl")


def read_award_labels(path) -> dict[str, int]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"malformed JSON ({exc.msg})", line=line_no) from None
            if not isinstance(obj, dict) or not isinstance(obj.get("paper_id"), str):
                raise FormatError("expected an object with a string 'paper_id'", line=line_no)
            if obj.get("label") not in (0, 1) or isinstance(obj.get("label"), bool):
                raise FormatError("label must be 0 or 1", line=line_no)
            labels[obj["paper_id"]] = obj["label"]
    return labels


def _tsv_rows(path, ncols: int, header_first: str):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\r\n").split("\t")
            if line_no == 1 and parts[0] == header_first:
                continue
            if len(parts) != ncols:
                raise FormatError(f"expected {ncols} tab-separated columns", line=line_no)
            try:
                yield parts[0], [float(x) for x in parts[1:]]
            except ValueError:
                raise FormatError("non-numeric value", line=line_no) from None


def read_scores(path) -> dict[str, float]:
    """TSV ``paper_id<TAB>score``, optional header line starting with paper_id."""
    return {pid: vals[0] for pid, vals in _tsv_rows(path, 2, "paper_id")}


def read_points(path) -> list[OutlierPoint]:
    """TSV ``paper_id<TAB>tci<TAB>citations``, optional header."""
    return [OutlierPoint(pid, v[0], v[1]) for pid, v in _tsv_rows(path, 3, "paper_id")]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_outlier_report(rows: list[OutlierClassification], dest) -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write("paper_id\tlog_tci\tlog_cit\tresidual\tcategory\n")
        for r in rows:
            fh.write(f"{r.paper_id}\t{_fmt(r.log_tci)}\t{_fmt(r.log_citations)}\t"
                     f"{_fmt(r.residual)}\t{r.category}\n")


def write_tsv(header: Sequence[str], rows, dest) -> None:
    with open(dest, "w", encoding="utf-8") if isinstance(dest, (str, os.PathLike)) else nullcontext(dest) as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(c) for c in row) + "\n")


def _cell(c) -> str:
    if isinstance(c, float):
        return repr(c)
    return "" if c is None else str(c)
