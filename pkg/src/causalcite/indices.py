"""Average and total causal impact via citation-stratified sampling.

Follow-up papers are binned by citation outcome, a proportional quota is
drawn from every bin, and the bin means are recombined with bin-size
weights. With enough samples to cover every child this is the exact
average of all pairwise impacts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from causalcite.errors import ContractError, MissingEmbeddingError
from causalcite.textmatch import PciResult, TextMatcher, outcome

IMPACT_SCHEMA = "causalcite.impact/1"


@dataclass
class Bin:
    lower: float
    upper: float
    members: tuple[str, ...]
    quota: int
    draw_order: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "size": len(self.members),
            "quota": self.quota,
            "members": list(self.members),
            "draw_order": list(self.draw_order),
        }


@dataclass
class SamplePlan:
    paper_a: str
    children_count: int
    bins: list[Bin]
    seed: int
    n_requested: int
    bin_mode: str = "equal_width"

    @property
    def sampled_ids(self) -> list[str]:
        return [pid for b in self.bins for pid in b.draw_order[: b.quota]]

    def to_dict(self) -> dict:
        return {
            "paper_a": self.paper_a,
            "children_count": self.children_count,
            "seed": self.seed,
            "n_requested": self.n_requested,
            "bin_mode": self.bin_mode,
            "sampled_ids": self.sampled_ids,
            "bins": [b.to_dict() for b in self.bins],
        }


def _equal_width(values: Mapping[str, float], bin_count: int):
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return [(lo, hi, sorted(values))]
    width = (hi - lo) / bin_count
    groups: list[list[str]] = [[] for _ in range(bin_count)]
    for pid in sorted(values):
        i = min(int((values[pid] - lo) / (hi - lo) * bin_count), bin_count - 1)
        groups[i].append(pid)
    return [(lo + i * width, hi if i == bin_count - 1 else lo + (i + 1) * width, g)
            for i, g in enumerate(groups)]


def _quantile(values: Mapping[str, float], bin_count: int):
    ordered = sorted(values, key=lambda pid: (values[pid], pid))
    out = []
    for chunk in np.array_split(np.arange(len(ordered)), min(bin_count, len(ordered))):
        ids = [ordered[i] for i in chunk]
        out.append((values[ids[0]], values[ids[-1]], sorted(ids)))
    return out


def allocate(sizes: list[int], total: int) -> list[int]:
    """Proportional quotas by largest remainder, each non-empty bin getting
    at least one when ``total`` allows it."""
    population = sum(sizes)
    if total >= population:
        return list(sizes)
    exact = [total * s / population for s in sizes]
    quotas = [int(math.floor(x)) for x in exact]
    short = total - sum(quotas)
    by_remainder = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in by_remainder[:short]:
        quotas[i] += 1
    nonempty = [i for i, s in enumerate(sizes) if s > 0]
    if total >= len(nonempty):
        for i in nonempty:
            if quotas[i] == 0:
                donor = max(range(len(sizes)), key=lambda j: (quotas[j], -j))
                quotas[donor] -= 1
                quotas[i] = 1
    return quotas


def plan_sample(paper_a: str, child_values: Mapping[str, float], n: int = 40,
                bin_count: int = 8, seed: int = 0,
                bin_mode: str = "equal_width") -> SamplePlan:
    """Stratified sampling plan over the follow-ups of ``paper_a``.

    ``child_values`` maps each child to the quantity used for binning.
    """
    if not child_values:
        raise ContractError("paper has no follow-up studies")
    if n < 1 or bin_count < 1:
        raise ContractError("n and bin_count must be >= 1")
    if bin_mode == "equal_width":
        groups = _equal_width(child_values, bin_count)
    elif bin_mode == "quantile":
        groups = _quantile(child_values, bin_count)
    else:
        raise ContractError(f"unknown bin_mode {bin_mode!r}")

    quotas = allocate([len(g[2]) for g in groups], min(n, len(child_values)))
    rng = np.random.default_rng(seed)
    bins = []
    for (lo, hi, members), quota in zip(groups, quotas):
        perm = rng.permutation(len(members))
        bins.append(Bin(lo, hi, tuple(members), quota, tuple(members[i] for i in perm)))
    return SamplePlan(paper_a, len(child_values), bins, seed, n, bin_mode)


def estimate_aci(plan: SamplePlan, pci_of: Mapping[str, float],
                 estimator: str = "stratified") -> float:
    """Combine per-child impacts drawn under ``plan``.

    Each bin contributes the mean of its first ``quota`` entries present in
    ``pci_of`` (in draw order). ``stratified`` weights bin means by bin
    size; ``plain`` averages all samples equally.
    """
    per_bin = []
    for b in plan.bins:
        got = [pci_of[pid] for pid in b.draw_order if pid in pci_of][: b.quota]
        if got:
            per_bin.append((len(b.members), got))
    if not per_bin:
        raise ContractError("no successful samples")
    if estimator == "plain":
        flat = [v for _, got in per_bin for v in got]
        return math.fsum(flat) / len(flat)
    if estimator != "stratified":
        raise ContractError(f"unknown estimator {estimator!r}")
    weight = sum(size for size, _ in per_bin)
    return math.fsum(size * math.fsum(got) / len(got) for size, got in per_bin) / weight


@dataclass
class ImpactResult:
    paper_a: str
    aci: float
    tci: float
    children_count: int
    sample_plan: SamplePlan
    per_sample: list[PciResult]
    estimator: str = "stratified"
    failed: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": IMPACT_SCHEMA,
            "paper_a": self.paper_a,
            "aci": self.aci,
            "tci": self.tci,
            "children_count": self.children_count,
            "estimator": self.estimator,
            "sample_plan": self.sample_plan.to_dict(),
            "failed": self.failed,
            "per_sample": [r.to_dict() for r in self.per_sample],
        }


def run_plan(plan: SamplePlan, pci: Callable[[str], PciResult],
             workers: int = 1) -> tuple[dict[str, PciResult], list[dict]]:
    """Evaluate each bin's quota, backfilling failures from the same bin.

    Results depend only on the plan, never on completion order.
    """
    done: dict[str, PciResult] = {}
    failed: list[dict] = []

    def attempt(pid):
        try:
            return pid, pci(pid), None
        except MissingEmbeddingError as exc:
            return pid, None, str(exc)

    cursor = [b.quota for b in plan.bins]
    wave = [pid for b in plan.bins for pid in b.draw_order[: b.quota]]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        while wave:
            outcomes = list(pool.map(attempt, wave)) if workers > 1 else [attempt(p) for p in wave]
            for pid, res, err in outcomes:
                if res is None:
                    failed.append({"paper_id": pid, "reason": err})
                else:
                    done[pid] = res
            wave = []
            for i, b in enumerate(plan.bins):
                have = sum(1 for pid in b.draw_order[: cursor[i]] if pid in done)
                need = b.quota - have
                if need > 0 and cursor[i] < len(b.draw_order):
                    extra = b.draw_order[cursor[i]: cursor[i] + need]
                    cursor[i] += len(extra)
                    wave.extend(extra)
    return done, failed


def child_values(matcher: TextMatcher, children, scale: str = "log") -> dict[str, float]:
    counts = {b: matcher.corpus.get_paper(b).citation_count for b in children}
    if scale == "raw":
        return {b: float(c) for b, c in counts.items()}
    return {b: outcome(c) for b, c in counts.items()}


def impact(matcher: TextMatcher, a: str, n: int | None = None, bin_count: int | None = None,
           seed: int | None = None, bin_mode: str | None = None,
           estimator: str | None = None, exact: bool = False,
           workers: int | None = None) -> ImpactResult:
    """ACI and TCI of paper ``a``; unspecified knobs come from the matcher's config."""
    cfg = matcher.config
    n = cfg.sample.n if n is None else n
    bin_count = cfg.sample.bins if bin_count is None else bin_count
    seed = cfg.sample.seed if seed is None else seed
    bin_mode = bin_mode or cfg.sample.bin_mode
    estimator = estimator or cfg.sample.estimator
    workers = cfg.workers if workers is None else workers

    children = matcher.graph.children(a, influential_only=cfg.graph.influential_only)
    if not children:
        raise ContractError(f"paper has no follow-up studies ({a!r})")
    if exact:
        n = len(children)
    plan = plan_sample(a, child_values(matcher, children, cfg.sample.bin_scale),
                       n, bin_count, seed, bin_mode)
    done, failed = run_plan(plan, lambda b: matcher.pci(a, b), workers)

    used = []
    for b in plan.bins:
        used.extend([pid for pid in b.draw_order if pid in done][: b.quota])
    aci = estimate_aci(plan, {pid: done[pid].pci for pid in used}, estimator)
    tci = aci * len(children)
    return ImpactResult(a, aci, tci, len(children), plan,
                        [done[pid] for pid in used], estimator, failed)
