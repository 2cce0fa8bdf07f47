"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into a summary section at the end of the
pytest run. Run this file alone with ``pytest tests/test_acceptance.py -s``.
"""

import io
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from causalcite.bm25 import Bm25Index
from causalcite.cli import main as cli_main
from causalcite.config import EngineConfig
from causalcite.corpus import CorpusStore, PaperRecord
from causalcite.embeddings import FallbackProvider, cosine_similarity
from causalcite.evaluation import bundled_batch_path, fit_log_linear
from causalcite.graph import CitationEdge, CitationGraph
from causalcite.indices import estimate_aci, plan_sample
from causalcite.synthetic import random_corpus, write_corpus
from causalcite.textmatch import (
    TextMatcher,
    outcome,
    select_matches,
    synthesize_counterfactual,
)
from conftest import ACCEPTANCE_LINES
from oracles import bm25_brute, top_k_brute, weighted_average

HERE = Path(__file__).parent


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def cli(*argv):
    out = io.StringIO()
    code = cli_main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def matcher_for(papers, edges, config=None):
    corpus = CorpusStore()
    corpus.add_records(papers)
    graph = CitationGraph(corpus)
    graph.add_edges(edges)
    config = config or EngineConfig()
    return TextMatcher(corpus, graph, FallbackProvider(corpus, dims=config.fallback.dims), config)


def test_c01_bundled_batch_accuracy():
    targets = {"pci": 0.793, "citations": 0.681, "column:sshi": 0.650}
    start = time.perf_counter()
    got = {}
    for metric in targets:
        code, text = cli("eval", "accuracy", "--batches", bundled_batch_path(), "--metric", metric)
        assert code == 0
        got[metric] = json.loads(text)["accuracy"]
    elapsed = time.perf_counter() - start
    ok = all(abs(got[m] - t) <= 0.005 for m, t in targets.items()) and elapsed < 1.0
    detail = ", ".join(f"{m} {got[m]:.3f} (target {t:.3f})" for m, t in targets.items())
    verdict(1, "bundled 31-reference batch accuracy", ok, f"{detail}; {elapsed:.2f}s")


def test_c02_counterfactual_oracle():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    outside = 0
    for i in range(1000):
        k = int(rng.integers(0, 11))
        sims = rng.uniform(0.81, 1.0, k)
        ys = np.log10(1 + np.floor(rng.pareto(1.2, k) * 5))
        ms, _, _ = select_matches(f"t{i}", [(f"c{j}", float(m), float(y)) for j, (m, y) in
                                            enumerate(zip(sims, ys))], 0.81, 10)
        got = synthesize_counterfactual(ms)
        want = weighted_average(list(zip(sims.tolist(), ys.tolist())))
        worst = max(worst, abs(got - want))
        if k and not (ys.min() <= got <= ys.max()):
            outside += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and outside == 0 and elapsed < 5
    verdict(2, "counterfactual equals weighted-average oracle", ok,
            f"max |diff| {worst:.2e}, {outside} outside [min y, max y]; {elapsed:.2f}s")


def test_c03_staged_pipeline_equals_full_rerank():
    start = time.perf_counter()
    pairs = mismatches = nonempty = 0
    for seed in range(50):
        papers, edges = random_corpus(seed, n_papers=150 + seed, n_years=2, edge_prob=0.03, max_subs=3)
        m = matcher_for(papers, edges)
        for e in edges[:8]:
            a, b = e.from_id, e.to_id
            year = m.corpus.get_paper(b).year
            pool = [pid for pid in m.corpus.year_ids(year) if pid not in m.graph.excluded(a)]
            if not pool:
                continue
            m.config.match.coarse_k = len(pool)
            staged = m.pci(a, b)
            vb = m.vector(b)
            scored = [(cid, cosine_similarity(vb, m.vector(cid)),
                       outcome(m.corpus.get_paper(cid).citation_count)) for cid in pool]
            direct, _, _ = select_matches(b, scored, m.config.match.threshold, m.config.match.max_matches)
            y_hat = synthesize_counterfactual(direct)
            pairs += 1
            nonempty += not direct.empty
            if staged.match_set.entries != direct.entries or staged.y_hat_t0 != y_hat:
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and pairs > 0 and elapsed < 120
    verdict(3, "staged BM25->rerank equals full-pool rerank", ok,
            f"{pairs} pairs over 50 corpora ({nonempty} with matches), {mismatches} mismatches; {elapsed:.1f}s")


def hub_fixture(n_children=100, seed=4):
    papers, edges = random_corpus(seed, n_papers=400, n_topics=8, n_years=1, edge_prob=0.01,
                                  max_subs=3, start_year=2020)
    rng = np.random.default_rng(seed)
    hub = PaperRecord("hub", "a hub paper", "cited by many", 2016, 5000)
    for pos in rng.choice(len(papers), n_children, replace=False):
        edges.append(CitationEdge("hub", papers[int(pos)].paper_id))
    return papers + [hub], edges


def test_c04_exact_tci(tmp_path):
    papers, edges = hub_fixture()
    paths = write_corpus(tmp_path, papers, edges)
    start = time.perf_counter()
    code, text = cli("impact", "--corpus", paths["corpus"], "--edges", paths["edges"], "--a", "hub",
                     "--exact", "--workers", 1)
    elapsed = time.perf_counter() - start
    assert code == 0
    tci = json.loads(text)["tci"]
    m = matcher_for(papers, edges)
    children = sorted(m.graph.children("hub"))
    brute = math.fsum(m.pci("hub", b).pci for b in children)
    diff = abs(tci - brute)
    ok = len(children) == 100 and diff <= 1e-9 and elapsed < 300
    verdict(4, "--exact TCI equals brute-force sum", ok,
            f"{len(children)} children, tci {tci:.9f} vs {brute:.9f}, |diff| {diff:.1e}; {elapsed:.1f}s")


def test_c05_stratified_estimator():
    rng = np.random.default_rng(5)
    n_children = 1000
    true_pci = rng.pareto(1.5, n_children)
    # citations track the impact, so binning on log citations stratifies it
    cites = np.floor(20 * true_pci * rng.lognormal(0, 0.3, n_children)).astype(int)
    ids = [f"b{i:04d}" for i in range(n_children)]
    values = {pid: outcome(int(c)) for pid, c in zip(ids, cites)}
    pci_of = dict(zip(ids, true_pci.tolist()))
    truth = math.fsum(true_pci)

    start = time.perf_counter()
    strat, srs = [], []
    for seed in range(200):
        plan = plan_sample("a", values, n=40, bin_count=8, seed=seed)
        sample = {pid: pci_of[pid] for pid in plan.sampled_ids}
        strat.append(estimate_aci(plan, sample, "stratified") * n_children)
        draw = np.random.default_rng(10_000 + seed).choice(n_children, 40, replace=False)
        srs.append(float(true_pci[draw].mean()) * n_children)
    elapsed = time.perf_counter() - start
    mean = float(np.mean(strat))
    se = float(np.std(strat, ddof=1)) / math.sqrt(len(strat))
    var_s, var_r = float(np.var(strat, ddof=1)), float(np.var(srs, ddof=1))
    ok = abs(mean - truth) <= 2 * se and var_s <= var_r and elapsed < 600
    verdict(5, "stratified TCI unbiased with variance <= SRS", ok,
            f"truth {truth:.2f}, mean {mean:.2f} (2 SE = {2 * se:.2f}), "
            f"var {var_s:.1f} vs SRS {var_r:.1f}; {elapsed:.1f}s")


def test_c06_bm25_oracle():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    order_bad = 0
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 201))
        vocab = [f"w{i}" for i in range(int(rng.integers(5, 60)))]
        docs = {f"d{i:03d}": [vocab[j] for j in rng.integers(0, len(vocab), int(rng.integers(0, 40)))]
                for i in range(n)}
        query = [vocab[j] for j in rng.integers(0, len(vocab), int(rng.integers(1, 8)))]
        k = int(rng.integers(1, 120))
        idx = Bm25Index(docs.items())
        got = idx.top_k(query, k).entries
        want = top_k_brute(docs, query, list(docs), k)
        if [d for d, _ in got] != [d for d, _ in want]:
            order_bad += 1
        worst = max([worst] + [abs(s - w) for (_, s), (_, w) in zip(got, want)])
        brute = bm25_brute(docs, query)
        worst = max(worst, max(abs(idx.score(query, d) - s) for d, s in brute.items()))
    elapsed = time.perf_counter() - start
    ok = order_bad == 0 and worst <= 1e-9 and elapsed < 60
    verdict(6, "BM25 top-k equals brute-force Okapi", ok,
            f"100 corpora, {order_bad} order mismatches, max |score diff| {worst:.1e}; {elapsed:.1f}s")


def test_c07_regression_recovery():
    rng = np.random.default_rng(7)
    log_cit = rng.uniform(0, 4, 1000)
    log_tci = 1.026 * log_cit - 0.541 + rng.normal(0, 0.68, 1000)
    start = time.perf_counter()
    fit = fit_log_linear(list(zip(10 ** log_tci, 10 ** log_cit)))
    elapsed = time.perf_counter() - start
    ok = abs(fit.slope - 1.026) <= 0.05 and abs(fit.rmse - 0.68) <= 0.05 and elapsed < 1
    verdict(7, "log-linear fit recovers slope and rmse", ok,
            f"slope {fit.slope:.4f}, intercept {fit.intercept:.4f}, rmse {fit.rmse:.4f}; {elapsed:.3f}s")


def test_c08_worker_determinism(tmp_path):
    env_cmd = [sys.executable, "-m", "causalcite"]
    subprocess.run(env_cmd + ["demo", "--out", str(tmp_path)], check=True, capture_output=True)
    base = ["impact", "--corpus", str(tmp_path / "papers.jsonl"), "--edges", str(tmp_path / "edges.tsv"),
            "--a", "demo-hub", "--seed", "11"]
    start = time.perf_counter()
    one = subprocess.run(env_cmd + base + ["--workers", "1"], capture_output=True, check=True).stdout
    eight = subprocess.run(env_cmd + base + ["--workers", "8"], capture_output=True, check=True).stdout
    elapsed = time.perf_counter() - start
    ok = one == eight and len(one) > 0 and elapsed < 120
    verdict(8, "impact JSON identical for 1 and 8 workers", ok,
            f"{len(one)} vs {len(eight)} bytes, identical={one == eight}; {elapsed:.1f}s")


def test_c09_exclusion_soundness():
    start = time.perf_counter()
    queries = matched = leaks = 0
    for seed in range(500):
        papers, edges = random_corpus(seed, n_papers=40, n_topics=3, n_years=1, edge_prob=0.12, max_subs=3)
        m = matcher_for(papers, edges)
        sources = sorted({e.from_id for e in edges})
        if not sources:
            continue
        # the paper with the most descendants gives the hardest exclusion case
        a = max(sources, key=lambda s: (len(m.graph.descendants(s).members), s))
        banned = m.graph.excluded(a)
        for b in sorted(m.graph.children(a)):
            r = m.pci(a, b)
            ids = {e.candidate_id for e in r.match_set.entries}
            queries += 1
            matched += len(ids)
            leaks += len(ids & banned)
    elapsed = time.perf_counter() - start
    ok = leaks == 0 and matched > 0 and elapsed < 120
    verdict(9, "no descendant of a in any match set", ok,
            f"500 DAGs, {queries} pci calls, {matched} matches, {leaks} leaks; {elapsed:.1f}s")


@pytest.mark.slow
def test_c10_throughput():
    proc = subprocess.run([sys.executable, str(HERE / "throughput_probe.py"), "1000000"],
                          capture_output=True, text=True, timeout=900)
    assert proc.returncode == 0, proc.stderr
    stats = json.loads(proc.stdout.strip().splitlines()[-1])
    ok = stats["papers"] >= 1_000_000 and stats["seconds"] < 60
    verdict(10, "one pci on a 1M-paper single-year corpus", ok,
            f"{stats['papers']} papers, {stats['seconds']:.1f}s cold (index build included), "
            f"{stats['matched']} matches, peak RSS {stats['peak_rss_mb']:.0f} MB")
