"""Synthetic corpora for demos, property tests, and throughput checks.

Papers are drawn from topic templates: each paper is its topic's word
list with a few random substitutions, so same-topic papers land above
typical cosine thresholds under the fallback encoder while different
topics stay near zero.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from causalcite.corpus import PaperRecord
from causalcite.graph import CitationEdge

_ONSETS = ["b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]


def make_vocabulary(size: int, rng: np.random.Generator) -> list[str]:
    words: dict[str, None] = {}
    while len(words) < size:
        n_syl = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(n_syl))
        words[w] = None
    return list(words)


def _topic_text(template: list[str], vocab: list[str], rng, max_subs: int) -> tuple[str, str]:
    words = list(template)
    for _ in range(int(rng.integers(0, max_subs + 1))):
        words[int(rng.integers(len(words)))] = vocab[int(rng.integers(len(vocab)))]
    rng.shuffle(words)
    return " ".join(words[:6]).capitalize(), " ".join(words[6:])


def _citations(rng, size=None):
    # Pareto-tailed counts: most papers have a handful, a few have thousands
    return np.floor(rng.pareto(1.2, size=size) * 5).astype(np.int64)


def random_corpus(seed: int, n_papers: int = 120, n_topics: int = 6, n_years: int = 2,
                  edge_prob: float = 0.04, template_len: int = 20, max_subs: int = 7,
                  start_year: int = 2015) -> tuple[list[PaperRecord], list[CitationEdge]]:
    """Random topic-clustered corpus with a random DAG of citations."""
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(400, rng)
    templates = [[vocab[i] for i in rng.choice(len(vocab), template_len, replace=False)]
                 for _ in range(n_topics)]
    papers = []
    cites = _citations(rng, n_papers)
    for i in range(n_papers):
        title, abstract = _topic_text(templates[int(rng.integers(n_topics))], vocab, rng, max_subs)
        papers.append(PaperRecord(f"p{i:04d}", title, abstract,
                                  start_year + int(rng.integers(n_years)), int(cites[i])))
    order = rng.permutation(n_papers)
    edges = []
    for x in range(n_papers):
        for y in range(x + 1, n_papers):
            if rng.random() < edge_prob:
                edges.append(CitationEdge(papers[order[x]].paper_id, papers[order[y]].paper_id))
    return papers, edges


def demo_corpus(seed: int = 7) -> tuple[list[PaperRecord], list[CitationEdge]]:
    """~400 papers over three years plus a hub paper ``demo-hub`` with 60 follow-ups."""
    rng = np.random.default_rng(seed)
    papers, edges = random_corpus(seed, n_papers=400, n_topics=10, n_years=3,
                                  edge_prob=0.01, max_subs=3, start_year=2017)
    hub = PaperRecord("demo-hub", "Graph indexing for large corpora",
                      "we index citation graphs at scale", 2015, 900, 40)
    for pos in rng.choice(len(papers), 60, replace=False):
        edges.append(CitationEdge("demo-hub", papers[int(pos)].paper_id, bool(rng.random() < 0.3)))
    return papers + [hub], edges


def write_corpus(directory, papers, edges) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "papers.jsonl", "w", encoding="utf-8") as fh:
        for p in sorted(papers, key=lambda r: r.paper_id):
            fh.write(json.dumps(p.to_dict()) + "\n")
    with open(d / "edges.tsv", "w", encoding="utf-8") as fh:
        for e in edges:
            fh.write(f"{e.from_id}\t{e.to_id}\t{int(e.is_influential)}\n")
    return {"corpus": str(d / "papers.jsonl"), "edges": str(d / "edges.tsv")}


def large_single_year(n_papers: int, seed: int = 0, year: int = 2020,
                      doc_len: int = 30, n_twins: int = 15):
    """A big one-year corpus for throughput checks.

    Returns (papers, edges, a_id, b_id): ``b`` cites ``a`` and has
    ``n_twins`` near-duplicates elsewhere in the corpus.
    """
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(20000, rng)
    ranks = np.arange(1, len(vocab) + 1)
    probs = 1.0 / ranks
    probs /= probs.sum()
    words = rng.choice(len(vocab), size=(n_papers, doc_len), p=probs)
    cites = _citations(rng, n_papers)
    papers = []
    for i, row in enumerate(words.tolist()):
        toks = [vocab[w] for w in row]
        papers.append(PaperRecord(f"w{i:07d}", " ".join(toks[:8]), " ".join(toks[8:]),
                                  year, int(cites[i])))
    template = [vocab[int(i)] for i in rng.choice(len(vocab), doc_len, replace=False)]
    b = PaperRecord("target-b", " ".join(template[:8]), " ".join(template[8:]), year, 120)
    a = PaperRecord("target-a", "seed paper", "an earlier study", year - 3, 500)
    papers.extend([a, b])
    for t in range(n_twins):
        title, abstract = _topic_text(template, vocab, rng, 3)
        papers.append(PaperRecord(f"twin{t:02d}", title, abstract, year, int(rng.integers(0, 300))))
    return papers, [CitationEdge(a.paper_id, b.paper_id)], a.paper_id, b.paper_id
