import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from causalcite.config import EngineConfig
from causalcite.corpus import CorpusStore, PaperRecord
from causalcite.embeddings import FallbackProvider
from causalcite.graph import CitationGraph
from causalcite.synthetic import demo_corpus, write_corpus
from causalcite.textmatch import TextMatcher


def build(papers, edges, config=None, provider=None):
    """Corpus + graph + matcher from in-memory records."""
    corpus = CorpusStore()
    corpus.add_records(papers)
    graph = CitationGraph(corpus)
    graph.add_edges(edges)
    config = config or EngineConfig()
    if provider is None:
        provider = FallbackProvider(corpus, dims=config.fallback.dims)
    return TextMatcher(corpus, graph, provider, config)


def paper(pid, text="graph neural networks", year=2020, cites=0, abstract=""):
    return PaperRecord(pid, text, abstract, year, cites)


@pytest.fixture
def chain():
    """a -> b -> c plus an unrelated d."""
    papers = [paper(p) for p in "abcd"]
    return build(papers, [("a", "b"), ("b", "c")])


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("demo")
    papers, edges = demo_corpus()
    write_corpus(d, papers, edges)
    return d


class VectorTable:
    """Embedding provider backed by a plain dict of unit vectors."""

    label = "table"

    def __init__(self, vectors):
        self.vectors = {k: np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for k, v in vectors.items()}

    def vector(self, pid):
        return self.vectors.get(pid)


def at_similarity(m):
    """A 2-d unit vector whose cosine with (1, 0) is m."""
    return [m, math.sqrt(max(0.0, 1 - m * m))]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
