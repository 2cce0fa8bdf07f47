"""On-disk store and assembly of a ready-to-query TextMatcher."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from causalcite.config import EngineConfig
from causalcite.corpus import CorpusStore
from causalcite.embeddings import FallbackProvider, load_embeddings
from causalcite.errors import FormatError
from causalcite.graph import CitationGraph
from causalcite.textmatch import TextMatcher
from causalcite.textprep import MediatorRemover, default_remover, read_blocklist

log = logging.getLogger(__name__)

STORE_FORMAT = "causalcite-store"
STORE_VERSION = 1


def save_store(directory, corpus: CorpusStore, graph: CitationGraph) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n_papers = corpus.export(d / "papers.jsonl")
    n_edges = graph.export(d / "edges.tsv")
    manifest = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "papers": n_papers,
        "edges": n_edges,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_store(directory) -> tuple[CorpusStore, CitationGraph]:
    d = Path(directory)
    manifest_path = d / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"store manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"store manifest unreadable: {exc.msg}") from None
    if manifest.get("format") != STORE_FORMAT or manifest.get("version") != STORE_VERSION:
        raise FormatError(f"unsupported store version {manifest.get('version')!r}")
    corpus = CorpusStore()
    corpus.ingest(d / "papers.jsonl")
    graph = CitationGraph(corpus)
    graph.ingest(d / "edges.tsv")
    return corpus, graph


def load_inputs(config: EngineConfig) -> tuple[CorpusStore, CitationGraph]:
    paths = config.paths
    if paths.store:
        return load_store(paths.store)
    if not paths.corpus:
        raise FileNotFoundError("no store or corpus file configured")
    if not os.path.exists(paths.corpus):
        raise FileNotFoundError(f"corpus file not found: {paths.corpus}")
    corpus = CorpusStore()
    report = corpus.ingest(paths.corpus)
    if report.rejected:
        log.warning("%d corpus rows rejected", len(report.rejected))
    graph = CitationGraph(corpus)
    if paths.edges:
        if not os.path.exists(paths.edges):
            raise FileNotFoundError(f"edges file not found: {paths.edges}")
        graph.ingest(paths.edges)
    return corpus, graph


def build_remover(config: EngineConfig) -> MediatorRemover:
    if config.paths.blocklist:
        return MediatorRemover(read_blocklist(config.paths.blocklist))
    return default_remover()


def open_matcher(config: EngineConfig, corpus: CorpusStore | None = None,
                 graph: CitationGraph | None = None) -> TextMatcher:
    if corpus is None or graph is None:
        corpus, graph = load_inputs(config)
    remover = build_remover(config)
    if config.paths.embeddings:
        provider, report = load_embeddings(config.paths.embeddings, known_ids=corpus)
        if report.rejected:
            log.warning("%d embedding records rejected", len(report.rejected))
    else:
        provider = FallbackProvider(corpus, remover, config.fallback.dims, config.fallback.seed)
        log.warning("no embedding file configured: using the %s encoder", provider.label)
    return TextMatcher(corpus, graph, provider, config, remover)
