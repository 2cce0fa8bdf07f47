"""causalcite command line.

stdout carries JSON (or TSV for ``export-distribution``); logs go to
stderr. Exit codes: 0 ok, 2 missing input, 3 format error, 4 domain
contract error, 5 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from causalcite import evaluation as ev
from causalcite.config import EngineConfig, load_config
from causalcite.corpus import CorpusStore
from causalcite.engine import open_matcher, save_store
from causalcite.errors import CausalCiteError, FormatError
from causalcite.graph import CitationGraph
from causalcite.indices import impact
from causalcite.synthetic import demo_corpus, write_corpus

log = logging.getLogger("causalcite")

# flag name -> config key
_FLAG_KEYS = {
    "corpus": "paths.corpus",
    "edges": "paths.edges",
    "embeddings": "paths.embeddings",
    "blocklist": "paths.blocklist",
    "store": "paths.store",
    "threshold": "match.threshold",
    "max_matches": "match.max_matches",
    "coarse_k": "match.coarse_k",
    "k1": "bm25.k1",
    "bm25_b": "bm25.b",
    "n": "sample.n",
    "bins": "sample.bins",
    "bin_mode": "sample.bin_mode",
    "bin_scale": "sample.bin_scale",
    "estimator": "sample.estimator",
    "seed": "sample.seed",
    "workers": "workers",
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", help="TOML key=value file (default: $CAUSALCITE_CONFIG)")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. match.threshold=0.85")
    g.add_argument("--store", help="store directory written by 'ingest'")
    g.add_argument("--corpus", help="papers JSON-lines file")
    g.add_argument("--edges", help="citation edges TSV file")
    g.add_argument("--embeddings", help="binary embedding file")
    g.add_argument("--blocklist", help="mediator phrase blocklist")
    g.add_argument("--threshold", type=float)
    g.add_argument("--max-matches", type=int)
    g.add_argument("--coarse-k", type=int)
    g.add_argument("--k1", type=float)
    g.add_argument("--bm25-b", type=float)
    g.add_argument("--n", type=int, help="sample size for impact")
    g.add_argument("--bins", type=int)
    g.add_argument("--bin-mode", choices=["equal_width", "quantile"])
    g.add_argument("--bin-scale", choices=["log", "raw"])
    g.add_argument("--estimator", choices=["stratified", "plain"])
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="causalcite", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate inputs and build a store")
    p.add_argument("--out", help="store directory to write (defaults to --store)")
    p.add_argument("--strict", action="store_true", help="fail (exit 3) on any rejected row")

    p = sub.add_parser("pci", parents=[common], help="pairwise causal impact of a on b")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("impact", parents=[common], help="ACI and TCI of a paper")
    p.add_argument("--a", required=True)
    p.add_argument("--exact", action="store_true", help="evaluate every follow-up")

    p = sub.add_parser("eval", help="evaluation harnesses")
    esub = p.add_subparsers(dest="eval_command", required=True)
    q = esub.add_parser("accuracy", parents=[common])
    q.add_argument("--batches", required=True)
    q.add_argument("--metric", default="pci", help="pci | citations | column:NAME")
    q.add_argument("--mode", choices=["rows", "batches"], default="rows")
    q.add_argument("--tsv", help="write per-reference conformity rows here")
    q = esub.add_parser("award-corr", parents=[common])
    q.add_argument("--labels", required=True)
    q.add_argument("--scores", required=True)
    q.add_argument("--tsv", help="write per-paper label/score rows here")
    q = esub.add_parser("outliers", parents=[common])
    q.add_argument("--points", required=True)
    q.add_argument("--tsv", help="write the outlier report here")

    p = sub.add_parser("export-distribution", parents=[common],
                       help="rank/CCDF table of a numeric column, as TSV")
    p.add_argument("--papers", required=True, help="JSON-lines with paper_id and the column")
    p.add_argument("--column", default="citation_count")

    p = sub.add_parser("demo", parents=[common], help="write the synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--demo-seed", type=int, default=7)
    return parser


def config_from_args(args) -> EngineConfig:
    overrides = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, "set", []) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise FormatError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_config(getattr(args, "config", None), overrides)


def _emit(payload: dict, out) -> None:
    out.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def _require(path: str | None, what: str) -> str:
    if not path or not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found" + (f": {path}" if path else ""))
    return path


def cmd_ingest(args, cfg: EngineConfig, out) -> int:
    corpus_path = _require(cfg.paths.corpus, "corpus file")
    edges_path = _require(cfg.paths.edges, "edges file")
    corpus = CorpusStore()
    c_report = corpus.ingest(corpus_path)
    graph = CitationGraph(corpus)
    e_report = graph.ingest(edges_path)
    payload = {"corpus": c_report.to_dict(), "edges": e_report.to_dict()}
    if args.strict and (c_report.rejected or e_report.rejected):
        first = (c_report.rejected or e_report.rejected)[0]
        raise FormatError(f"rejected row: {first['reason']}", line=first["row"])
    dest = args.out or cfg.paths.store
    if dest:
        payload["store"] = {"path": dest, **save_store(dest, corpus, graph)}
    payload["config"] = cfg.provenance()
    _emit(payload, out)
    return 0


def cmd_pci(args, cfg, out) -> int:
    matcher = open_matcher(cfg)
    result = matcher.pci(args.a, args.b)
    _emit({**result.to_dict(), "config": cfg.provenance()}, out)
    return 0


def cmd_impact(args, cfg, out) -> int:
    matcher = open_matcher(cfg)
    result = impact(matcher, args.a, exact=args.exact)
    _emit({**result.to_dict(), "exact": args.exact, "config": cfg.provenance()}, out)
    return 0


def cmd_accuracy(args, cfg, out) -> int:
    raw = ev.read_reference_batches(_require(args.batches, "batch file"))
    key = ev.metric_key(args.metric)
    needs_engine = args.metric in ("pci", "citations") and any(
        key not in ref.overrides for batch in raw for ref in batch.refs
    )
    compute = None
    if needs_engine:
        matcher = open_matcher(cfg)
        if args.metric == "pci":
            def compute(pivot, ref):
                return matcher.pci(ref, pivot).pci
        else:
            def compute(pivot, ref):
                return matcher.corpus.get_paper(ref).citation_count
    batches = ev.score_batches(raw, args.metric, compute)
    report = ev.dataset_accuracy(batches, mode=args.mode)
    if args.tsv:
        rows = []
        for batch in batches:
            sig = [s for _, is_sig, s in batch.rows if is_sig]
            for ref, is_sig, score in batch.rows:
                conf = None if is_sig else sum(1 for s in sig if s > score) / len(sig)
                rows.append((batch.pivot_paper_id, ref, "sig" if is_sig else "nonsig", score, conf))
        ev.write_tsv(("pivot", "ref_id", "label", "score", "conformity"), rows, args.tsv)
    _emit({"metric": args.metric, **report.to_dict(), "config": cfg.provenance()}, out)
    return 0


def cmd_award_corr(args, cfg, out) -> int:
    labels = ev.read_award_labels(_require(args.labels, "labels file"))
    scores = ev.read_scores(_require(args.scores, "scores file"))
    ids = [pid for pid in labels if pid in scores]
    missing = sorted(pid for pid in labels if pid not in scores)
    r = ev.point_biserial([labels[p] for p in ids], [scores[p] for p in ids])
    if args.tsv:
        ev.write_tsv(("paper_id", "label", "score"),
                     sorted(((p, labels[p], scores[p]) for p in ids), key=lambda t: (t[1], -t[2], t[0])),
                     args.tsv)
    _emit({
        "point_biserial": r,
        "n": len(ids),
        "positives": sum(labels[p] for p in ids),
        "missing_scores": missing,
        "config": cfg.provenance(),
    }, out)
    return 0


def cmd_outliers(args, cfg, out) -> int:
    points = ev.read_points(_require(args.points, "points file"))
    fit = ev.fit_log_linear(points)
    rows = ev.classify_outliers(points, fit)
    if args.tsv:
        ev.write_outlier_report(rows, args.tsv)
    counts: dict[str, int] = {}
    for r in rows:
        counts[r.category] = counts.get(r.category, 0) + 1
    _emit({
        "fit": fit.to_dict(),
        "counts": counts,
        "papers": [{"paper_id": r.paper_id, "residual": r.residual, "category": r.category}
                   for r in rows],
        "config": cfg.provenance(),
    }, out)
    return 0


def cmd_export_distribution(args, cfg, out) -> int:
    values = []
    path = _require(args.papers, "papers file")
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                v = obj[args.column]
                pid = obj["paper_id"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise FormatError(f"need paper_id and {args.column!r}", line=line_no) from None
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise FormatError(f"{args.column!r} is not numeric", line=line_no)
            values.append((str(pid), float(v)))
    ev.write_tsv(("rank", "paper_id", "value", "ccdf"), ev.distribution_curve(values), out)
    return 0


def cmd_demo(args, cfg, out) -> int:
    papers, edges = demo_corpus(args.demo_seed)
    paths = write_corpus(args.out, papers, edges)
    _emit({"paths": paths, "papers": len(papers), "edges": len(edges), "hub": "demo-hub"}, out)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "pci": cmd_pci,
    "impact": cmd_impact,
    "accuracy": cmd_accuracy,
    "award-corr": cmd_award_corr,
    "outliers": cmd_outliers,
    "export-distribution": cmd_export_distribution,
    "demo": cmd_demo,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    name = args.eval_command if args.command == "eval" else args.command
    try:
        cfg = config_from_args(args)
        return _COMMANDS[name](args, cfg, out)
    except FileNotFoundError as exc:
        print(f"error: {exc.args[-1] if exc.args else exc}", file=sys.stderr)
        return 2
    except CausalCiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort exit code 5
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
