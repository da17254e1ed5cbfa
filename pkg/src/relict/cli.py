"""Command line interface.

    relict build-index --corpus manifest.jsonl --out index.bin
    relict rediscover http://example.org/ --manifest manifest.jsonl --combo TI-LS5
    relict evaluate --manifest manifest.jsonl --methods LS5,TI --combos TI-LS5 --out-dir out/
    relict analyze-titles --manifest manifest.jsonl --records out/records.jsonl --out-dir out/
    relict signature http://example.org/ --manifest manifest.jsonl -n 7

Options can also come from a ``key = value`` config file (``--config`` or
``$RELICT_CONFIG``); flags on the command line win.  Exit status: 0 success,
1 usage or data error, 2 rediscovery found nothing.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import timedelta
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .content import load_stopwords
from .dfsource import WEB_SCALE_N, CachedProvider, DfProviderConfig, HitCountProvider, LocalIndexProvider
from .errors import RelictError
from .evalharness import (
    CorpusManifest,
    ExperimentContext,
    aggregate,
    ingest,
    read_probability_csv,
    read_records,
    run_experiment,
    title_analysis,
    write_histograms_csv,
    write_probability_csv,
    write_records,
    write_table_csv,
)
from .lexsig import make_signature
from .pipeline import (
    CombinationSpec,
    MethodId,
    MethodUnavailable,
    RankClass,
    derive_query,
    plan_with_predictor,
    run_combination,
)
from .searchsim import build_index, load_index, read_index_hash, save_index
from .uri import normalize_uri
from .webclients import EngineBinding, FixtureInlinkSource, FixtureTagSource, UrllibTransport, open_engine

log = logging.getLogger("relict")

EXIT_OK, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2


class UsageError(RelictError):
    pass


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return {k.replace("-", "_"): v for k, v in raw.items()}


def _csv_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


# -- shared setup -------------------------------------------------------------------------

def _stopwords(args):
    return load_stopwords(args.stopwords) if args.stopwords else load_stopwords()


def _side_file(args, name, manifest_path):
    explicit = getattr(args, name)
    if explicit:
        return Path(explicit)
    candidate = Path(manifest_path).parent / f"{name}.jsonl"
    return candidate if candidate.exists() else None


def _load_corpus(args, filters=True):
    stopwords = _stopwords(args)
    manifest = CorpusManifest.load(args.manifest)
    if filters:
        corpus = ingest(manifest, args.min_terms, not args.no_english_filter, stopwords)
    else:
        corpus = ingest(manifest, 0, False, stopwords)
    return corpus


def _index_for(args, corpus):
    docs = corpus.all_docs()
    index = build_index(docs, corpus.stopwords)
    if getattr(args, "index", None) and Path(args.index).exists():
        if read_index_hash(args.index) == index.content_hash:
            return load_index(args.index)
        log.info("index %s is stale, using a fresh build", args.index)
    return index


def _df_provider(args, index):
    if args.df_hits:
        provider = HitCountProvider.from_tsv(args.df_hits, n_docs=args.n_docs or WEB_SCALE_N)
    elif args.df_endpoint:
        config = DfProviderConfig("remote-hits", "remote-hitcount", args.n_docs or WEB_SCALE_N,
                                  args.rate_limit, args.df_endpoint)
        provider = HitCountProvider.from_endpoint(config, UrllibTransport())
    else:
        provider = LocalIndexProvider.from_index(index)
    if args.df_cache:
        provider = CachedProvider(provider, args.df_cache, timedelta(days=args.df_max_age))
    return provider


def _engine(args, index):
    binding = EngineBinding(args.engine_id or args.engine, args.engine, args.endpoint,
                            args.rate_limit, args.max_results)
    return open_engine(binding, index=index, replay_path=args.replay)


def _context(args, corpus, provider):
    tags = _side_file(args, "tags", args.manifest)
    inlinks = _side_file(args, "inlinks", args.manifest)
    ctx = ExperimentContext.from_corpus(corpus, provider, inlink_cap=args.inlink_cap)
    if tags:
        ctx.tag_source = FixtureTagSource(tags)
    if inlinks:
        ctx.inlink_source = FixtureInlinkSource(inlinks)
    return ctx


def _escalation(args) -> RankClass:
    return {"undiscovered": RankClass.UNDISCOVERED, "top10": RankClass.TOP10,
            "top100": RankClass.TOP100}[args.escalate]


# -- commands -----------------------------------------------------------------------------

def cmd_build_index(args) -> int:
    manifest = CorpusManifest.load(args.corpus)
    corpus = ingest(manifest, 0, False, _stopwords(args))
    index = build_index(corpus.all_docs(), corpus.stopwords)
    save_index(index, args.out)
    print(f"indexed {index.n_docs} documents, {len(index.postings)} terms")
    print(f"content hash {index.content_hash}")
    return EXIT_OK


def cmd_rediscover(args) -> int:
    corpus = _load_corpus(args, filters=False)
    uri = normalize_uri(args.uri)
    doc = corpus.pages.get(uri)
    if doc is None:
        raise UsageError(f"{uri} has no stored copy in {args.manifest}")
    index = _index_for(args, corpus)
    provider = _df_provider(args, index)
    engine = _engine(args, index)
    ctx = _context(args, corpus, provider)
    inputs = ctx.inputs_for(doc)
    spec = CombinationSpec.parse(args.combo)
    if args.title_table:
        spec = plan_with_predictor(doc.title, read_probability_csv(args.title_table), args.title_threshold, spec)
    final, trail = run_combination(spec, uri, engine, inputs, _escalation(args))
    print(f"rediscovering {uri} with {spec.label}")
    for i, rec in enumerate(trail, 1):
        query = " ".join(rec.query_terms) if rec.available else "(unavailable)"
        if rec.quoted:
            query = f'"{query}"'
        rank = rec.rank if rec.rank is not None else "-"
        print(f"  {i}. {rec.method:<8} {rec.rank_class.label:<13} rank {rank:<4} q: {query}")
    if final.available and final.query_terms:
        page = engine.search(derive_query(final.method, inputs))
        print(f"top {min(args.top, len(page.hits))} candidates for the last query:")
        for i, (hit, score) in enumerate(page.hits[: args.top], 1):
            mark = "*" if hit == uri else " "
            print(f"  {mark}{i:>3}. {hit}  {score:.4f}")
    if final.rank_class is RankClass.UNDISCOVERED:
        print("not rediscovered")
        return EXIT_EXHAUSTED
    return EXIT_OK


def cmd_signature(args) -> int:
    corpus = _load_corpus(args, filters=False)
    uri = normalize_uri(args.uri)
    if uri not in corpus.pages:
        raise UsageError(f"{uri} has no stored copy in {args.manifest}")
    index = _index_for(args, corpus)
    provider = _df_provider(args, index)
    ctx = _context(args, corpus, provider)
    inputs = ctx.inputs_for(corpus.pages[uri])
    source = inputs.bucket if args.neighborhood else inputs.doc
    if source is None:
        raise UsageError(f"{uri} has no link neighborhood")
    try:
        sig = make_signature(source, args.n, provider)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(sig.to_line() if args.verbose else str(sig))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    corpus = _load_corpus(args)
    for rej in corpus.rejected:
        log.info("rejected %s: %s", rej.uri, rej.reason)
    if not corpus.docs:
        raise UsageError("no documents left after filtering")
    index = _index_for(args, corpus)
    provider = _df_provider(args, index)
    engine = _engine(args, index)
    ctx = _context(args, corpus, provider)
    methods = [MethodId(m.upper()) for m in _csv_list(args.methods)]
    combos = [CombinationSpec.parse(c) for c in _csv_list(args.combos)]
    records = run_experiment(corpus.docs, methods, combos, engine, ctx, _escalation(args), args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.jsonl")
    table = aggregate(records)
    write_table_csv(table, out / "table.csv")
    print(f"{len(corpus.docs)} URIs evaluated, {len(corpus.rejected)} rejected")
    print(table.format())
    return EXIT_OK


def cmd_analyze_titles(args) -> int:
    if not Path(args.records).exists():
        raise UsageError(f"records file not found: {args.records}")
    records = read_records(args.records)
    corpus = _load_corpus(args, filters=False)
    analysis = title_analysis(list(corpus.pages.values()), records, corpus.stopwords)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_histograms_csv(analysis, out / "title_histograms.csv")
    write_probability_csv(analysis.table, out / "title_probabilities.csv")
    write_probability_csv(analysis.nosw_table, out / "title_probabilities_nosw.csv")
    print("title_length  p1     p10    p100   n")
    for row in analysis.table:
        print(f"{row.title_length:>12}  {row.p1:.3f}  {row.p10:.3f}  {row.p100:.3f}  {row.n}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------

def _add_corpus_opts(p, manifest_required=True):
    p.add_argument("--manifest", required=manifest_required, help="corpus manifest (JSONL)")
    p.add_argument("--stopwords", help="stopword list file (default: bundled SMART list)")
    p.add_argument("--min-terms", type=int, default=50)
    p.add_argument("--no-english-filter", action="store_true")


def _add_provider_opts(p):
    p.add_argument("--index", help="prebuilt index file; rebuilt in memory when stale")
    p.add_argument("--tags", help="tag fixture (JSONL); default: tags.jsonl next to the manifest")
    p.add_argument("--inlinks", help="inlink fixture (JSONL); default: inlinks.jsonl next to the manifest")
    p.add_argument("--inlink-cap", type=int, default=50)
    p.add_argument("--df-hits", help="term<TAB>hits table used as a web-scale df source")
    p.add_argument("--df-endpoint", help="hit-count URL template containing {term}")
    p.add_argument("--n-docs", type=int, help=f"corpus size for hit-count df (default {WEB_SCALE_N:.2e})")
    p.add_argument("--df-cache", help="df cache file (TSV)")
    p.add_argument("--df-max-age", type=float, default=30.0, help="days before a cached df is refetched")
    p.add_argument("--engine", choices=["local-sim", "fixture-replay", "remote-generic"], default="local-sim")
    p.add_argument("--engine-id")
    p.add_argument("--endpoint", default=os.environ.get("RELICT_ENGINE_ENDPOINT"))
    p.add_argument("--replay", help="recorded responses (JSONL) for fixture-replay")
    p.add_argument("--rate-limit", type=float, default=0.0, help="requests per second, 0 = unlimited")
    p.add_argument("--max-results", type=int, default=100)
    p.add_argument("--escalate", choices=["undiscovered", "top100", "top10"], default="undiscovered",
                   help="run the next method when the rank class is at least this bad")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relict", description="Rediscover missing web pages.")
    parser.add_argument("--version", action="version", version=f"relict {__version__}")
    parser.add_argument("--config", default=os.environ.get("RELICT_CONFIG"))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="index a corpus manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stopwords")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("rediscover", help="run a fallback chain for one URI")
    p.add_argument("uri")
    _add_corpus_opts(p)
    _add_provider_opts(p)
    p.add_argument("--combo", default="TI-LS5")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--title-table", help="title-length probability CSV; enables the title predictor")
    p.add_argument("--title-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_rediscover)

    p = sub.add_parser("signature", help="print a page or neighborhood lexical signature")
    p.add_argument("uri")
    _add_corpus_opts(p)
    _add_provider_opts(p)
    p.add_argument("-n", type=int, default=5)
    p.add_argument("--neighborhood", action="store_true")
    p.set_defaults(func=cmd_signature)

    p = sub.add_parser("evaluate", help="run methods and combinations over a corpus")
    _add_corpus_opts(p)
    _add_provider_opts(p)
    p.add_argument("--methods", default="LS5,LS7,TI,TIQ,TA,LNLS5,LNLS7,TI_NOSW")
    p.add_argument("--combos", default="TI-LS5,TI-LS7,LS5-TI,LS7-TI,LS5-LS7,LS7-LS5")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-titles", help="title histograms and length/probability table")
    _add_corpus_opts(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_analyze_titles)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=os.environ.get("RELICT_CONFIG"))
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    config = load_config(known.config)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in config.items() if k in dests})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"relict: bad config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for exhausted rediscovery
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not 0.0 <= getattr(args, "title_threshold", 0.5) <= 1.0:
        print("relict: --title-threshold must be within [0, 1]", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except MethodUnavailable as exc:
        print(f"relict: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RelictError, OSError, ValueError, KeyError) as exc:
        print(f"relict: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
