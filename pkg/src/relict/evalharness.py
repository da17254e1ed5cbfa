"""Experiment harness: manifest ingestion, method runs, aggregate tables, title analytics."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .content import (
    MIN_TERMS,
    ENGLISH_STOPWORD_RATIO,
    ExtractedDoc,
    RawPage,
    default_stopwords,
    extract_text,
    passes_corpus_filter,
    strip_stopwords_from_title,
    title_stats,
)
from .dfsource import DfProvider
from .errors import RelictError
from .lexsig import NoNeighborhood, build_term_bucket
from .pipeline import (
    CombinationSpec,
    MethodId,
    MethodInputs,
    ProbabilityRow,
    RankClass,
    RankRecord,
    build_probability_table,
    run_combination,
    run_method,
)
from .uri import normalize_uri
from .webclients import DictSource, Engine, fetch_inlinks, fetch_tags

logger = logging.getLogger(__name__)

MANIFEST_VERSION = "1"


class ManifestError(RelictError):
    pass


# -- manifest ----------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    uri: str
    html: Optional[str] = None
    html_path: Optional[Path] = None
    tags: Optional[list[str]] = None
    inlinks: Optional[list[str]] = None
    role: str = "target"

    def read(self) -> bytes:
        if self.html is not None:
            return self.html.encode("utf-8")
        try:
            return Path(self.html_path).read_bytes()
        except OSError as exc:
            raise ManifestError(f"entry {self.uri}: cannot read {self.html_path}: {exc}") from None


@dataclass
class CorpusManifest:
    """JSONL manifest.

    One object per line: ``uri``, and ``html`` or ``html_path`` (relative to
    the manifest).  Optional: ``tags`` (frequency order), ``inlinks`` (URIs of
    pages linking here), ``inlink_paths`` (files of inlink pages without a
    known URI) and ``role`` ("target" to evaluate, "support" for pages that
    only exist to be indexed or linked from).  A first line
    ``{"manifest_version": "1"}`` is optional.
    """

    entries: list[ManifestEntry] = field(default_factory=list)
    version: str = MANIFEST_VERSION

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        path = Path(path)
        base = path.parent
        manifest = cls()
        seen: dict[str, tuple[int, str]] = {}
        extra: list[ManifestEntry] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except ValueError as exc:
                    raise ManifestError(f"{path}:{lineno}: {exc}") from None
                if "manifest_version" in rec and "uri" not in rec:
                    manifest.version = str(rec["manifest_version"])
                    continue
                try:
                    uri = normalize_uri(rec["uri"])
                except (KeyError, ValueError) as exc:
                    raise ManifestError(f"{path}:{lineno}: bad uri: {exc}") from None
                if uri in seen:
                    first_line, first_raw = seen[uri]
                    raise ManifestError(
                        f"{path}:{lineno}: duplicate uri {rec['uri']!r} collides with {first_raw!r}"
                        f" (line {first_line}); both normalize to {uri}"
                    )
                seen[uri] = (lineno, rec["uri"])
                html_path = rec.get("html_path")
                if rec.get("html") is None and html_path is None:
                    raise ManifestError(f"{path}:{lineno}: entry {uri} has neither html nor html_path")
                if html_path is not None:
                    html_path = base / html_path
                    if not html_path.exists():
                        raise ManifestError(f"{path}:{lineno}: entry {uri}: missing file {html_path}")
                inlinks = list(rec.get("inlinks") or [])
                for i, p in enumerate(rec.get("inlink_paths") or []):
                    p = base / p
                    if not p.exists():
                        raise ManifestError(f"{path}:{lineno}: entry {uri}: missing inlink file {p}")
                    # pages known only by file get a stable synthetic address
                    synthetic = f"http://neighborhood.invalid/{uri.split('://', 1)[1]}/{i}"
                    extra.append(ManifestEntry(synthetic, html_path=p, role="support"))
                    inlinks.append(synthetic)
                manifest.entries.append(
                    ManifestEntry(
                        uri=uri,
                        html=rec.get("html"),
                        html_path=html_path,
                        tags=rec.get("tags"),
                        inlinks=inlinks or None,
                        role=rec.get("role", "target"),
                    )
                )
        manifest.entries.extend(extra)
        return manifest

    @property
    def targets(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == "target"]


@dataclass
class Rejection:
    uri: str
    reason: str


@dataclass
class Corpus:
    """Ingested manifest: accepted targets, every page, and the side data."""

    docs: list[ExtractedDoc]
    rejected: list[Rejection]
    pages: dict[str, ExtractedDoc]
    tag_source: DictSource
    inlink_source: DictSource
    stopwords: frozenset

    def all_docs(self) -> list[ExtractedDoc]:
        return [self.pages[u] for u in sorted(self.pages)]


def ingest(
    manifest: CorpusManifest,
    min_terms: int = MIN_TERMS,
    english: bool = True,
    stopwords: Optional[frozenset] = None,
    english_ratio: float = ENGLISH_STOPWORD_RATIO,
) -> Corpus:
    """Extract every entry and apply the length and language filters to targets."""
    stopwords = default_stopwords() if stopwords is None else stopwords
    docs, rejected, pages = [], [], {}
    tags, inlinks = {}, {}
    for entry in manifest.entries:
        doc = extract_text(RawPage(entry.uri, entry.read()), stopwords)
        pages[doc.uri] = doc
        if entry.tags:
            tags[doc.uri] = entry.tags
        if entry.inlinks:
            inlinks[doc.uri] = entry.inlinks
        if entry.role != "target":
            continue
        ok, reason = passes_corpus_filter(doc, min_terms, stopwords, english_ratio if english else 0.0)
        if ok:
            docs.append(doc)
        else:
            rejected.append(Rejection(doc.uri, reason))
    return Corpus(docs, rejected, pages, DictSource(tags), DictSource(inlinks), stopwords)


# -- experiment -----------------------------------------------------------------------------

@dataclass
class ExperimentContext:
    """Providers used to assemble per-URI method inputs."""

    df_provider: Optional[DfProvider] = None
    neighborhood_df: Optional[DfProvider] = None
    tag_source: object = None
    inlink_source: object = None
    pages: Mapping[str, ExtractedDoc] = field(default_factory=dict)
    inlink_cap: int = 50
    stopwords: frozenset = field(default_factory=default_stopwords)

    @classmethod
    def from_corpus(cls, corpus: Corpus, df_provider, neighborhood_df=None, **kw) -> "ExperimentContext":
        return cls(df_provider, neighborhood_df, corpus.tag_source, corpus.inlink_source,
                   corpus.pages, stopwords=corpus.stopwords, **kw)

    def inputs_for(self, doc: ExtractedDoc) -> MethodInputs:
        tags = fetch_tags(doc.uri, self.tag_source) if self.tag_source is not None else None
        bucket = None
        if self.inlink_source is not None:
            links = fetch_inlinks(doc.uri, self.inlink_source, self.inlink_cap)
            if links is not None:
                neighbours = [self.pages[u] for u in links.inlinks if u in self.pages]
                try:
                    bucket = build_term_bucket(doc.uri, neighbours, self.inlink_cap)
                except NoNeighborhood:
                    bucket = None
        return MethodInputs(doc, self.df_provider, tags, bucket, self.neighborhood_df, self.stopwords)


def _run_one(doc, methods, combos, engine, context, escalate_below):
    inputs = context.inputs_for(doc)
    done: dict[MethodId, RankRecord] = {}

    def run(method):
        method = MethodId(method)
        if method not in done:
            done[method] = run_method(method, doc.uri, engine, inputs)
        return done[method]

    singles = [run(m) for m in methods]
    finals, trails = [], []
    for spec in combos:
        final, trail = run_combination(spec, doc.uri, engine, inputs, escalate_below, run=run)
        finals.append(RankRecord(final.uri, spec.label, final.engine_id, final.rank, final.rank_class,
                                 final.query_terms, final.quoted, final.available))
        trails.append((spec.label, trail))
    return singles, finals, trails


def run_experiment(
    docs: Sequence[ExtractedDoc],
    methods: Sequence[MethodId | str],
    combos: Sequence[CombinationSpec],
    engine: Engine,
    context: ExperimentContext,
    escalate_below: RankClass = RankClass.UNDISCOVERED,
    jobs: int = 1,
    trails: Optional[dict] = None,
) -> list[RankRecord]:
    """Single-method records for every (doc, method), then one final record per (doc, combo).

    Combination records carry the combination label (e.g. "TI-LS5") as
    their method.  Pass a dict as ``trails`` to receive
    ``{(uri, label): [step records]}``.
    """
    if not docs:
        raise ValueError("run_experiment needs at least one document")
    methods = [MethodId(m) for m in methods]
    args = (methods, list(combos), engine, context, escalate_below)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda d: _run_one(d, *args), docs))
    else:
        results = [_run_one(d, *args) for d in docs]
    singles, finals = [], []
    for doc, (s, f, t) in zip(docs, results):
        singles.extend(s)
        finals.extend(f)
        if trails is not None:
            for label, trail in t:
                trails[(doc.uri, label)] = trail
    return singles + finals


# -- aggregation --------------------------------------------------------------------------

def percent(count: int, n: int) -> float:
    """100*count/n rounded half-up to one decimal."""
    value = Decimal(100 * count) / Decimal(n)
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class AggregateRow:
    label: str
    engine_id: str
    top: float
    top10: float
    top100: float
    undiscovered: float
    n: int
    counts: tuple[int, int, int, int] = (0, 0, 0, 0)

    def as_dict(self) -> dict:
        return {"label": self.label, "engine_id": self.engine_id, "top": self.top, "top10": self.top10,
                "top100": self.top100, "undiscovered": self.undiscovered, "n": self.n}


@dataclass
class AggregateTable:
    rows: list[AggregateRow]

    def row(self, label: str, engine_id: Optional[str] = None) -> AggregateRow:
        for r in self.rows:
            if r.label == label and (engine_id is None or r.engine_id == engine_id):
                return r
        raise KeyError(label)

    def format(self) -> str:
        lines = [f"{'method':<16}{'engine':<14}{'Top':>7}{'Top10':>7}{'Top100':>7}{'Undis':>7}{'n':>6}"]
        for r in self.rows:
            lines.append(f"{r.label:<16}{r.engine_id:<14}{r.top:>7.1f}{r.top10:>7.1f}"
                         f"{r.top100:>7.1f}{r.undiscovered:>7.1f}{r.n:>6}")
        return "\n".join(lines)


def aggregate_row(label: str, engine_id: str, records: Sequence[RankRecord]) -> AggregateRow:
    n = len(records)
    if not n:
        raise ValueError(f"no records for {label}/{engine_id}")
    c = Counter(r.rank_class for r in records)
    counts = tuple(c[k] for k in RankClass)
    return AggregateRow(label, engine_id, *(percent(k, n) for k in counts), n, counts)


def aggregate(records: Iterable[RankRecord], tag_variants: bool = True) -> AggregateTable:
    """Disjoint-bucket percentages per (method or combination, engine).

    Rows follow first appearance.  With ``tag_variants`` two extra rows
    describe tags: "TA:tagged" (URIs with any tags) and "TA:10" (URIs with
    exactly ten tags), since an all-URI TA row is dominated by URIs that
    have no tags at all.
    """
    groups: dict[tuple[str, str], list[RankRecord]] = defaultdict(list)
    for rec in records:
        groups[(str(rec.method), rec.engine_id)].append(rec)
        if tag_variants and str(rec.method) == MethodId.TA.value and rec.available:
            groups[("TA:tagged", rec.engine_id)].append(rec)
            if len(rec.query_terms) == 10:
                groups[("TA:10", rec.engine_id)].append(rec)
    return AggregateTable([aggregate_row(label, eng, recs) for (label, eng), recs in groups.items()])


# -- title analytics -----------------------------------------------------------------------

FACTORS = ("terms", "chars", "mean_chars", "stopwords", "terms_nosw")


@dataclass
class TitleAnalysis:
    histograms: dict[str, dict[int, Counter]]
    table: list[ProbabilityRow]
    nosw_table: list[ProbabilityRow]

    def histogram_rows(self) -> list[tuple[str, int, str, int]]:
        rows = []
        for factor in FACTORS:
            hist = self.histograms.get(factor, {})
            for value in sorted(hist):
                for cls in RankClass:
                    rows.append((factor, value, cls.label, hist[value][cls]))
        return rows


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def title_analysis(docs: Sequence[ExtractedDoc], records: Sequence[RankRecord],
                   stopwords: Optional[frozenset] = None) -> TitleAnalysis:
    """Histograms of title factors by rank class, plus the length -> probability table.

    Only records of available TI queries count.  Each factor's histogram
    spans every integer between its smallest and largest observed value so
    gaps show up as zero-height bars.  Mean characters per term is rounded
    half-up to an integer.
    """
    stopwords = default_stopwords() if stopwords is None else stopwords
    titles = {d.uri: d.title for d in docs if d.title}
    values: dict[str, list[tuple[int, RankClass]]] = defaultdict(list)
    lengths, nosw_lengths = {}, {}
    used = []
    for rec in records:
        if str(rec.method) != MethodId.TI.value or not rec.available or rec.uri not in titles:
            continue
        title = titles[rec.uri]
        st = title_stats(title, stopwords)
        stripped = strip_stopwords_from_title(title, stopwords)
        nosw = len(stripped.split())
        lengths[rec.uri] = st.term_count
        nosw_lengths[rec.uri] = nosw
        used.append(rec)
        values["terms"].append((st.term_count, rec.rank_class))
        values["chars"].append((st.char_count, rec.rank_class))
        values["mean_chars"].append((_round_half_up(st.mean_chars_per_term), rec.rank_class))
        values["stopwords"].append((st.stopword_count, rec.rank_class))
        values["terms_nosw"].append((nosw, rec.rank_class))
    histograms = {}
    for factor, pairs in values.items():
        lo, hi = min(v for v, _ in pairs), max(v for v, _ in pairs)
        hist = {v: Counter() for v in range(lo, hi + 1)}
        for v, cls in pairs:
            hist[v][cls] += 1
        histograms[factor] = hist
    table = build_probability_table(used, lengths)
    nosw_used = [r for r in used if nosw_lengths[r.uri] >= 1]
    nosw_table = build_probability_table(nosw_used, nosw_lengths)
    return TitleAnalysis(histograms, table, nosw_table)


# -- file outputs ---------------------------------------------------------------------------

def write_records(records: Iterable[RankRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path) -> list[RankRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(RankRecord.from_json(json.loads(line)))
                except (ValueError, KeyError) as exc:
                    raise RelictError(f"{path}:{lineno}: bad record: {exc}") from None
    return out


def write_table_csv(table: AggregateTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "engine_id", "top", "top10", "top100", "undiscovered", "n"])
        for r in table.rows:
            w.writerow([r.label, r.engine_id, f"{r.top:.1f}", f"{r.top10:.1f}",
                        f"{r.top100:.1f}", f"{r.undiscovered:.1f}", r.n])


def write_probability_csv(rows: Sequence[ProbabilityRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["title_length", "p1", "p10", "p100"])
        for r in rows:
            w.writerow([r.title_length, f"{r.p1:.4f}", f"{r.p10:.4f}", f"{r.p100:.4f}"])


def read_probability_csv(path) -> list[ProbabilityRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [ProbabilityRow(int(r["title_length"]), float(r["p1"]), float(r["p10"]), float(r["p100"]))
                for r in csv.DictReader(fh)]


def write_histograms_csv(analysis: TitleAnalysis, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["factor", "value", "rank_class", "count"])
        w.writerows(analysis.histogram_rows())
