"""TF-IDF lexical signatures for pages and for their inlink neighborhoods."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cmp_to_key
from typing import Mapping, Optional, Sequence

from .content import ExtractedDoc
from .dfsource import DfProvider, DfRecord, lookup_df
from .uri import normalize_uri

INLINK_CAP = 50


class NoScoreableTerms(ValueError):
    pass


class NoNeighborhood(ValueError):
    pass


@dataclass(frozen=True)
class TermBucket:
    """Term counts pooled over the pages that link to ``uri``."""

    uri: str
    term_freqs: dict[str, int]
    source_pages: tuple[str, ...]


@dataclass(frozen=True)
class LexicalSignature:
    uri: str
    terms: tuple[tuple[str, float], ...]
    n: int
    source: str = "page"
    provider_id: str = ""
    n_docs: int = 1
    short: bool = False

    @property
    def words(self) -> list[str]:
        return [t for t, _ in self.terms]

    def __str__(self) -> str:
        return " ".join(self.words)

    def to_line(self) -> str:
        scored = ",".join(f"{t}:{s:.6f}" for t, s in self.terms)
        return f"{self.uri}\t{self.n}\t{self.source}\t{self.provider_id}\t{scored}"

    @classmethod
    def from_line(cls, line: str) -> "LexicalSignature":
        uri, n, source, provider_id, scored = line.rstrip("\n").split("\t")
        terms = []
        for item in filter(None, scored.split(",")):
            term, score = item.rsplit(":", 1)
            terms.append((term, float(score)))
        n = int(n)
        return cls(uri, tuple(terms), n, source, provider_id, short=len(terms) < n)


def idf(df: int, n_docs: int) -> float:
    return math.log(n_docs / min(max(df, 1), n_docs))


def tfidf_score(term_freqs: Mapping[str, int], df_records: Sequence[DfRecord]) -> dict[str, float]:
    """score(t) = count(t)/total * ln(N / clamp(df(t), 1, N)).

    Raises KeyError when a term has no DfRecord.
    """
    by_term = {r.term: r for r in df_records}
    total = sum(term_freqs.values())
    scores = {}
    for term, count in term_freqs.items():
        try:
            rec = by_term[term]
        except KeyError:
            raise KeyError(f"no document frequency for term {term!r}") from None
        scores[term] = (count / total) * idf(rec.df, rec.n_docs)
    return scores


def _order(a, b) -> int:
    """Compare two (term, score, count, df, n_docs) rows: higher score first, then term.

    Floats decide when the scores are clearly apart.  Otherwise the scores
    are compared exactly: count*ln(N/df) orders like (N/df)**count, which is
    a comparison of integers.  Mathematically equal scores that differ by
    rounding therefore still fall back to the term tie-break.
    """
    ta, sa, ca, da, na = a
    tb, sb, cb, db, nb = b
    if not math.isclose(sa, sb, rel_tol=1e-9, abs_tol=1e-300):
        return -1 if sa > sb else 1
    lhs = na**ca * db**cb
    rhs = nb**cb * da**ca
    if lhs != rhs:
        return -1 if lhs > rhs else 1
    return (ta > tb) - (ta < tb)


def rank_terms(term_freqs: Mapping[str, int], df_records: Sequence[DfRecord]) -> list[tuple[str, float]]:
    """All terms with their TF-IDF scores, score descending, ties by term ascending."""
    scores = tfidf_score(term_freqs, df_records)
    by_term = {r.term: r for r in df_records}
    rows = []
    for term, score in scores.items():
        rec = by_term[term]
        rows.append((term, score, term_freqs[term], min(max(rec.df, 1), rec.n_docs), rec.n_docs))
    rows.sort(key=cmp_to_key(_order))
    out, floor = [], math.inf
    for term, score, *_ in rows:
        # exact order may disagree with float noise; keep reported scores monotone
        floor = min(floor, score)
        out.append((term, floor))
    return out


def make_signature(
    source: ExtractedDoc | TermBucket,
    n: int,
    df_provider: DfProvider,
    df_records: Optional[Sequence[DfRecord]] = None,
) -> LexicalSignature:
    """Top-``n`` terms of ``source`` by TF-IDF.

    ``df_records`` may be passed when the caller already looked them up
    (e.g. through a cache); otherwise ``df_provider`` is queried.
    """
    if n < 1:
        raise ValueError("signature length must be >= 1")
    term_freqs = source.term_freqs
    if not term_freqs:
        raise NoScoreableTerms(f"no scoreable terms in {source.uri}")
    if df_records is None:
        df_records = lookup_df(sorted(term_freqs), df_provider)
    ranked = rank_terms(term_freqs, df_records)
    top = tuple(ranked[:n])
    n_docs = df_records[0].n_docs if df_records else df_provider.n_docs
    return LexicalSignature(
        uri=source.uri,
        terms=top,
        n=n,
        source="neighborhood" if isinstance(source, TermBucket) else "page",
        provider_id=df_provider.provider_id,
        n_docs=n_docs,
        short=len(top) < n,
    )


def build_term_bucket(centroid_uri: str, inlink_pages: Sequence[ExtractedDoc], cap: int = INLINK_CAP) -> TermBucket:
    """Pool the term counts of up to ``cap`` distinct inlink pages.

    The centroid's own content never enters the bucket, and a page listed
    twice (same normalized URI) counts once.
    """
    centroid = normalize_uri(centroid_uri)
    counts: Counter = Counter()
    used: list[str] = []
    for page in inlink_pages:
        if len(used) >= cap:
            break
        if page.uri == centroid or page.uri in used:
            continue
        counts.update(page.term_freqs)
        used.append(page.uri)
    if not used:
        raise NoNeighborhood(f"no neighborhood pages for {centroid}")
    return TermBucket(centroid, dict(counts), tuple(used))
