"""Rediscover missing web pages from lexical signatures, titles, tags and link neighborhoods."""

from .content import ExtractedDoc, RawPage, extract_text, extract_title, load_stopwords
from .dfsource import DfRecord, HitCountProvider, LocalIndexProvider, lookup_df
from .lexsig import LexicalSignature, build_term_bucket, make_signature, tfidf_score
from .pipeline import (
    CombinationSpec,
    MethodId,
    RankClass,
    RankRecord,
    classify,
    run_combination,
    run_method,
)
from .searchsim import SearchQuery, build_index, rank_of, search
from .uri import normalize_uri

__version__ = "0.1.0"

__all__ = [
    "CombinationSpec", "DfRecord", "ExtractedDoc", "HitCountProvider", "LexicalSignature",
    "LocalIndexProvider", "MethodId", "RankClass", "RankRecord", "RawPage", "SearchQuery",
    "build_index", "build_term_bucket", "classify", "extract_text", "extract_title",
    "load_stopwords", "lookup_df", "make_signature", "normalize_uri", "rank_of",
    "run_combination", "run_method", "search", "tfidf_score",
]
