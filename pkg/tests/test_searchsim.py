import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relict.content import ExtractedDoc, RawPage, extract_text
from relict.errors import RelictError
from relict.searchsim import (
    DuplicateURI,
    ResultPage,
    SearchQuery,
    build_index,
    load_index,
    rank_of,
    read_index_hash,
    save_index,
    search,
)

NOSW = frozenset()


def doc(uri, text):
    return ExtractedDoc.from_tokens(uri, text.split())


CORPUS = [
    doc("http://a.test", "american red cross of greater los angeles"),
    doc("http://b.test", "red cross cross american shipping"),
    doc("http://c.test", "los angeles weather red"),
]


def brute_cosine(docs, query_terms):
    """Cosine over tf*idf vectors, recomputed from scratch per document."""
    n = len(docs)
    vocab = {t for d in docs for t in d.tokens}
    idf = {t: math.log(n / sum(1 for d in docs if t in d.tokens)) for t in vocab}
    q = {}
    for t in query_terms:
        if t in idf:
            q[t] = q.get(t, 0) + 1
    qv = {t: c * idf[t] for t, c in q.items()}
    qn = math.sqrt(sum(v * v for v in qv.values()))
    out = {}
    for d in docs:
        if not any(t in d.tokens for t in qv):
            continue
        dv = {t: d.tokens.count(t) * idf[t] for t in set(d.tokens)}
        dn = math.sqrt(sum(v * v for v in dv.values()))
        dot = sum(w * dv.get(t, 0.0) for t, w in qv.items())
        out[d.uri] = dot / (qn * dn) if qn and dn else 0.0
    return out


def test_basic_index_shape():
    index = build_index(CORPUS, NOSW)
    assert index.n_docs == 3
    assert [d for d, _ in index.postings["angeles"]] == [0, 2]
    assert index.postings["cross"] == [(0, 1), (1, 2)]
    for term, plist in index.postings.items():
        ids = [d for d, _ in plist]
        assert ids == sorted(ids) and all(i in index.doc_table for i in ids)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_index([], NOSW)


def test_duplicate_uri_names_both():
    with pytest.raises(DuplicateURI) as err:
        build_index([ExtractedDoc("http://www.a.test/", ("x",), {"x": 1}),
                     ExtractedDoc("http://a.test", ("y",), {"y": 1})], NOSW)
    assert "http://www.a.test/" in str(err.value) and "http://a.test" in str(err.value)


def test_shuffled_input_same_index():
    rng = random.Random(3)
    shuffled = CORPUS[:]
    rng.shuffle(shuffled)
    a, b = build_index(CORPUS, NOSW), build_index(shuffled, NOSW)
    assert a.content_hash == b.content_hash
    q = SearchQuery(("red", "cross"))
    assert search(a, q) == search(b, q)


def test_phrase_query_filters():
    index = build_index(CORPUS, NOSW)
    hits = search(index, SearchQuery(("american", "red", "cross"), quoted=True))
    assert hits.uris == ["http://a.test"]
    loose = search(index, SearchQuery(("american", "red", "cross")))
    assert set(loose.uris) == {"http://a.test", "http://b.test", "http://c.test"}


def test_unknown_term_gives_no_hits():
    assert search(build_index(CORPUS, NOSW), SearchQuery(("zebra",))).hits == ()


def test_scores_match_bruteforce_cosine():
    index = build_index(CORPUS, NOSW)
    terms = ("red", "cross", "cross", "weather")
    got = search(index, SearchQuery(terms))
    want = brute_cosine(CORPUS, terms)
    assert set(got.uris) == set(want)
    for uri, score in got.hits:
        assert score == pytest.approx(want[uri], abs=1e-12)


def test_ties_broken_by_uri():
    docs = [doc(f"http://{c}.test", "same words") for c in "cab"]
    assert search(build_index(docs, NOSW), SearchQuery(("same",))).uris == [
        "http://a.test", "http://b.test", "http://c.test"
    ]


def test_query_stopwords_and_case_follow_the_index():
    index = build_index([doc("http://a.test", "red cross"), doc("http://b.test", "blue")],
                        frozenset({"the"}))
    assert search(index, SearchQuery(("The", "RED"))).uris == ["http://a.test"]


def test_unique_term_self_retrieval():
    docs = [doc(f"http://d{i}.test", f"shared common uniq{i} filler") for i in range(30)]
    index = build_index(docs, NOSW)
    for i in range(30):
        assert rank_of(search(index, SearchQuery((f"uniq{i}", "shared", "common"))), f"http://d{i}.test") == 1


def test_max_results_cap():
    docs = [doc(f"http://d{i:03d}.test", "shared word") for i in range(150)]
    index = build_index(docs, NOSW)
    assert len(search(index, SearchQuery(("shared",))).hits) == 100
    assert len(search(index, SearchQuery(("shared",), max_results=7)).hits) == 7


def test_rank_of():
    page = ResultPage((("http://www.example.org/", 1.0), ("http://b.test", 0.5)))
    assert rank_of(page, "http://example.org") == 1
    assert rank_of(page, "http://B.test/") == 2
    assert rank_of(page, "http://c.test") is None
    many = ResultPage(tuple((f"http://d{i}.test", 1.0) for i in range(100)))
    assert rank_of(many, "http://target.test") is None


def test_query_validation():
    with pytest.raises(ValueError):
        SearchQuery(())
    with pytest.raises(ValueError):
        SearchQuery(("a",), max_results=0)
    assert SearchQuery(("a", "b"), quoted=True).text == '"a b"'


def test_save_load_roundtrip(tmp_path):
    index = build_index(CORPUS, NOSW)
    path = tmp_path / "index.bin"
    save_index(index, path)
    assert path.read_bytes().startswith(b"RELICTIX")
    assert read_index_hash(path) == index.content_hash
    loaded = load_index(path)
    q = SearchQuery(("los", "angeles"), quoted=True)
    assert search(loaded, q) == search(index, q)
    assert loaded.postings == index.postings


def test_corrupt_index_file(tmp_path):
    path = tmp_path / "index.bin"
    path.write_bytes(b"NOTANIDX" + b"\0" * 20)
    with pytest.raises(RelictError):
        load_index(path)


def test_real_pages_index(worked_corpus):
    index = build_index(worked_corpus.all_docs(), worked_corpus.stopwords)
    hits = search(index, SearchQuery(("american", "red", "cross"), quoted=True))
    assert hits.uris == ["http://redcrossla.org"]


# -- properties -------------------------------------------------------------------------

words = st.sampled_from(["alpha", "beta", "gamma", "delta", "omega"])
corpora = st.lists(st.lists(words, min_size=1, max_size=12), min_size=1, max_size=8)


@given(corpora, st.lists(words, min_size=1, max_size=3))
def test_phrase_hits_subset_of_keyword_hits(corpus, terms):
    index = build_index([ExtractedDoc.from_tokens(f"http://d{i}.test", t) for i, t in enumerate(corpus)], NOSW)
    phrase = search(index, SearchQuery(tuple(terms), quoted=True))
    keyword = search(index, SearchQuery(tuple(terms)))
    assert set(phrase.uris) <= set(keyword.uris)
    contains = {f"http://d{i}.test" for i, toks in enumerate(corpus)
                if any(toks[j:j + len(terms)] == terms for j in range(len(toks)))}
    assert set(phrase.uris) == contains


@given(corpora, st.lists(words, min_size=1, max_size=4))
def test_result_page_invariants(corpus, terms):
    docs = [ExtractedDoc.from_tokens(f"http://d{i}.test", t) for i, t in enumerate(corpus)]
    index = build_index(docs, NOSW)
    page = search(index, SearchQuery(tuple(terms)))
    assert page == search(index, SearchQuery(tuple(terms)))
    scores = [s for _, s in page.hits]
    assert all(a >= b for a, b in zip(scores, scores[1:]))
    assert len(set(page.uris)) == len(page.uris)
    want = brute_cosine(docs, terms)
    assert set(page.uris) == set(want)
    for uri, s in page.hits:
        assert s == pytest.approx(want[uri], abs=1e-9)


def test_extract_then_index_matches_pages():
    body = b"<html><title>Red Cross</title><body>Relief for the city</body></html>"
    d = extract_text(RawPage("http://x.test", body))
    index = build_index([d])
    assert rank_of(search(index, SearchQuery(("relief", "city"))), "http://x.test") == 1
