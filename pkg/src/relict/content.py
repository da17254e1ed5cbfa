"""HTML to text: tokens, term frequencies, titles and title statistics."""

from __future__ import annotations

import hashlib
import html
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from functools import lru_cache
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .uri import normalize_uri

MIN_TERMS = 50
ENGLISH_STOPWORD_RATIO = 0.10

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_WS_RE = re.compile(r"\s+")
# inside a title a bare "<" is text; only tag-shaped runs are markup
_TITLE_TAG_RE = re.compile(r"</?[A-Za-z!?][^<>]*>")
_COMMENT_RE = re.compile(r"<!--.*?(?:-->|\Z)", re.S)
_RAW_BLOCK_RE = re.compile(
    r"<(script|style|noscript|template)\b[^>]*>.*?(?:</\1\s*>|\Z)", re.S | re.I
)
_TITLE_OPEN_RE = re.compile(r"<title\b[^>]*>", re.I)
# a title without its closing tag ends where the head (or body) would
_TITLE_END_RE = re.compile(r"</title\s*>|</head\s*>|<body\b|<title\b", re.I)


# -- stopwords ---------------------------------------------------------------

def parse_stopwords(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword list (one term per line, ``#`` comments).

    Without a path the bundled SMART list is returned.
    """
    if path is None:
        return default_stopwords()
    return parse_stopwords(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("relict").joinpath("data/smart_stopwords.txt").read_text(
        encoding="utf-8"
    )
    return parse_stopwords(text)


def stopword_hash(stopwords: Iterable[str]) -> str:
    """Content hash of a stopword set, independent of file order and comments."""
    blob = "\n".join(sorted(stopwords)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# -- data types ----------------------------------------------------------------

@dataclass(frozen=True)
class RawPage:
    uri: str
    body: bytes = b""
    fetched_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        object.__setattr__(self, "uri", normalize_uri(self.uri))
        if isinstance(self.body, str):
            object.__setattr__(self, "body", self.body.encode("utf-8"))


@dataclass(frozen=True)
class ExtractedDoc:
    """Text content of one page after markup and stopword removal.

    ``raw_token_count`` and ``raw_stopword_count`` describe the token
    stream before stopwords were dropped; the English filter needs them.
    """

    uri: str
    tokens: tuple[str, ...]
    term_freqs: dict[str, int]
    title: Optional[str] = None
    raw_token_count: int = 0
    raw_stopword_count: int = 0

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_tokens(cls, uri: str, tokens: Iterable[str], title: Optional[str] = None):
        """Build a doc directly from an already-clean token stream."""
        tokens = tuple(tokens)
        return cls(
            uri=normalize_uri(uri),
            tokens=tokens,
            term_freqs=dict(Counter(tokens)),
            title=title,
            raw_token_count=len(tokens),
        )


@dataclass(frozen=True)
class TitleStats:
    term_count: int
    char_count: int
    mean_chars_per_term: Fraction
    stopword_count: int


# -- tokenizing ----------------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Lowercase, split on anything not a letter or digit, drop 1-char and all-digit tokens."""
    return [
        tok
        for tok in _TOKEN_RE.findall(text.lower())
        if len(tok) >= 2 and not tok.isdigit()
    ]


def decode_body(body: bytes) -> str:
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError:
        return body.decode("latin-1")


class _TextCollector(HTMLParser):
    _SKIP = {"script", "style", "noscript", "template", "title"}
    # elements that separate words even when no whitespace is present
    _BREAKS = {
        "p", "div", "br", "li", "ul", "ol", "td", "th", "tr", "table", "h1", "h2",
        "h3", "h4", "h5", "h6", "section", "article", "header", "footer", "nav",
        "blockquote", "pre", "hr", "dd", "dt", "dl", "option", "body", "html", "head",
    }

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1
        elif tag in self._BREAKS:
            self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag in self._BREAKS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in self._SKIP:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in self._BREAKS:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def _strip_noise(markup: str) -> str:
    markup = _COMMENT_RE.sub(" ", markup)
    return _RAW_BLOCK_RE.sub(" ", markup)


def _title_span(markup: str) -> Optional[tuple[int, int, int]]:
    """(tag start, content start, content end) of the first title element."""
    m = _TITLE_OPEN_RE.search(markup)
    if m is None:
        return None
    end = _TITLE_END_RE.search(markup, m.end())
    stop = end.start() if end else len(markup)
    if end is None:
        # no terminator at all: take the text up to the next tag
        nxt = markup.find("<", m.end())
        stop = nxt if nxt >= 0 else len(markup)
    return m.start(), m.end(), stop


def _clean_title(fragment: str) -> Optional[str]:
    text = _TITLE_TAG_RE.sub(" ", fragment)
    text = html.unescape(text)
    text = text.replace("<", " ").replace(">", " ")
    text = _WS_RE.sub(" ", text).strip()
    return text or None


def extract_title(page: RawPage | str | bytes) -> Optional[str]:
    """Inner text of the first ``<title>`` element, entity-decoded and whitespace-collapsed."""
    markup = _strip_noise(_markup_of(page))
    span = _title_span(markup)
    if span is None:
        return None
    return _clean_title(markup[span[1]:span[2]])


def _markup_of(page) -> str:
    if isinstance(page, RawPage):
        return decode_body(page.body)
    if isinstance(page, bytes):
        return decode_body(page)
    return page


def visible_text(markup: str) -> str:
    """All text of a document with markup, scripts, styles and comments removed.

    The title's text is kept (it is part of what an engine indexes) and
    placed first.
    """
    markup = _strip_noise(markup)
    title_text = ""
    span = _title_span(markup)
    if span is not None:
        title_text = _clean_title(markup[span[1]:span[2]]) or ""
        markup = markup[:span[0]] + " " + markup[span[2]:]
    parser = _TextCollector()
    parser.feed(markup)
    parser.close()
    return title_text + " " + "".join(parser.parts)


def extract_text(page: RawPage, stopwords: Optional[frozenset[str]] = None) -> ExtractedDoc:
    if stopwords is None:
        stopwords = default_stopwords()
    markup = decode_body(page.body)
    title = extract_title(markup)
    raw = tokenize(visible_text(markup))
    kept = [t for t in raw if t not in stopwords]
    return ExtractedDoc(
        uri=page.uri,
        tokens=tuple(kept),
        term_freqs=dict(Counter(kept)),
        title=title,
        raw_token_count=len(raw),
        raw_stopword_count=len(raw) - len(kept),
    )


# -- titles ----------------------------------------------------------------------

def _bare(word: str) -> str:
    # "Nichols:" and "(the" should still match the stopword list
    return word.strip(".,;:!?\"'()[]{}|-").lower()


def title_stats(title: str, stopwords: Optional[frozenset[str]] = None) -> TitleStats:
    if stopwords is None:
        stopwords = default_stopwords()
    if not title or not title.strip():
        raise ValueError("title_stats needs a non-empty title")
    terms = title.split()
    term_chars = sum(len(t) for t in terms)
    return TitleStats(
        term_count=len(terms),
        char_count=len(title),
        mean_chars_per_term=Fraction(term_chars, len(terms)),
        stopword_count=sum(1 for t in terms if _bare(t) in stopwords),
    )


def strip_stopwords_from_title(title: str, stopwords: Optional[frozenset[str]] = None) -> str:
    if stopwords is None:
        stopwords = default_stopwords()
    return " ".join(t for t in title.split() if _bare(t) not in stopwords)


# -- corpus filter ---------------------------------------------------------------

def passes_corpus_filter(
    doc: ExtractedDoc,
    min_terms: int = MIN_TERMS,
    stopwords: Optional[frozenset[str]] = None,
    english_ratio: float = ENGLISH_STOPWORD_RATIO,
) -> tuple[bool, Optional[str]]:
    """Return ``(accepted, reason)``; reason is "too-short" or "non-english" on rejection.

    ``stopwords`` is accepted for signature compatibility; the ratio is taken
    from the counts recorded at extraction time.
    """
    if doc.token_count < min_terms:
        return False, "too-short"
    if english_ratio > 0:
        ratio = doc.raw_stopword_count / doc.raw_token_count if doc.raw_token_count else 0.0
        if ratio < english_ratio:
            return False, "non-english"
    return True, None
