"""Query derivation, rank classification and method fallback chains."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .content import ExtractedDoc, default_stopwords, strip_stopwords_from_title
from .dfsource import DfProvider
from .lexsig import NoScoreableTerms, TermBucket, make_signature
from .searchsim import SearchQuery, rank_of
from .webclients import Engine, TagSet


class MethodId(str, enum.Enum):
    LS5 = "LS5"
    LS7 = "LS7"
    TI = "TI"
    TIQ = "TIQ"
    TA = "TA"
    LNLS5 = "LNLS5"
    LNLS7 = "LNLS7"
    TI_NOSW = "TI_NOSW"

    def __str__(self):
        return self.value


class RankClass(enum.IntEnum):
    TOP1 = 1
    TOP10 = 2
    TOP100 = 3
    UNDISCOVERED = 4

    @property
    def label(self) -> str:
        return {1: "Top1", 2: "Top10", 3: "Top100", 4: "Undiscovered"}[self.value]

    @classmethod
    def from_label(cls, label: str) -> "RankClass":
        return {"top1": cls.TOP1, "top10": cls.TOP10, "top100": cls.TOP100,
                "undiscovered": cls.UNDISCOVERED}[label.lower()]


def classify(rank: Optional[int]) -> RankClass:
    if rank is None:
        return RankClass.UNDISCOVERED
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if rank == 1:
        return RankClass.TOP1
    if rank <= 10:
        return RankClass.TOP10
    if rank <= 100:
        return RankClass.TOP100
    return RankClass.UNDISCOVERED


@dataclass(frozen=True)
class RankRecord:
    uri: str
    method: str
    engine_id: str
    rank: Optional[int]
    rank_class: RankClass
    query_terms: tuple[str, ...] = ()
    quoted: bool = False
    available: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rank_class", RankClass(self.rank_class))
        if self.rank is not None and self.rank > 100:
            # beyond the inspected window counts as not found
            object.__setattr__(self, "rank", None)
        if self.rank_class is not classify(self.rank):
            raise ValueError(f"rank {self.rank} does not belong to class {self.rank_class.label}")

    def to_json(self) -> dict:
        return {
            "uri": self.uri,
            "method": str(self.method),
            "engine_id": self.engine_id,
            "rank": self.rank,
            "rank_class": self.rank_class.label,
            "query_terms": list(self.query_terms),
            "quoted": self.quoted,
            "available": self.available,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "RankRecord":
        return cls(
            uri=d["uri"],
            method=d["method"],
            engine_id=d["engine_id"],
            rank=d.get("rank"),
            rank_class=RankClass.from_label(d["rank_class"]),
            query_terms=tuple(d.get("query_terms", ())),
            quoted=bool(d.get("quoted", False)),
            available=bool(d.get("available", True)),
        )


@dataclass(frozen=True)
class CombinationSpec:
    steps: tuple[MethodId, ...]

    def __post_init__(self):
        steps = tuple(MethodId(s) for s in self.steps)
        if not steps:
            raise ValueError("a combination needs at least one step")
        if len(set(steps)) != len(steps):
            raise ValueError(f"repeated method in combination {steps}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def parse(cls, text: str) -> "CombinationSpec":
        """``"TI-LS5"`` -> (TI, LS5). ``TI_NOSW`` keeps its underscore."""
        return cls(tuple(p.strip().upper() for p in text.split("-") if p.strip()))

    @property
    def label(self) -> str:
        return "-".join(s.value for s in self.steps)


DEFAULT_COMBINATION = CombinationSpec((MethodId.TI, MethodId.LS5))


class MethodUnavailable(Exception):
    """The inputs a method needs do not exist for this page (no title, no tags, ...)."""


@dataclass
class MethodInputs:
    """Everything derive_query may need for one URI."""

    doc: Optional[ExtractedDoc] = None
    df_provider: Optional[DfProvider] = None
    tags: Optional[TagSet] = None
    bucket: Optional[TermBucket] = None
    neighborhood_df: Optional[DfProvider] = None
    stopwords: frozenset = field(default_factory=default_stopwords)


_LS_LENGTH = {MethodId.LS5: 5, MethodId.LS7: 7, MethodId.LNLS5: 5, MethodId.LNLS7: 7}


def derive_query(method: MethodId | str, inputs: MethodInputs) -> SearchQuery:
    method = MethodId(method)
    doc = inputs.doc
    if method in (MethodId.LS5, MethodId.LS7):
        if doc is None or inputs.df_provider is None:
            raise MethodUnavailable(f"{method}: no page copy or df provider")
        try:
            sig = make_signature(doc, _LS_LENGTH[method], inputs.df_provider)
        except NoScoreableTerms as exc:
            raise MethodUnavailable(f"{method}: {exc}") from None
        return SearchQuery(tuple(sig.words))
    if method in (MethodId.LNLS5, MethodId.LNLS7):
        provider = inputs.neighborhood_df or inputs.df_provider
        if inputs.bucket is None or provider is None:
            raise MethodUnavailable(f"{method}: no link neighborhood")
        try:
            sig = make_signature(inputs.bucket, _LS_LENGTH[method], provider)
        except NoScoreableTerms as exc:
            raise MethodUnavailable(f"{method}: {exc}") from None
        return SearchQuery(tuple(sig.words))
    if method is MethodId.TA:
        if inputs.tags is None or not inputs.tags.tags:
            raise MethodUnavailable("TA: no tags for this URI")
        return SearchQuery(tuple(inputs.tags.tags))
    title = doc.title if doc is not None else None
    if not title:
        raise MethodUnavailable(f"{method}: page has no title")
    if method is MethodId.TI:
        return SearchQuery(tuple(title.lower().split()))
    if method is MethodId.TIQ:
        return SearchQuery(tuple(title.lower().split()), quoted=True)
    stripped = strip_stopwords_from_title(title, inputs.stopwords)
    if not stripped:
        raise MethodUnavailable("TI_NOSW: title consists of stopwords only")
    return SearchQuery(tuple(stripped.lower().split()))


def run_method(method: MethodId | str, uri: str, engine: Engine, inputs: MethodInputs) -> RankRecord:
    method = MethodId(method)
    try:
        query = derive_query(method, inputs)
    except MethodUnavailable:
        return RankRecord(uri, method.value, engine.engine_id, None, RankClass.UNDISCOVERED, available=False)
    page = engine.search(query)
    rank = rank_of(page, uri)
    if rank is not None and rank > 100:
        rank = None
    return RankRecord(uri, method.value, engine.engine_id, rank, classify(rank), query.terms, query.quoted)


def run_combination(
    spec: CombinationSpec,
    uri: str,
    engine: Engine,
    inputs: MethodInputs,
    escalate_below: RankClass = RankClass.UNDISCOVERED,
    run=None,
) -> tuple[RankRecord, list[RankRecord]]:
    """Run the steps in order until one does better than ``escalate_below``.

    With the default, the next method runs only when the previous one left
    the URI undiscovered.  Pass ``RankClass.TOP10`` to escalate unless the
    URI came back top ranked.  ``run(method)`` may replace the call to
    :func:`run_method`, e.g. to reuse memoized results.
    """
    trail: list[RankRecord] = []
    for step in spec.steps:
        rec = run(step) if run is not None else run_method(step, uri, engine, inputs)
        trail.append(rec)
        if rec.rank_class < escalate_below:
            return rec, trail
    # nothing was good enough; keep the best attempt (the last one on ties)
    return min(reversed(trail), key=lambda r: r.rank_class), trail


def combine_records(spec: CombinationSpec, by_method: Mapping[str, RankRecord],
                    escalate_below: RankClass = RankClass.UNDISCOVERED) -> RankRecord:
    """Fold already-computed single-method records for one URI into the combination result.

    Equivalent to :func:`run_combination` with a deterministic engine, without
    re-running queries.
    """
    tried = []
    for step in spec.steps:
        rec = by_method[step.value]
        if rec.rank_class < escalate_below:
            return rec
        tried.append(rec)
    return min(reversed(tried), key=lambda r: r.rank_class)


# -- title-length predictor ------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityRow:
    title_length: int
    p1: float
    p10: float
    p100: float
    n: int = 0

    def __post_init__(self):
        if self.title_length < 1:
            raise ValueError("title_length must be >= 1")
        if not (0.0 <= self.p1 <= self.p10 <= self.p100 <= 1.0):
            raise ValueError(f"probabilities must satisfy 0 <= p1 <= p10 <= p100 <= 1: {self}")


def build_probability_table(records: Sequence[RankRecord], title_lengths: Mapping[str, int]) -> list[ProbabilityRow]:
    """Cumulative success probabilities per title length (in terms)."""
    groups: dict[int, list[RankRecord]] = defaultdict(list)
    for rec in records:
        try:
            length = title_lengths[rec.uri]
        except KeyError:
            raise KeyError(f"no title length for {rec.uri}") from None
        groups[length].append(rec)
    rows = []
    for length in sorted(groups):
        recs = groups[length]
        n = len(recs)
        at1 = sum(1 for r in recs if r.rank is not None and r.rank <= 1)
        at10 = sum(1 for r in recs if r.rank is not None and r.rank <= 10)
        at100 = sum(1 for r in recs if r.rank is not None and r.rank <= 100)
        rows.append(ProbabilityRow(length, at1 / n, at10 / n, at100 / n, n))
    return rows


class TitleDecision(str, enum.Enum):
    RUN_TITLE_FIRST = "run-title-first"
    SKIP_TO_LS = "skip-to-LS"
    UNKNOWN_LENGTH = "unknown-length"


def predict_title_worth(title: str, table: Sequence[ProbabilityRow], threshold: float = 0.5) -> TitleDecision:
    if not title or not title.strip():
        raise ValueError("cannot judge an empty title")
    length = len(title.split())
    for row in table:
        if row.title_length == length:
            if row.p10 >= threshold:
                return TitleDecision.RUN_TITLE_FIRST
            return TitleDecision.SKIP_TO_LS
    return TitleDecision.UNKNOWN_LENGTH


# Title-length lookup values reported for the Yahoo! title experiment.
PUBLISHED_TITLE_TABLE = tuple(
    ProbabilityRow(length, p1, p10, p100)
    for length, p1, p10, p100 in [
        (1, 0.3, 0.4, 0.5), (2, 0.3, 0.7, 0.7), (3, 0.7, 0.8, 0.8), (4, 0.8, 0.9, 0.9),
        (5, 0.7, 0.8, 0.8), (6, 0.9, 0.9, 0.9), (7, 0.8, 0.8, 0.8), (8, 0.9, 0.9, 0.9),
        (9, 0.7, 0.7, 0.7), (10, 0.6, 0.6, 0.6), (11, 0.7, 0.7, 0.7), (12, 0.8, 0.8, 0.8),
        (13, 0.5, 0.5, 0.5), (14, 0.5, 0.5, 0.5), (15, 1.0, 1.0, 1.0), (16, 0.3, 0.5, 0.5),
        (17, 0.5, 0.6, 0.6), (18, 0.5, 0.5, 0.5), (19, 0.5, 0.8, 0.8), (24, 0.5, 0.5, 0.5),
        (33, 0.5, 0.5, 0.5),
    ]
)


def plan_with_predictor(title: Optional[str], table: Sequence[ProbabilityRow], threshold: float,
                        spec: CombinationSpec = DEFAULT_COMBINATION) -> CombinationSpec:
    """Drop title steps from ``spec`` when the predictor says the title is not worth querying."""
    if not title or not title.strip():
        return spec
    if predict_title_worth(title, table, threshold) is not TitleDecision.SKIP_TO_LS:
        return spec
    title_methods = {MethodId.TI, MethodId.TIQ, MethodId.TI_NOSW}
    rest = tuple(s for s in spec.steps if s not in title_methods)
    return CombinationSpec(rest) if rest else spec
