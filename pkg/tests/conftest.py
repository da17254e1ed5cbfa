import time
from collections import OrderedDict

import pytest

from relict import fixtures
from relict.content import default_stopwords
from relict.evalharness import CorpusManifest, ExperimentContext, ingest
from relict.dfsource import HitCountProvider, LocalIndexProvider
from relict.searchsim import build_index
from relict.webclients import (
    ConnectionGuard,
    EngineBinding,
    FixtureInlinkSource,
    FixtureTagSource,
    LocalSimEngine,
)

# every socket connect in the whole run lands here
SESSION_GUARD = ConnectionGuard()
SESSION_START = time.monotonic()
# criterion number -> [title, passed, details]
ACCEPTANCE: "OrderedDict[int, list]" = OrderedDict()


def pytest_configure(config):
    SESSION_GUARD.__enter__()


def pytest_unconfigure(config):
    SESSION_GUARD.__exit__(None, None, None)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = ACCEPTANCE.setdefault(number, [title, True, []])
    if call.excinfo is not None:
        entry[1] = False
    if call.when == "call":
        entry[2].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    elapsed = time.monotonic() - SESSION_START
    offline = SESSION_GUARD.count == 0 and elapsed < 60
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, (title, ok, details) in sorted(ACCEPTANCE.items()):
        if number == 8:
            ok = ok and offline
        tail = f" ({'; '.join(details)})" if details else ""
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}{tail}")
    tr.write_line(
        f"whole run: {SESSION_GUARD.count} outbound connection attempts, {elapsed:.1f} s wall time"
    )


def pytest_sessionfinish(session, exitstatus):
    if SESSION_GUARD.count and session.exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture
def detail(request):
    """Attach a short note to the acceptance line of the current test."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


@pytest.fixture(scope="session")
def session_guard():
    return SESSION_GUARD


@pytest.fixture(scope="session")
def stopwords():
    return default_stopwords()


@pytest.fixture(scope="session")
def worked_dir():
    return fixtures.worked_dir()


@pytest.fixture(scope="session")
def worked_corpus(worked_dir):
    return ingest(CorpusManifest.load(worked_dir / "manifest.jsonl"), min_terms=0, english=False)


@pytest.fixture(scope="session")
def worked_hits(worked_dir):
    return HitCountProvider.from_tsv(worked_dir / "hits.tsv")


@pytest.fixture(scope="session")
def worked_context(worked_corpus, worked_hits, worked_dir):
    ctx = ExperimentContext.from_corpus(worked_corpus, worked_hits)
    ctx.tag_source = FixtureTagSource(worked_dir / "tags.jsonl")
    return ctx


@pytest.fixture(scope="session")
def corpus():
    return ingest(CorpusManifest.load(fixtures.corpus_dir() / "manifest.jsonl"))


@pytest.fixture(scope="session")
def corpus_index(corpus):
    return build_index(corpus.all_docs(), corpus.stopwords)


@pytest.fixture(scope="session")
def corpus_engine(corpus_index):
    return LocalSimEngine(EngineBinding("local-sim"), corpus_index)


@pytest.fixture(scope="session")
def corpus_context(corpus, corpus_index):
    ctx = ExperimentContext.from_corpus(corpus, LocalIndexProvider.from_index(corpus_index))
    ctx.tag_source = FixtureTagSource(fixtures.corpus_dir() / "tags.jsonl")
    ctx.inlink_source = FixtureInlinkSource(fixtures.corpus_dir() / "inlinks.jsonl")
    return ctx
