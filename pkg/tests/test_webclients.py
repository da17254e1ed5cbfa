import json
import time

import pytest

from relict.dfsource import RateLimiter
from relict.errors import FixtureMiss, RelictError, TransientError
from relict.searchsim import ResultPage, SearchQuery, build_index, search
from relict.content import ExtractedDoc
from relict.webclients import (
    ConnectionGuard,
    CountingTransport,
    DictSource,
    EngineBinding,
    FixtureInlinkSource,
    FixtureTagSource,
    LocalSimEngine,
    ReplayEngine,
    RemoteEngine,
    TagSet,
    UrllibTransport,
    engine_search,
    fetch_inlinks,
    fetch_tags,
    open_engine,
    record_response,
)

NIC = "http://www.nicnichols.com/"


@pytest.fixture
def index():
    docs = [ExtractedDoc.from_tokens(f"http://d{i}.test", ["shared", f"u{i}"]) for i in range(12)]
    return build_index(docs, frozenset())


def test_binding_validation():
    with pytest.raises(ValueError):
        EngineBinding("x", "remote-generic")
    with pytest.raises(ValueError):
        EngineBinding("x", "local-sim", max_results=0)
    with pytest.raises(ValueError):
        EngineBinding("x", "carrier-pigeon")


def test_local_sim_delegates_and_truncates(index):
    q = SearchQuery(("shared",))
    full = engine_search(LocalSimEngine(EngineBinding("sim"), index), q)
    assert full.hits == search(index, q).hits
    short = open_engine(EngineBinding("sim", max_results=5), index=index).search(q)
    assert short.hits == full.hits[:5]


def test_replay_verbatim_and_miss(tmp_path):
    path = tmp_path / "replay.jsonl"
    q = SearchQuery(("red", "cross"), quoted=True)
    page = ResultPage((("http://redcrossla.org", 0.9), ("http://b.test", 0.1)), "yahoo")
    record_response(path, "yahoo", q, page)
    record_response(path, "google", q, ResultPage((("http://c.test", 1.0),), "google"))
    engine = open_engine(EngineBinding("yahoo", "fixture-replay"), replay_path=path)
    assert engine.search(q) == page
    assert engine.search(q) == page
    with pytest.raises(FixtureMiss) as err:
        engine.search(SearchQuery(("red", "cross")))
    assert "red cross" in str(err.value)
    line = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert line == {"engine_id": "yahoo", "terms": ["red", "cross"], "quoted": True,
                    "hits": [{"uri": "http://redcrossla.org", "score": 0.9}, {"uri": "http://b.test", "score": 0.1}]}


def test_replay_is_byte_stable(tmp_path):
    path = tmp_path / "r.jsonl"
    q = SearchQuery(("a1",))
    record_response(path, "e", q, ResultPage((("http://a.test", 0.5),), "e"))
    a = ReplayEngine(EngineBinding("e", "fixture-replay"), path).search(q)
    b = ReplayEngine(EngineBinding("e", "fixture-replay"), path).search(q)
    assert json.dumps(a.hits) == json.dumps(b.hits)


# -- remote adapter -----------------------------------------------------------------------

def _remote(responses, api_key="k", **kw):
    transport = CountingTransport(responses)
    binding = EngineBinding("remote", "remote-generic", "http://engine.test/search", **kw)
    return RemoteEngine(binding, transport, api_key=api_key), transport


def test_remote_wire_format():
    body = json.dumps([{"url": "http://www.a.test/"}, {"url": "http://a.test"}, {"url": "http://b.test/x"},
                       {"nope": 1}]).encode()
    key = ("http://engine.test/search", (("count", 100), ("q", '"red cross"')))
    engine, transport = _remote({key: (200, body)})
    page = engine.search(SearchQuery(("red", "cross"), quoted=True))
    assert page.uris == ["http://a.test", "http://b.test/x"]
    assert [s for _, s in page.hits] == [1.0, 0.5]
    assert transport.count == 1


@pytest.mark.parametrize("status, exc", [(503, TransientError), (429, TransientError), (403, RelictError)])
def test_remote_errors(status, exc):
    engine, _ = _remote({"http://engine.test/search": (status, b"")})
    with pytest.raises(exc):
        engine.search(SearchQuery(("x1",)))


def test_remote_bad_body():
    engine, _ = _remote({"http://engine.test/search": (200, b"<html>")})
    with pytest.raises(RelictError):
        engine.search(SearchQuery(("x1",)))


def test_remote_sends_bearer_key():
    seen = {}

    class Spy:
        def get(self, url, params=None, headers=None):
            seen.update(headers or {})
            return 200, b"[]"

    binding = EngineBinding("remote", "remote-generic", "http://engine.test/")
    RemoteEngine(binding, Spy(), api_key="secret").search(SearchQuery(("x1",)))
    assert seen == {"Authorization": "Bearer secret"}


def test_endpoint_from_environment(monkeypatch):
    monkeypatch.delenv("RELICT_ENGINE_ENDPOINT", raising=False)
    with pytest.raises(ValueError):
        EngineBinding.remote("r")
    monkeypatch.setenv("RELICT_ENGINE_ENDPOINT", "http://env.test/q")
    transport = CountingTransport({"http://env.test/q": (200, b"[]")})
    engine = open_engine(EngineBinding.remote("r"), transport=transport)
    engine.search(SearchQuery(("x1",)))
    assert transport.calls[0][0] == "http://env.test/q"


def test_guard_blocks_real_transport():
    with ConnectionGuard() as guard:
        with pytest.raises(TransientError):
            UrllibTransport(timeout=1).get("http://127.0.0.1:9/")
    assert guard.count == 1


# -- rate limiting -------------------------------------------------------------------------

class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.now += dt


def test_engine_rate_limit_simulated(index):
    clock = FakeClock()
    binding = EngineBinding("sim", rate_limit=2.0)
    engine = LocalSimEngine(binding, index, RateLimiter(2.0, clock=clock, sleep=clock.sleep))
    for i in range(10):
        engine.search(SearchQuery((f"u{i}",)))
    assert clock.now >= 4.5


def test_engine_rate_limit_wall_clock(index):
    engine = open_engine(EngineBinding("sim", rate_limit=2.0), index=index)
    start = time.monotonic()
    for i in range(10):
        engine.search(SearchQuery((f"u{i}",)))
    assert time.monotonic() - start >= 4.5


# -- tags and inlinks ----------------------------------------------------------------------

def test_worked_tags(worked_dir):
    tags = fetch_tags(NIC, FixtureTagSource(worked_dir / "tags.jsonl"))
    assert tags.tags[:3] == ("photography", "blog", "photographer")
    assert fetch_tags("http://unknown.test", FixtureTagSource(worked_dir / "tags.jsonl")) is None


def test_tag_cap_and_cleanup():
    src = DictSource({"http://a.test": [f"T{i}" for i in range(14)],
                      "http://b.test": ["Blog", "blog", " ", "Photo"]})
    assert fetch_tags("http://a.test", src).tags == tuple(f"t{i}" for i in range(10))
    assert fetch_tags("http://b.test", src).tags == ("blog", "photo")
    with pytest.raises(ValueError):
        TagSet("http://a.test", ())


def test_inlink_cap_dedupe_and_self_links():
    centroid = "http://center.test/"
    links = [f"http://in{i}.test/" for i in range(80)]
    links[1:1] = ["http://www.center.test", "http://in0.test", "not a uri ::"]
    got = fetch_inlinks(centroid, DictSource({centroid: links}))
    assert len(got.inlinks) == 50
    assert "http://center.test" not in got.inlinks
    assert len(set(got.inlinks)) == 50
    assert got.inlinks[:2] == ("http://in0.test", "http://in1.test")
    three = fetch_inlinks("http://x.test", DictSource({"http://x.test": ["http://a.test", "http://b.test",
                                                                           "http://c.test"]}))
    assert len(three.inlinks) == 3
    assert fetch_inlinks("http://none.test", DictSource({})) is None
    with pytest.raises(ValueError):
        fetch_inlinks(centroid, DictSource({}), cap=0)


def test_inlink_fixture_file(tmp_path):
    path = tmp_path / "inlinks.jsonl"
    path.write_text(json.dumps({"uri": "http://a.test", "inlinks": ["http://a.test/", "http://b.test"]}) + "\n")
    assert fetch_inlinks("http://a.test", FixtureInlinkSource(path)).inlinks == ("http://b.test",)
    path.write_text("{broken\n")
    with pytest.raises(RelictError):
        FixtureInlinkSource(path)


def test_source_failure_is_retryable():
    class Flaky:
        def lookup(self, uri):
            raise TimeoutError("slow")

    with pytest.raises(TransientError):
        fetch_tags("http://a.test", Flaky())
    with pytest.raises(TransientError):
        fetch_inlinks("http://a.test", Flaky())
