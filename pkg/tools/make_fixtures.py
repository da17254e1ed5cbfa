"""Regenerate the bundled fixture data under src/relict/data/.

    python tools/make_fixtures.py            # rewrite fixtures
    python tools/make_fixtures.py --check    # exit 1 if files would change

Worked-example fixtures: hit counts are chosen so that the page and neighborhood
signatures come out in the documented order.  Each chosen term gets the
hit count that gives it a fixed raw tf*idf; every other term gets a
common-word default.  The result is verified with a direct recount before
anything is written.

Synthetic corpus: see build_corpus().
"""

from __future__ import annotations

import argparse
import json
import math
import random
import re
import sys
from collections import Counter
from html import escape
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "relict" / "data"
sys.path.insert(0, str(ROOT / "src"))

from relict.content import RawPage, default_stopwords, extract_text  # noqa: E402

WEB_N = 25_000_000_000
COMMON_DF = 1_000_000_000

PAGE_LS7 = "nicnichols nichols nic stuff shoot command penitentiary".split()
PAGE_RAW = [94.0, 55.0, 40.0, 20.0, 19.0, 17.0, 16.0]
HOOD_LS7 = "nicnichols photo spacer view phirebrush submission boonika".split()
HOOD_RAW = [None, 52.0, 47.0, 27.0, 24.0, 21.0, 18.0]  # nicnichols fixed by the page


def _tf(path: Path) -> Counter:
    return Counter(extract_text(RawPage("http://fixture.invalid/", path.read_bytes())).term_freqs)


def _df_for(raw: float, tf: int) -> int:
    return max(1, round(WEB_N / math.exp(raw / tf)))


def _top(tf: Counter, df: dict, n: int) -> list[str]:
    total = sum(tf.values())
    scored = [(t, c / total * math.log(WEB_N / min(max(df.get(t, 0), 1), WEB_N))) for t, c in tf.items()]
    scored.sort(key=lambda x: (-x[1], x[0]))
    return [t for t, _ in scored[:n]]


def worked_df() -> dict[str, int]:
    base = DATA / "worked"
    page = _tf(base / "nicnichols.html")
    hood = Counter()
    for p in sorted((base / "neighborhood").glob("*.html")):
        hood.update(_tf(p))
    df = {t: COMMON_DF for t in set(page) | set(hood)}
    for term, raw in zip(PAGE_LS7, PAGE_RAW):
        df[term] = _df_for(raw, page[term])
    for term, raw in zip(HOOD_LS7, HOOD_RAW):
        if raw is not None:
            df[term] = _df_for(raw, hood[term])
    assert _top(page, df, 7) == PAGE_LS7, _top(page, df, 7)
    assert _top(hood, df, 7) == HOOD_LS7, _top(hood, df, 7)
    return df


def worked_files() -> dict[Path, str]:
    df = worked_df()
    lines = [f"# term\thit count (web-scale fixture, N = {WEB_N})"]
    lines += [f"{t}\t{df[t]}" for t in sorted(df)]
    return {DATA / "worked" / "hits.tsv": "\n".join(lines) + "\n"}


# -- synthetic corpus -----------------------------------------------------------------

TOPICS = {
    "Garden": "garden plants seeds soil compost flowers roses shrubs lawn mulch pruning greenhouse tomatoes herbs watering",
    "Bicycle": "bicycle bikes cycling wheels frames tires saddle gears brakes helmets trails riders chain pedals touring",
    "Bakery": "bakery bread pastries croissants flour ovens cakes cookies sourdough baking dough muffins bagels rye icing",
    "Dental": "dental teeth dentist smile whitening implants crowns braces hygiene orthodontics fillings gums cavities floss enamel",
    "Jazz": "jazz saxophone trumpet quartet improvisation swing bebop piano bass drummer club concerts standards blues records",
    "Sailing": "sailing boats yacht harbor sails regatta crew marina keel anchor mast voyage wind charts coastal",
    "Chess": "chess openings gambit endgame grandmaster tournament rating pawns knights bishops rooks tactics puzzles clock variants",
    "Pottery": "pottery clay kiln glaze ceramics wheel stoneware porcelain throwing bowls mugs studio firing vases slip",
    "Astronomy": "astronomy telescope stars planets galaxies observatory nebula eclipse orbit comets meteors lens moon sky constellations",
    "Beekeeping": "beekeeping bees hives honey queen colony apiary pollen wax swarm nectar frames smoker beekeepers drones",
    "Hiking": "hiking trails mountains backpacking summit boots campsite wilderness maps ridge trailhead hikers canyon rivers gear",
    "Genealogy": "genealogy ancestors family records census archives surnames lineage heritage descendants marriage parish birth tree cemetery",
}
COMMON = ("online services contact information news products company free quality local "
          "support shop prices events gallery members resources directory community").split()
TEMPLATES = [
    "the {0} and the {1} are {2} for all of our {3}",
    "we have {0} {1} with {2} and {3} in the {4}",
    "our {0} is one of the most {1} {2} you will find",
    "there are {0} and {1} which can be {2} by {3}",
    "if you need {0} or {1}, please see the {2} and {3}",
    "this {0} has {1} {2} from {3} to {4}",
    "you can find {0} here, and {1} {2} are also {3}",
]
SYLLABLES = ("ka ro vi ne zu mo ta li qu ex pa do fi gor lan ver zin tol bar kus "
             "mel dra vok sen tu ri xa hal").split()
DOMAINS = ("com", "com", "com", "org", "net", "com", "edu", "com")
TITLE_SLOTS = 10


def _pseudo_word(rng, used, stopwords) -> str:
    while True:
        w = "".join(rng.choice(SYLLABLES) for _ in range(3))
        if len(w) >= 6 and w not in used and w not in stopwords:
            used.add(w)
            return w


def _sentences(rng, vocab, n):
    out = []
    for _ in range(n):
        tpl = rng.choice(TEMPLATES)
        k = tpl.count("{")
        words = [rng.choice(vocab) if rng.random() < 0.7 else rng.choice(COMMON) for _ in range(k)]
        out.append(tpl.format(*words).capitalize() + ".")
    return out


def _page(title, paragraphs) -> str:
    head = f"<title>{escape(title)}</title>" if title is not None else '<meta name="generator" content="fixture">'
    body = "\n".join(f"<p>{escape(p)}</p>" for p in paragraphs)
    return f"<html><head>{head}</head><body>\n{body}\n</body></html>"


def build_corpus(seed: int = 2010):
    rng = random.Random(seed)
    stop = default_stopwords()
    used = set(w for v in TOPICS.values() for w in v.split()) | set(COMMON)
    manifest, tags, inlinks = [], [], []
    slot_titles = []
    for t_idx, (topic, words) in enumerate(TOPICS.items()):
        vocab = words.split()
        for slot in range(TITLE_SLOTS):
            core = _pseudo_word(rng, used, stop)
            brand = _pseudo_word(rng, used, stop)
            host = f"{brand}-{topic.lower()}.{DOMAINS[(t_idx + slot) % len(DOMAINS)]}"
            uri = f"http://www.{host}/" if slot % 3 else f"http://{host}/index.html"
            w = rng.sample(vocab, 6)
            title = {
                0: f"{core.title()} {topic}",
                1: f"{topic} {vocab[1].title()} and {vocab[2].title()}",
                2: "Home",
                3: None,
                4: "About Us",
                5: "Welcome to our Home Page",
                6: " ".join([topic] + rng.sample(vocab, 9) + [brand.title(), "Online"]),
                7: "Online",
                8: f"{w[0].title()} {w[1].title()} {w[2].title()} | {rng.choice(COMMON).title()}",
                9: f"The {brand.title()} {w[3].title()} Site",
            }[slot]
            paras = []
            for _ in range(3):
                sents = _sentences(rng, vocab, rng.randint(3, 5))
                paras.append(" ".join(sents))
            paras.append(f"{core} {core} and {core}: the {core} is what {brand} makes. "
                         f"Ask {brand} about {core} {core} or the {core} {vocab[0]}.")
            if slot in (2, 5):
                paras.append("Welcome home. This is our home page, visit our home page for home news.")
            if slot == 6:
                paras.append("Find us online.")
            manifest.append({"uri": uri, "html": _page(title, paras)})
            slot_titles.append(title)
            if slot in (0, 1, 6, 8) or (slot == 9 and t_idx % 2):
                n_tags = (10, 4, 14, 7, 2)[(t_idx + slot) % 5]
                pool = [topic.lower()] + vocab + COMMON
                tag_list = rng.sample(pool, min(n_tags, len(pool)))
                if slot == 0:
                    tag_list[0] = core
                tags.append({"uri": uri, "tags": tag_list})
            if slot in (0, 2, 5, 9):
                links = []
                for k in range(rng.randint(2, 4)):
                    s_uri = f"http://links.{topic.lower()}-{k}.example.net/{brand}.html"
                    s_text = [" ".join(_sentences(rng, vocab, 2)),
                              f"Visit {brand} online for {vocab[rng.randrange(len(vocab))]}. "
                              f"{brand} {brand} online online links."]
                    manifest.append({"uri": s_uri, "role": "support",
                                     "html": _page(f"{topic} links", s_text)})
                    links.append(s_uri)
                links.append(uri)  # a self-link the inlink client must drop
                inlinks.append({"uri": uri, "inlinks": links})
    # entries the ingest filters must reject
    for i in range(6):
        short = " ".join(_sentences(rng, COMMON, 2))
        manifest.append({"uri": f"http://short{i}.example.com/", "html": _page("Short page", [short])})
    for i in range(4):
        gib = " ".join("".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(rng.randint(5, 10)))
                       for _ in range(120))
        manifest.append({"uri": f"http://foreign{i}.example.com/", "html": _page("Zzq", [gib])})
    return manifest, tags, inlinks


def corpus_files() -> dict[Path, str]:
    manifest, tags, inlinks = build_corpus()
    dump = lambda rows: "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows)
    base = DATA / "corpus"
    return {
        base / "manifest.jsonl": json.dumps({"manifest_version": "1"}) + "\n" + dump(manifest),
        base / "tags.jsonl": dump(tags),
        base / "inlinks.jsonl": dump(inlinks),
    }


def worked_manifest() -> dict[Path, str]:
    base = DATA / "worked"
    rows = [
        {"uri": "http://www.nicnichols.com/", "html_path": "nicnichols.html",
         "inlink_paths": [f"neighborhood/{p.name}" for p in sorted((base / "neighborhood").glob("*.html"))]},
        {"uri": "http://smiledesigners.org/", "html_path": "smiledesigners.html"},
        {"uri": "http://www.redcrossla.org/", "html_path": "redcrossla.html"},
        {"uri": "http://www.aircharter-international.com/", "html_path": "aircharter.html"},
    ]
    return {base / "manifest.jsonl": "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    files = {**worked_files(), **worked_manifest(), **corpus_files()}
    stale = [p for p, text in files.items() if not p.exists() or p.read_text(encoding="utf-8") != text]
    if args.check:
        for p in stale:
            print(f"stale: {p.relative_to(ROOT)}")
        return 1 if stale else 0
    for p, text in files.items():
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        print(f"wrote {p.relative_to(ROOT)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
