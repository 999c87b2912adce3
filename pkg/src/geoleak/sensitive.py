"""Potentially sensitive clusters and the two ways of corroborating a visit.

Content corroboration scores each cluster's text against the user's other
clusters with tf-idf and checks the top terms against category wordlists.
Duration corroboration looks for repeat visits or a stay of some length.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from geoleak.core import GeoPoint, GridIndex
from geoleak.temporal import LocalizedPost

log = logging.getLogger(__name__)

VENUE_RADIUS_M = 25.0
TOP_TERMS = 3
VISIT_MAX_GAP = timedelta(hours=3)
VISIT_MIN_SPAN = timedelta(minutes=30)
PASSBY_MAX = timedelta(minutes=5)
TFIDF_VARIANT = "raw-tf * (ln((1+N)/(1+df)) + 1)"


class SensitiveCategory(enum.Enum):
    HEALTH = "health"
    RELIGION = "religion"
    SEX_NIGHTLIFE = "sex_nightlife"


@dataclass(frozen=True)
class Venue:
    venue_id: str
    name: str
    category_path: tuple[str, ...]
    coords: GeoPoint

    def __post_init__(self):
        if not self.category_path:
            raise ValueError(f"venue {self.venue_id} has no category")


@dataclass(frozen=True)
class NearbyVenue:
    venue: Venue
    distance: float
    category: SensitiveCategory


@dataclass(frozen=True)
class PSC:
    cluster_id: str
    nearby: tuple[NearbyVenue, ...]

    @property
    def primary_category(self) -> SensitiveCategory:
        return self.nearby[0].category

    @property
    def multiple_attribution(self) -> frozenset[SensitiveCategory]:
        return frozenset(n.category for n in self.nearby)


def _data_path(name: str):
    return resources.files("geoleak") / "data" / name


def _read_lines(path) -> list[str]:
    if isinstance(path, str):
        path = Path(path)
    text = path.read_text(encoding="utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def load_category_map(path=None) -> dict[str, SensitiveCategory]:
    path = path or _data_path("categories.tsv")
    out = {}
    for line in _read_lines(path):
        venue_cat, sens = line.split("\t")
        out[venue_cat.strip().casefold()] = SensitiveCategory(sens.strip())
    return out


def venue_category(venue: Venue, category_map: Mapping[str, SensitiveCategory]) -> SensitiveCategory | None:
    """Sensitive category of the most specific mapped entry in the venue's path."""
    for cat in reversed(venue.category_path):
        hit = category_map.get(cat.casefold())
        if hit is not None:
            return hit
    return None


class VenueIndex:
    def __init__(self, venues: Iterable[Venue] = (), cell_m: float = VENUE_RADIUS_M):
        self._grid = GridIndex(cell_m)
        self.venues: dict[str, Venue] = {}
        for v in venues:
            self.add(v)

    def add(self, v: Venue) -> None:
        self.venues[v.venue_id] = v
        self._grid.insert(v.coords, v)

    def within(self, p: GeoPoint, radius_m: float) -> list[tuple[float, Venue]]:
        return [(d, v) for d, _, v in self._grid.within(p, radius_m)]

    @classmethod
    def from_file(cls, path: str | Path) -> "VenueIndex":
        venues = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                venues.append(Venue(row["venue_id"], row["name"],
                                    tuple(c for c in row["category_path"].split("|") if c),
                                    GeoPoint(float(row["lat"]), float(row["lon"]))))
        return cls(venues)


def write_venues(path: str | Path, venues: Iterable[Venue]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["venue_id", "name", "category_path", "lat", "lon"])
        for v in venues:
            w.writerow([v.venue_id, v.name, "|".join(v.category_path), repr(float(v.coords.lat)), repr(float(v.coords.lon))])


def find_pscs(clusters: Sequence, venues: VenueIndex, category_map: Mapping[str, SensitiveCategory] | None = None,
              radius: float = VENUE_RADIUS_M) -> list:
    category_map = load_category_map() if category_map is None else category_map
    out = []
    for c in clusters:
        near = []
        for d, v in venues.within(c.midpoint, radius):
            cat = venue_category(v, category_map)
            if cat is not None:
                near.append(NearbyVenue(v, d, cat))
        if near:
            near.sort(key=lambda n: (n.distance, n.venue.venue_id))
            out.append(PSC(c.id, tuple(near)))
    return out


# --- text preprocessing -------------------------------------------------------

_URL = re.compile(r"^(?:[a-z][a-z0-9+.\-]*://|www\.)", re.IGNORECASE)
_WORD = re.compile(r"[^\W_]+")
_APOSTROPHES = re.compile(r"['’‘]")


class Preprocessor:
    """Tokenizer + stop-word filter + dictionary lemmatizer."""

    def __init__(self, stopwords: Iterable[str], lemmas: Mapping[str, str]):
        self.stopwords = frozenset(w.casefold() for w in stopwords)
        self.lemmas = dict(lemmas)

    @classmethod
    def from_files(cls, stopwords_path=None, lemmas_path=None) -> "Preprocessor":
        stop = _read_lines(stopwords_path or _data_path("stopwords.txt"))
        lemmas = {}
        for line in _read_lines(lemmas_path or _data_path("lemmas.tsv")):
            form, lemma = line.split("\t")
            lemmas[form.strip().casefold()] = lemma.strip().casefold()
        return cls(stop, lemmas)

    def __call__(self, text: str) -> list[str]:
        out = []
        for raw in text.casefold().split():
            if _URL.match(raw) or raw.startswith("@"):
                continue
            for tok in _WORD.findall(_APOSTROPHES.sub("", raw)):
                if tok in self.stopwords:
                    continue
                lemma = self.lemmas.get(tok, tok)
                if lemma not in self.stopwords:
                    out.append(lemma)
        return out


@lru_cache(maxsize=1)
def default_preprocessor() -> Preprocessor:
    return Preprocessor.from_files()


def preprocess(text: str) -> list[str]:
    return default_preprocessor()(text)


# --- tf-idf -------------------------------------------------------------------

def tfidf_scores(target: Sequence[str], documents: Iterable[Sequence[str]]) -> dict[str, float]:
    docs = [set(d) for d in documents if d]
    n = len(docs)
    df = Counter(t for d in docs for t in d)
    tf = Counter(target)
    return {t: c * (math.log((1 + n) / (1 + df[t])) + 1.0) for t, c in tf.items()}


def tfidf_top_terms(target: Sequence[str], documents: Iterable[Sequence[str]],
                    k: int = TOP_TERMS) -> list[tuple[str, float]]:
    """Top ``k`` terms of ``target`` scored against the per-cluster documents.

    ``documents`` should include ``target`` itself; empty documents are not
    counted in the collection size.  Ties go to the lexicographically
    smaller term.
    """
    if not target:
        return []
    scores = tfidf_scores(target, documents)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


# --- corroboration ------------------------------------------------------------

def load_wordlists(directory=None) -> dict[SensitiveCategory, frozenset[str]]:
    """One file per category (``<category>.txt``, one term per line).

    Terms listed under more than one category are dropped as ambiguous.
    """
    base = Path(directory) if directory is not None else _data_path("wordlists")
    lists = {}
    for cat in SensitiveCategory:
        f = base / f"{cat.value}.txt"
        if f.is_file():
            lists[cat] = {t.casefold() for t in _read_lines(f)}
    seen = Counter(t for terms in lists.values() for t in terms)
    dup = {t for t, c in seen.items() if c > 1}
    if dup:
        log.warning("dropping %d term(s) listed in several categories: %s", len(dup), sorted(dup)[:10])
    return {cat: frozenset(terms - dup) for cat, terms in lists.items()}


@dataclass(frozen=True)
class ContentEvidence:
    category: SensitiveCategory
    terms: tuple[str, ...]


def content_corroborate(psc: PSC, top_terms: Sequence, wordlists: Mapping[SensitiveCategory, Iterable[str]]
                        ) -> ContentEvidence | None:
    terms = [t[0] if isinstance(t, tuple) else t for t in top_terms]
    matches = {}
    for cat in psc.multiple_attribution:
        hit = tuple(t for t in terms if t in frozenset(wordlists.get(cat, ())))
        if hit:
            matches[cat] = hit
    if not matches:
        return None
    if psc.primary_category in matches:
        cat = psc.primary_category
    else:
        cat = next(n.category for n in psc.nearby if n.category in matches)
    return ContentEvidence(cat, matches[cat])


@dataclass(frozen=True)
class DurationEvidence:
    dates: tuple[date, ...]
    visit: tuple[datetime, datetime] | None

    @property
    def repeated(self) -> bool:
        return len(self.dates) >= 2


def visits(posts: Sequence[LocalizedPost], max_gap: timedelta = VISIT_MAX_GAP) -> list[tuple[datetime, datetime]]:
    """Maximal runs of posts whose consecutive gaps are at most ``max_gap``."""
    times = sorted(p.local for p in posts)
    if not times:
        return []
    runs = []
    start = prev = times[0]
    for t in times[1:]:
        if t - prev > max_gap:
            runs.append((start, prev))
            start = t
        prev = t
    runs.append((start, prev))
    return runs


def duration_corroborate(posts: Sequence[LocalizedPost], max_gap: timedelta = VISIT_MAX_GAP,
                         min_span: timedelta = VISIT_MIN_SPAN,
                         passby: timedelta = PASSBY_MAX) -> DurationEvidence | None:
    """Evidence of a real visit: posts on several days, or one stay of some length."""
    if len(posts) < 2:
        return None
    dates = tuple(sorted({p.local_date for p in posts}))
    long_visits = [(a, b) for a, b in visits(posts, max_gap) if b - a >= min_span and b - a > passby]
    visit = max(long_visits, key=lambda v: (v[1] - v[0], v[0]), default=None)
    if len(dates) >= 2 or visit is not None:
        return DurationEvidence(dates, visit)
    return None
