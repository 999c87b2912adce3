"""Synthetic users with planted homes, workplaces and sensitive visits.

Each user is simulated day by day in local time.  Home posts fall at any
hour the user is not at work, work posts stay inside the shift, and every
post is displaced by isotropic Gaussian GPS noise.  The generator also
writes matching geocode, venue and timezone tables so the whole audit runs
offline.

Randomness comes from numpy's PCG64 generator; per-user seeds are derived
with ``SeedSequence.spawn`` so users are independent of generation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from geoleak.core import GeoleakError, GeoPoint, GeotagKind, PostRecord, SourceApp, offset_point
from geoleak.ingest import UserTimeline, write_dataset
from geoleak.policy import DEFAULT_CUTOFFS
from geoleak.scoring import GroundTruth, write_ground_truth
from geoleak.sensitive import Venue, write_venues

CITY_CENTER = GeoPoint(41.8781, -87.6298)
CITY_OFFSET_MIN = -360
LOT_SPACING_M = 600.0
# house-number neighbours along the street and across it, in meters (north, east)
NEIGHBOUR_OFFSETS = [(0, 25), (0, -25), (0, 50), (0, -50), (0, 75), (0, -75), (35, 0), (35, 25), (35, -25)]

FILLER = ("coffee morning tired game movie dinner lunch weekend music friend traffic rain sun pizza happy "
          "love day night book tv kid dog walk taco burger song show email deadline shift meeting cook "
          "sleep weather news team score lol omg finally monday friday tonight").split()

SENSITIVE_KINDS = {
    "health": (("Professional & Other Places", "Medical Center", "Doctor's Office"),
               ["waiting to see the doctor", "at the clinic again", "checkup with my doctor",
                "picking up a prescription", "clinic waiting room forever"]),
    "religion": (("Professional & Other Places", "Spiritual Center", "Church"),
                 ["sunday mass at church", "great sermon today", "church choir practice",
                  "praying for my family at church", "bible study"]),
    "sex_nightlife": (("Nightlife Spot", "Bar"),
                      ["drinks at the bar", "bar night with the crew", "cocktail hour at the bar",
                       "dj is on fire at this bar", "tequila at the bar"]),
}
STREETS = ("Oak Maple Pine Cedar Elm Birch Walnut Chestnut Willow Spruce Aspen Laurel Hickory Poplar "
           "Magnolia Sycamore Juniper Cypress Alder Hazel").split()
SUFFIXES = ("St", "Ave", "Rd", "Blvd", "Ln", "Dr", "Way", "Ct")


class InvalidProfile(GeoleakError, ValueError):
    pass


@dataclass
class Place:
    lat: float
    lon: float
    address: str | None  # None: no postal address (campus, park)

    @property
    def point(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)


@dataclass
class WorkSpec:
    place: Place
    start_hour: float
    length_h: float = 8.0
    workdays: tuple[int, ...] = (0, 1, 2, 3, 4)  # weekday the shift starts on, 0 = Monday
    attend_posting: float = 0.75  # chance a shift produces any posts

    @property
    def night(self) -> bool:
        return self.start_hour + self.length_h > 24


@dataclass
class OtherPlace:
    place: Place
    visits_per_week: float


@dataclass
class SensitiveVisit:
    venue_id: str
    kind: str
    place: Place
    dates: list[str]
    texts: list[str]


@dataclass
class UserProfile:
    user_id: str
    seed: int
    home: Place
    work: WorkSpec | None = None
    other_places: list[OtherPlace] = field(default_factory=list)
    sensitive_visits: list[SensitiveVisit] = field(default_factory=list)
    gps_noise_sigma: float = 10.0
    weeks: int = 26
    posts_per_day: float = 2.5
    start: str = "2014-11-03"
    platform: str = "ios"
    coarse_fraction: float = 0.1
    untagged_fraction: float = 0.15
    tz_offset_min: int = CITY_OFFSET_MIN

    def validate(self) -> None:
        if self.weeks < 1 or self.posts_per_day <= 0:
            raise InvalidProfile(f"{self.user_id}: need weeks >= 1 and a positive post rate")
        if self.gps_noise_sigma < 0:
            raise InvalidProfile(f"{self.user_id}: negative GPS noise")
        if self.work is not None and not 0 < self.work.length_h <= 8:
            raise InvalidProfile(f"{self.user_id}: shift length must be within (0, 8] hours")
        if self.home.address is None:
            raise InvalidProfile(f"{self.user_id}: home needs an address")
        if self.platform not in ("ios", "android"):
            raise InvalidProfile(f"{self.user_id}: platform must be ios or android")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "UserProfile":
        d = dict(d)
        d["home"] = Place(**d["home"])
        if d.get("work"):
            w = dict(d["work"])
            w["place"] = Place(**w["place"])
            w["workdays"] = tuple(w.get("workdays", (0, 1, 2, 3, 4)))
            d["work"] = WorkSpec(**w)
        d["other_places"] = [OtherPlace(Place(**o["place"]), o["visits_per_week"]) for o in d.get("other_places", [])]
        d["sensitive_visits"] = [SensitiveVisit(**{**s, "place": Place(**s["place"])})
                                 for s in d.get("sensitive_visits", [])]
        return cls(**d)


# --- simulation ---------------------------------------------------------------

@dataclass
class _Event:
    local: datetime
    place: Place | None
    text: str


def _busy(intervals: Sequence[tuple[datetime, datetime]], t: datetime) -> bool:
    return any(a <= t <= b for a, b in intervals)


def _filler(rng: np.random.Generator) -> str:
    return " ".join(rng.choice(FILLER, size=int(rng.integers(3, 7))))


def _noisy(rng: np.random.Generator, place: Place, sigma: float) -> GeoPoint:
    if sigma == 0:
        return place.point
    dn, de = rng.normal(0.0, sigma, size=2)
    return offset_point(place.point, float(dn), float(de))


def _shift_interval(work: WorkSpec, day: date) -> tuple[datetime, datetime]:
    start = datetime.combine(day, datetime.min.time()) + timedelta(hours=work.start_hour)
    return start, start + timedelta(hours=work.length_h)


def _simulate(profile: UserProfile, rng: np.random.Generator) -> list[_Event]:
    start = date.fromisoformat(profile.start)
    days = [start + timedelta(days=i) for i in range(profile.weeks * 7)]
    work = profile.work
    shifts = []
    if work is not None:
        shifts = [_shift_interval(work, d) for d in [start - timedelta(days=1), *days] if d.weekday() in work.workdays]
    sensitive_by_date: dict[date, list[SensitiveVisit]] = {}
    for sv in profile.sensitive_visits:
        for d in sv.dates:
            sensitive_by_date.setdefault(date.fromisoformat(d), []).append(sv)

    events: list[_Event] = []
    for day in days:
        midnight = datetime.combine(day, datetime.min.time())
        busy = [s for s in shifts if s[1] >= midnight and s[0] <= midnight + timedelta(days=1)]
        today_shift = next((s for s in shifts if s[0].date() == day), None)

        if today_shift is not None and rng.random() < work.attend_posting:
            a, b = today_shift
            k = int(min(5, 2 + rng.poisson(1.0)))
            edge = timedelta(hours=min(2.0, work.length_h / 4))
            times = [a + edge * rng.random(), b - edge * rng.random()]
            times += [a + (b - a) * rng.random() for _ in range(k - 2)]
            events += [_Event(t, work.place, _filler(rng)) for t in times]

        for sv in sensitive_by_date.get(day, ()):
            # 2-3 posts spanning 35-120 minutes, outside any shift
            for _ in range(20):
                t0 = midnight + timedelta(hours=float(rng.uniform(9, 19)))
                span = timedelta(minutes=float(rng.uniform(35, 120)))
                if not _busy(busy, t0) and not _busy(busy, t0 + span):
                    break
            times = [t0, t0 + span] + ([t0 + span * rng.random()] if rng.random() < 0.5 else [])
            for t in times:
                text = sv.texts[int(rng.integers(len(sv.texts)))] if rng.random() < 0.8 else _filler(rng)
                events.append(_Event(t, sv.place, text))
            busy.append((t0 - timedelta(minutes=30), t0 + span + timedelta(minutes=30)))

        for op in profile.other_places:
            if rng.random() < op.visits_per_week / 7.0:
                for _ in range(20):
                    t0 = midnight + timedelta(hours=float(rng.uniform(9, 20)))
                    if not _busy(busy, t0) and not _busy(busy, t0 + timedelta(minutes=90)):
                        break
                else:
                    continue
                n = 1 + int(rng.random() < 0.4)
                for _ in range(n):
                    events.append(_Event(t0 + timedelta(minutes=float(rng.uniform(0, 90))), op.place, _filler(rng)))
                busy.append((t0 - timedelta(minutes=20), t0 + timedelta(minutes=110)))

        n_home = int(rng.poisson(profile.posts_per_day))
        if day.weekday() >= 5:
            n_home = max(n_home, 1)
        for _ in range(n_home):
            for _ in range(50):
                t = midnight + timedelta(seconds=float(rng.uniform(0, 86400)))
                if not _busy(busy, t):
                    events.append(_Event(t, profile.home, _filler(rng)))
                    break
    events.sort(key=lambda e: e.local)
    return events


def generate(profile: UserProfile) -> tuple[UserTimeline, GroundTruth]:
    """Simulate one user; identical profiles give identical output."""
    profile.validate()
    rng = np.random.default_rng(profile.seed)
    events = _simulate(profile, rng)
    source = SourceApp(profile.platform)
    cutoff = DEFAULT_CUTOFFS[source]
    offset = timedelta(minutes=profile.tz_offset_min)
    epoch = datetime(1970, 1, 1)
    posts = []
    for i, ev in enumerate(events):
        ts = int((ev.local - offset - epoch).total_seconds())
        pid = f"{profile.user_id}-{i:05d}"
        roll = rng.random()
        coords = _noisy(rng, ev.place, profile.gps_noise_sigma)
        if roll < profile.untagged_fraction:
            kind, coords, place_name = GeotagKind.NONE, None, None
        elif roll < profile.untagged_fraction + profile.coarse_fraction:
            kind, place_name = GeotagKind.COARSE, "Synthville, IL"
            if ts >= cutoff:
                coords = None
        else:
            kind, place_name = GeotagKind.GPS, None
        posts.append(PostRecord(pid, profile.user_id, ts, coords, ev.text, source, kind, place_name))
    truth = GroundTruth(
        profile.user_id,
        profile.home.address,
        profile.work.place.address if profile.work else None,
        frozenset(sv.venue_id for sv in profile.sensitive_visits),
    )
    return UserTimeline(profile.user_id, tuple(posts)), truth


# --- corpus layout ------------------------------------------------------------

@dataclass
class Corpus:
    profiles: list[UserProfile]
    geocode_records: list[dict]
    venues: list[Venue]


def _lot_point(i: int, j: int, rng: np.random.Generator) -> GeoPoint:
    jitter = rng.uniform(-100, 100, size=2)
    return offset_point(CITY_CENTER, float(i * LOT_SPACING_M + jitter[0]), float(j * LOT_SPACING_M + jitter[1]))


def _address_block(place_pt: GeoPoint, street: str, number: int) -> list[dict]:
    recs = [{"address": f"{number} {street}", "lat": place_pt.lat, "lon": place_pt.lon}]
    for k, (dn, de) in enumerate(NEIGHBOUR_OFFSETS):
        p = offset_point(place_pt, dn, de)
        across = dn != 0
        num = number + (1 if across else 0) + 2 * round(de / 25)
        recs.append({"address": f"{num} {street}", "lat": p.lat, "lon": p.lon})
    return recs


def make_corpus(n_users: int, seed: int = 0, night_fraction: float = 0.15, no_work_fraction: float = 0.1,
                weeks: int = 26, sigma: float = 10.0, posts_per_day: float = 2.5) -> Corpus:
    """Lay out ``n_users`` users on a shared city grid with their geocode and venue tables."""
    root = np.random.SeedSequence(seed)
    layout_rng = np.random.default_rng(root.spawn(1)[0])
    user_seeds = root.spawn(n_users + 1)[1:]

    side = math.ceil(math.sqrt(n_users * 8)) + 1
    lots = [(i - side // 2, j - side // 2) for i in range(side) for j in range(side)]
    order = layout_rng.permutation(len(lots))
    lot_iter = iter(order)

    n_night = int(round(n_users * night_fraction))
    n_nowork = int(round(n_users * no_work_fraction))
    roles = ["night"] * n_night + ["none"] * n_nowork + ["day"] * (n_users - n_night - n_nowork)
    roles = [roles[i] for i in layout_rng.permutation(n_users)]

    profiles, geocode, venues = [], [], []
    street_no = 0

    def new_place(rng, addressed=True) -> Place:
        nonlocal street_no
        pt = _lot_point(*lots[next(lot_iter)], layout_rng)
        if not addressed:
            return Place(pt.lat, pt.lon, None)
        street = f"{STREETS[street_no % len(STREETS)]} {SUFFIXES[(street_no // len(STREETS)) % len(SUFFIXES)]}"
        street = f"{street} {street_no // (len(STREETS) * len(SUFFIXES)) + 1}"
        street_no += 1
        number = 2 * int(rng.integers(10, 900))
        geocode.extend(_address_block(pt, street, number))
        return Place(pt.lat, pt.lon, geocode[-len(NEIGHBOUR_OFFSETS) - 1]["address"])

    start = date(2014, 11, 3)
    for u, (ss, role) in enumerate(zip(user_seeds, roles)):
        rng = np.random.default_rng(ss)
        uid = f"u{u:04d}"
        home = new_place(rng)
        work = None
        if role == "day":
            work = WorkSpec(new_place(rng), start_hour=float(rng.choice([7, 8, 8.5, 9, 10])),
                            length_h=float(rng.choice([7.5, 8.0])))
        elif role == "night":
            work = WorkSpec(new_place(rng), start_hour=23.0, length_h=7.5, workdays=(6, 0, 1, 2, 3))
        others = [OtherPlace(new_place(rng, addressed=bool(rng.random() < 0.8)), float(rng.uniform(0.3, 1.5)))
                  for _ in range(int(rng.integers(1, 4)))]
        visits = []
        for v in range(int(rng.integers(0, 3))):
            kind = str(rng.choice(list(SENSITIVE_KINDS)))
            path, texts = SENSITIVE_KINDS[kind]
            place = new_place(rng)
            vid = f"v{uid}-{v}"
            venues.append(Venue(vid, f"{path[-1]} on {place.address}", path, place.point))
            n_dates = int(rng.integers(1, 4))
            offsets = sorted(rng.choice(weeks * 7, size=n_dates, replace=False))
            dates = [(start + timedelta(days=int(o))).isoformat() for o in offsets]
            visits.append(SensitiveVisit(vid, kind, place, dates, list(texts)))
        # an unvisited coffee shop and, sometimes, an unvisited bar next to a regular spot
        if others:
            spot = others[0].place.point
            venues.append(Venue(f"c{uid}", "Corner Coffee", ("Food", "Coffee Shop"), offset_point(spot, 8, 5)))
            if rng.random() < 0.3:
                venues.append(Venue(f"b{uid}", "Corner Bar", ("Nightlife Spot", "Bar"), offset_point(spot, -12, 6)))
        profiles.append(UserProfile(
            user_id=uid, seed=int(ss.generate_state(1)[0]), home=home, work=work, other_places=others,
            sensitive_visits=visits, gps_noise_sigma=sigma, weeks=weeks, posts_per_day=posts_per_day,
            start=start.isoformat(), platform="ios" if rng.random() < 0.5 else "android",
        ))
    return Corpus(profiles, geocode, venues)


def timezone_table() -> list[dict]:
    return [{"min_lon": -88.5, "max_lon": -86.5, "min_lat": 41.0, "max_lat": 43.0,
             "offset_minutes": CITY_OFFSET_MIN}]


def write_corpus(out_dir: str | Path, corpus: Corpus) -> dict[str, Path]:
    """Write dataset, ground truth, profiles and the lookup tables; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / fname for name, fname in [
        ("dataset", "dataset.jsonl"), ("ground_truth", "ground_truth.csv"), ("profiles", "profiles.json"),
        ("geocode_db", "geocode.jsonl"), ("venue_db", "venues.csv"), ("tz_db", "timezones.csv")]}
    posts, truths = [], []
    for prof in corpus.profiles:
        tl, gt = generate(prof)
        posts.extend(tl.posts)
        truths.append(gt)
        # a few web posts, which the default source filter drops
        posts.append(PostRecord(f"{prof.user_id}-web", prof.user_id, tl.posts[0].timestamp_utc + 1,
                                None, "posted from the web", SourceApp.WEB, GeotagKind.NONE))
    write_dataset(paths["dataset"], posts)
    write_ground_truth(paths["ground_truth"], truths)
    paths["profiles"].write_text(json.dumps([p.to_dict() for p in corpus.profiles], indent=1), encoding="utf-8")
    with open(paths["geocode_db"], "w", encoding="utf-8") as fh:
        for rec in corpus.geocode_records:
            fh.write(json.dumps(rec) + "\n")
    write_venues(paths["venue_db"], corpus.venues)
    with open(paths["tz_db"], "w", encoding="utf-8") as fh:
        fh.write("min_lon,max_lon,min_lat,max_lat,offset_minutes\n")
        for b in timezone_table():
            fh.write(f"{b['min_lon']},{b['max_lon']},{b['min_lat']},{b['max_lat']},{b['offset_minutes']}\n")
    return paths


def load_profiles(path: str | Path) -> list[UserProfile]:
    return [UserProfile.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def epoch_of(local: datetime, offset_min: int) -> int:
    return int((local - timedelta(minutes=offset_min)).replace(tzinfo=timezone.utc).timestamp())
