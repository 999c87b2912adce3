"""Acceptance gate: one test per headline criterion, each printing a PASS/FAIL line.

The synthetic corpus is seed-pinned: 200 users, default profiles,
sigma = 10 m, 26 weeks.
"""

import dataclasses
import time
from datetime import datetime, timedelta

import numpy as np
import pytest

from factories import at, fl_cluster, ts
from geoleak.cluster import density_cluster_unknown, second_level_merge
from geoleak.core import AddressLabel, GeotagKind, PostRecord, SourceApp, haversine_distance, normalize_address
from geoleak.geocode import ProximityCache, cached_reverse_geocode
from geoleak.ingest import UserTimeline, load_dataset
from geoleak.pipeline import AuditConfig, AuditContext, infer_timeline, run_audit, run_baselines
from geoleak.policy import leakage_stats
from geoleak.scoring import GroundTruth, read_ground_truth, score
from geoleak.sensitive import tfidf_top_terms
from geoleak.synthgen import make_corpus, write_corpus
from geoleak.temporal import DayFrame, dominant_frame, merge_night_shift
from oracles import brute_dominant_frame, brute_tfidf, union_find_partition

SEED = 20150415
N_USERS = 200


def report(log, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


# --- shared synthetic corpus ----------------------------------------------------

@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    c = make_corpus(N_USERS, seed=SEED, weeks=26, sigma=10.0)
    paths = write_corpus(tmp_path_factory.mktemp("acceptance"), c)
    return c, paths


def _config(paths, **kw):
    return AuditConfig(dataset=str(paths["dataset"]), geocode_db=str(paths["geocode_db"]),
                       tz_db=str(paths["tz_db"]), **kw)


@pytest.fixture(scope="module")
def audit(corpus, tmp_path_factory):
    _, paths = corpus
    cfg = _config(paths, stages=("keyloc",), out=str(tmp_path_factory.mktemp("report") / "report.jsonl"))
    t0 = time.perf_counter()
    meta, users = run_audit(cfg)
    elapsed = time.perf_counter() - t0
    return meta, users, elapsed, read_ground_truth(paths["ground_truth"])


@pytest.fixture(scope="module")
def inferences(corpus):
    _, paths = corpus
    ctx = AuditContext.from_config(_config(paths, stages=("keyloc",)))
    timelines = load_dataset(paths["dataset"])
    return timelines, {uid: infer_timeline(tl, ctx) for uid, tl in timelines.items()}


def test_synthetic_home_recovery(audit, acceptance_log):
    _, users, elapsed, truths = audit
    table = score(users, truths)
    rate = table.home.correct / table.home.users
    ok = len(users) == N_USERS and rate >= 0.95 and elapsed < 60
    report(acceptance_log, "synthetic home recovery",
           ok, f"{table.home.correct}/{table.home.users} = {rate:.2%} (need >= 95%), runtime {elapsed:.1f}s (< 60s)")


def test_synthetic_work_recovery(audit, corpus, inferences, acceptance_log):
    _, users, _, truths = audit
    c, _ = corpus
    table = score(users, truths)
    rate = table.work.correct / table.work.users
    night = [p for p in c.profiles if p.work is not None and p.work.night]
    _, infs = inferences
    by_user = {u["user_id"]: u for u in users}
    dropped = []
    night_correct = 0
    for prof in night:
        inf = infs[prof.user_id]
        planted = normalize_address(prof.work.place.address)
        target = next((cl for cl in inf.clusters if cl.label.address == planted), None)
        cand = None if target is None else next(
            (w for w in inf.keylocs.work_candidates if w.cluster_id == target.id), None)
        merged = target is not None and any(f.night_shift for f in inf.profiles[target.id].day_frames)
        if cand is None or cand.rejected is not None or not merged:
            dropped.append(prof.user_id)
        got = by_user[prof.user_id].get("work")
        night_correct += bool(got) and normalize_address(got["address"] or "") == planted
    ok = rate >= 0.85 and len(night) >= 20 and not dropped and night_correct / len(night) >= 0.85
    report(acceptance_log, "synthetic work recovery", ok,
           f"{table.work.correct}/{table.work.users} = {rate:.2%} (need >= 85%); night-shift users {len(night)}, "
           f"dropped by shift rules {len(dropped)}, recovered {night_correct}/{len(night)}")


def test_clustering_oracle(acceptance_log):
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(0, 201))
        extent = float(rng.uniform(30, 800))
        off = rng.uniform(0, extent, size=(n, 2))
        pts = [(f"p{i}", at(float(a), float(b))) for i, (a, b) in enumerate(off)]
        got = {frozenset(c.members) for c in density_cluster_unknown(pts, 30.0)}
        want = union_find_partition([p for p, _ in pts], [g.lat for _, g in pts], [g.lon for _, g in pts], 30.0)
        mismatches += got != want
    report(acceptance_log, "clustering oracle", mismatches == 0,
           f"{1000 - mismatches}/1000 random instances (<= 200 points) match union-find exactly")


def _independent_violations(clusters, radius=50.0):
    bad = 0
    for c in clusters:
        dom = c.parts[0]
        for part in c.parts:
            bad += haversine_distance(dom.midpoint, part.midpoint) > radius
    return bad


def test_merge_invariant(inferences, acceptance_log):
    _, infs = inferences
    checked = violations = 0
    for inf in infs.values():
        violations += _independent_violations(inf.clusters)
        checked += sum(len(c.parts) for c in inf.clusters)
    rng = np.random.default_rng(SEED + 1)
    for _ in range(500):
        fl = [fl_cluster(f"c{i:03d}", int(rng.integers(1, 30)), at(*rng.uniform(0, 300, 2)))
              for i in range(int(rng.integers(1, 60)))]
        out = second_level_merge(fl)
        violations += _independent_violations(out)
        checked += len(fl)
    report(acceptance_log, "merge invariant", violations == 0,
           f"{violations} violations over {checked} merged first-level clusters")


class CountingProvider:
    provider_id = "seed-grid"

    def __init__(self, seeds):
        self.seeds = seeds
        self.calls = 0

    def answer(self, p):
        d = [haversine_distance(p, s) for s in self.seeds]
        return AddressLabel(f"{int(np.argmin(d))} Grid St")

    def lookup(self, p):
        self.calls += 1
        return self.answer(p)


def test_cache_oracle(acceptance_log):
    rng = np.random.default_rng(SEED + 2)
    side = 25
    seeds = [at(i // side * 10.0, i % side * 10.0) for i in range(side * side)]
    prov = CountingProvider(seeds)
    cache = ProximityCache(2.0)
    mismatches = 0
    touched = set()
    for _ in range(10_000):
        k = int(rng.integers(0, len(seeds)))
        ang, r = rng.uniform(0, 2 * np.pi), 0.9 * np.sqrt(rng.uniform())
        base = seeds[k]
        q = at(r * np.cos(ang), r * np.sin(ang), origin=base)
        touched.add(k)
        mismatches += cached_reverse_geocode(q, cache, prov) != prov.answer(q)
    ok = mismatches == 0 and prov.calls == len(touched)
    report(acceptance_log, "cache oracle", ok,
           f"{10_000 - mismatches}/10000 queries equal always-call output; provider calls {prov.calls} "
           f"vs {len(touched)} seeds")


def test_tfidf_oracle(acceptance_log):
    rng = np.random.default_rng(SEED + 3)
    compared = bad = 0
    worst = 0.0
    for _ in range(100):
        vocab = [f"t{i:03d}" for i in range(int(rng.integers(1, 501)))]
        n_docs = int(rng.integers(1, 51))
        weights = 1.0 / np.arange(1, len(vocab) + 1)
        weights /= weights.sum()
        docs = [[vocab[j] for j in rng.choice(len(vocab), size=int(rng.integers(0, 80)), p=weights)]
                for _ in range(n_docs)]
        for target in docs:
            k = int(rng.integers(1, 6))
            got = tfidf_top_terms(target, docs, k)
            want = brute_tfidf(target, docs, k)
            compared += 1
            if [t for t, _ in got] != [t for t, _ in want]:
                bad += 1
                continue
            for (_, a), (_, b) in zip(got, want):
                worst = max(worst, abs(a - b))
    ok = bad == 0 and worst <= 1e-9
    report(acceptance_log, "tf-idf oracle", ok,
           f"{compared - bad}/{compared} target documents over 100 corpora match; max |score diff| {worst:.1e}")


def _random_day_posts(rng, n_days):
    from factories import lp
    start = datetime(2015, 3, 2)
    posts = []
    for d in range(n_days):
        for _ in range(int(rng.integers(0, 6))):
            posts.append(lp(f"p{len(posts)}", start + timedelta(days=d, minutes=int(rng.integers(0, 1440)))))
    return posts


def test_dominant_frame_property(acceptance_log):
    rng = np.random.default_rng(SEED + 4)
    checked = bad = 0
    for _ in range(2000):
        n = int(rng.integers(1, 13))
        if rng.random() < 0.5:
            frames = merge_night_shift(_random_day_posts(rng, n))[:12]
        else:
            frames = []
            for d in range(n):
                s = datetime(2015, 3, 2) + timedelta(days=d, minutes=int(rng.integers(0, 1440)))
                frames.append(DayFrame(s, s + timedelta(minutes=int(rng.integers(0, 600)))))
        if not frames:
            continue
        checked += 1
        bad += set(dominant_frame(frames)) != brute_dominant_frame(frames)
    report(acceptance_log, "dominant-frame property", bad == 0,
           f"{checked - bad}/{checked} fixtures (n <= 12 frames) agree with exhaustive per-hour count")


def policy_timeline():
    """50 posts in blocks of (count, source, utc instant, geotag, has coords).

    Posts in a block are one second apart, stepping backwards from instants
    just before a cutoff so that none of them crosses it.
    """
    ios, andr, fsq = SourceApp.IOS, SourceApp.ANDROID, SourceApp.FOURSQUARE
    c, g, poi, none = GeotagKind.COARSE, GeotagKind.GPS, GeotagKind.POI, GeotagKind.NONE
    blocks = [
        (6, ios, ts(2015, 3, 1), c, True),
        (5, ios, ts(2015, 6, 1), c, False),
        (4, andr, ts(2015, 4, 17), g, True),
        (2, andr, ts(2015, 4, 19, 23, 59, 59), c, True),
        (3, andr, ts(2015, 4, 20), c, False),
        (3, ios, ts(2015, 4, 14, 23, 59, 59), g, True),
        (4, ios, ts(2015, 4, 15), g, True),
        (5, ios, ts(2009, 12, 1), c, False),
        (2, andr, ts(2010, 7, 31, 23), c, False),
        (1, ios, ts(2010, 8, 1), c, False),
        (4, fsq, ts(2014, 1, 1), poi, True),
        (5, ios, ts(2013, 5, 5), none, False),
        (3, andr, ts(2016, 2, 2), none, False),
        (3, fsq, ts(2009, 9, 9), c, False),
    ]
    posts = []
    for count, src, t, kind, has in blocks:
        for i in range(count):
            step = -i if t % 60 == 59 else i
            posts.append(PostRecord(f"p{len(posts):02d}", "u", t + step, at(0, 0) if has else None, "", src, kind))
    return UserTimeline("u", tuple(sorted(posts, key=lambda p: p.timestamp_utc)))


def test_policy_arithmetic(acceptance_log):
    tl = policy_timeline()
    s = leakage_stats(tl)
    # pre: blocks 1,3,4,6,8,9,10,12; post: blocks 2,5,7,11,13,14; pre-2010 coarse without GPS: 8,9,14
    expected = {
        "pre_cutoff": {"total": 28, "with_coords": 15, "coarse": 16, "coarse_with_coords": 8},
        "post_cutoff": {"total": 22, "with_coords": 8, "coarse": 11, "coarse_with_coords": 0},
        "coarse_no_gps_pre2010": 10,
    }
    got = s.as_dict()
    ok = len(tl) == 50 and got == expected
    report(acceptance_log, "policy arithmetic", ok, f"got {got}, expected {expected}")


def test_scorer_fixture(acceptance_log):
    tp, fp, fn = 368, 96, 25
    users, truths = [], {}
    for i in range(tp + fn):
        uid = f"u{i:03d}"
        truths[uid] = GroundTruth(uid, "1 Oak St", None, frozenset({f"v{i}"}))
        pscs = []
        if i < tp:
            pscs.append({"venues": [{"venue_id": f"v{i}", "category": "health"}],
                         "content": {"category": "health"}, "duration": None})
        if i < fp:
            pscs.append({"venues": [{"venue_id": f"x{i}", "category": "religion"}],
                         "content": {"category": "religion"}, "duration": None})
        users.append({"user_id": uid, "home": None, "sensitive": {"pscs": pscs}})
    cb = score(users, truths).content
    p, r = cb.precision * 100, cb.recall * 100
    ok = (cb.tp, cb.fp, cb.fn) == (tp, fp, fn) and abs(p - 79.31) <= 0.01 and abs(r - 93.63) <= 0.01
    report(acceptance_log, "scorer fixture", ok,
           f"TP={cb.tp} FP={cb.fp} FN={cb.fn}: precision {p:.4f}% (79.31), recall {r:.4f}% (93.63)")


def _duplicate(tl, k):
    posts = [p if j == 0 else dataclasses.replace(p, post_id=f"{p.post_id}#{j}") for p in tl.posts for j in range(k)]
    return UserTimeline(tl.user_id, tuple(sorted(posts, key=lambda p: (p.timestamp_utc, p.post_id))))


def _choices(tl, paths):
    ctx = AuditContext.from_config(_config(paths, stages=("keyloc",), baselines=("H1", "H15"),
                                          cache_scope="per-user"))
    inf = infer_timeline(tl, ctx)
    bls = run_baselines(inf, ctx)
    return inf.keylocs.home, inf.keylocs.work, bls["H1"]["cluster_id"], bls["H15"]["cluster_id"]


def test_argmax_scale_invariance(corpus, inferences, acceptance_log):
    _, paths = corpus
    timelines, _ = inferences
    fixtures = list(timelines.values()) + [policy_timeline()]
    changed = []
    for tl in fixtures:
        base = _choices(tl, paths)
        for k in (2, 5):
            if _choices(_duplicate(tl, k), paths) != base:
                changed.append((tl.user_id, k))
    report(acceptance_log, "argmax scale invariance", not changed,
           f"{len(fixtures)} fixtures x k in {{2, 5}}: {len(changed)} changed home/work/H1/H15 choices")
