"""Per-user audit pipeline and batch orchestration."""

from __future__ import annotations

import json
import logging
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import time, timedelta
from pathlib import Path
from typing import Any, Sequence

from geoleak import baseline as bl
from geoleak.cluster import Cluster, FirstLevelCluster, first_level, promote_first_level, second_level_merge
from geoleak.core import UNKNOWN, AddressLabel, GeoleakError, GeoPoint, PostRecord
from geoleak.geocode import FileGeocodeProvider, ProximityCache, label_points, verify_cluster_addresses
from geoleak.ingest import DEFAULT_SOURCES, LoadStats, UserTimeline, geotagged_subset, load_dataset
from geoleak.keyloc import KeyLocationResult, infer_key_locations
from geoleak.policy import leakage_stats, post_cutoff_posts
from geoleak.sensitive import (
    TFIDF_VARIANT,
    Preprocessor,
    SensitiveCategory,
    VenueIndex,
    content_corroborate,
    default_preprocessor,
    duration_corroborate,
    find_pscs,
    load_category_map,
    load_wordlists,
    tfidf_top_terms,
)
from geoleak.temporal import (
    BoxTimezoneProvider,
    LocalizedPost,
    LongitudeBandTimezone,
    TimeProfile,
    TimezoneError,
    build_profile,
    localize,
)

log = logging.getLogger(__name__)

STAGES = ("keyloc", "sensitive", "policy", "baselines")
REPORT_VERSION = 1


class ConfigError(GeoleakError):
    pass


class NullGeocoder:
    """Provider that resolves nothing; every post goes to density clustering."""

    provider_id = "none"

    def lookup(self, p: GeoPoint) -> AddressLabel:
        return UNKNOWN


@dataclass
class AuditConfig:
    dataset: str | None = None
    geocode_db: str | None = None
    auth_geocode_db: str | None = None
    venue_db: str | None = None
    wordlists_dir: str | None = None
    tz_db: str | None = None
    weights: str | None = None
    out: str | None = None
    stages: tuple[str, ...] = ("keyloc", "policy")
    baselines: tuple[str, ...] = ()
    cache_scope: str = "global"
    cache_m: float = 2.0
    eps_m: float = 30.0
    merge_m: float = 50.0
    venue_m: float = 25.0
    geocode_fallback_m: float = 40.0
    verify_k: int = 10
    top_candidates: int = 5
    shift_max_h: float = 8.0
    shift_latest_end: str = "07:00"
    shift_min_rest_h: float = 8.0
    long_day_h: float = 10.0
    long_day_share: float = 0.2
    tfidf_top_k: int = 3
    visit_gap_h: float = 3.0
    visit_span_min: float = 30.0
    passby_min: float = 5.0
    post_cutoff_weeks: tuple[int, ...] = (0, 4)
    seed: int = 0
    strict: bool = False
    workers: int = 1

    def thresholds(self) -> dict[str, Any]:
        skip = {"dataset", "geocode_db", "auth_geocode_db", "venue_db", "wordlists_dir", "tz_db",
                "weights", "out", "stages", "baselines", "workers"}
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items() if k not in skip}

    def validate(self) -> None:
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stage(s): {sorted(unknown)}")
        if self.cache_scope not in ("global", "per-user"):
            raise ConfigError(f"cache scope must be 'global' or 'per-user', not {self.cache_scope!r}")
        if "sensitive" in self.stages and not self.venue_db:
            raise ConfigError("the sensitive stage needs a venue database (--venue-db)")
        if self.baselines and "baselines" not in self.stages:
            self.stages = (*self.stages, "baselines")
        for h in self.baselines:
            try:
                bl.HeuristicId.parse(h)
            except bl.UnknownHeuristic as exc:
                raise ConfigError(f"unknown baseline {h!r}") from exc
        for name in ("dataset", "geocode_db", "auth_geocode_db", "venue_db", "tz_db", "weights"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name.replace('_', '-')}: no such file: {path}")
        if self.wordlists_dir is not None and not Path(self.wordlists_dir).is_dir():
            raise ConfigError(f"wordlists-dir: no such directory: {self.wordlists_dir}")
        for name in ("cache_m", "eps_m", "merge_m", "venue_m"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


@dataclass
class AuditContext:
    config: AuditConfig
    geocoder: Any = field(default_factory=NullGeocoder)
    authoritative: Any = None
    tz: Any = field(default_factory=LongitudeBandTimezone)
    venues: VenueIndex | None = None
    category_map: dict | None = None
    wordlists: dict | None = None
    preprocessor: Preprocessor | None = None
    weights: list[float] | None = None
    cache: ProximityCache | None = None

    @classmethod
    def default(cls, config: AuditConfig | None = None) -> "AuditContext":
        return cls(config or AuditConfig())

    @classmethod
    def from_config(cls, cfg: AuditConfig) -> "AuditContext":
        cfg.validate()
        ctx = cls(cfg)
        if cfg.geocode_db:
            ctx.geocoder = FileGeocodeProvider.from_file(cfg.geocode_db, fallback_m=cfg.geocode_fallback_m)
        if cfg.auth_geocode_db:
            ctx.authoritative = FileGeocodeProvider.from_file(cfg.auth_geocode_db, fallback_m=cfg.geocode_fallback_m)
        elif cfg.geocode_db:
            ctx.authoritative = ctx.geocoder
        if cfg.tz_db:
            ctx.tz = BoxTimezoneProvider.from_file(cfg.tz_db)
        if "sensitive" in cfg.stages:
            ctx.venues = VenueIndex.from_file(cfg.venue_db)
            ctx.category_map = load_category_map()
            ctx.wordlists = load_wordlists(cfg.wordlists_dir)
            ctx.preprocessor = default_preprocessor()
        if cfg.weights:
            ctx.weights = bl.read_weights(cfg.weights)
        if cfg.cache_scope == "global":
            ctx.cache = ProximityCache(cfg.cache_m)
        return ctx

    def user_cache(self) -> ProximityCache:
        if self.cache is not None:
            return self.cache
        return ProximityCache(self.config.cache_m)


@dataclass
class UserInference:
    user_id: str
    posts: dict[str, PostRecord]
    first_level: list[FirstLevelCluster]
    clusters: list[Cluster]
    localized: dict[str, list[LocalizedPost]]
    profiles: dict[str, TimeProfile]
    keylocs: KeyLocationResult
    diagnostics: list[str]
    timing: dict[str, float]

    def cluster(self, cid: str | None) -> Cluster | None:
        if cid is None:
            return None
        return next((c for c in self.clusters if c.id == cid), None)


class _Timer:
    def __init__(self, timing: dict[str, float], phase: str):
        self.timing, self.phase = timing, phase

    def __enter__(self):
        self.t0 = _time.perf_counter()

    def __exit__(self, *exc):
        self.timing[self.phase] = self.timing.get(self.phase, 0.0) + _time.perf_counter() - self.t0


def _hm(text: str) -> time:
    h, m = text.split(":")
    return time(int(h), int(m))


def localize_clusters(clusters: Sequence, posts: dict[str, PostRecord], tz,
                      diagnostics: list[str]) -> dict[str, list[LocalizedPost]]:
    out = {}
    for c in clusters:
        try:
            out[c.id] = localize(c, posts, tz)
        except TimezoneError as exc:
            diagnostics.append(f"cluster {c.id} skipped: {exc}")
    return out


def infer_timeline(timeline: UserTimeline, ctx: AuditContext) -> UserInference:
    """Geocode, cluster, localize and pick key locations for one user."""
    cfg = ctx.config
    diag: list[str] = []
    timing: dict[str, float] = {}
    geo = geotagged_subset(timeline)
    posts = {p.post_id: p for p in geo.posts}

    with _Timer(timing, "geocode"):
        labels = label_points([(p.post_id, p.coords) for p in geo.posts], ctx.user_cache(), ctx.geocoder, diag)
    with _Timer(timing, "cluster"):
        fl = first_level(geo.posts, labels, cfg.eps_m)
        clusters = second_level_merge(fl, cfg.merge_m)
    if ctx.authoritative is not None:
        with _Timer(timing, "geocode"):
            clusters = verify_cluster_addresses(clusters, ctx.authoritative, cfg.verify_k, diag)
    with _Timer(timing, "temporal"):
        localized = localize_clusters(clusters, posts, ctx.tz, diag)
        profiles = {
            cid: build_profile(cid, lps, timedelta(hours=cfg.shift_max_h), _hm(cfg.shift_latest_end),
                               timedelta(hours=cfg.shift_min_rest_h))
            for cid, lps in localized.items()
        }
    with _Timer(timing, "keyloc"):
        if clusters:
            keylocs = infer_key_locations(clusters, profiles, cfg.top_candidates,
                                          timedelta(hours=cfg.long_day_h), cfg.long_day_share)
        else:
            keylocs = KeyLocationResult(diagnostics=["no geotagged posts"])
    diag.extend(keylocs.diagnostics)
    return UserInference(timeline.user_id, posts, fl, clusters, localized, profiles, keylocs, diag, timing)


# --- report assembly ----------------------------------------------------------

def _pt(p: GeoPoint) -> list[float]:
    return [round(p.lat, 7), round(p.lon, 7)]


def _cluster_summary(c: Cluster | None) -> dict | None:
    if c is None:
        return None
    return {
        "cluster_id": c.id,
        "address": c.label.address or None,
        "midpoint": _pt(c.midpoint),
        "rank": c.rank,
        "size": len(c.members),
        "max_radius_m": round(c.max_radius, 3),
    }


def _keyloc_block(inf: UserInference) -> dict:
    kl = inf.keylocs
    home = _cluster_summary(inf.cluster(kl.home))
    if home is not None:
        home["score"] = inf.profiles[kl.home].hour_breadth
    work = _cluster_summary(inf.cluster(kl.work))
    if work is not None:
        wc = next(w for w in kl.work_candidates if w.cluster_id == kl.work)
        work["score"] = wc.retained_weeks
        work["dominant_frame"] = list(wc.dominant_frame)
    return {
        "home": home,
        "work": work,
        "home_candidates": [asdict(h) for h in kl.home_candidates],
        "work_candidates": [asdict(w) for w in kl.work_candidates],
    }


def run_baselines(inf: UserInference, ctx: AuditContext) -> dict:
    """Prior-work heuristics over first-level clusters (no second-level merge)."""
    fl_clusters = promote_first_level(inf.first_level)
    localized = localize_clusters(fl_clusters, inf.posts, ctx.tz, [])
    data = bl.UserData(fl_clusters, localized, inf.posts)
    by_id = {c.id: c for c in fl_clusters}
    out = {}
    for name in ctx.config.baselines:
        h = bl.HeuristicId.parse(name)
        cid = bl.run_baseline(h, data, ctx.weights)
        c = by_id.get(cid)
        out[h.value] = {"cluster_id": cid, "address": (c.label.address or None) if c else None}
    return out


def run_sensitive(inf: UserInference, ctx: AuditContext) -> dict:
    cfg = ctx.config
    pre = ctx.preprocessor or default_preprocessor()
    pscs = find_pscs(inf.clusters, ctx.venues, ctx.category_map, cfg.venue_m)
    docs = {c.id: [t for m in c.members for t in pre(inf.posts[m].text)] for c in inf.clusters}
    doc_list = list(docs.values())
    by_id = {c.id: c for c in inf.clusters}
    items = []
    for psc in pscs:
        top = tfidf_top_terms(docs[psc.cluster_id], doc_list, cfg.tfidf_top_k)
        content = content_corroborate(psc, top, ctx.wordlists or {})
        duration = None
        if psc.cluster_id in inf.localized:
            duration = duration_corroborate(inf.localized[psc.cluster_id], timedelta(hours=cfg.visit_gap_h),
                                            timedelta(minutes=cfg.visit_span_min),
                                            timedelta(minutes=cfg.passby_min))
        c = by_id[psc.cluster_id]
        items.append({
            "cluster_id": psc.cluster_id,
            "address": c.label.address or None,
            "midpoint": _pt(c.midpoint),
            "size": len(c.members),
            "primary_category": psc.primary_category.value,
            "categories": sorted(cat.value for cat in psc.multiple_attribution),
            "venues": [{"venue_id": n.venue.venue_id, "name": n.venue.name,
                        "distance_m": round(n.distance, 3), "category": n.category.value} for n in psc.nearby],
            "top_terms": [[t, round(s, 9)] for t, s in top],
            "content": None if content is None else {"category": content.category.value,
                                                     "terms": list(content.terms)},
            "duration": None if duration is None else {
                "dates": [d.isoformat() for d in duration.dates],
                "visit": None if duration.visit is None else [t.isoformat() for t in duration.visit]},
        })
    cb = {i["cluster_id"] for i in items if i["content"]}
    db = {i["cluster_id"] for i in items if i["duration"]}
    return {"n_pscs": len(items), "n_content": len(cb), "n_duration": len(db), "n_both": len(cb & db),
            "pscs": items}


def run_policy(timeline: UserTimeline, ctx: AuditContext) -> dict:
    out = {"leakage": leakage_stats(timeline).as_dict(), "post_cutoff": {}}
    for weeks in ctx.config.post_cutoff_weeks:
        sub = post_cutoff_posts(timeline, weeks)
        inf = infer_timeline(sub, ctx)
        home, work = inf.cluster(inf.keylocs.home), inf.cluster(inf.keylocs.work)
        out["post_cutoff"][str(weeks)] = {
            "n_posts": len(sub),
            "home_address": home.label.address or None if home else None,
            "work_address": work.label.address or None if work else None,
        }
    return out


def audit_user(timeline: UserTimeline, ctx: AuditContext) -> dict:
    stages = ctx.config.stages
    inf = infer_timeline(timeline, ctx)
    rec: dict[str, Any] = {
        "type": "user",
        "user_id": timeline.user_id,
        "n_posts": len(timeline),
        "n_geotagged": len(inf.posts),
        "n_clusters": len(inf.clusters),
    }
    if "keyloc" in stages:
        rec.update(_keyloc_block(inf))
    timing = dict(inf.timing)
    if "baselines" in stages and ctx.config.baselines:
        with _Timer(timing, "baselines"):
            rec["baselines"] = run_baselines(inf, ctx)
    if "sensitive" in stages:
        with _Timer(timing, "sensitive"):
            rec["sensitive"] = run_sensitive(inf, ctx)
    if "policy" in stages:
        with _Timer(timing, "policy"):
            rec["policy"] = run_policy(timeline, ctx)
    rec["diagnostics"] = inf.diagnostics
    rec["timing_s"] = {k: round(v, 6) for k, v in sorted(timing.items())}
    return rec


def run_metadata(ctx: AuditContext, n_users: int, load: LoadStats) -> dict:
    cfg = ctx.config
    return {
        "type": "meta",
        "report_version": REPORT_VERSION,
        "dataset": cfg.dataset,
        "n_users": n_users,
        "stages": list(cfg.stages),
        "baselines": list(cfg.baselines),
        "thresholds": cfg.thresholds(),
        "tfidf_variant": TFIDF_VARIANT,
        "providers": {
            "geocode": getattr(ctx.geocoder, "provider_id", None),
            "authoritative": getattr(ctx.authoritative, "provider_id", None),
            "timezone": getattr(ctx.tz, "provider_id", None),
        },
        "seed": cfg.seed,
        "load": {"lines": load.lines, "kept": load.kept, "filtered": load.filtered,
                 "duplicates": load.duplicates, "malformed": load.malformed},
        "sensitive_categories": [c.value for c in SensitiveCategory],
    }


def run_audit(cfg: AuditConfig) -> tuple[dict, list[dict]]:
    """Audit every user of ``cfg.dataset``; writes the report when ``cfg.out`` is set."""
    if not cfg.dataset:
        raise ConfigError("no dataset given")
    ctx = AuditContext.from_config(cfg)
    load = LoadStats()
    timelines = load_dataset(cfg.dataset, DEFAULT_SOURCES, strict=cfg.strict, stats=load)

    def one(tl: UserTimeline) -> dict:
        try:
            return audit_user(tl, ctx)
        except GeoleakError as exc:
            log.warning("user %s failed: %s", tl.user_id, exc)
            return {"type": "user", "user_id": tl.user_id, "error": str(exc), "diagnostics": [str(exc)]}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            users = list(pool.map(one, timelines.values()))
    else:
        users = [one(tl) for tl in timelines.values()]
    users.sort(key=lambda r: r["user_id"])
    meta = run_metadata(ctx, len(users), load)
    if ctx.cache is not None:
        meta["cache"] = {"hits": ctx.cache.hits, "misses": ctx.cache.misses}
    if cfg.out:
        write_report(cfg.out, meta, users)
    return meta, users


def write_report(path: str | Path, meta: dict, users: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for rec in users:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_report(path: str | Path) -> tuple[dict, list[dict]]:
    meta, users = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "meta":
                meta = rec
            else:
                users.append(rec)
    return meta, users
