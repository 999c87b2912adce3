"""Coarse-geotag GPS leakage around the 2015 app releases."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Callable, Mapping

from geoleak.core import GeotagKind, PostRecord, SourceApp
from geoleak.ingest import UserTimeline


def _epoch(y: int, m: int, d: int) -> int:
    return int(datetime(y, m, d, tzinfo=timezone.utc).timestamp())


DEFAULT_CUTOFFS: dict[SourceApp, int] = {
    SourceApp.IOS: _epoch(2015, 4, 15),
    SourceApp.ANDROID: _epoch(2015, 4, 20),
}
# before this instant coarse-tagged posts were not yet given GPS coordinates
COARSE_GPS_START = _epoch(2010, 8, 1)


@dataclass
class PeriodCounts:
    total: int = 0
    with_coords: int = 0
    coarse: int = 0
    coarse_with_coords: int = 0


@dataclass
class LeakageStats:
    pre_cutoff: PeriodCounts = field(default_factory=PeriodCounts)
    post_cutoff: PeriodCounts = field(default_factory=PeriodCounts)
    coarse_no_gps_pre2010: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def is_pre_cutoff(post: PostRecord, cutoffs: Mapping[SourceApp, int] = DEFAULT_CUTOFFS) -> bool:
    cut = cutoffs.get(post.source_app)
    return cut is not None and post.timestamp_utc < cut


def leakage_stats(timeline, cutoffs: Mapping[SourceApp, int] = DEFAULT_CUTOFFS,
                  coarse_gps_start: int = COARSE_GPS_START) -> LeakageStats:
    """Bucket posts by period relative to their platform's cutoff.

    Sources without a cutoff always count as post-cutoff.
    """
    stats = LeakageStats()
    for post in timeline:
        bucket = stats.pre_cutoff if is_pre_cutoff(post, cutoffs) else stats.post_cutoff
        bucket.total += 1
        has = post.coords is not None
        bucket.with_coords += has
        if post.geotag_kind is GeotagKind.COARSE:
            bucket.coarse += 1
            bucket.coarse_with_coords += has
            if not has and post.timestamp_utc < coarse_gps_start:
                stats.coarse_no_gps_pre2010 += 1
    return stats


def policy_instant(post: PostRecord, cutoffs: Mapping[SourceApp, int] = DEFAULT_CUTOFFS) -> int:
    """Cutoff applying to ``post``; cutoff-less sources use the latest platform cutoff."""
    cut = cutoffs.get(post.source_app)
    if cut is None:
        cut = max(cutoffs.values()) if cutoffs else 0
    return cut


def post_cutoff_posts(timeline: UserTimeline, offset_weeks: int = 0,
                      cutoffs: Mapping[SourceApp, int] = DEFAULT_CUTOFFS) -> UserTimeline:
    shift = int(timedelta(weeks=offset_weeks).total_seconds())
    kept = tuple(p for p in timeline.posts
                 if p.coords is not None and p.timestamp_utc >= policy_instant(p, cutoffs) + shift)
    return replace(timeline, posts=kept)


def post_cutoff_inference(timeline: UserTimeline, offset_weeks: int = 0,
                          cutoffs: Mapping[SourceApp, int] = DEFAULT_CUTOFFS,
                          infer: Callable | None = None):
    """Re-run key-location inference on coordinates posted after the cutoff.

    ``infer`` maps a timeline to a ``KeyLocationResult``; the default runs
    the standard pipeline with default settings.
    """
    if infer is None:
        from geoleak.pipeline import AuditContext, infer_timeline
        ctx = AuditContext.default()
        infer = lambda tl: infer_timeline(tl, ctx).keylocs  # noqa: E731
    return infer(post_cutoff_posts(timeline, offset_weeks, cutoffs))
