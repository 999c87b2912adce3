"""Local-time views of cluster activity: day frames, night shifts, dominant hours."""

from __future__ import annotations

import bisect
import csv
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from geoleak.core import GeoleakError, GeoPoint, PostRecord

SHIFT_MAX = timedelta(hours=8)
SHIFT_LATEST_END = time(7, 0)
SHIFT_MIN_REST = timedelta(hours=8)


class TimezoneError(GeoleakError):
    pass


class InsufficientPosts(GeoleakError, ValueError):
    pass


class NoFrames(GeoleakError, ValueError):
    pass


class TimezoneProvider(Protocol):
    def offset_minutes(self, p: GeoPoint) -> int: ...


class LongitudeBandTimezone:
    """Nominal solar offsets: one hour per 15 degrees of longitude."""

    provider_id = "lon-band"

    def offset_minutes(self, p: GeoPoint) -> int:
        return int(round(p.lon / 15.0)) * 60


class BoxTimezoneProvider:
    """Fixed offsets for lat/lon boxes; the first matching box wins."""

    def __init__(self, boxes: Sequence[tuple[float, float, float, float, int]],
                 fallback: TimezoneProvider | None = None, provider_id: str = "boxes"):
        self.boxes = [tuple(b) for b in boxes]
        self.fallback = fallback
        self.provider_id = provider_id

    @classmethod
    def from_file(cls, path: str | Path, fallback: TimezoneProvider | None = None) -> "BoxTimezoneProvider":
        boxes = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                boxes.append((float(row["min_lon"]), float(row["max_lon"]), float(row["min_lat"]),
                              float(row["max_lat"]), int(row["offset_minutes"])))
        return cls(boxes, fallback=fallback, provider_id=f"file:{Path(path).name}")

    def offset_minutes(self, p: GeoPoint) -> int:
        for min_lon, max_lon, min_lat, max_lat, offset in self.boxes:
            if min_lon <= p.lon <= max_lon and min_lat <= p.lat <= max_lat:
                return offset
        if self.fallback is not None:
            return self.fallback.offset_minutes(p)
        raise TimezoneError(f"no timezone box covers ({p.lat:.5f}, {p.lon:.5f})")


@dataclass(frozen=True, slots=True)
class LocalizedPost:
    post_id: str
    timestamp_utc: int
    local: datetime  # naive, cluster-local wall clock

    @property
    def local_date(self) -> date:
        return self.local.date()

    @property
    def local_hour(self) -> int:
        return self.local.hour

    @property
    def local_minute(self) -> int:
        return self.local.minute

    @property
    def weekday(self) -> int:
        """0 = Monday ... 6 = Sunday."""
        return self.local.weekday()

    @property
    def iso_week(self) -> tuple[int, int]:
        iso = self.local.isocalendar()
        return iso[0], iso[1]

    @property
    def is_weekend(self) -> bool:
        return self.local.weekday() >= 5


def to_local(timestamp_utc: int, offset_minutes: int) -> datetime:
    utc = datetime.fromtimestamp(timestamp_utc, tz=timezone.utc)
    return (utc + timedelta(minutes=offset_minutes)).replace(tzinfo=None)


def localize_posts(posts: Iterable[PostRecord], offset_minutes: int) -> list[LocalizedPost]:
    out = [LocalizedPost(p.post_id, p.timestamp_utc, to_local(p.timestamp_utc, offset_minutes)) for p in posts]
    out.sort(key=lambda lp: (lp.timestamp_utc, lp.post_id))
    return out


def localize(cluster, posts: Mapping[str, PostRecord], tz: TimezoneProvider) -> list[LocalizedPost]:
    """Convert a cluster's member timestamps with the offset of its midpoint."""
    offset = tz.offset_minutes(cluster.midpoint)
    return localize_posts((posts[m] for m in cluster.members), offset)


@dataclass(frozen=True)
class DayFrame:
    start: datetime
    end: datetime
    night_shift: bool = False

    @property
    def day(self) -> date:
        return self.start.date()

    @property
    def start_hour(self) -> int:
        return self.start.hour

    @property
    def end_hour(self) -> int:
        return self.end.hour

    @property
    def duration(self) -> timedelta:
        return self.end - self.start

    @property
    def hours(self) -> frozenset[int]:
        if self.end.date() > self.start.date():
            return frozenset(range(self.start.hour, 24)) | frozenset(range(0, self.end.hour + 1))
        return frozenset(range(self.start.hour, self.end.hour + 1))


def day_frame(posts_of_date: Sequence[LocalizedPost]) -> DayFrame:
    if len(posts_of_date) < 2:
        raise InsufficientPosts("a day frame needs at least two posts")
    times = sorted(p.local for p in posts_of_date)
    return DayFrame(times[0], times[-1])


def merge_night_shift(posts: Sequence[LocalizedPost], max_span: timedelta = SHIFT_MAX,
                      latest_end: time = SHIFT_LATEST_END,
                      min_rest: timedelta = SHIFT_MIN_REST) -> list[DayFrame]:
    """Per-day activity frames, with overnight shifts joined across midnight.

    Posts are grouped by local date.  The early-morning posts of date D+1
    (up to ``latest_end``) are joined with the posts of date D that fall
    within ``max_span`` before the last of them, provided the cluster then
    stays silent for ``min_rest``.  A joined shift counts as one frame keyed
    to D.  Only groups with two or more distinct posting instants yield
    frames.
    """
    # posts sharing an instant are one posting event
    ordered = list({p.local: p for p in sorted(posts, key=lambda p: (p.local, p.post_id), reverse=True)}.values())
    ordered.sort(key=lambda p: p.local)
    times = [p.local for p in ordered]
    by_date: dict[date, list[LocalizedPost]] = {}
    for p in ordered:
        by_date.setdefault(p.local_date, []).append(p)

    frames = []
    for d in sorted(by_date):
        nxt = d + timedelta(days=1)
        if nxt not in by_date:
            continue
        early = [p for p in by_date[nxt] if p.local.time() <= latest_end]
        if not early:
            continue
        end = early[-1].local
        late = [p for p in by_date[d] if end - p.local <= max_span]
        if not late:
            continue
        i = bisect.bisect_right(times, end)
        if i < len(times) and times[i] - end < min_rest:
            continue
        frames.append(DayFrame(late[0].local, end, night_shift=True))
        by_date[d] = by_date[d][:len(by_date[d]) - len(late)]
        by_date[nxt] = by_date[nxt][len(early):]

    for group in by_date.values():
        if len(group) >= 2:
            frames.append(day_frame(group))
    frames.sort(key=lambda f: f.start)
    return frames


def dominant_frame(frames: Sequence[DayFrame]) -> frozenset[int]:
    """Hours covered by strictly more than half of the frames."""
    if not frames:
        raise NoFrames("no day frames to superimpose")
    counts = Counter(h for f in frames for h in f.hours)
    return frozenset(h for h, c in counts.items() if 2 * c > len(frames))


def hour_breadth(posts: Iterable[LocalizedPost]) -> int:
    return len({p.local_hour for p in posts})


def active_weeks(posts: Iterable[LocalizedPost]) -> int:
    return len({p.iso_week for p in posts})


def active_weekends(posts: Iterable[LocalizedPost]) -> int:
    return len({p.iso_week for p in posts if p.is_weekend})


@dataclass(frozen=True)
class TimeProfile:
    cluster_id: str
    posts: tuple[LocalizedPost, ...]
    active_weekend_count: int
    active_week_count: int
    day_frames: tuple[DayFrame, ...]
    dominant_frame: frozenset[int]
    hour_breadth: int

    @property
    def long_day_fraction(self) -> float:
        return frame_fraction_over(self.day_frames, timedelta(hours=10))


def frame_fraction_over(frames: Sequence[DayFrame], limit: timedelta) -> float:
    if not frames:
        return 0.0
    return sum(1 for f in frames if f.duration > limit) / len(frames)


def build_profile(cluster_id: str, posts: Sequence[LocalizedPost], max_span: timedelta = SHIFT_MAX,
                  latest_end: time = SHIFT_LATEST_END, min_rest: timedelta = SHIFT_MIN_REST) -> TimeProfile:
    frames = merge_night_shift(posts, max_span, latest_end, min_rest)
    dom = dominant_frame(frames) if frames else frozenset()
    return TimeProfile(
        cluster_id=cluster_id,
        posts=tuple(posts),
        active_weekend_count=active_weekends(posts),
        active_week_count=active_weeks(posts),
        day_frames=tuple(frames),
        dominant_frame=dom,
        hour_breadth=hour_breadth(posts),
    )


def in_window(hour: int, start: int, end: int) -> bool:
    """Membership in the hour window ``[start, end)``, wrapping past midnight."""
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end

