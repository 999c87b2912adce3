"""Loading line-delimited post records and grouping them into user timelines."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from geoleak.core import GeoleakError, GeoPoint, GeotagKind, PostRecord, SourceApp

log = logging.getLogger(__name__)

DEFAULT_SOURCES = frozenset({SourceApp.ANDROID, SourceApp.IOS, SourceApp.FOURSQUARE})


class FormatError(GeoleakError):
    pass


@dataclass(frozen=True)
class UserTimeline:
    user_id: str
    posts: tuple[PostRecord, ...] = ()

    def __len__(self):
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)


@dataclass
class LoadStats:
    lines: int = 0
    kept: int = 0
    filtered: int = 0
    duplicates: int = 0
    malformed: int = 0
    errors: list[str] = field(default_factory=list)


def parse_record(obj: dict) -> PostRecord:
    lat, lon = obj.get("lat"), obj.get("lon")
    if (lat is None) != (lon is None):
        raise ValueError("lat/lon must be both present or both absent")
    coords = GeoPoint(float(lat), float(lon)) if lat is not None else None
    ts = obj["ts"]
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValueError(f"ts must be an integer, got {ts!r}")
    return PostRecord(
        post_id=str(obj["post_id"]),
        user_id=str(obj["user_id"]),
        timestamp_utc=ts,
        coords=coords,
        text=str(obj.get("text", "")),
        source_app=SourceApp(obj.get("source", "other")),
        geotag_kind=GeotagKind(obj.get("geotag", "none")),
        place_name=obj.get("place"),
    )


def serialize_record(post: PostRecord) -> str:
    obj = {"post_id": post.post_id, "user_id": post.user_id, "ts": post.timestamp_utc}
    if post.coords is not None:
        obj["lat"] = post.coords.lat
        obj["lon"] = post.coords.lon
    obj["text"] = post.text
    obj["source"] = post.source_app.value
    obj["geotag"] = post.geotag_kind.value
    if post.place_name is not None:
        obj["place"] = post.place_name
    return json.dumps(obj, ensure_ascii=False)


def write_dataset(path: str | Path, posts: Iterable[PostRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(serialize_record(post))
            fh.write("\n")


def group_timelines(posts: Iterable[PostRecord]) -> dict[str, UserTimeline]:
    by_user: dict[str, dict[str, PostRecord]] = {}
    for post in posts:
        by_user.setdefault(post.user_id, {}).setdefault(post.post_id, post)
    return {
        uid: UserTimeline(uid, tuple(sorted(d.values(), key=lambda p: (p.timestamp_utc, p.post_id))))
        for uid, d in sorted(by_user.items())
    }


def load_dataset(path: str | Path, source_filter: Iterable[SourceApp] | None = DEFAULT_SOURCES,
                 strict: bool = False, stats: LoadStats | None = None) -> dict[str, UserTimeline]:
    """Read a post file into per-user timelines.

    Lines that fail to parse are skipped and counted in ``stats`` unless
    ``strict`` is set.  Posts whose source is not in ``source_filter`` are
    dropped (``None`` keeps everything).  A repeated ``post_id`` keeps the
    first occurrence.
    """
    stats = stats if stats is not None else LoadStats()
    allowed = None if source_filter is None else frozenset(source_filter)
    seen: set[str] = set()
    posts: list[PostRecord] = []
    parsed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            stats.lines += 1
            try:
                post = parse_record(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                if strict:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
                stats.malformed += 1
                stats.errors.append(f"line {lineno}: {exc}")
                continue
            parsed += 1
            if allowed is not None and post.source_app not in allowed:
                stats.filtered += 1
                continue
            if post.post_id in seen:
                stats.duplicates += 1
                continue
            seen.add(post.post_id)
            posts.append(post)
    if parsed == 0:
        raise FormatError(f"{path}: no parseable records")
    if stats.malformed:
        log.warning("%s: skipped %d malformed line(s)", path, stats.malformed)
    stats.kept = len(posts)
    return group_timelines(posts)


def geotagged_subset(timeline: UserTimeline) -> UserTimeline:
    return replace(timeline, posts=tuple(p for p in timeline.posts if p.coords is not None))
