"""Home and workplace selection from per-cluster time profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta
from typing import Mapping, Sequence

from geoleak.cluster import Cluster
from geoleak.temporal import TimeProfile, active_weeks, frame_fraction_over

TOP_CANDIDATES = 5
LONG_DAY = timedelta(hours=10)
LONG_DAY_MAX_SHARE = 0.2


@dataclass(frozen=True)
class HomeCandidate:
    cluster_id: str
    active_weekends: int
    hour_breadth: int


@dataclass(frozen=True)
class WorkCandidate:
    cluster_id: str
    active_weeks: int
    dominant_frame: tuple[int, ...]
    long_day_share: float
    retained_weeks: int
    rejected: str | None = None


@dataclass
class KeyLocationResult:
    home: str | None = None
    work: str | None = None
    home_candidates: list[HomeCandidate] = field(default_factory=list)
    work_candidates: list[WorkCandidate] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def _tie(c: Cluster) -> tuple[int, str]:
    return (-len(c.members), c.id)


def _profiled(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile]) -> list[Cluster]:
    return [c for c in clusters if c.id in profiles]


def home_candidates(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile],
                    top: int = TOP_CANDIDATES) -> list[HomeCandidate]:
    pool = sorted(_profiled(clusters, profiles),
                  key=lambda c: (-profiles[c.id].active_weekend_count, *_tie(c)))[:top]
    return [
        HomeCandidate(c.id, profiles[c.id].active_weekend_count, profiles[c.id].hour_breadth)
        for c in pool
    ]


def infer_home(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile],
               top: int = TOP_CANDIDATES) -> str | None:
    """The cluster with the broadest hour coverage among the most weekend-active ones."""
    by_id = {c.id: c for c in clusters}
    cands = [h for h in home_candidates(clusters, profiles, top) if h.active_weekends > 0]
    if not cands:
        return None
    best = min(cands, key=lambda h: (-h.hour_breadth, *_tie(by_id[h.cluster_id])))
    return best.cluster_id


def work_candidates(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile], home: str | None,
                    top: int = TOP_CANDIDATES, long_day: timedelta = LONG_DAY,
                    long_day_max_share: float = LONG_DAY_MAX_SHARE) -> list[WorkCandidate]:
    pool = sorted((c for c in _profiled(clusters, profiles) if c.id != home),
                  key=lambda c: (-profiles[c.id].active_week_count, *_tie(c)))[:top]
    out = []
    for c in pool:
        prof = profiles[c.id]
        dom = prof.dominant_frame
        share = frame_fraction_over(prof.day_frames, long_day)
        retained = active_weeks(p for p in prof.posts if p.local_hour in dom)
        rejected = None
        if not prof.day_frames:
            rejected = "no multi-post days"
        elif not dom:
            rejected = "empty dominant frame"
        elif share > long_day_max_share:
            rejected = f"{share:.0%} of days longer than {long_day}"
        elif retained == 0:
            rejected = "no posts inside dominant frame"
        out.append(WorkCandidate(c.id, prof.active_week_count, tuple(sorted(dom)), share, retained, rejected))
    return out


def infer_work(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile], home: str | None,
               top: int = TOP_CANDIDATES, long_day: timedelta = LONG_DAY,
               long_day_max_share: float = LONG_DAY_MAX_SHARE) -> str | None:
    """The surviving non-home candidate with the most active weeks inside its dominant frame."""
    by_id = {c.id: c for c in clusters}
    cands = [w for w in work_candidates(clusters, profiles, home, top, long_day, long_day_max_share)
             if w.rejected is None]
    if not cands:
        return None
    return min(cands, key=lambda w: (-w.retained_weeks, *_tie(by_id[w.cluster_id]))).cluster_id


def infer_key_locations(clusters: Sequence[Cluster], profiles: Mapping[str, TimeProfile],
                        top: int = TOP_CANDIDATES, long_day: timedelta = LONG_DAY,
                        long_day_max_share: float = LONG_DAY_MAX_SHARE) -> KeyLocationResult:
    res = KeyLocationResult()
    res.home_candidates = home_candidates(clusters, profiles, top)
    res.home = infer_home(clusters, profiles, top)
    if res.home is None:
        res.diagnostics.append("no cluster with weekend activity")
    res.work_candidates = work_candidates(clusters, profiles, res.home, top, long_day, long_day_max_share)
    res.work = infer_work(clusters, profiles, res.home, top, long_day, long_day_max_share)
    if res.work is None:
        res.diagnostics.append("no work candidate survived")
    return res
