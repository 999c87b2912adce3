"""Prior-work home/work heuristics evaluated on the same clusters.

The day-boundary rules of the last-destination heuristics, the PageRank
edge construction and the hour-weight training are reconstructions from
one-line descriptions, not reproductions of the original systems.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from geoleak.cluster import Cluster
from geoleak.core import GeoleakError, GeoPoint, PostRecord, haversine_distance
from geoleak.temporal import LocalizedPost, in_window

PAGERANK_DAMPING = 0.85
PAGERANK_ITERATIONS = 100
# iterations beyond the minimum run until the update is this small
PAGERANK_TOL = 1e-12
PAGERANK_MAX_ITERATIONS = 10_000


class UnknownHeuristic(GeoleakError, ValueError):
    pass


class EmptySample(GeoleakError, ValueError):
    pass


class HeuristicId(enum.Enum):
    H1_LargestCluster = "H1"
    H2_Night20to8 = "H2"
    H3_Night24to7 = "H3"
    H4_LastDestBefore3am = "H4"
    H5_LastDestNoNightDays = "H5"
    H6_PageRankDest = "H6"
    H7_PageRankOrig = "H7"
    H8_RestLeisureDays = "H8"
    H9_WMFV = "H9"
    H10_WMean = "H10"
    H11_WMedian = "H11"
    H14_ActiveFrameWork = "H14"
    H15_SecondLargest = "H15"

    @classmethod
    def parse(cls, text: str) -> "HeuristicId":
        key = text.strip().upper()
        for h in cls:
            if h.value == key or h.name.upper() == key:
                return h
        raise UnknownHeuristic(text)


HOME_HEURISTICS = tuple(h for h in HeuristicId if h not in (HeuristicId.H14_ActiveFrameWork,
                                                            HeuristicId.H15_SecondLargest))
WORK_HEURISTICS = (HeuristicId.H14_ActiveFrameWork, HeuristicId.H15_SecondLargest)

# [start, end) hour windows in cluster-local time
WINDOWS = {
    HeuristicId.H2_Night20to8: (20, 8),
    HeuristicId.H3_Night24to7: (0, 7),
    HeuristicId.H9_WMFV: (0, 6),
    HeuristicId.H10_WMean: (0, 6),
    HeuristicId.H11_WMedian: (23, 6),
    HeuristicId.H14_ActiveFrameWork: (8, 19),
}
REST = (2, 8)
LEISURE = (19, 2)


@dataclass(frozen=True)
class UserData:
    clusters: Sequence[Cluster]
    localized: Mapping[str, Sequence[LocalizedPost]]
    posts: Mapping[str, PostRecord]

    def tagged(self) -> list[tuple[LocalizedPost, str]]:
        """Every localized post with its cluster id, in UTC order."""
        out = [(lp, cid) for cid, lps in self.localized.items() for lp in lps]
        out.sort(key=lambda t: (t[0].timestamp_utc, t[0].post_id))
        return out


def _rank_key(clusters: Sequence[Cluster]):
    order = {c.id: (-len(c.members), c.id) for c in clusters}
    return lambda cid: order[cid]


def _argmax(scores: Mapping[str, float], clusters: Sequence[Cluster]) -> str | None:
    scores = {k: v for k, v in scores.items() if v > 0}
    if not scores:
        return None
    tie = _rank_key(clusters)
    return min(scores, key=lambda cid: (-scores[cid], tie(cid)))


def _by_size(clusters: Sequence[Cluster], position: int) -> str | None:
    ordered = sorted(clusters, key=lambda c: (-len(c.members), c.id))
    return ordered[position].id if len(ordered) > position else None


def count_in_window(data: UserData, start: int, end: int) -> dict[str, int]:
    return {cid: sum(1 for p in lps if in_window(p.local_hour, start, end))
            for cid, lps in data.localized.items()}


def unique_days_in_windows(data: UserData, windows: Sequence[tuple[int, int]]) -> dict[str, int]:
    """Distinct days with a post inside any window; windows wrapping midnight
    credit their after-midnight hours to the day they started on."""
    out = {}
    for cid, lps in data.localized.items():
        days = set()
        for p in lps:
            for start, end in windows:
                if in_window(p.local_hour, start, end):
                    wraps = start > end and p.local_hour < end
                    days.add(p.local_date - timedelta(days=1) if wraps else p.local_date)
        out[cid] = len(days)
    return out


def last_destinations(data: UserData, skip_night_days: bool = False) -> Counter:
    """Cluster of the last post of each day.

    Days run 03:00-02:59 local.  With ``skip_night_days``, calendar days with
    any post between 00:00 and 06:59 are dropped and days run midnight to
    midnight.
    """
    last: dict = {}
    night_days = set()
    for lp, cid in data.tagged():
        if skip_night_days:
            key = lp.local_date
            if lp.local_hour < 7:
                night_days.add(key)
        else:
            key = (lp.local - timedelta(hours=3)).date()
        last[key] = cid
    return Counter(cid for day, cid in last.items() if day not in night_days)


def transition_graph(data: UserData) -> dict[tuple[str, str], float]:
    """Edge weights counting consecutive same-day post pairs that change cluster."""
    edges: dict[tuple[str, str], float] = defaultdict(float)
    tagged = data.tagged()
    for (a, ca), (b, cb) in zip(tagged, tagged[1:]):
        if ca != cb and a.local_date == b.local_date:
            edges[(ca, cb)] += 1.0
    return dict(edges)


def weighted_pagerank(edges: Mapping[tuple[str, str], float], mode: str = "dest",
                      damping: float = PAGERANK_DAMPING,
                      iterations: int = PAGERANK_ITERATIONS) -> dict[str, float]:
    """Damped weighted PageRank; ``orig`` mode ranks the reversed graph.

    Dangling nodes spread their mass uniformly.  At least ``iterations``
    steps are taken; on periodic graphs the error only shrinks by the
    damping factor per step, so iteration continues until the update drops
    below ``PAGERANK_TOL``.  Returns an empty dict for an empty graph.
    """
    if mode not in ("dest", "orig"):
        raise ValueError(f"unknown pagerank mode {mode!r}")
    if mode == "orig":
        edges = {(v, u): w for (u, v), w in edges.items()}
    nodes = sorted({n for e in edges for n in e})
    if not nodes:
        return {}
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    W = np.zeros((n, n))
    for (u, v), w in edges.items():
        W[idx[u], idx[v]] += w
    out_w = W.sum(axis=1)
    dangling = out_w == 0
    P = np.divide(W, out_w[:, None], out=np.zeros_like(W), where=~dangling[:, None])
    r = np.full(n, 1.0 / n)
    for i in range(PAGERANK_MAX_ITERATIONS):
        nxt = pagerank_step(r, P, dangling, damping)
        delta = np.abs(nxt - r).max()
        r = nxt
        if i + 1 >= iterations and delta < PAGERANK_TOL:
            break
    return {v: float(r[i]) for v, i in idx.items()}


def pagerank_step(r: np.ndarray, P: np.ndarray, dangling: np.ndarray, damping: float) -> np.ndarray:
    n = len(r)
    spread = r[dangling].sum() / n
    return (1 - damping) / n + damping * (r @ P + spread)


def train_hour_weights(sample: Iterable[tuple[Mapping[str, Sequence[LocalizedPost]], str]]) -> list[float]:
    """Per-hour share of sample posts that come from the user's home cluster.

    ``sample`` yields ``(posts_by_cluster, home_cluster_id)`` per user.
    """
    total = np.zeros(24)
    home = np.zeros(24)
    for by_cluster, home_id in sample:
        for cid, lps in by_cluster.items():
            for p in lps:
                total[p.local_hour] += 1
                if cid == home_id:
                    home[p.local_hour] += 1
    if total.sum() == 0:
        raise EmptySample("no posts in the weight-training sample")
    return [float(w) for w in np.divide(home, total, out=np.zeros(24), where=total > 0)]


def write_weights(path: str | Path, weights: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for h, w in enumerate(weights):
            fh.write(f"{h},{w!r}\n")


def read_weights(path: str | Path) -> list[float]:
    weights = [0.0] * 24
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("hour"):
                continue
            h, w = line.split(",")
            weights[int(h)] = float(w)
            seen.add(int(h))
    if len(seen) != 24:
        raise ValueError(f"{path}: expected 24 hour rows, got {len(seen)}")
    return weights


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, cum[-1] / 2.0)])


def weighted_estimators(data: UserData, weights: Sequence[float], mode: str,
                        window: tuple[int, int]) -> str | None:
    """WMFV / W-MEAN / W-MEDIAN over the posts inside ``window``."""
    start, end = window
    picked = [(lp, cid) for lp, cid in data.tagged() if in_window(lp.local_hour, start, end)]
    if not picked:
        return None
    w = np.array([weights[lp.local_hour] for lp, _ in picked], dtype=float)
    if mode == "wmfv":
        scores: dict[str, float] = defaultdict(float)
        for wi, (_, cid) in zip(w, picked):
            scores[cid] += wi
        return _argmax(scores, data.clusters)
    if w.sum() <= 0:
        return None
    lat = np.array([data.posts[lp.post_id].coords.lat for lp, _ in picked])
    lon = np.array([data.posts[lp.post_id].coords.lon for lp, _ in picked])
    if mode == "wmean":
        centre = GeoPoint(float(np.average(lat, weights=w)), float(np.average(lon, weights=w)))
    elif mode == "wmedian":
        centre = GeoPoint(_weighted_median(lat, w), _weighted_median(lon, w))
    else:
        raise ValueError(f"unknown estimator mode {mode!r}")
    tie = _rank_key(data.clusters)
    return min(data.clusters, key=lambda c: (haversine_distance(centre, c.midpoint), tie(c.id))).id


def run_baseline(h: HeuristicId | str, data: UserData, weights: Sequence[float] | None = None) -> str | None:
    if isinstance(h, str):
        h = HeuristicId.parse(h)
    if not data.clusters:
        return None
    if h is HeuristicId.H1_LargestCluster:
        return _by_size(data.clusters, 0)
    if h is HeuristicId.H15_SecondLargest:
        return _by_size(data.clusters, 1)
    if h in (HeuristicId.H2_Night20to8, HeuristicId.H3_Night24to7):
        return _argmax(count_in_window(data, *WINDOWS[h]), data.clusters)
    if h is HeuristicId.H4_LastDestBefore3am:
        return _argmax(last_destinations(data), data.clusters)
    if h is HeuristicId.H5_LastDestNoNightDays:
        return _argmax(last_destinations(data, skip_night_days=True), data.clusters)
    if h in (HeuristicId.H6_PageRankDest, HeuristicId.H7_PageRankOrig):
        mode = "dest" if h is HeuristicId.H6_PageRankDest else "orig"
        return _argmax(weighted_pagerank(transition_graph(data), mode), data.clusters)
    if h is HeuristicId.H8_RestLeisureDays:
        return _argmax(unique_days_in_windows(data, [REST, LEISURE]), data.clusters)
    if h is HeuristicId.H14_ActiveFrameWork:
        return _argmax(unique_days_in_windows(data, [WINDOWS[h]]), data.clusters)
    if h in (HeuristicId.H9_WMFV, HeuristicId.H10_WMean, HeuristicId.H11_WMedian):
        mode = {HeuristicId.H9_WMFV: "wmfv", HeuristicId.H10_WMean: "wmean",
                HeuristicId.H11_WMedian: "wmedian"}[h]
        return weighted_estimators(data, weights if weights is not None else [1.0] * 24, mode, WINDOWS[h])
    raise UnknownHeuristic(str(h))
