"""Two-level location clustering.

First level groups posts by address label, with radius-chained density
clustering for posts whose address is unknown.  Second level folds small
neighbouring clusters into the dominant cluster of their area.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from geoleak.core import (
    UNKNOWN,
    AddressLabel,
    GeoPoint,
    GridIndex,
    PostRecord,
    geometric_midpoint,
    haversine_distance,
)

DBSCAN_EPS_M = 30.0
MERGE_RADIUS_M = 50.0


@dataclass(frozen=True)
class FirstLevelCluster:
    id: str
    label: AddressLabel
    members: tuple[str, ...]
    points: tuple[GeoPoint, ...]
    midpoint: GeoPoint

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class Cluster:
    id: str
    label: AddressLabel
    members: tuple[str, ...]
    points: tuple[GeoPoint, ...]
    midpoint: GeoPoint
    max_radius: float
    rank: int
    # midpoint of the dominant first-level cluster before merging
    seed_midpoint: GeoPoint
    parts: tuple[FirstLevelCluster, ...] = field(default=(), repr=False)
    verified: bool = False

    def __len__(self):
        return len(self.members)


def _make_fl(cid: str, label: AddressLabel, members: Sequence[tuple[str, GeoPoint]]) -> FirstLevelCluster:
    pts = tuple(p for _, p in members)
    return FirstLevelCluster(cid, label, tuple(m for m, _ in members), pts, geometric_midpoint(pts))


def _components(points: Sequence[tuple[str, GeoPoint]], eps: float) -> list[list[int]]:
    index = GridIndex(cell_m=max(eps, 1e-3))
    for i, (_, p) in enumerate(points):
        index.insert(p, i)
    seen = [False] * len(points)
    comps = []
    for start in range(len(points)):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for _, _, j in index.within(points[i][1], eps):
                if not seen[j]:
                    seen[j] = True
                    comp.append(j)
                    queue.append(j)
        comps.append(sorted(comp))
    return comps


def density_cluster_unknown(points: Sequence[tuple[str, GeoPoint]], eps: float = DBSCAN_EPS_M,
                            id_prefix: str = "u") -> list[FirstLevelCluster]:
    """DBSCAN with a minimum neighbourhood of one: every point is a core point.

    Points closer than or exactly ``eps`` meters are linked and each
    connected component becomes one cluster, so chains can span more than
    ``eps`` end to end.
    """
    clusters = [_make_fl("", UNKNOWN, [points[i] for i in comp]) for comp in _components(points, eps)]
    # rounding keeps ids stable against summation noise in the midpoint
    clusters.sort(key=lambda c: (round(c.midpoint.lat, 6), round(c.midpoint.lon, 6), min(c.members)))
    return [
        FirstLevelCluster(f"{id_prefix}{i:04d}", c.label, c.members, c.points, c.midpoint)
        for i, c in enumerate(clusters)
    ]


def first_level(posts: Sequence[PostRecord], labels: Mapping[str, AddressLabel],
                eps: float = DBSCAN_EPS_M) -> list[FirstLevelCluster]:
    by_address: dict[str, list[tuple[str, GeoPoint]]] = {}
    unknown: list[tuple[str, GeoPoint]] = []
    for post in posts:
        if post.coords is None:
            raise ValueError(f"post {post.post_id} has no coordinates")
        label = labels[post.post_id]
        if label.resolved:
            by_address.setdefault(label.address, []).append((post.post_id, post.coords))
        else:
            unknown.append((post.post_id, post.coords))
    out = [
        _make_fl(f"a{i:04d}", AddressLabel(addr), members)
        for i, (addr, members) in enumerate(sorted(by_address.items()))
    ]
    out.extend(density_cluster_unknown(unknown, eps))
    return out


def _size_order(c) -> tuple[int, str]:
    return (-len(c.members), c.id)


def second_level_merge(fl: Sequence[FirstLevelCluster], radius: float = MERGE_RADIUS_M) -> list[Cluster]:
    """Absorb clusters lying within ``radius`` of a larger dominant cluster.

    Dominants are visited largest first (ties by id).  Distances are always
    measured from the dominant's own pre-merge midpoint, so absorption does
    not cascade.
    """
    order = sorted(fl, key=_size_order)
    pos = {c.id: i for i, c in enumerate(order)}
    index = GridIndex(cell_m=max(radius, 1.0))
    for c in order:
        index.insert(c.midpoint, c.id)
    taken = [False] * len(order)
    merged = []
    for i, dom in enumerate(order):
        if taken[i]:
            continue
        taken[i] = True
        group = [dom]
        for _, _, cid in index.within(dom.midpoint, radius):
            j = pos[cid]
            if not taken[j]:
                taken[j] = True
                group.append(order[j])
        merged.append(group)
    return _finalize(merged)


def _finalize(groups: Sequence[Sequence[FirstLevelCluster]]) -> list[Cluster]:
    built = []
    for group in groups:
        dom = group[0]
        members = tuple(m for c in group for m in c.members)
        points = tuple(p for c in group for p in c.points)
        mid = geometric_midpoint(points)
        radius = max(haversine_distance(mid, p) for p in points)
        built.append(Cluster(dom.id, dom.label, members, points, mid, radius, 0, dom.midpoint, tuple(group)))
    built.sort(key=_size_order)
    return [
        Cluster(c.id, c.label, c.members, c.points, c.midpoint, c.max_radius, r, c.seed_midpoint, c.parts)
        for r, c in enumerate(built, 1)
    ]


def promote_first_level(fl: Sequence[FirstLevelCluster]) -> list[Cluster]:
    """Wrap first-level clusters as ranked clusters without any merging."""
    return _finalize([[c] for c in fl])


def merge_violations(clusters: Sequence[Cluster], radius: float = MERGE_RADIUS_M) -> list[tuple[str, str, float]]:
    """Merged parts lying farther than ``radius`` from their dominant's original midpoint."""
    bad = []
    for c in clusters:
        for part in c.parts:
            d = haversine_distance(c.seed_midpoint, part.midpoint)
            if d > radius:
                bad.append((c.id, part.id, d))
    return bad
