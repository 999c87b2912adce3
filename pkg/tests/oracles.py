"""Independent reference implementations used as test oracles."""

import math
from datetime import timedelta

import numpy as np

from geoleak.core import haversine_distance


def np_haversine_matrix(lat, lon, radius=6_371_000.0):
    phi = np.radians(lat)
    lam = np.radians(lon)
    dphi = phi[:, None] - phi[None, :]
    dlam = lam[:, None] - lam[None, :]
    h = np.sin(dphi / 2) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(h, 0, 1)))


def union_find_partition(ids, lat, lon, eps):
    """Reference partition: connected components of the <= eps graph."""
    n = len(ids)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        d = np_haversine_matrix(np.asarray(lat), np.asarray(lon))
        for i, j in zip(*np.nonzero(np.triu(d <= eps, k=1))):
            parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(ids[i])
    return {frozenset(g) for g in groups.values()}


def brute_tfidf(target, docs, k):
    """Full score table by explicit counting, sorted by (-score, term)."""
    nonempty = [d for d in docs if len(d) > 0]
    n = len(nonempty)
    table = []
    for term in sorted(set(target)):
        tf = 0
        for tok in target:
            if tok == term:
                tf += 1
        df = 0
        for d in nonempty:
            if term in d:
                df += 1
        table.append((term, tf * (math.log((1 + n) / (1 + df)) + 1)))
    table.sort(key=lambda r: (-r[1], r[0]))
    return table[:k]


def reference_merge(fl, radius=50.0):
    """Quadratic sweep: largest first, distance from each dominant's original midpoint."""
    order = sorted(fl, key=lambda c: (-len(c.members), c.id))
    taken = set()
    groups = []
    for dom in order:
        if dom.id in taken:
            continue
        taken.add(dom.id)
        group = [dom]
        for c in order:
            if c.id not in taken and haversine_distance(dom.midpoint, c.midpoint) <= radius:
                taken.add(c.id)
                group.append(c)
        groups.append(frozenset(m for c in group for m in c.members))
    return set(groups)


def frame_hours_by_walking(start, end):
    """Hour bins touched by [start, end], found by stepping through the clock."""
    hours = set()
    t = start.replace(minute=0, second=0, microsecond=0)
    while t <= end:
        hours.add(t.hour)
        t += timedelta(hours=1)
    return hours


def brute_dominant_frame(frames):
    out = set()
    for h in range(24):
        hits = 0
        for f in frames:
            if h in frame_hours_by_walking(f.start, f.end):
                hits += 1
        if hits > len(frames) / 2:
            out.add(h)
    return out
