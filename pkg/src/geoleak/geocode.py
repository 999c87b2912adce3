"""Reverse geocoding: file-backed providers, the proximity cache, and label verification."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, Sequence

from geoleak.core import UNKNOWN, AddressLabel, GeoleakError, GeoPoint, GridIndex

log = logging.getLogger(__name__)

CACHE_RADIUS_M = 2.0
SEED_FALLBACK_M = 40.0
VERIFY_TOP_K = 10


class ProviderError(GeoleakError):
    pass


class GeocodeProvider(Protocol):
    provider_id: str

    def lookup(self, p: GeoPoint) -> AddressLabel: ...


def _point_in_polygon(p: GeoPoint, ring: Sequence[tuple[float, float]]) -> bool:
    # even-odd ray cast in the lon/lat plane
    inside = False
    x, y = p.lon, p.lat
    n = len(ring)
    for i in range(n):
        lat1, lon1 = ring[i]
        lat2, lon2 = ring[(i + 1) % n]
        if (lat1 > y) != (lat2 > y):
            xcross = lon1 + (y - lat1) * (lon2 - lon1) / (lat2 - lat1)
            if x < xcross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class _Polygon:
    address: AddressLabel
    ring: tuple[tuple[float, float], ...]
    bbox: tuple[float, float, float, float]  # min_lat, min_lon, max_lat, max_lon

    def contains(self, p: GeoPoint) -> bool:
        min_lat, min_lon, max_lat, max_lon = self.bbox
        if not (min_lat <= p.lat <= max_lat and min_lon <= p.lon <= max_lon):
            return False
        return _point_in_polygon(p, self.ring)


class FileGeocodeProvider:
    """Reverse geocoder backed by an address table.

    Each record carries an ``address`` and either a seed point (``lat``,
    ``lon``) or a ``polygon`` of ``[lat, lon]`` pairs.  Lookup returns the
    first polygon containing the point, else the nearest seed within
    ``fallback_m``, else the unknown label.
    """

    def __init__(self, records: Sequence[dict] = (), provider_id: str = "file",
                 fallback_m: float = SEED_FALLBACK_M):
        self.provider_id = provider_id
        self.fallback_m = fallback_m
        self.calls = 0
        self._polygons: list[_Polygon] = []
        self._seeds = GridIndex(cell_m=max(fallback_m, 1.0))
        for rec in records:
            self.add(rec)

    def add(self, rec: dict) -> None:
        label = AddressLabel(rec["address"])
        if not label.resolved:
            raise ValueError("geocode record with empty address")
        if "polygon" in rec:
            ring = tuple((float(a), float(b)) for a, b in rec["polygon"])
            if len(ring) < 3:
                raise ValueError(f"polygon for {label} needs >= 3 vertices")
            lats = [r[0] for r in ring]
            lons = [r[1] for r in ring]
            self._polygons.append(_Polygon(label, ring, (min(lats), min(lons), max(lats), max(lons))))
        else:
            self._seeds.insert(GeoPoint(float(rec["lat"]), float(rec["lon"])), label)

    @classmethod
    def from_file(cls, path: str | Path, provider_id: str | None = None,
                  fallback_m: float = SEED_FALLBACK_M) -> "FileGeocodeProvider":
        with open(path, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        return cls(records, provider_id=provider_id or f"file:{Path(path).name}", fallback_m=fallback_m)

    def lookup(self, p: GeoPoint) -> AddressLabel:
        self.calls += 1
        for poly in self._polygons:
            if poly.contains(p):
                return poly.address
        hits = self._seeds.within(p, self.fallback_m)
        if hits:
            return hits[0][2]
        return UNKNOWN


class ProximityCache:
    """Labels already obtained from a provider, keyed by location.

    A query is answered from the cache when a stored point lies strictly
    closer than ``radius_m``.  Reads may run concurrently; inserts are
    serialized under a lock.
    """

    def __init__(self, radius_m: float = CACHE_RADIUS_M):
        self.radius_m = radius_m
        # cell slightly wider than the radius keeps probing to a 3x3 block;
        # radius 0 disables reuse but still needs a valid cell size
        self._index = GridIndex(cell_m=max(radius_m * 1.25, 1.0))
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._index)

    def nearest(self, p: GeoPoint) -> AddressLabel | None:
        for dist, _, label in self._index.within(p, self.radius_m):
            if dist < self.radius_m:
                return label
        return None

    def insert(self, p: GeoPoint, label: AddressLabel) -> None:
        with self._lock:
            self._index.insert(p, label)


def cached_reverse_geocode(p: GeoPoint, cache: ProximityCache, provider: GeocodeProvider) -> AddressLabel:
    """Label ``p``, reusing a cached label from within the cache radius.

    Provider failures propagate and nothing is cached for ``p``.
    """
    label = cache.nearest(p)
    if label is not None:
        with cache._lock:
            cache.hits += 1
        return label
    label = provider.lookup(p)
    cache.insert(p, label)
    with cache._lock:
        cache.misses += 1
    return label


def label_points(points: Sequence[tuple[str, GeoPoint]], cache: ProximityCache,
                 provider: GeocodeProvider, diagnostics: list[str] | None = None) -> dict[str, AddressLabel]:
    """Label every ``(post_id, point)``; provider failures become unknown labels."""
    labels = {}
    for pid, point in points:
        try:
            labels[pid] = cached_reverse_geocode(point, cache, provider)
        except ProviderError as exc:
            labels[pid] = UNKNOWN
            if diagnostics is not None:
                diagnostics.append(f"geocode failed for {pid}: {exc}")
    return labels


def verify_cluster_addresses(clusters: Sequence, authoritative: GeocodeProvider, k: int = VERIFY_TOP_K,
                             diagnostics: list[str] | None = None) -> list:
    """Re-geocode the midpoints of the ``k`` best-ranked clusters.

    A resolved answer that differs from the current label replaces it.
    Clusters outside the top ``k`` are returned untouched.
    """
    out = []
    for c in clusters:
        if c.rank > k:
            out.append(c)
            continue
        try:
            label = authoritative.lookup(c.midpoint)
        except ProviderError as exc:
            if diagnostics is not None:
                diagnostics.append(f"verification failed for cluster {c.id}: {exc}")
            out.append(c)
            continue
        if label.resolved and label != c.label:
            log.debug("cluster %s relabeled %s -> %s", c.id, c.label, label)
            c = replace(c, label=label, verified=True)
        else:
            c = replace(c, verified=True)
        out.append(c)
    return out
