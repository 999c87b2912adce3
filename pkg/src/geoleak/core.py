"""Domain primitives and geodesic helpers shared across the pipeline."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

EARTH_RADIUS_M = 6_371_000.0
# Meters per degree of latitude on the sphere used by haversine_distance.
M_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0


class GeoleakError(Exception):
    """Base class for pipeline errors."""


class EmptyInput(GeoleakError, ValueError):
    pass


class SourceApp(enum.Enum):
    ANDROID = "android"
    IOS = "ios"
    WEB = "web"
    FOURSQUARE = "foursquare"
    OTHER = "other"


class GeotagKind(enum.Enum):
    GPS = "gps"
    COARSE = "coarse"
    POI = "poi"
    NONE = "none"


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinates: {self.lat}, {self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


_WS = re.compile(r"\s+")


def normalize_address(text: str) -> str:
    return _WS.sub(" ", text).strip().casefold()


@dataclass(frozen=True, slots=True)
class AddressLabel:
    """Postal address attached to a coordinate, or the unknown marker.

    Addresses are stored normalized (case-folded, whitespace collapsed), so
    two labels compare equal iff they name the same address.
    """

    address: str = ""

    def __post_init__(self):
        object.__setattr__(self, "address", normalize_address(self.address))

    @property
    def resolved(self) -> bool:
        return bool(self.address)

    @classmethod
    def unknown(cls) -> "AddressLabel":
        return cls("")

    def __str__(self):
        return self.address if self.address else "<unknown>"


UNKNOWN = AddressLabel.unknown()


@dataclass(frozen=True, slots=True)
class PostRecord:
    post_id: str
    user_id: str
    timestamp_utc: int
    coords: GeoPoint | None = None
    text: str = ""
    source_app: SourceApp = SourceApp.OTHER
    geotag_kind: GeotagKind = GeotagKind.NONE
    place_name: str | None = None

    def __post_init__(self):
        if self.timestamp_utc <= 0:
            raise ValueError(f"{self.post_id}: timestamp must be positive")
        if self.geotag_kind is GeotagKind.GPS and self.coords is None:
            raise ValueError(f"{self.post_id}: gps geotag without coordinates")
        if self.geotag_kind is GeotagKind.NONE and self.coords is not None:
            raise ValueError(f"{self.post_id}: coordinates on an untagged post")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371 km."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    # clamp guards against h drifting above 1 for antipodal pairs
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def geometric_midpoint(points: Iterable[GeoPoint]) -> GeoPoint:
    """Planar mean of lat/lon; adequate for building-scale point sets."""
    n = 0
    slat = slon = 0.0
    for p in points:
        slat += p.lat
        slon += p.lon
        n += 1
    if n == 0:
        raise EmptyInput("midpoint of an empty point set")
    return GeoPoint(slat / n, slon / n)


def offset_point(p: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """Move ``p`` by a small local displacement given in meters."""
    lat = p.lat + north_m / M_PER_DEG
    coslat = max(math.cos(math.radians(p.lat)), 1e-12)
    lon = p.lon + east_m / (M_PER_DEG * coslat)
    return GeoPoint(lat, lon)


class GridIndex:
    """Bucketed point index for fixed-radius neighbour queries.

    Rows are latitude bands of ``cell_m``; inside a row, longitudes are scaled
    by the cosine of the row's latitude so columns are also ~``cell_m`` wide.
    Queries probe every row that can hold a hit and recompute the query's
    column with that row's scale, so candidates are never missed.  Exact
    filtering uses haversine distance.
    """

    def __init__(self, cell_m: float):
        if cell_m <= 0:
            raise ValueError("cell size must be positive")
        self.cell_m = float(cell_m)
        self._cell_deg = self.cell_m / M_PER_DEG
        self._buckets: dict[tuple[int, int], list[tuple[int, GeoPoint, object]]] = {}
        self._seq = 0
        self._scales: dict[int, float] = {}

    def __len__(self):
        return self._seq

    def _row(self, lat: float) -> int:
        return math.floor(lat / self._cell_deg)

    def _col(self, row: int, lon: float) -> int:
        scale = self._scales.get(row)
        if scale is None:
            row_lat = min(89.999, abs((row + 0.5) * self._cell_deg))
            scale = self._scales[row] = max(math.cos(math.radians(row_lat)), 1e-6)
        return math.floor(lon * scale / self._cell_deg)

    def insert(self, point: GeoPoint, item: object) -> None:
        row = self._row(point.lat)
        key = (row, self._col(row, point.lon))
        self._buckets.setdefault(key, []).append((self._seq, point, item))
        self._seq += 1

    def within(self, point: GeoPoint, radius_m: float) -> list[tuple[float, int, object]]:
        """All ``(distance, insertion_seq, item)`` with distance <= radius, nearest first."""
        span = int(radius_m // self.cell_m) + 1
        row0 = self._row(point.lat)
        # great-circle distance is at least the latitude gap; slack absorbs rounding
        max_dlat = radius_m / M_PER_DEG * (1 + 1e-9)
        out = []
        for row in range(row0 - span, row0 + span + 1):
            col0 = self._col(row, point.lon)
            for col in range(col0 - span, col0 + span + 1):
                for seq, p, item in self._buckets.get((row, col), ()):
                    if abs(p.lat - point.lat) > max_dlat:
                        continue
                    d = haversine_distance(point, p)
                    if d <= radius_m:
                        out.append((d, seq, item))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def items(self) -> Iterator[tuple[GeoPoint, object]]:
        for bucket in self._buckets.values():
            for _, p, item in bucket:
                yield p, item

