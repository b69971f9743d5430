"""Multi-scale place registry: boundary loading, point-in-polygon resolution,
and geographic hierarchy roll-up.

Boundaries are newline-delimited GeoJSON features (one feature per line) with
``properties.id``, ``properties.name``, optional ``properties.parent_id`` and a
Polygon/MultiPolygon geometry in WGS84 lon/lat order.  Loaded place sets are
immutable and safe for unlimited concurrent readers.
"""
from __future__ import annotations

import enum
import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

__all__ = [
    "GeoPoint",
    "GeoScale",
    "Place",
    "PlaceSet",
    "PlaceHierarchy",
    "BoundaryError",
    "HierarchyError",
    "load_places",
    "haversine_km",
    "stable_bucket",
]

EARTH_RADIUS_KM = 6371.0088


class BoundaryError(ValueError):
    """Raised for malformed boundary files or geometry."""


class HierarchyError(KeyError):
    """Raised for invalid scale chains or unknown ancestors."""

    def __str__(self) -> str:  # keep the message readable, not repr()'d
        return self.args[0] if self.args else ""


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A WGS84 coordinate, latitude/longitude in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of [-180, 180]")


class GeoScale(enum.Enum):
    """Geographic hierarchy levels, two families (world and US census)."""

    WORLD_COUNTRY = "world_country"
    WORLD_FIRST_LEVEL_ADMIN = "world_first_level_admin"
    US_STATE = "us_state"
    US_COUNTY = "us_county"
    US_CENSUS_TRACT = "us_census_tract"
    US_CBG = "us_cbg"

    @property
    def family(self) -> str:
        return "world" if self.value.startswith("world") else "us"

    @property
    def rank(self) -> int:
        """0 = coarsest within the family, increasing toward finer units."""
        return _SCALE_RANK[self]

    def is_coarser_than(self, other: "GeoScale") -> bool:
        return self.family == other.family and self.rank < other.rank

    @classmethod
    def from_key(cls, key: str) -> "GeoScale":
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scale {key!r}") from None


_SCALE_RANK = {
    GeoScale.WORLD_COUNTRY: 0,
    GeoScale.WORLD_FIRST_LEVEL_ADMIN: 1,
    GeoScale.US_STATE: 0,
    GeoScale.US_COUNTY: 1,
    GeoScale.US_CENSUS_TRACT: 2,
    GeoScale.US_CBG: 3,
}

# US unit ids are FIPS codes; ancestors are prefixes of these lengths.
FIPS_LENGTH = {
    GeoScale.US_STATE: 2,
    GeoScale.US_COUNTY: 5,
    GeoScale.US_CENSUS_TRACT: 11,
    GeoScale.US_CBG: 12,
}
_FIPS_SCALE_BY_LENGTH = {v: k for k, v in FIPS_LENGTH.items()}

# Multi-polygon representation: polygons -> rings -> (lon, lat) vertex pairs.
# Each polygon's first ring is the exterior; later rings are holes.
Ring = Sequence[tuple[float, float]]
Polygon = Sequence[Ring]
MultiPolygon = Sequence[Polygon]


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in kilometers."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def stable_bucket(place_id: str, n_buckets: int) -> int:
    """Deterministic hash bucket for a place id (stable across processes)."""
    return zlib.crc32(place_id.encode("utf-8")) % n_buckets


# ---------------------------------------------------------------------------
# containment primitives


def _point_in_ring(lon: float, lat: float, ring: Ring) -> bool:
    """Even-odd ray cast; points exactly on an edge or vertex count as inside."""
    inside = False
    x1, y1 = ring[0]
    for i in range(1, len(ring)):
        x2, y2 = ring[i]
        # on-segment check: collinear and within the segment's bbox
        if (
            (x2 - x1) * (lat - y1) == (y2 - y1) * (lon - x1)
            and min(x1, x2) <= lon <= max(x1, x2)
            and min(y1, y2) <= lat <= max(y1, y2)
        ):
            return True
        if (y1 > lat) != (y2 > lat):
            x_cross = x1 + (x2 - x1) * (lat - y1) / (y2 - y1)
            if lon < x_cross:
                inside = not inside
        x1, y1 = x2, y2
    return inside


def polygon_contains(polygon: Polygon, p: GeoPoint) -> bool:
    """Closed-polygon containment with even-odd hole semantics."""
    lon, lat = p.lon, p.lat
    winds = 0
    for ring in polygon:
        if _point_in_ring(lon, lat, ring):
            winds += 1
    # A boundary hit returns True from the ring test; treat any boundary
    # contact as inside by re-checking the exterior/hole edges explicitly.
    if winds % 2 == 1:
        return True
    if winds:
        # even count can still be a hole-boundary contact (closed polygons)
        for ring in polygon:
            if _on_ring_boundary(lon, lat, ring):
                return True
    return False


def _on_ring_boundary(lon: float, lat: float, ring: Ring) -> bool:
    x1, y1 = ring[0]
    for i in range(1, len(ring)):
        x2, y2 = ring[i]
        if (
            (x2 - x1) * (lat - y1) == (y2 - y1) * (lon - x1)
            and min(x1, x2) <= lon <= max(x1, x2)
            and min(y1, y2) <= lat <= max(y1, y2)
        ):
            return True
        x1, y1 = x2, y2
    return False


def multipolygon_contains(mp: MultiPolygon, p: GeoPoint) -> bool:
    return any(polygon_contains(poly, p) for poly in mp)


def _ring_bbox(ring: Ring) -> tuple[float, float, float, float]:
    xs = [v[0] for v in ring]
    ys = [v[1] for v in ring]
    return min(xs), min(ys), max(xs), max(ys)


def _polygon_bbox(polygon: Polygon) -> tuple[float, float, float, float]:
    return _ring_bbox(polygon[0])


def _ring_area_deg2(ring: Ring) -> float:
    # planar shoelace in degree units; only used to pick the largest part
    s = 0.0
    x1, y1 = ring[0]
    for i in range(1, len(ring)):
        x2, y2 = ring[i]
        s += x1 * y2 - x2 * y1
        x1, y1 = x2, y2
    return abs(s) / 2.0


def representative_point(mp: MultiPolygon) -> GeoPoint:
    """An interior label point: centroid if interior, else a scanline midpoint."""
    largest = max(mp, key=lambda poly: _ring_area_deg2(poly[0]))
    ext = largest[0]
    n = len(ext) - 1
    cx = sum(v[0] for v in ext[:n]) / n
    cy = sum(v[1] for v in ext[:n]) / n
    cand = GeoPoint(cy, cx)
    if polygon_contains(largest, cand):
        return cand
    minx, miny, maxx, maxy = _ring_bbox(ext)
    # scan a few latitudes; nudge off vertex latitudes to keep crossings clean
    for frac in (0.5, 0.37, 0.61, 0.23, 0.79):
        lat = miny + (maxy - miny) * frac
        xs: list[float] = []
        for ring in largest:
            x1, y1 = ring[0]
            for i in range(1, len(ring)):
                x2, y2 = ring[i]
                if (y1 > lat) != (y2 > lat):
                    xs.append(x1 + (x2 - x1) * (lat - y1) / (y2 - y1))
                x1, y1 = x2, y2
        xs.sort()
        for j in range(0, len(xs) - 1, 2):
            mid = (xs[j] + xs[j + 1]) / 2.0
            p = GeoPoint(lat, mid)
            if polygon_contains(largest, p):
                return p
    raise BoundaryError("could not place an interior representative point")


@dataclass(frozen=True, slots=True)
class Place:
    """One polygon-bounded geographic unit at a single hierarchy level."""

    id: str
    name: str
    scale: GeoScale
    polygon: MultiPolygon
    parent_id: Optional[str]
    representative_point: GeoPoint


# ---------------------------------------------------------------------------
# bounding-rectangle tree, bulk-loaded by spatial sort (STR packing)

_LEAF_FAN_OUT = 16


class _RTree:
    """Static R-tree over (polygon bbox -> payload) entries.

    Bulk-loaded with sort-tile-recursive packing at fan-out 16; lookups
    return payloads of every entry whose rectangle contains the point.
    """

    __slots__ = ("_root",)

    def __init__(self, entries: list[tuple[float, float, float, float, object]]):
        if not entries:
            self._root = None
            return
        level: list[tuple[float, float, float, float, object]] = [
            (e[0], e[1], e[2], e[3], ("leaf", e[4])) for e in entries
        ]
        while len(level) > _LEAF_FAN_OUT:
            level = self._pack(level)
        root_box = self._merge_box(level)
        self._root = (*root_box, ("node", level))

    @staticmethod
    def _merge_box(items) -> tuple[float, float, float, float]:
        return (
            min(i[0] for i in items),
            min(i[1] for i in items),
            max(i[2] for i in items),
            max(i[3] for i in items),
        )

    def _pack(self, items):
        n = len(items)
        n_groups = math.ceil(n / _LEAF_FAN_OUT)
        n_slices = math.ceil(math.sqrt(n_groups))
        per_slice = math.ceil(n / n_slices)
        items = sorted(items, key=lambda i: (i[0] + i[2], i[1] + i[3]))
        parents = []
        for s in range(0, n, per_slice):
            strip = sorted(items[s : s + per_slice], key=lambda i: (i[1] + i[3], i[0] + i[2]))
            for g in range(0, len(strip), _LEAF_FAN_OUT):
                group = strip[g : g + _LEAF_FAN_OUT]
                box = self._merge_box(group)
                parents.append((*box, ("node", group)))
        return parents

    def query_point(self, lon: float, lat: float) -> list[object]:
        """Payloads of all entries whose rectangle contains (lon, lat)."""
        out: list[object] = []
        if self._root is None:
            return out
        stack = [self._root]
        while stack:
            minx, miny, maxx, maxy, (kind, payload) = stack.pop()
            if lon < minx or lon > maxx or lat < miny or lat > maxy:
                continue
            if kind == "leaf":
                out.append(payload)
            else:
                stack.extend(payload)
        return out


class PlaceSet:
    """Immutable collection of places at one scale with a spatial index."""

    def __init__(self, scale: GeoScale, places: Iterable[Place]):
        self.scale = scale
        self.places: dict[str, Place] = {}
        for pl in places:
            if pl.id in self.places:
                raise BoundaryError(f"duplicate place id {pl.id!r}")
            self.places[pl.id] = pl
        entries = []
        for pl in self.places.values():
            for poly_idx, poly in enumerate(pl.polygon):
                minx, miny, maxx, maxy = _polygon_bbox(poly)
                entries.append((minx, miny, maxx, maxy, (pl.id, poly_idx)))
        self._index = _RTree(entries)

    def __len__(self) -> int:
        return len(self.places)

    def __contains__(self, place_id: str) -> bool:
        return place_id in self.places

    def get(self, place_id: str) -> Optional[Place]:
        return self.places.get(place_id)

    def resolve_point(self, p: GeoPoint) -> Optional[str]:
        """Id of the place containing p, or None when out of coverage.

        Ties (shared borders, overlapping polygons) resolve to the
        lexicographically smallest place id, so results are deterministic
        and identical to the brute-force scan.
        """
        best: Optional[str] = None
        for pid, poly_idx in self._index.query_point(p.lon, p.lat):
            if best is not None and pid >= best:
                continue
            if polygon_contains(self.places[pid].polygon[poly_idx], p):
                best = pid
        return best

    def resolve_point_naive(self, p: GeoPoint) -> Optional[str]:
        """Reference scan: full containment test against every polygon."""
        best: Optional[str] = None
        for pid, pl in self.places.items():
            if best is not None and pid >= best:
                continue
            if multipolygon_contains(pl.polygon, p):
                best = pid
        return best


def _normalize_geometry(geom: dict, fid: str) -> MultiPolygon:
    gtype = geom.get("type")
    if gtype == "Polygon":
        polys = [geom["coordinates"]]
    elif gtype == "MultiPolygon":
        polys = geom["coordinates"]
    else:
        raise BoundaryError(f"feature {fid!r}: unsupported geometry type {gtype!r}")
    out: list[list[list[tuple[float, float]]]] = []
    for poly in polys:
        rings = []
        for ring in poly:
            if len(ring) < 4:
                raise BoundaryError(f"feature {fid!r}: ring with fewer than 4 vertices")
            pts = [(float(x), float(y)) for x, y in ring]
            if pts[0] != pts[-1]:
                raise BoundaryError(f"feature {fid!r}: ring not closed")
            lons = [x for x, _ in pts]
            if max(lons) - min(lons) > 180.0:
                raise BoundaryError(
                    f"feature {fid!r}: ring spans more than 180 degrees of longitude "
                    "(split antimeridian-crossing polygons before loading)"
                )
            for x, y in pts:
                if not (-180.0 <= x <= 180.0 and -90.0 <= y <= 90.0):
                    raise BoundaryError(f"feature {fid!r}: coordinate ({x}, {y}) out of range")
            rings.append(tuple(pts))
        out.append(tuple(rings))
    return tuple(out)


def _derive_parent(pid: str, scale: GeoScale, explicit: Optional[str]) -> Optional[str]:
    if explicit:
        return explicit
    if scale.family == "us" and scale.rank > 0:
        parent_scale = next(s for s, r in _SCALE_RANK.items() if s.family == "us" and r == scale.rank - 1)
        width = FIPS_LENGTH[parent_scale]
        if len(pid) == FIPS_LENGTH[scale] and pid.isdigit():
            return pid[:width]
    return None


def load_places(scale: GeoScale, boundary_path: str) -> PlaceSet:
    """Load one scale's boundary file into an indexed PlaceSet.

    Parent ids come from an explicit ``parent_id`` property when present,
    otherwise from FIPS prefix truncation for US scales.
    """
    places: list[Place] = []
    with open(boundary_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                feature = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BoundaryError(f"{boundary_path}:{line_no}: invalid JSON ({exc})") from exc
            props = feature.get("properties") or {}
            fid = props.get("id") or feature.get("id")
            if not fid:
                raise BoundaryError(f"{boundary_path}:{line_no}: feature without an id")
            fid = str(fid)
            geom = feature.get("geometry")
            if not geom:
                raise BoundaryError(f"feature {fid!r}: missing geometry")
            mp = _normalize_geometry(geom, fid)
            places.append(
                Place(
                    id=fid,
                    name=str(props.get("name", fid)),
                    scale=scale,
                    polygon=mp,
                    parent_id=_derive_parent(fid, scale, props.get("parent_id")),
                    representative_point=representative_point(mp),
                )
            )
    return PlaceSet(scale, places)


class PlaceHierarchy:
    """Scale-keyed registry of place sets and centroid tables.

    Upward mapping uses FIPS prefix truncation for the US family and explicit
    parent links for the world family.  Centroid tables register id -> point
    mappings for scales where full polygons are not loaded (e.g. block groups).
    """

    def __init__(self) -> None:
        self.sets: dict[GeoScale, PlaceSet] = {}
        self.centroids: dict[GeoScale, dict[str, GeoPoint]] = {}

    def register(self, place_set: PlaceSet) -> "PlaceHierarchy":
        self.sets[place_set.scale] = place_set
        return self

    def register_centroids(self, scale: GeoScale, table: dict[str, GeoPoint]) -> "PlaceHierarchy":
        self.centroids[scale] = dict(table)
        return self

    def has_scale(self, scale: GeoScale) -> bool:
        return scale in self.sets or scale in self.centroids

    def has_place(self, scale: GeoScale, place_id: str) -> bool:
        if scale in self.sets and place_id in self.sets[scale]:
            return True
        return place_id in self.centroids.get(scale, ())

    def representative_point(self, scale: GeoScale, place_id: str) -> Optional[GeoPoint]:
        ps = self.sets.get(scale)
        if ps is not None:
            pl = ps.get(place_id)
            if pl is not None:
                return pl.representative_point
        return self.centroids.get(scale, {}).get(place_id)

    def scale_of(self, place_id: str) -> GeoScale:
        for scale, ps in self.sets.items():
            if place_id in ps:
                return scale
        for scale, table in self.centroids.items():
            if place_id in table:
                return scale
        if place_id.isdigit() and len(place_id) in _FIPS_SCALE_BY_LENGTH:
            return _FIPS_SCALE_BY_LENGTH[len(place_id)]
        raise HierarchyError(f"unknown place {place_id!r}")

    def parent_at(self, place_id: str, target: GeoScale, own_scale: Optional[GeoScale] = None) -> str:
        """Ancestor id of place_id at the target scale (identity at own scale)."""
        own = own_scale or self.scale_of(place_id)
        if own.family != target.family:
            raise HierarchyError(f"scale {target.value} is not in the {own.family} family")
        if target.rank > own.rank:
            raise HierarchyError(f"target scale {target.value} is finer than {own.value}")
        if target is own:
            return place_id
        if own.family == "us":
            if not place_id.isdigit() or len(place_id) != FIPS_LENGTH[own]:
                raise HierarchyError(f"place {place_id!r} is not a {FIPS_LENGTH[own]}-digit FIPS code")
            ancestor = place_id[: FIPS_LENGTH[target]]
            if self.has_scale(target) and not self.has_place(target, ancestor):
                raise HierarchyError(f"no ancestor {ancestor!r} at {target.value} for orphan {place_id!r}")
            return ancestor
        # world family: follow explicit parent links one level at a time
        current = place_id
        current_scale = own
        while current_scale is not target:
            ps = self.sets.get(current_scale)
            pl = ps.get(current) if ps is not None else None
            if pl is None or not pl.parent_id:
                raise HierarchyError(f"no ancestor at {target.value} for orphan {current!r}")
            current = pl.parent_id
            current_scale = next(
                s for s, r in _SCALE_RANK.items() if s.family == "world" and r == current_scale.rank - 1
            )
        if self.has_scale(target) and not self.has_place(target, current):
            raise HierarchyError(f"no ancestor {current!r} at {target.value} for orphan {place_id!r}")
        return current
