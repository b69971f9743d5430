"""Flow queries over ODT cubes: choropleth totals, daily series, flow-map
record lists, and CSV export.

All operations are pure functions over immutable cubes, so results never
depend on partition layout and concurrent callers are safe.  Directions
follow the portal semantics: inflow counts arrivals from other places,
outflow departures to other places, in_and_out their sum, and intraflow the
diagonal (same-place) movements, which only time-series queries accept.
"""
from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from .cube import MICRO, DateRange, MatrixKind, OdtCube, slice_cube
from .geo import GeoPoint

__all__ = [
    "FlowDirection",
    "BoundingBox",
    "DailySeries",
    "FlowRecord",
    "QueryError",
    "PlaceNotFoundError",
    "place_flow_totals",
    "daily_movement_series",
    "all_places_daily_series",
    "od_flow_list",
    "export_flows",
    "export_flows_lines",
]


class QueryError(ValueError):
    """Raised for invalid query parameters."""


class PlaceNotFoundError(QueryError):
    """Raised when a requested place id is unknown to the cube."""


class FlowDirection(enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    IN_AND_OUT = "in_and_out"
    INTRAFLOW = "intraflow"

    @classmethod
    def from_key(cls, key: str) -> "FlowDirection":
        try:
            return cls(key)
        except ValueError:
            raise QueryError(f"unknown direction {key!r}") from None


@dataclass(frozen=True, slots=True)
class BoundingBox:
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise QueryError("bounding box min exceeds max")
        if not (-90 <= self.min_lat <= 90 and -90 <= self.max_lat <= 90
                and -180 <= self.min_lon <= 180 and -180 <= self.max_lon <= 180):
            raise QueryError("bounding box out of coordinate range")

    def contains(self, lat: float, lon: float) -> bool:
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon


@dataclass(frozen=True)
class DailySeries:
    """Gapless per-day counts for one place and direction."""

    place: str
    direction: FlowDirection
    points: tuple[tuple[dt.date, int], ...]

    def total(self) -> int:
        return sum(n for _, n in self.points)


@dataclass(frozen=True, slots=True)
class FlowRecord:
    """One downloadable flow row; coordinates are cell mean centers."""

    o_place: str
    d_place: str
    cnt: int
    o_lat: float
    o_lon: float
    d_lat: float
    d_lon: float
    year: Optional[int] = None
    month: Optional[int] = None
    day: Optional[int] = None


def _place_code(cube: OdtCube, place: str) -> int:
    code = cube.code.get(place)
    if code is None:
        raise PlaceNotFoundError(f"unknown place {place!r} at scale {cube.scale.value}")
    return code


def place_flow_totals(
    cube: OdtCube, place: str, direction: FlowDirection, rng: DateRange
) -> dict[str, int]:
    """Aggregated flows between one place and every other place.

    Inflow sums arrivals keyed by origin, outflow departures keyed by
    destination, in_and_out both; the place's own intra cell is excluded.
    """
    if direction is FlowDirection.INTRAFLOW:
        raise QueryError("intraflow is not valid for place totals; use daily_movement_series")
    code = _place_code(cube, place)
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()
    acc = np.zeros(len(cube.place_ids), dtype=np.int64)
    for part in cube.partitions_in_range(rng):
        in_range = (part.date >= lo) & (part.date <= hi)
        if direction in (FlowDirection.INFLOW, FlowDirection.IN_AND_OUT):
            mask = in_range & (part.dest == code) & (part.origin != code)
            np.add.at(acc, part.origin[mask].astype(np.int64), part.count[mask])
        if direction in (FlowDirection.OUTFLOW, FlowDirection.IN_AND_OUT):
            mask = in_range & (part.origin == code) & (part.dest != code)
            np.add.at(acc, part.dest[mask].astype(np.int64), part.count[mask])
    nz = np.flatnonzero(acc)
    return {cube.place_ids[i]: int(acc[i]) for i in nz}


def _daily_counts(cube: OdtCube, code: int, direction: FlowDirection, rng: DateRange) -> np.ndarray:
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()
    acc = np.zeros(rng.n_days, dtype=np.int64)
    for part in cube.partitions_in_range(rng):
        in_range = (part.date >= lo) & (part.date <= hi)
        if direction is FlowDirection.INFLOW:
            mask = in_range & (part.dest == code) & (part.origin != code)
        elif direction is FlowDirection.OUTFLOW:
            mask = in_range & (part.origin == code) & (part.dest != code)
        elif direction is FlowDirection.INTRAFLOW:
            mask = in_range & (part.origin == code) & (part.dest == code)
        else:
            mask = in_range & ((part.origin == code) != (part.dest == code))
        np.add.at(acc, part.date[mask].astype(np.int64) - lo, part.count[mask])
    return acc


def daily_movement_series(
    cube: OdtCube, place: str, direction: FlowDirection, rng: DateRange
) -> DailySeries:
    """Per-day movement counts for a place, gapless (absent days read 0)."""
    code = _place_code(cube, place)
    acc = _daily_counts(cube, code, direction, rng)
    days = list(rng.days())
    return DailySeries(place, direction, tuple((d, int(n)) for d, n in zip(days, acc)))


def all_places_daily_series(
    cube: OdtCube, direction: FlowDirection, rng: DateRange
) -> Iterator[tuple[str, dt.date, int]]:
    """(place, date, count) rows for every place in the cube, gapless, ordered
    by place then date.  Vectorized equivalent of per-place daily series."""
    n_places = len(cube.place_ids)
    n_days = rng.n_days
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()
    acc = np.zeros(n_places * n_days, dtype=np.int64)
    for part in cube.partitions_in_range(rng):
        in_range = (part.date >= lo) & (part.date <= hi)
        intra = part.origin == part.dest
        def scatter(place_codes, mask):
            idx = place_codes[mask].astype(np.int64) * n_days + (part.date[mask].astype(np.int64) - lo)
            np.add.at(acc, idx, part.count[mask])
        if direction is FlowDirection.INFLOW:
            scatter(part.dest, in_range & ~intra)
        elif direction is FlowDirection.OUTFLOW:
            scatter(part.origin, in_range & ~intra)
        elif direction is FlowDirection.INTRAFLOW:
            scatter(part.origin, in_range & intra)
        else:
            scatter(part.dest, in_range & ~intra)
            scatter(part.origin, in_range & ~intra)
    days = list(rng.days())
    for p in range(n_places):
        base = p * n_days
        pid = cube.place_ids[p]
        for k in range(n_days):
            yield pid, days[k], int(acc[base + k])


def od_flow_list(
    cube: OdtCube,
    rng: DateRange,
    direction: FlowDirection = FlowDirection.IN_AND_OUT,
    aoi: Optional[BoundingBox] = None,
    min_count: int = 0,
) -> list[FlowRecord]:
    """Range-aggregated inter-place OD records with count strictly above
    min_count.  An AOI keeps records whose relevant endpoint center falls in
    the box: destination for inflow, origin for outflow, either for both."""
    if direction is FlowDirection.INTRAFLOW:
        raise QueryError("intraflow is not valid for OD flow lists")
    matrix = slice_cube(cube, MatrixKind.OD, rng)
    records: list[FlowRecord] = []
    for (o_id, d_id), entry in matrix.entries.items():
        if o_id == d_id or entry.count <= min_count:
            continue
        if aoi is not None:
            oc, dc = entry.o_center, entry.d_center
            if direction is FlowDirection.INFLOW:
                keep = aoi.contains(dc.lat, dc.lon)
            elif direction is FlowDirection.OUTFLOW:
                keep = aoi.contains(oc.lat, oc.lon)
            else:
                keep = aoi.contains(oc.lat, oc.lon) or aoi.contains(dc.lat, dc.lon)
            if not keep:
                continue
        records.append(FlowRecord(
            o_id, d_id, entry.count,
            entry.o_center.lat, entry.o_center.lon,
            entry.d_center.lat, entry.d_center.lon,
        ))
    records.sort(key=lambda r: (r.o_place, r.d_place))
    return records


Area = Union[set[str], frozenset[str], BoundingBox, None]


def _area_keeps(area: Area, o_id: str, d_id: str, o_center: GeoPoint, d_center: GeoPoint) -> bool:
    if area is None:
        return True
    if isinstance(area, BoundingBox):
        return area.contains(o_center.lat, o_center.lon) or area.contains(d_center.lat, d_center.lon)
    return o_id in area or d_id in area


def export_flows_lines(
    cube: OdtCube,
    rng: DateRange,
    aggregation: str = "daily",
    area: Area = None,
    min_count: int = 0,
    suppress_below: int = 0,
) -> Iterator[str]:
    """CSV rows (header first) for the filtered subcube.

    ``daily`` emits one row per cell with year/month/day columns; ``aggregated``
    emits one row per (origin, destination) pair over the range, carrying
    year/month columns only when the range stays inside one calendar month.
    ``suppress_below`` drops cells under a privacy floor before any totals
    are formed; the default leaves results untouched.
    """
    if aggregation not in ("daily", "aggregated"):
        raise QueryError(f"aggregation must be daily or aggregated, got {aggregation!r}")
    if min_count < 0:
        raise QueryError("min_count must be >= 0")

    if aggregation == "daily":
        yield "o_place,d_place,year,month,day,cnt,o_lat,o_lon,d_lat,d_lon"
        for cell in _filtered_cells(cube, rng, area, min_count, suppress_below):
            o_id, d_id, day, cnt, oc, dc = cell
            yield (
                f"{o_id},{d_id},{day.year},{day.month},{day.day},{cnt},"
                f"{oc.lat:.6f},{oc.lon:.6f},{dc.lat:.6f},{dc.lon:.6f}"
            )
        return

    single_month = (rng.begin.year, rng.begin.month) == (rng.end.year, rng.end.month)
    if single_month:
        yield "o_place,d_place,year,month,cnt,o_lat,o_lon,d_lat,d_lon"
        prefix = f"{rng.begin.year},{rng.begin.month},"
    else:
        yield "o_place,d_place,cnt,o_lat,o_lon,d_lat,d_lon"
        prefix = ""
    for o_id, d_id, cnt, oc, dc in _aggregated_cells(cube, rng, area, min_count, suppress_below):
        yield (
            f"{o_id},{d_id},{prefix}{cnt},"
            f"{oc.lat:.6f},{oc.lon:.6f},{dc.lat:.6f},{dc.lon:.6f}"
        )


def export_flows(
    cube: OdtCube,
    rng: DateRange,
    aggregation: str = "daily",
    area: Area = None,
    min_count: int = 0,
    suppress_below: int = 0,
) -> str:
    return "\n".join(export_flows_lines(cube, rng, aggregation, area, min_count, suppress_below)) + "\n"


def _sorted_range_rows(cube: OdtCube, rng: DateRange):
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()
    chunks = []
    for part in cube.partitions_in_range(rng):
        mask = (part.date >= lo) & (part.date <= hi)
        if mask.any():
            chunks.append(tuple(c[mask] for c in part.columns()))
    if not chunks:
        return None
    cols = [np.concatenate([ch[i] for ch in chunks]).astype(np.int64) for i in range(8)]
    order = np.lexsort((cols[2], cols[1], cols[0]))
    return [c[order] for c in cols]


def _filtered_cells(cube, rng, area, min_count, suppress_below):
    cols = _sorted_range_rows(cube, rng)
    if cols is None:
        return
    o, d, t, n, so_lat, so_lon, sd_lat, sd_lon = cols
    ids = cube.place_ids
    for i in range(len(o)):
        cnt = int(n[i])
        if cnt < suppress_below or cnt <= min_count:
            continue
        o_id, d_id = ids[int(o[i])], ids[int(d[i])]
        scale = cnt * MICRO
        oc = GeoPoint(int(so_lat[i]) / scale, int(so_lon[i]) / scale)
        dc = GeoPoint(int(sd_lat[i]) / scale, int(sd_lon[i]) / scale)
        if not _area_keeps(area, o_id, d_id, oc, dc):
            continue
        yield o_id, d_id, dt.date.fromordinal(int(t[i])), cnt, oc, dc


def _aggregated_cells(cube, rng, area, min_count, suppress_below):
    cols = _sorted_range_rows(cube, rng)
    if cols is None:
        return
    o, d, t, n, so_lat, so_lon, sd_lat, sd_lon = cols
    if suppress_below > 1:
        keep = n >= suppress_below
        o, d, n = o[keep], d[keep], n[keep]
        so_lat, so_lon, sd_lat, sd_lon = so_lat[keep], so_lon[keep], sd_lat[keep], sd_lon[keep]
        if len(o) == 0:
            return
    boundary = np.empty(len(o), dtype=bool)
    boundary[0] = True
    np.not_equal(o[1:], o[:-1], out=boundary[1:])
    boundary[1:] |= d[1:] != d[:-1]
    starts = np.flatnonzero(boundary)
    go, gd = o[starts], d[starts]
    sums = [np.add.reduceat(c, starts) for c in (n, so_lat, so_lon, sd_lat, sd_lon)]
    ids = cube.place_ids
    for i in range(len(go)):
        cnt = int(sums[0][i])
        if cnt <= min_count:
            continue
        o_id, d_id = ids[int(go[i])], ids[int(gd[i])]
        scale = cnt * MICRO
        oc = GeoPoint(int(sums[1][i]) / scale, int(sums[2][i]) / scale)
        dc = GeoPoint(int(sums[3][i]) / scale, int(sums[4][i]) / scale)
        if not _area_keeps(area, o_id, d_id, oc, dc):
            continue
        yield o_id, d_id, cnt, oc, dc
