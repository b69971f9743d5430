"""Sparse origin-destination-time cubes: aggregation, roll-up, and slicing.

Cells are keyed by (origin place, destination place, day) and partitioned by
calendar month and a 16-way hash of the origin id, so range and origin filters
prune whole partitions.  Columns are numpy arrays; flow-endpoint mean centers
are carried as integer micro-degree weighted sums, which makes every
aggregation exact and order-independent (roll-ups commute bit for bit).
"""
from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .extraction import EntityFlow
from .geo import FIPS_LENGTH, GeoPoint, GeoScale, PlaceHierarchy, PlaceSet, stable_bucket

__all__ = [
    "Source",
    "DateRange",
    "OdtCell",
    "Partition",
    "OdtCube",
    "FlowMatrix",
    "MatrixEntry",
    "MatrixKind",
    "CubeError",
    "CubeAccumulator",
    "build_cube",
    "rollup",
    "slice_cube",
    "dice",
    "cube_from_cells",
    "cube_from_columns",
]

N_BUCKETS = 16
MICRO = 1_000_000


class CubeError(ValueError):
    """Raised for invalid cube construction or operations."""


class Source(enum.Enum):
    """Counting semantics of a cube's underlying mobility source."""

    TWITTER_LIKE = "twitter_like"  # distinct entities per cell
    SDM_LIKE = "sdm_like"  # summed device weights

    @classmethod
    def from_key(cls, key: str) -> "Source":
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown source {key!r}") from None


@dataclass(frozen=True, slots=True)
class DateRange:
    """Inclusive day range."""

    begin: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.begin > self.end:
            raise CubeError(f"range begin {self.begin} after end {self.end}")

    def __contains__(self, day: dt.date) -> bool:
        return self.begin <= day <= self.end

    def days(self) -> Iterator[dt.date]:
        day = self.begin
        one = dt.timedelta(days=1)
        while day <= self.end:
            yield day
            day += one

    @property
    def n_days(self) -> int:
        return (self.end - self.begin).days + 1


@dataclass(frozen=True, slots=True)
class OdtCell:
    """Materialized view of one cube cell."""

    origin: str
    dest: str
    date: dt.date
    count: int
    o_center: GeoPoint
    d_center: GeoPoint

    @property
    def is_intra(self) -> bool:
        return self.origin == self.dest


@dataclass(frozen=True)
class Partition:
    """One immutable columnar block of cells for a (month, origin-bucket) key."""

    month: str  # YYYYMM
    bucket: int
    origin: np.ndarray  # int32 dictionary codes
    dest: np.ndarray  # int32 dictionary codes
    date: np.ndarray  # int32 proleptic ordinals
    count: np.ndarray  # int64
    o_lat: np.ndarray  # int64, micro-degree * weight sums
    o_lon: np.ndarray
    d_lat: np.ndarray
    d_lon: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(len(self.origin))

    def columns(self) -> tuple[np.ndarray, ...]:
        return (self.origin, self.dest, self.date, self.count,
                self.o_lat, self.o_lon, self.d_lat, self.d_lon)


def _month_str(ordinal: int) -> str:
    d = dt.date.fromordinal(int(ordinal))
    return f"{d.year:04d}{d.month:02d}"


_EPOCH_ORDINAL = dt.date(1970, 1, 1).toordinal()


def _month_index(ordinals: np.ndarray) -> np.ndarray:
    """Months since 1970-01 for an array of proleptic ordinals."""
    days = (ordinals.astype(np.int64) - _EPOCH_ORDINAL).astype("timedelta64[D]")
    d64 = np.datetime64("1970-01-01") + days
    return d64.astype("datetime64[M]").astype(np.int64)


def _month_index_str(idx: int) -> str:
    return f"{1970 + idx // 12:04d}{idx % 12 + 1:02d}"


class OdtCube:
    """Immutable partitioned ODT cube at a fixed scale and source."""

    def __init__(
        self,
        source: Source,
        scale: GeoScale,
        first_date: Optional[dt.date],
        last_date: Optional[dt.date],
        place_ids: Sequence[str],
        partitions: dict[tuple[str, int], Partition],
    ):
        self.source = source
        self.scale = scale
        self.first_date = first_date
        self.last_date = last_date
        self.place_ids: tuple[str, ...] = tuple(place_ids)
        self.code: dict[str, int] = {pid: i for i, pid in enumerate(self.place_ids)}
        self.partitions: dict[tuple[str, int], Partition] = dict(sorted(partitions.items()))

    @property
    def n_cells(self) -> int:
        return sum(p.n_rows for p in self.partitions.values())

    @property
    def total_count(self) -> int:
        return int(sum(int(p.count.sum()) for p in self.partitions.values()))

    @property
    def date_range(self) -> Optional[DateRange]:
        if self.first_date is None or self.last_date is None:
            return None
        return DateRange(self.first_date, self.last_date)

    def partitions_in_range(self, rng: DateRange) -> Iterator[Partition]:
        lo = f"{rng.begin.year:04d}{rng.begin.month:02d}"
        hi = f"{rng.end.year:04d}{rng.end.month:02d}"
        for (month, _bucket), part in self.partitions.items():
            if lo <= month <= hi:
                yield part

    def cells(self) -> Iterator[OdtCell]:
        """All cells in canonical (origin, dest, date) order."""
        for _, o_id, d_id, date, n, so_lat, so_lon, sd_lat, sd_lon in self._sorted_rows():
            yield OdtCell(
                o_id, d_id, date, n,
                GeoPoint(so_lat / (n * MICRO), so_lon / (n * MICRO)),
                GeoPoint(sd_lat / (n * MICRO), sd_lon / (n * MICRO)),
            )

    def canonical_records(self) -> list[tuple]:
        """Exact integer cell records sorted by (origin, dest, date); the
        canonical identity used for equality and golden-file checks."""
        return [rec[1:] for rec in self._sorted_rows()]

    def _sorted_rows(self) -> list[tuple]:
        rows: list[tuple] = []
        for part in self.partitions.values():
            o, d, t, n, a, b, c, e = part.columns()
            for i in range(part.n_rows):
                oc, dc = int(o[i]), int(d[i])
                rows.append(
                    ((oc, dc, int(t[i])), self.place_ids[oc], self.place_ids[dc],
                     dt.date.fromordinal(int(t[i])), int(n[i]),
                     int(a[i]), int(b[i]), int(c[i]), int(e[i]))
                )
        rows.sort(key=lambda r: r[0])
        return rows

    def cell_count(self, origin: str, dest: str, day: dt.date) -> int:
        """Count for one (origin, dest, day) key; absent cells read as 0."""
        oc = self.code.get(origin)
        dc = self.code.get(dest)
        if oc is None or dc is None:
            return 0
        key = (_month_str(day.toordinal()), stable_bucket(origin, N_BUCKETS))
        part = self.partitions.get(key)
        if part is None:
            return 0
        mask = (part.origin == oc) & (part.dest == dc) & (part.date == day.toordinal())
        return int(part.count[mask].sum())


# ---------------------------------------------------------------------------
# construction


def _micro(v: float) -> int:
    return int(round(v * MICRO))


class CubeAccumulator:
    """Streaming cell accumulator with source-specific counting.

    twitter_like counts each entity at most once per (origin, dest, day) cell;
    duplicate flows of one entity collapse to a single deterministic
    representative.  sdm_like sums device weights.
    """

    def __init__(self, source: Source, scale: GeoScale, registry: Union[PlaceSet, PlaceHierarchy, None] = None):
        self.source = source
        self.scale = scale
        self._registry = registry
        self._fips_len = FIPS_LENGTH.get(scale)
        # (o_id, d_id, ordinal) -> [count, so_lat, so_lon, sd_lat, sd_lon]
        self._cells: dict[tuple[str, str, int], list[int]] = {}
        # twitter_like: (entity, o, d, ordinal) -> min micro-endpoint tuple
        self._reps: dict[tuple[str, str, str, int], tuple[int, int, int, int]] = {}

    def _check_place(self, pid: str) -> None:
        if self._fips_len is not None and (len(pid) != self._fips_len or not pid.isdigit()):
            raise CubeError(f"place {pid!r} is not at scale {self.scale.value}")
        if self._registry is not None:
            if isinstance(self._registry, PlaceSet):
                known = pid in self._registry and self._registry.scale is self.scale
            else:
                known = self._registry.has_place(self.scale, pid)
            if not known:
                raise CubeError(f"place {pid!r} is not at scale {self.scale.value}")

    def add(self, flow: EntityFlow) -> None:
        self._check_place(flow.origin_place)
        self._check_place(flow.dest_place)
        key = (flow.origin_place, flow.dest_place, flow.date.toordinal())
        micro = (
            _micro(flow.origin_point.lat), _micro(flow.origin_point.lon),
            _micro(flow.dest_point.lat), _micro(flow.dest_point.lon),
        )
        if self.source is Source.TWITTER_LIKE:
            rep_key = (flow.entity_id, *key)
            prev = self._reps.get(rep_key)
            if prev is None or micro < prev:
                self._reps[rep_key] = micro
        else:
            cell = self._cells.get(key)
            w = flow.weight
            if cell is None:
                self._cells[key] = [w, micro[0] * w, micro[1] * w, micro[2] * w, micro[3] * w]
            else:
                cell[0] += w
                cell[1] += micro[0] * w
                cell[2] += micro[1] * w
                cell[3] += micro[2] * w
                cell[4] += micro[3] * w

    def add_many(self, flows: Iterable[EntityFlow]) -> None:
        for flow in flows:
            self.add(flow)

    def _fold_reps(self) -> None:
        for (entity, o, d, ordv), micro in self._reps.items():
            key = (o, d, ordv)
            cell = self._cells.get(key)
            if cell is None:
                self._cells[key] = [1, micro[0], micro[1], micro[2], micro[3]]
            else:
                cell[0] += 1
                cell[1] += micro[0]
                cell[2] += micro[1]
                cell[3] += micro[2]
                cell[4] += micro[3]
        self._reps.clear()

    def cell_partial(self) -> dict[tuple[str, str, int], tuple[int, int, int, int, int]]:
        """Mergeable per-cell sums.  For twitter_like the caller must ensure
        no entity is split across partials (partition input by entity)."""
        self._fold_reps()
        return {k: tuple(v) for k, v in self._cells.items()}

    def merge_cells(self, partial: dict[tuple[str, str, int], tuple[int, int, int, int, int]]) -> None:
        for key, vals in partial.items():
            cell = self._cells.get(key)
            if cell is None:
                self._cells[key] = list(vals)
            else:
                for i in range(5):
                    cell[i] += vals[i]

    def finalize(self) -> OdtCube:
        self._fold_reps()
        cells = self._cells
        if not cells:
            return OdtCube(self.source, self.scale, None, None, (), {})
        ids = sorted({k[0] for k in cells} | {k[1] for k in cells})
        code = {pid: i for i, pid in enumerate(ids)}
        bucket_memo = {pid: stable_bucket(pid, N_BUCKETS) for pid in ids}
        month_memo: dict[int, str] = {}
        grouped: dict[tuple[str, int], list[tuple]] = {}
        lo = hi = None
        for (o, d, ordv), vals in cells.items():
            month = month_memo.get(ordv)
            if month is None:
                month = month_memo[ordv] = _month_str(ordv)
            grouped.setdefault((month, bucket_memo[o]), []).append((code[o], code[d], ordv, *vals))
            if lo is None or ordv < lo:
                lo = ordv
            if hi is None or ordv > hi:
                hi = ordv
        partitions = {}
        for pkey, rows in grouped.items():
            rows.sort(key=lambda r: (r[0], r[1], r[2]))
            arr = np.asarray(rows, dtype=np.int64)
            partitions[pkey] = Partition(
                pkey[0], pkey[1],
                arr[:, 0].astype(np.int32), arr[:, 1].astype(np.int32),
                arr[:, 2].astype(np.int32), arr[:, 3].copy(),
                arr[:, 4].copy(), arr[:, 5].copy(), arr[:, 6].copy(), arr[:, 7].copy(),
            )
        return OdtCube(
            self.source, self.scale,
            dt.date.fromordinal(lo), dt.date.fromordinal(hi), ids, partitions,
        )


def build_cube(
    flows: Iterable[EntityFlow],
    source: Source,
    scale: GeoScale,
    registry: Union[PlaceSet, PlaceHierarchy, None] = None,
) -> OdtCube:
    """Aggregate entity flows into one cell per (origin, dest, day)."""
    acc = CubeAccumulator(source, scale, registry)
    acc.add_many(flows)
    return acc.finalize()


def cube_from_cells(
    source: Source,
    scale: GeoScale,
    cells: Iterable[tuple[str, str, dt.date, int, float, float, float, float]],
) -> OdtCube:
    """Build a cube from explicit (o, d, day, count, o_lat, o_lon, d_lat, d_lon)
    cell tuples; duplicate keys merge by count-weighted aggregation."""
    acc = CubeAccumulator(Source.SDM_LIKE, scale)
    merged: dict[tuple[str, str, int], list[int]] = acc._cells
    for o, d, day, n, olat, olon, dlat, dlon in cells:
        key = (o, d, day.toordinal())
        vals = [n, _micro(olat) * n, _micro(olon) * n, _micro(dlat) * n, _micro(dlon) * n]
        cell = merged.get(key)
        if cell is None:
            merged[key] = vals
        else:
            for i in range(5):
                cell[i] += vals[i]
    cube = acc.finalize()
    return OdtCube(source, scale, cube.first_date, cube.last_date, cube.place_ids, cube.partitions)


def cube_from_columns(
    source: Source,
    scale: GeoScale,
    place_ids: Sequence[str],
    origin: np.ndarray,
    dest: np.ndarray,
    date: np.ndarray,
    count: np.ndarray,
    o_lat: np.ndarray,
    o_lon: np.ndarray,
    d_lat: np.ndarray,
    d_lon: np.ndarray,
    *,
    aggregate: bool = True,
) -> OdtCube:
    """Vectorized constructor from full columns (codes into place_ids).

    Used by roll-up and by large synthetic fixtures; sums duplicate
    (origin, dest, day) keys when ``aggregate`` is set.
    """
    place_ids = tuple(place_ids)
    if list(place_ids) != sorted(set(place_ids)):
        raise CubeError("place_ids must be sorted and unique")
    if len(origin) == 0:
        return OdtCube(source, scale, None, None, place_ids, {})
    origin = np.asarray(origin, dtype=np.int64)
    dest = np.asarray(dest, dtype=np.int64)
    date = np.asarray(date, dtype=np.int64)
    sums = [np.asarray(c, dtype=np.int64) for c in (count, o_lat, o_lon, d_lat, d_lon)]

    if aggregate:
        order = np.lexsort((date, dest, origin))
        origin, dest, date = origin[order], dest[order], date[order]
        sums = [c[order] for c in sums]
        boundary = np.empty(len(origin), dtype=bool)
        boundary[0] = True
        np.not_equal(origin[1:], origin[:-1], out=boundary[1:])
        boundary[1:] |= dest[1:] != dest[:-1]
        boundary[1:] |= date[1:] != date[:-1]
        starts = np.flatnonzero(boundary)
        origin, dest, date = origin[starts], dest[starts], date[starts]
        sums = [np.add.reduceat(c, starts) for c in sums]

    bucket_by_code = np.array([stable_bucket(pid, N_BUCKETS) for pid in place_ids], dtype=np.int64)
    month_idx = _month_index(date)
    part_key = month_idx * N_BUCKETS + bucket_by_code[origin]
    order = np.argsort(part_key, kind="stable")
    origin, dest, date = origin[order], dest[order], date[order]
    sums = [c[order] for c in sums]
    part_key = part_key[order]

    partitions: dict[tuple[str, int], Partition] = {}
    uniq, starts = np.unique(part_key, return_index=True)
    bounds = list(starts) + [len(part_key)]
    for k, key in enumerate(uniq):
        s, e = bounds[k], bounds[k + 1]
        month = _month_index_str(int(key) // N_BUCKETS)
        bucket = int(key) % N_BUCKETS
        partitions[(month, bucket)] = Partition(
            month, bucket,
            origin[s:e].astype(np.int32), dest[s:e].astype(np.int32),
            date[s:e].astype(np.int32), sums[0][s:e],
            sums[1][s:e], sums[2][s:e], sums[3][s:e], sums[4][s:e],
        )
    return OdtCube(
        source, scale,
        dt.date.fromordinal(int(date.min())), dt.date.fromordinal(int(date.max())),
        place_ids, partitions,
    )


# ---------------------------------------------------------------------------
# cube algebra


def rollup(cube: OdtCube, target: GeoScale, hierarchy: PlaceHierarchy) -> OdtCube:
    """Re-key a cube to a coarser scale; counts sum, centers stay
    count-weighted.  Child inter-flows whose endpoints share a parent become
    parent intra cells.  Totals are conserved exactly."""
    if not target.is_coarser_than(cube.scale):
        raise CubeError(f"target scale {target.value} is not coarser than {cube.scale.value}")
    parents = [hierarchy.parent_at(pid, target, own_scale=cube.scale) for pid in cube.place_ids]
    new_ids = tuple(sorted(set(parents)))
    new_code = {pid: i for i, pid in enumerate(new_ids)}
    remap = np.array([new_code[p] for p in parents], dtype=np.int64)

    if not cube.partitions:
        return OdtCube(cube.source, target, cube.first_date, cube.last_date, new_ids, {})
    cols = [np.concatenate([p.columns()[i] for p in cube.partitions.values()]) for i in range(8)]
    return cube_from_columns(
        cube.source, target, new_ids,
        remap[cols[0]], remap[cols[1]], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7],
    )


class MatrixKind(enum.Enum):
    OD = "OD"
    OT = "OT"
    DT = "DT"


@dataclass(frozen=True, slots=True)
class MatrixEntry:
    count: int
    o_center: Optional[GeoPoint] = None
    d_center: Optional[GeoPoint] = None


@dataclass(frozen=True)
class FlowMatrix:
    """A cube slice: OD pairs over a range, or per-day OT/DT series."""

    kind: MatrixKind
    range: DateRange
    entries: dict[tuple, MatrixEntry]

    def total(self) -> int:
        return sum(e.count for e in self.entries.values())

    def count(self, key: tuple) -> int:
        e = self.entries.get(key)
        return 0 if e is None else e.count


def _gather(cube: OdtCube, rng: DateRange) -> Optional[tuple[np.ndarray, ...]]:
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()
    chunks = []
    for part in cube.partitions_in_range(rng):
        mask = (part.date >= lo) & (part.date <= hi)
        if mask.any():
            chunks.append(tuple(c[mask] for c in part.columns()))
    if not chunks:
        return None
    return tuple(np.concatenate([ch[i] for ch in chunks]) for i in range(8))


def _group_pairs(a: np.ndarray, b: np.ndarray, sums: list[np.ndarray]):
    order = np.lexsort((b, a))
    a, b = a[order], b[order]
    sums = [c[order] for c in sums]
    boundary = np.empty(len(a), dtype=bool)
    boundary[0] = True
    np.not_equal(a[1:], a[:-1], out=boundary[1:])
    boundary[1:] |= b[1:] != b[:-1]
    starts = np.flatnonzero(boundary)
    return a[starts], b[starts], [np.add.reduceat(c, starts) for c in sums]


def slice_cube(cube: OdtCube, kind: MatrixKind, rng: DateRange) -> FlowMatrix:
    """Derive the OD (range-aggregated), OT (per-origin daily), or DT
    (per-destination daily) matrix; empty overlap yields an empty matrix."""
    cols = _gather(cube, rng)
    entries: dict[tuple, MatrixEntry] = {}
    if cols is None:
        return FlowMatrix(kind, rng, entries)
    o, d, t, n, so_lat, so_lon, sd_lat, sd_lon = cols
    if kind is MatrixKind.OD:
        go, gd, sums = _group_pairs(o.astype(np.int64), d.astype(np.int64),
                                    [n, so_lat, so_lon, sd_lat, sd_lon])
        for i in range(len(go)):
            cnt = int(sums[0][i])
            entries[(cube.place_ids[int(go[i])], cube.place_ids[int(gd[i])])] = MatrixEntry(
                cnt,
                GeoPoint(int(sums[1][i]) / (cnt * MICRO), int(sums[2][i]) / (cnt * MICRO)),
                GeoPoint(int(sums[3][i]) / (cnt * MICRO), int(sums[4][i]) / (cnt * MICRO)),
            )
    else:
        place = o if kind is MatrixKind.OT else d
        gp, gt, sums = _group_pairs(place.astype(np.int64), t.astype(np.int64), [n])
        for i in range(len(gp)):
            key = (cube.place_ids[int(gp[i])], dt.date.fromordinal(int(gt[i])))
            entries[key] = MatrixEntry(int(sums[0][i]))
    return FlowMatrix(kind, rng, entries)


def dice(
    cube: OdtCube,
    origins: Optional[set[str]] = None,
    dests: Optional[set[str]] = None,
    rng: Optional[DateRange] = None,
) -> OdtCube:
    """Subcube of cells passing every provided filter (absent = pass-all)."""
    if rng is None:
        if cube.date_range is None:
            return OdtCube(cube.source, cube.scale, None, None, cube.place_ids, {})
        rng = cube.date_range
    o_codes = None if origins is None else {cube.code[p] for p in origins if p in cube.code}
    d_codes = None if dests is None else {cube.code[p] for p in dests if p in cube.code}
    lo, hi = rng.begin.toordinal(), rng.end.toordinal()

    partitions: dict[tuple[str, int], Partition] = {}
    for key, part in cube.partitions.items():
        if not (f"{rng.begin.year:04d}{rng.begin.month:02d}" <= part.month
                <= f"{rng.end.year:04d}{rng.end.month:02d}"):
            continue
        mask = (part.date >= lo) & (part.date <= hi)
        if o_codes is not None:
            mask &= np.isin(part.origin, np.fromiter(o_codes, dtype=np.int32, count=len(o_codes))) \
                if o_codes else np.zeros(part.n_rows, dtype=bool)
        if d_codes is not None:
            mask &= np.isin(part.dest, np.fromiter(d_codes, dtype=np.int32, count=len(d_codes))) \
                if d_codes else np.zeros(part.n_rows, dtype=bool)
        if mask.any():
            cols = tuple(c[mask] for c in part.columns())
            partitions[key] = Partition(part.month, part.bucket, *cols)

    if cube.first_date is None:
        first = last = None
    else:
        first = max(cube.first_date, rng.begin)
        last = min(cube.last_date, rng.end)
        if first > last:
            first = last = rng.begin
    return OdtCube(cube.source, cube.scale, first, last, cube.place_ids, partitions)
