"""Entity-level OD flow extraction from raw mobility records.

Two source shapes are supported: geotagged point events (one location fix per
line, e.g. social-media posts) and home-anchored visit records mapping an
origin census block group to per-destination device counts.  Both produce
daily EntityFlow streams suitable for cube aggregation.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .geo import GeoPoint, GeoScale, PlaceHierarchy, PlaceSet, haversine_km

__all__ = [
    "PointEvent",
    "SdmRecord",
    "EntityFlow",
    "SourceFilter",
    "DropReport",
    "ExtractionError",
    "filter_human_events",
    "extract_point_event_flows",
    "extract_sdm_flows",
    "mean_center",
    "read_point_events",
    "read_sdm_records",
]

_UTC = dt.timezone.utc


class ExtractionError(ValueError):
    """Raised for malformed extraction input."""


@dataclass(frozen=True, slots=True)
class PointEvent:
    """One geotagged fix: who, when (UTC), where, and the posting client."""

    entity_id: str
    timestamp: dt.datetime
    location: GeoPoint
    source_label: str


@dataclass(frozen=True, slots=True)
class SdmRecord:
    """One origin block group's daily destination device counts."""

    origin_cbg: str
    date: dt.date
    destination_counts: dict[str, int]

    def __post_init__(self) -> None:
        if not (self.origin_cbg.isdigit() and len(self.origin_cbg) == 12):
            raise ExtractionError(f"origin {self.origin_cbg!r} is not a 12-digit FIPS code")
        for cbg, n in self.destination_counts.items():
            if not (cbg.isdigit() and len(cbg) == 12):
                raise ExtractionError(f"destination {cbg!r} is not a 12-digit FIPS code")
            if n < 1:
                raise ExtractionError(f"destination count {n} for {cbg!r} must be >= 1")


@dataclass(frozen=True, slots=True)
class EntityFlow:
    """One entity's movement between two places on one day."""

    entity_id: str
    origin_place: str
    dest_place: str
    date: dt.date
    weight: int
    origin_point: GeoPoint
    dest_point: GeoPoint


@dataclass(frozen=True)
class SourceFilter:
    """Keep/drop rule over posting-client labels (bot removal)."""

    mode: str  # "denylist" | "allowlist"
    labels: frozenset[str]

    def __post_init__(self) -> None:
        if self.mode not in ("denylist", "allowlist"):
            raise ValueError(f"filter mode must be denylist or allowlist, got {self.mode!r}")
        if self.mode == "allowlist" and not self.labels:
            raise ValueError("allowlist filter requires at least one label")

    def keeps(self, label: str) -> bool:
        if self.mode == "denylist":
            return label not in self.labels
        return label in self.labels


@dataclass
class DropReport:
    """Tally of flows dropped during extraction, by reason."""

    flows: Counter = field(default_factory=Counter)
    weight: Counter = field(default_factory=Counter)

    def add(self, reason: str, weight: int = 1) -> None:
        self.flows[reason] += 1
        self.weight[reason] += weight

    @property
    def total_flows(self) -> int:
        return sum(self.flows.values())

    @property
    def total_weight(self) -> int:
        return sum(self.weight.values())

    def summary(self) -> str:
        if not self.flows:
            return "no drops"
        parts = [f"{reason}={count}" for reason, count in sorted(self.flows.items())]
        return ", ".join(parts)


def filter_human_events(events: Iterable[PointEvent], source_filter: Optional[SourceFilter]) -> Iterator[PointEvent]:
    """Drop events by posting-client label; order preserved."""
    if source_filter is None:
        yield from events
        return
    for ev in events:
        if source_filter.keeps(ev.source_label):
            yield ev


def mean_center(points: Sequence[tuple[GeoPoint, float]]) -> GeoPoint:
    """Weight-averaged arithmetic mean of lat and lon, in degrees.

    Uses exactly rounded summation so the result is invariant under input
    permutation.
    """
    if not points:
        raise ExtractionError("mean_center of an empty point list")
    total = math.fsum(w for _, w in points)
    if total <= 0:
        raise ExtractionError("mean_center weights must be positive")
    lat = math.fsum(p.lat * w for p, w in points) / total
    lon = math.fsum(p.lon * w for p, w in points) / total
    return GeoPoint(lat, lon)


def _event_day(ev: PointEvent) -> dt.date:
    ts = ev.timestamp
    if ts.tzinfo is None:
        return ts.date()
    return ts.astimezone(_UTC).date()


def _event_sort_key(ev: PointEvent):
    return (ev.timestamp, ev.location.lat, ev.location.lon, ev.source_label)


def extract_point_event_flows(
    events: Iterable[PointEvent],
    places: PlaceSet,
    *,
    sort: bool = True,
    report: Optional[DropReport] = None,
) -> list[EntityFlow]:
    """Daily single-day and cross-day flows from a point-event stream.

    Per entity and UTC day: a day with two or more events yields one flow from
    the day's first event to the event farthest (great circle) from it; each
    pair of consecutive active days yields one flow between the two days' mean
    centers, dated to the second day.  Entities matching neither rule produce
    nothing.  Flows with exactly zero displacement are suppressed, so every
    emitted same-place flow represents real movement inside the place.

    With ``sort=False`` the input must already be ordered by
    (entity_id, timestamp); unsorted input raises ExtractionError.
    """
    if sort:
        ordered = sorted(events, key=lambda e: (e.entity_id, _event_sort_key(e)))
    else:
        ordered = list(events)
        prev = None
        for ev in ordered:
            key = (ev.entity_id, ev.timestamp)
            if prev is not None and key < prev:
                raise ExtractionError(
                    f"events not sorted by (entity_id, timestamp) near entity {ev.entity_id!r}"
                )
            prev = key

    flows: list[EntityFlow] = []
    i, n = 0, len(ordered)
    while i < n:
        entity = ordered[i].entity_id
        j = i
        while j < n and ordered[j].entity_id == entity:
            j += 1
        _extract_entity(ordered[i:j], places, flows, report)
        i = j
    return flows


def _extract_entity(
    events: list[PointEvent],
    places: PlaceSet,
    out: list[EntityFlow],
    report: Optional[DropReport],
) -> None:
    by_day: dict[dt.date, list[PointEvent]] = {}
    for ev in events:
        by_day.setdefault(_event_day(ev), []).append(ev)

    entity = events[0].entity_id
    days = sorted(by_day)
    for day in days:
        day_events = by_day[day]
        if len(day_events) < 2:
            continue
        first = day_events[0]
        far = first
        far_dist = 0.0
        for ev in day_events[1:]:
            d = haversine_km(first.location, ev.location)
            if d > far_dist:
                far_dist = d
                far = ev
        _emit(entity, first.location, far.location, day, places, out, report)

    for prev_day, day in zip(days, days[1:]):
        if (day - prev_day).days != 1:
            continue
        c1 = mean_center([(ev.location, 1.0) for ev in by_day[prev_day]])
        c2 = mean_center([(ev.location, 1.0) for ev in by_day[day]])
        _emit(entity, c1, c2, day, places, out, report)


def _emit(
    entity: str,
    origin_point: GeoPoint,
    dest_point: GeoPoint,
    day: dt.date,
    places: PlaceSet,
    out: list[EntityFlow],
    report: Optional[DropReport],
) -> None:
    # zero displacement is not a movement; suppressing it keeps every stored
    # intra cell a true within-place move
    if origin_point == dest_point:
        return
    origin = places.resolve_point(origin_point)
    dest = places.resolve_point(dest_point)
    if origin is None or dest is None:
        if report is not None:
            report.add("unresolved_endpoint")
        return
    out.append(EntityFlow(entity, origin, dest, day, 1, origin_point, dest_point))


def extract_sdm_flows(
    records: Iterable[SdmRecord],
    hierarchy: PlaceHierarchy,
    *,
    report: Optional[DropReport] = None,
) -> Iterator[EntityFlow]:
    """One flow per (origin block group, destination, day) with device weight.

    Destinations (or origins) missing from the hierarchy drop the flow into
    the report instead of raising; conservation holds as
    emitted weight + dropped weight == input weight.
    """
    scale = GeoScale.US_CBG
    for rec in records:
        origin_pt = hierarchy.representative_point(scale, rec.origin_cbg)
        for dest in sorted(rec.destination_counts):
            n = rec.destination_counts[dest]
            if origin_pt is None:
                if report is not None:
                    report.add("unknown_origin", n)
                continue
            dest_pt = hierarchy.representative_point(scale, dest)
            if dest_pt is None:
                if report is not None:
                    report.add("unknown_destination", n)
                continue
            yield EntityFlow(rec.origin_cbg, rec.origin_cbg, dest, rec.date, n, origin_pt, dest_pt)


# ---------------------------------------------------------------------------
# file readers


def _parse_timestamp(raw: str) -> dt.datetime:
    s = raw.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        ts = dt.datetime.fromisoformat(s)
    except ValueError as exc:
        raise ExtractionError(f"bad timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=_UTC)
    return ts


def read_point_events(path: str) -> Iterator[PointEvent]:
    """Read tab-separated point events: entity, ISO timestamp, lat, lon, source."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                yield parse_point_event_line(line)
            except ExtractionError as exc:
                raise ExtractionError(f"{path}:{line_no}: {exc}") from None


def parse_point_event_line(line: str) -> PointEvent:
    parts = line.split("\t")
    if len(parts) != 5:
        raise ExtractionError(f"expected 5 tab-separated fields, got {len(parts)}")
    entity, raw_ts, raw_lat, raw_lon, label = parts
    try:
        loc = GeoPoint(float(raw_lat), float(raw_lon))
    except ValueError as exc:
        raise ExtractionError(str(exc)) from None
    return PointEvent(entity, _parse_timestamp(raw_ts), loc, label)


def read_sdm_records(path: str) -> Iterator[SdmRecord]:
    """Read vendor-style CSV with origin_census_block_group,
    date_range_start, destination_cbgs (JSON object literal) columns."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"origin_census_block_group", "date_range_start", "destination_cbgs"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            missing = sorted(required - set(reader.fieldnames or ()))
            raise ExtractionError(f"{path}: missing columns {missing}")
        for row_no, row in enumerate(reader, start=2):
            origin = row["origin_census_block_group"].strip()
            raw_date = row["date_range_start"].strip()
            try:
                date = dt.date.fromisoformat(raw_date[:10])
            except ValueError:
                raise ExtractionError(f"{path}:{row_no}: bad date {raw_date!r}") from None
            raw_dests = row["destination_cbgs"].strip() or "{}"
            try:
                dest_map = json.loads(raw_dests)
            except json.JSONDecodeError:
                raise ExtractionError(f"{path}:{row_no}: bad destination map") from None
            counts = {str(k): int(v) for k, v in dest_map.items()}
            try:
                yield SdmRecord(origin, date, counts)
            except ExtractionError as exc:
                raise ExtractionError(f"{path}:{row_no}: {exc}") from None
