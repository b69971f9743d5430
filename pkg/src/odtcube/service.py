"""HTTP query service: a single GET endpoint at /REST dispatching on an
``operation`` parameter, answering CSV.

Operations
    get_movement_between_places   place totals as ``place,cnt``
    get_daily_movement            one place's daily series as ``date,cnt``
    get_daily_movement_for_all_places   every place's series as ``place,date,cnt``
    extract_odt_flows             download document (type=aggregated|daily)
    list_catalog                  loaded cubes as ``source,scale,first_date,last_date``

Dates are MM/DD/YYYY; sources are ``twitter`` and ``safegraph``; bad requests
answer 400 with a one-line ``error: <reason>`` body, a missing cube answers
404.  Handlers are stateless over immutable cubes, so responses are cacheable
and any number of requests may run concurrently.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterator, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse

from .cube import DateRange, OdtCube, Source
from .geo import GeoScale
from .queries import (
    BoundingBox,
    FlowDirection,
    PlaceNotFoundError,
    QueryError,
    all_places_daily_series,
    daily_movement_series,
    export_flows_lines,
    place_flow_totals,
)
from .store import list_cubes, open_cube, read_manifest

__all__ = ["ApiError", "QueryRequest", "CubeCatalog", "create_app", "OPERATIONS"]

_SOURCE_KEYS = {"twitter": Source.TWITTER_LIKE, "safegraph": Source.SDM_LIKE}
_SOURCE_NAMES = {v: k for k, v in _SOURCE_KEYS.items()}

OPERATIONS = (
    "get_movement_between_places",
    "get_daily_movement",
    "get_daily_movement_for_all_places",
    "extract_odt_flows",
    "list_catalog",
)


class ApiError(Exception):
    def __init__(self, reason: str, status: int = 400):
        super().__init__(reason)
        self.reason = reason
        self.status = status


def _parse_date(raw: str, name: str) -> dt.date:
    try:
        return dt.datetime.strptime(raw, "%m/%d/%Y").date()
    except ValueError:
        raise ApiError(f"parameter {name} must be a MM/DD/YYYY date, got {raw!r}") from None


def _parse_bbox(raw: str) -> BoundingBox:
    parts = raw.split(",")
    if len(parts) != 4:
        raise ApiError("bbox must be min_lon,min_lat,max_lon,max_lat")
    try:
        min_lon, min_lat, max_lon, max_lat = (float(p) for p in parts)
        return BoundingBox(min_lat, min_lon, max_lat, max_lon)
    except (ValueError, QueryError) as exc:
        raise ApiError(f"bad bbox: {exc}") from None


@dataclass(frozen=True)
class QueryRequest:
    """Validated /REST parameters."""

    operation: str
    source: Optional[Source]
    scale: Optional[GeoScale]
    place: Optional[str]
    direction: Optional[FlowDirection]
    range: Optional[DateRange]
    type: str
    bbox: Optional[BoundingBox]
    min_count: int

    @classmethod
    def parse(cls, params: dict[str, str]) -> "QueryRequest":
        operation = params.get("operation", "")
        if operation not in OPERATIONS:
            raise ApiError(f"unknown operation {operation!r}")
        if operation == "list_catalog":
            return cls(operation, None, None, None, None, None, "aggregated", None, 0)

        source_key = params.get("source", "")
        if source_key not in _SOURCE_KEYS:
            raise ApiError(f"unknown source {source_key!r} (expected twitter or safegraph)")
        scale_key = params.get("scale", "")
        try:
            scale = GeoScale.from_key(scale_key)
        except ValueError:
            raise ApiError(f"unknown scale {scale_key!r}") from None

        begin = _parse_date(params.get("begin", ""), "begin")
        end = _parse_date(params.get("end", ""), "end")
        if begin > end:
            raise ApiError(f"begin {params['begin']} is after end {params['end']}")

        direction = None
        if "direction" in params:
            try:
                direction = FlowDirection.from_key(params["direction"])
            except QueryError as exc:
                raise ApiError(str(exc)) from None

        kind = params.get("type", "aggregated")
        if kind not in ("aggregated", "daily"):
            raise ApiError(f"type must be aggregated or daily, got {kind!r}")

        bbox = _parse_bbox(params["bbox"]) if "bbox" in params else None

        raw_min = params.get("min_count", "0")
        try:
            min_count = int(raw_min)
        except ValueError:
            raise ApiError(f"min_count must be an integer, got {raw_min!r}") from None
        if min_count < 0:
            raise ApiError("min_count must be >= 0")

        return cls(
            operation, _SOURCE_KEYS[source_key], scale, params.get("place"),
            direction, DateRange(begin, end), kind, bbox, min_count,
        )


class CubeCatalog:
    """Cubes loaded for serving, keyed by (source, scale)."""

    def __init__(self) -> None:
        self._cubes: dict[tuple[Source, GeoScale], OdtCube] = {}

    def add(self, cube: OdtCube) -> "CubeCatalog":
        self._cubes[(cube.source, cube.scale)] = cube
        return self

    @classmethod
    def load(cls, store_root: str) -> "CubeCatalog":
        catalog = cls()
        for path in list_cubes(store_root):
            catalog.add(open_cube(path))
        return catalog

    def get(self, source: Source, scale: GeoScale) -> OdtCube:
        cube = self._cubes.get((source, scale))
        if cube is None:
            raise ApiError(f"no cube loaded for source/scale {_SOURCE_NAMES[source]}/{scale.value}", status=404)
        return cube

    def rows(self) -> list[tuple[str, str, str, str]]:
        out = []
        for (source, scale), cube in self._cubes.items():
            out.append((
                _SOURCE_NAMES[source], scale.value,
                cube.first_date.isoformat() if cube.first_date else "",
                cube.last_date.isoformat() if cube.last_date else "",
            ))
        out.sort()
        return out


def _dispatch(catalog: CubeCatalog, req: QueryRequest) -> Iterator[str]:
    if req.operation == "list_catalog":
        yield "source,scale,first_date,last_date"
        for row in catalog.rows():
            yield ",".join(row)
        return

    cube = catalog.get(req.source, req.scale)
    if req.operation == "get_movement_between_places":
        if not req.place:
            raise ApiError("parameter place is required")
        direction = req.direction or FlowDirection.IN_AND_OUT
        totals = place_flow_totals(cube, req.place, direction, req.range)
        yield "place,cnt"
        for pid in sorted(totals):
            yield f"{pid},{totals[pid]}"
    elif req.operation == "get_daily_movement":
        if not req.place:
            raise ApiError("parameter place is required")
        direction = req.direction or FlowDirection.INTRAFLOW
        series = daily_movement_series(cube, req.place, direction, req.range)
        yield "date,cnt"
        for day, n in series.points:
            yield f"{day.isoformat()},{n}"
    elif req.operation == "get_daily_movement_for_all_places":
        direction = req.direction or FlowDirection.INTRAFLOW
        yield "place,date,cnt"
        for pid, day, n in all_places_daily_series(cube, direction, req.range):
            yield f"{pid},{day.isoformat()},{n}"
    elif req.operation == "extract_odt_flows":
        yield from export_flows_lines(cube, req.range, req.type, req.bbox, req.min_count)
    else:  # unreachable: operation validated in parse
        raise ApiError(f"unknown operation {req.operation!r}")


def create_app(catalog: CubeCatalog, boundary_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="ODT flow query service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"], allow_headers=["*"]
    )

    if boundary_dir:
        # static simplified boundary polygons for map clients; data queries
        # stay CSV-only on /REST
        @app.get("/boundaries/{scale}.geojson")
        def boundaries(scale: str):
            import os.path

            from fastapi.responses import FileResponse

            path = os.path.join(boundary_dir, f"{scale}.geojson")
            if not os.path.isfile(path):
                return PlainTextResponse(f"error: no boundary file for {scale}\n", status_code=404)
            return FileResponse(path, media_type="application/geo+json")

    @app.get("/REST")
    def rest(request: Request):
        try:
            req = QueryRequest.parse(dict(request.query_params))
            lines = _dispatch(catalog, req)
            first = list(_take_header(lines))
        except ApiError as exc:
            return PlainTextResponse(f"error: {exc.reason}\n", status_code=exc.status)
        except (PlaceNotFoundError, QueryError, ValueError) as exc:
            return PlainTextResponse(f"error: {exc}\n", status_code=400)

        def body():
            for line in first:
                yield line + "\n"
            for line in lines:
                yield line + "\n"

        return StreamingResponse(body(), media_type="text/csv; charset=utf-8")

    return app


def _take_header(lines: Iterator[str]) -> Iterator[str]:
    # force the first line so parameter errors surface before streaming starts
    for line in lines:
        yield line
        return


def serve(catalog: CubeCatalog, host: str, port: int, boundary_dir: Optional[str] = None) -> None:
    import uvicorn

    uvicorn.run(create_app(catalog, boundary_dir), host=host, port=port, log_level="warning")
