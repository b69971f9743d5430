"""Origin-destination-time cube engine for multi-scale human mobility flows.

Pipeline shape: raw mobility records are reduced to entity-level daily OD
flows, aggregated into sparse partitioned (origin, destination, day) cubes at
one or more geographic scales, and served through slice/dice/roll-up queries,
a CSV download surface, and an HTTP API.
"""
from .analytics import (
    AlignedSeriesPair,
    AnalyticsError,
    ChangeRateReport,
    align_series,
    mobility_change_rate,
    pearson_correlation,
    read_indicator_csv,
)
from .cube import (
    CubeError,
    DateRange,
    FlowMatrix,
    MatrixEntry,
    MatrixKind,
    OdtCell,
    OdtCube,
    Source,
    build_cube,
    cube_from_cells,
    dice,
    rollup,
    slice_cube,
)
from .extraction import (
    DropReport,
    EntityFlow,
    ExtractionError,
    PointEvent,
    SdmRecord,
    SourceFilter,
    extract_point_event_flows,
    extract_sdm_flows,
    filter_human_events,
    mean_center,
    read_point_events,
    read_sdm_records,
)
from .geo import (
    BoundaryError,
    GeoPoint,
    GeoScale,
    HierarchyError,
    Place,
    PlaceHierarchy,
    PlaceSet,
    haversine_km,
    load_places,
)
from .queries import (
    BoundingBox,
    DailySeries,
    FlowDirection,
    FlowRecord,
    PlaceNotFoundError,
    QueryError,
    daily_movement_series,
    export_flows,
    od_flow_list,
    place_flow_totals,
)
from .store import canonical_dump, open_cube, persist_cube

__version__ = "0.1.0"
