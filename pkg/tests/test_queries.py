"""Query engine semantics: totals, series, flow lists, CSV export."""
import datetime as dt
import random

import pytest

from odtcube.cube import DateRange, MatrixKind, Source, cube_from_cells, dice, slice_cube
from odtcube.geo import GeoScale
from odtcube.queries import (
    BoundingBox,
    FlowDirection,
    PlaceNotFoundError,
    QueryError,
    all_places_daily_series,
    daily_movement_series,
    export_flows,
    od_flow_list,
    place_flow_totals,
)
from odtcube.store import open_cube, persist_cube

from synth import random_cube

D = dt.date(2020, 1, 3)
R = DateRange(D, D)


@pytest.fixture(scope="module")
def tri_cube():
    return cube_from_cells(
        Source.TWITTER_LIKE, GeoScale.WORLD_COUNTRY,
        [
            ("A", "B", D, 3, 10.0, 10.0, 20.0, 20.0),
            ("B", "A", D, 2, 20.0, 20.0, 10.0, 10.0),
            ("A", "A", D, 9, 10.0, 10.0, 10.5, 10.5),
        ],
    )


# ---------------------------------------------------------------------------
# place totals


def test_inflow_totals(tri_cube):
    assert place_flow_totals(tri_cube, "B", FlowDirection.INFLOW, R) == {"A": 3}


def test_outflow_totals(tri_cube):
    assert place_flow_totals(tri_cube, "B", FlowDirection.OUTFLOW, R) == {"A": 2}


def test_in_and_out_excludes_intra(tri_cube):
    assert place_flow_totals(tri_cube, "A", FlowDirection.IN_AND_OUT, R) == {"B": 5}


def test_totals_empty_overlap(tri_cube):
    far = DateRange(dt.date(2021, 6, 1), dt.date(2021, 6, 30))
    assert place_flow_totals(tri_cube, "A", FlowDirection.INFLOW, far) == {}


def test_totals_reject_intraflow(tri_cube):
    with pytest.raises(QueryError):
        place_flow_totals(tri_cube, "A", FlowDirection.INTRAFLOW, R)


def test_totals_unknown_place(tri_cube):
    with pytest.raises(PlaceNotFoundError):
        place_flow_totals(tri_cube, "ZZ", FlowDirection.INFLOW, R)


# ---------------------------------------------------------------------------
# daily series


def test_intraflow_series(tri_cube):
    series = daily_movement_series(tri_cube, "A", FlowDirection.INTRAFLOW, R)
    assert series.points == ((D, 9),)


def test_series_gap_filling(tri_cube):
    rng_ = DateRange(D, D + dt.timedelta(days=2))
    series = daily_movement_series(tri_cube, "B", FlowDirection.INFLOW, rng_)
    assert series.points == ((D, 3), (D + dt.timedelta(days=1), 0), (D + dt.timedelta(days=2), 0))


def test_series_dates_strictly_increasing(tri_cube):
    rng_ = DateRange(dt.date(2020, 1, 1), dt.date(2020, 2, 15))
    series = daily_movement_series(tri_cube, "A", FlowDirection.OUTFLOW, rng_)
    dates = [d for d, _ in series.points]
    assert dates == sorted(set(dates))
    assert len(dates) == rng_.n_days


def test_inflow_series_total_matches_dt_slice():
    rng = random.Random(606)
    cube = random_cube(rng, list("ABCDE"), dt.date(2020, 3, 1), 30, 900,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 3, 1), dt.date(2020, 3, 30))
    dt_slice = slice_cube(cube, MatrixKind.DT, rng_)
    for place in "ABCDE":
        series = daily_movement_series(cube, place, FlowDirection.INFLOW, rng_)
        expected = sum(
            e.count for (p, _), e in dt_slice.entries.items() if p == place
        ) - sum(c.count for c in cube.cells() if c.origin == c.dest == place and c.date in rng_)
        assert series.total() == expected


def test_in_and_out_equals_inflow_plus_outflow():
    rng = random.Random(607)
    cube = random_cube(rng, list("ABCD"), dt.date(2020, 3, 1), 20, 600,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 3, 2), dt.date(2020, 3, 18))
    for place in "ABCD":
        inflow = daily_movement_series(cube, place, FlowDirection.INFLOW, rng_)
        outflow = daily_movement_series(cube, place, FlowDirection.OUTFLOW, rng_)
        both = daily_movement_series(cube, place, FlowDirection.IN_AND_OUT, rng_)
        for (d1, a), (_, b), (_, c) in zip(inflow.points, outflow.points, both.points):
            assert c == a + b
        totals_in = place_flow_totals(cube, place, FlowDirection.INFLOW, rng_)
        assert sum(totals_in.values()) == inflow.total()


def test_all_places_series_matches_per_place():
    rng = random.Random(608)
    cube = random_cube(rng, list("ABC"), dt.date(2020, 3, 1), 8, 200,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 3, 1), dt.date(2020, 3, 8))
    for direction in FlowDirection:
        rows = list(all_places_daily_series(cube, direction, rng_))
        for place in "ABC":
            series = daily_movement_series(cube, place, direction, rng_)
            got = [(d, n) for p, d, n in rows if p == place]
            assert got == list(series.points)


# ---------------------------------------------------------------------------
# od_flow_list


def test_min_count_strictly_greater(tri_cube):
    base = [
        ("A", "B", D, 21, 0.0, 0.0, 1.0, 1.0),
        ("B", "C", D, 20, 0.0, 0.0, 1.0, 1.0),
    ]
    cube = cube_from_cells(Source.SDM_LIKE, GeoScale.WORLD_COUNTRY, base)
    records = od_flow_list(cube, R, min_count=20)
    assert [(r.o_place, r.d_place, r.cnt) for r in records] == [("A", "B", 21)]


def test_flow_list_excludes_intra(tri_cube):
    records = od_flow_list(tri_cube, R, min_count=0)
    assert sorted((r.o_place, r.d_place) for r in records) == [("A", "B"), ("B", "A")]
    assert sum(r.cnt for r in records) == 5  # OD total 14 minus intra 9


def test_flow_list_total_matches_od_slice():
    rng = random.Random(123)
    cube = random_cube(rng, list("ABCDEF"), dt.date(2020, 2, 1), 29, 700,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 2, 1), dt.date(2020, 2, 29))
    records = od_flow_list(cube, rng_, min_count=0)
    od = slice_cube(cube, MatrixKind.OD, rng_)
    intra = sum(e.count for (o, d), e in od.entries.items() if o == d)
    assert sum(r.cnt for r in records) == od.total() - intra


def test_flow_list_aoi_matches_scan_oracle():
    rng = random.Random(321)
    cube = random_cube(rng, list("ABCDEFGH"), dt.date(2020, 2, 1), 20, 900,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 2, 3), dt.date(2020, 2, 17))
    od = slice_cube(cube, MatrixKind.OD, rng_)
    for _ in range(20):
        lats = sorted(rng.uniform(-70, 70) for _ in range(2))
        lons = sorted(rng.uniform(-160, 160) for _ in range(2))
        box = BoundingBox(lats[0], lons[0], lats[1], lons[1])
        for direction in (FlowDirection.INFLOW, FlowDirection.OUTFLOW, FlowDirection.IN_AND_OUT):
            records = od_flow_list(cube, rng_, direction, box, 0)
            expected = set()
            for (o, d), e in od.entries.items():
                if o == d:
                    continue
                if direction is FlowDirection.INFLOW:
                    keep = box.contains(e.d_center.lat, e.d_center.lon)
                elif direction is FlowDirection.OUTFLOW:
                    keep = box.contains(e.o_center.lat, e.o_center.lon)
                else:
                    keep = box.contains(e.o_center.lat, e.o_center.lon) or box.contains(
                        e.d_center.lat, e.d_center.lon
                    )
                if keep:
                    expected.add((o, d, e.count))
            assert {(r.o_place, r.d_place, r.cnt) for r in records} == expected


def test_flow_list_sorted(tri_cube):
    records = od_flow_list(tri_cube, R)
    assert [(r.o_place, r.d_place) for r in records] == sorted(
        (r.o_place, r.d_place) for r in records
    )


def test_flow_list_rejects_intraflow(tri_cube):
    with pytest.raises(QueryError):
        od_flow_list(tri_cube, R, FlowDirection.INTRAFLOW)


# ---------------------------------------------------------------------------
# export


def single_cell_cube():
    return cube_from_cells(
        Source.TWITTER_LIKE, GeoScale.WORLD_COUNTRY,
        [("A", "B", D, 4, 10.25, -20.5, 30.75, 40.125)],
    )


def test_export_daily_single_cell():
    doc = export_flows(single_cell_cube(), R, "daily")
    assert doc.splitlines() == [
        "o_place,d_place,year,month,day,cnt,o_lat,o_lon,d_lat,d_lon",
        "A,B,2020,1,3,4,10.250000,-20.500000,30.750000,40.125000",
    ]


def test_export_aggregated_single_month():
    rng_ = DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 31))
    doc = export_flows(single_cell_cube(), rng_, "aggregated")
    assert doc.splitlines() == [
        "o_place,d_place,year,month,cnt,o_lat,o_lon,d_lat,d_lon",
        "A,B,2020,1,4,10.250000,-20.500000,30.750000,40.125000",
    ]


def test_export_aggregated_multi_month_header():
    rng_ = DateRange(dt.date(2020, 1, 1), dt.date(2020, 3, 31))
    doc = export_flows(single_cell_cube(), rng_, "aggregated")
    assert doc.splitlines()[0] == "o_place,d_place,cnt,o_lat,o_lon,d_lat,d_lon"


def test_export_includes_intra_cells(tri_cube):
    doc = export_flows(tri_cube, R, "daily")
    assert "A,A,2020,1,3,9," in doc


def test_export_daily_row_count_matches_filtered_cells():
    rng = random.Random(888)
    cube = random_cube(rng, list("ABCD"), dt.date(2020, 1, 1), 45, 700,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 1, 5), dt.date(2020, 2, 10))
    min_count = 3
    doc = export_flows(cube, rng_, "daily", min_count=min_count)
    n_rows = len(doc.splitlines()) - 1
    expected = sum(1 for c in cube.cells() if c.date in rng_ and c.count > min_count)
    assert n_rows == expected


def test_export_rows_sorted():
    rng = random.Random(889)
    cube = random_cube(rng, list("ABCD"), dt.date(2020, 1, 1), 20, 300,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 20))
    rows = export_flows(cube, rng_, "daily").splitlines()[1:]
    keys = []
    for row in rows:
        o, d_, y, m, day = row.split(",")[:5]
        keys.append((o, d_, int(y), int(m), int(day)))
    assert keys == sorted(keys)


def test_export_round_trip_reaggregates():
    """Parsing a daily export reproduces the filtered subcube's cells."""
    rng = random.Random(890)
    cube = random_cube(rng, list("ABCDE"), dt.date(2020, 1, 1), 40, 600,
                       scale=GeoScale.WORLD_COUNTRY)
    rng_ = DateRange(dt.date(2020, 1, 3), dt.date(2020, 2, 5))
    doc = export_flows(cube, rng_, "daily")
    parsed = set()
    for row in doc.splitlines()[1:]:
        o, d_, y, m, day, cnt, olat, olon, dlat, dlon = row.split(",")
        parsed.add((o, d_, dt.date(int(y), int(m), int(day)), int(cnt),
                    olat, olon, dlat, dlon))
    sub = dice(cube, rng=rng_)
    expected = {
        (c.origin, c.dest, c.date, c.count,
         f"{c.o_center.lat:.6f}", f"{c.o_center.lon:.6f}",
         f"{c.d_center.lat:.6f}", f"{c.d_center.lon:.6f}")
        for c in sub.cells()
    }
    assert parsed == expected


def test_export_place_set_area(tri_cube):
    doc = export_flows(tri_cube, R, "daily", area={"B"})
    rows = doc.splitlines()[1:]
    assert sorted(r.split(",")[0:2] for r in rows) == [["A", "B"], ["B", "A"]]


def test_export_bbox_area(tri_cube):
    # box around centers near (10, 10): keeps rows touching A's center
    box = BoundingBox(5.0, 5.0, 15.0, 15.0)
    doc = export_flows(tri_cube, R, "daily", area=box)
    rows = {tuple(r.split(",")[:2]) for r in doc.splitlines()[1:]}
    assert rows == {("A", "B"), ("B", "A"), ("A", "A")}


def test_export_suppression_floor():
    rng_ = DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 31))
    cube = cube_from_cells(
        Source.SDM_LIKE, GeoScale.WORLD_COUNTRY,
        [
            ("A", "B", D, 2, 0, 0, 0, 0),
            ("A", "B", D + dt.timedelta(days=1), 30, 0, 0, 0, 0),
        ],
    )
    doc = export_flows(cube, rng_, "aggregated", suppress_below=5)
    assert doc.splitlines()[1].startswith("A,B,2020,1,30,")  # floor applied per cell
    doc2 = export_flows(cube, rng_, "aggregated")
    assert doc2.splitlines()[1].startswith("A,B,2020,1,32,")


def test_export_empty_result_header_only(tri_cube):
    far = DateRange(dt.date(2022, 1, 1), dt.date(2022, 1, 2))
    assert export_flows(tri_cube, far, "daily").splitlines() == [
        "o_place,d_place,year,month,day,cnt,o_lat,o_lon,d_lat,d_lon"
    ]


def test_queries_invariant_to_store_round_trip(tmp_path):
    rng = random.Random(42)
    cube = random_cube(rng, list("ABCDEF"), dt.date(2020, 1, 1), 60, 2000,
                       scale=GeoScale.WORLD_COUNTRY)
    persist_cube(cube, str(tmp_path / "s"))
    reopened = open_cube(str(tmp_path / "s"))
    rng_ = DateRange(dt.date(2020, 1, 10), dt.date(2020, 2, 15))
    assert place_flow_totals(cube, "A", FlowDirection.IN_AND_OUT, rng_) == \
        place_flow_totals(reopened, "A", FlowDirection.IN_AND_OUT, rng_)
    assert daily_movement_series(cube, "B", FlowDirection.INFLOW, rng_) == \
        daily_movement_series(reopened, "B", FlowDirection.INFLOW, rng_)
    assert export_flows(cube, rng_, "daily") == export_flows(reopened, rng_, "daily")
