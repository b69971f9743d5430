"""HTTP /REST endpoint conformance."""
import datetime as dt

import pytest
from fastapi.testclient import TestClient

from odtcube.cube import DateRange, Source, cube_from_cells
from odtcube.geo import GeoScale
from odtcube.queries import FlowDirection, export_flows, daily_movement_series
from odtcube.service import CubeCatalog, create_app

D1 = dt.date(2020, 1, 3)
D2 = dt.date(2020, 1, 4)


def world_admin_cube():
    return cube_from_cells(
        Source.TWITTER_LIKE, GeoScale.WORLD_FIRST_LEVEL_ADMIN,
        [
            ("FRA.1_1", "FRA.2_1", D1, 3, 48.0, 2.0, 45.0, 4.0),
            ("FRA.2_1", "FRA.1_1", D1, 2, 45.0, 4.0, 48.0, 2.0),
            ("FRA.1_1", "FRA.1_1", D2, 9, 48.0, 2.0, 48.1, 2.1),
            ("DEU.1_1", "FRA.1_1", D2, 4, 52.0, 13.0, 48.0, 2.0),
        ],
    )


def county_cube():
    return cube_from_cells(
        Source.SDM_LIKE, GeoScale.US_COUNTY,
        [("45001", "45003", D1, 25, 34.0, -81.0, 34.5, -80.5)],
    )


@pytest.fixture(scope="module")
def client():
    catalog = CubeCatalog().add(world_admin_cube()).add(county_cube())
    return TestClient(create_app(catalog))


BASE = {
    "scale": "world_first_level_admin",
    "source": "twitter",
    "begin": "01/01/2020",
    "end": "12/31/2020",
}


def get(client, **params):
    return client.get("/REST", params=params)


def test_movement_between_places(client):
    r = get(client, operation="get_movement_between_places",
            place="FRA.1_1", direction="in_and_out", **BASE)
    assert r.status_code == 200
    assert r.text.splitlines() == ["place,cnt", "DEU.1_1,4", "FRA.2_1,5"]


def test_movement_between_places_direction_defaults_to_in_and_out(client):
    explicit = get(client, operation="get_movement_between_places",
                   place="FRA.1_1", direction="in_and_out", **BASE)
    default = get(client, operation="get_movement_between_places", place="FRA.1_1", **BASE)
    assert default.text == explicit.text


def test_daily_movement_intraflow(client):
    params = dict(BASE, begin="01/03/2020", end="01/05/2020")
    r = get(client, operation="get_daily_movement", place="FRA.1_1",
            direction="intraflow", **params)
    assert r.status_code == 200
    assert r.text.splitlines() == [
        "date,cnt", "2020-01-03,0", "2020-01-04,9", "2020-01-05,0",
    ]


def test_daily_movement_matches_engine(client):
    r = get(client, operation="get_daily_movement", place="FRA.2_1",
            direction="inflow", **dict(BASE, begin="01/03/2020", end="01/04/2020"))
    series = daily_movement_series(
        world_admin_cube(), "FRA.2_1", FlowDirection.INFLOW,
        DateRange(dt.date(2020, 1, 3), dt.date(2020, 1, 4)),
    )
    expected = ["date,cnt"] + [f"{d.isoformat()},{n}" for d, n in series.points]
    assert r.text.splitlines() == expected


def test_all_places_shape_and_prefix_filter(client):
    """Request shaped like the published client snippet: place-first CSV whose
    place column filters by id prefix."""
    r = get(client, operation="get_daily_movement_for_all_places", **BASE)
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/csv")
    lines = r.text.splitlines()
    assert lines[0] == "place,date,cnt"
    assert lines[0].split(",")[0] == "place"
    rows = [line.split(",") for line in lines[1:]]
    fra = [row for row in rows if row[0][:3] == "FRA"]
    deu = [row for row in rows if row[0][:3] == "DEU"]
    assert len(fra) == 2 * 366 and len(deu) == 366  # gapless full-year series
    assert sum(int(r_[2]) for r_ in fra) == 9  # intraflow default


def test_extract_flows_matches_engine_daily(client):
    params = dict(BASE, begin="01/01/2020", end="01/31/2020")
    r = get(client, operation="extract_odt_flows", type="daily", **params)
    golden = export_flows(
        world_admin_cube(), DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 31)), "daily"
    )
    assert r.status_code == 200
    assert r.text == golden


def test_extract_flows_aggregated_with_min_count(client):
    params = dict(BASE, begin="01/01/2020", end="01/31/2020")
    r = get(client, operation="extract_odt_flows", type="aggregated", min_count="3", **params)
    golden = export_flows(
        world_admin_cube(), DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 31)),
        "aggregated", min_count=3,
    )
    assert r.text == golden
    assert "FRA.2_1,FRA.1_1" not in r.text  # cnt 2 <= 3 filtered


def test_extract_flows_bbox(client):
    params = dict(BASE, begin="01/01/2020", end="01/31/2020")
    r = get(client, operation="extract_odt_flows", type="aggregated",
            bbox="0.0,44.0,5.0,49.0", **params)
    from odtcube.queries import BoundingBox

    golden = export_flows(
        world_admin_cube(), DateRange(dt.date(2020, 1, 1), dt.date(2020, 1, 31)),
        "aggregated", area=BoundingBox(44.0, 0.0, 49.0, 5.0),
    )
    assert r.text == golden


def test_catalog(client):
    r = get(client, operation="list_catalog")
    assert r.status_code == 200
    assert r.text.splitlines() == [
        "source,scale,first_date,last_date",
        "safegraph,us_county,2020-01-03,2020-01-03",
        "twitter,world_first_level_admin,2020-01-03,2020-01-04",
    ]


def test_catalog_empty():
    client = TestClient(create_app(CubeCatalog()))
    r = client.get("/REST", params={"operation": "list_catalog"})
    assert r.text.splitlines() == ["source,scale,first_date,last_date"]


@pytest.mark.parametrize(
    "params",
    [
        {"operation": "bogus"},
        {"operation": "get_daily_movement", "place": "FRA.1_1", **dict(BASE, begin="2020-01-01")},
        {"operation": "get_daily_movement", "place": "FRA.1_1", **dict(BASE, begin="13/45/2020")},
        {"operation": "get_daily_movement", "place": "FRA.1_1", **dict(BASE, source="instagram")},
        {"operation": "get_daily_movement", "place": "FRA.1_1", **dict(BASE, scale="galaxy")},
        {"operation": "get_daily_movement", "place": "NOWHERE", **BASE},
        {"operation": "get_daily_movement", **BASE},  # missing place
        {"operation": "get_movement_between_places", "place": "FRA.1_1",
         "direction": "intraflow", **BASE},
        {"operation": "get_movement_between_places", "place": "FRA.1_1",
         **dict(BASE, begin="02/01/2020", end="01/01/2020")},
        {"operation": "extract_odt_flows", "type": "weekly", **BASE},
        {"operation": "extract_odt_flows", "bbox": "1,2,3", **BASE},
        {"operation": "extract_odt_flows", "min_count": "lots", **BASE},
        {"operation": "get_daily_movement", "place": "FRA.1_1",
         "direction": "sideways", **BASE},
    ],
)
def test_bad_requests_return_400_with_reason(client, params):
    r = client.get("/REST", params=params)
    assert r.status_code == 400
    assert r.text.startswith("error: ")
    assert "\n" not in r.text.strip()


def test_missing_cube_is_404(client):
    r = get(client, operation="get_daily_movement", place="45001",
            **dict(BASE, source="safegraph", scale="us_cbg"))
    assert r.status_code == 404
    assert r.text.startswith("error: ")


def test_cors_header_present(client):
    r = client.get(
        "/REST", params={"operation": "list_catalog"}, headers={"Origin": "http://elsewhere.test"}
    )
    assert r.headers.get("access-control-allow-origin") == "*"


def test_responses_are_stable(client):
    a = get(client, operation="get_movement_between_places", place="FRA.1_1", **BASE)
    b = get(client, operation="get_movement_between_places", place="FRA.1_1", **BASE)
    assert a.text == b.text


def test_no_400_for_catalog_constructed_requests(client):
    """Any request assembled from list_catalog rows, place ids the cube knows,
    and in-range dates must succeed."""
    catalog = get(client, operation="list_catalog").text.splitlines()[1:]
    cubes = {"twitter": world_admin_cube(), "safegraph": county_cube()}
    for row in catalog:
        source, scale, first, last = row.split(",")
        begin = f"{first[5:7]}/{first[8:10]}/{first[:4]}"
        end = f"{last[5:7]}/{last[8:10]}/{last[:4]}"
        base = {"source": source, "scale": scale, "begin": begin, "end": end}
        for place in cubes[source].place_ids:
            for op, extra in [
                ("get_movement_between_places", {"place": place, "direction": "inflow"}),
                ("get_daily_movement", {"place": place, "direction": "intraflow"}),
                ("get_daily_movement_for_all_places", {}),
                ("extract_odt_flows", {"type": "daily"}),
            ]:
                r = get(client, operation=op, **base, **extra)
                assert r.status_code == 200, (op, place, r.text)


def test_boundary_static_files(tmp_path):
    boundary_dir = tmp_path / "bounds"
    boundary_dir.mkdir()
    (boundary_dir / "us_county.geojson").write_text('{"type":"FeatureCollection","features":[]}')
    client = TestClient(create_app(CubeCatalog().add(county_cube()), str(boundary_dir)))
    r = client.get("/boundaries/us_county.geojson")
    assert r.status_code == 200
    assert r.json() == {"type": "FeatureCollection", "features": []}
    assert client.get("/boundaries/us_state.geojson").status_code == 404
