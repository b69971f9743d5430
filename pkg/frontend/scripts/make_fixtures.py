#!/usr/bin/env python3
"""Regenerate the explorer's test fixtures from the backend engine.

Builds the fixture cube, captures API responses for every view, persists a
store, and copies the CLI export as the download golden.  Run from the
repository root:

    python3 frontend/scripts/make_fixtures.py
"""
import datetime as dt
import json
import os
import subprocess
import sys
import tempfile

from fastapi.testclient import TestClient

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.join(ROOT, "src"))

from odtcube.cube import Source, cube_from_cells  # noqa: E402
from odtcube.geo import GeoScale  # noqa: E402
from odtcube.service import CubeCatalog, create_app  # noqa: E402
from odtcube.store import cube_dir_name, persist_cube  # noqa: E402

OUT = os.path.join(ROOT, "frontend", "test", "fixtures")
STATIC = os.path.join(ROOT, "frontend", "static", "boundaries")

D3 = dt.date(2020, 1, 3)
D4 = dt.date(2020, 1, 4)
D5 = dt.date(2020, 1, 5)

CELLS = [
    ("AAA", "BBB", D3, 3, 0.5, 0.5, 0.5, 2.5),
    ("BBB", "AAA", D3, 2, 0.5, 2.5, 0.5, 0.5),
    ("AAA", "AAA", D4, 9, 0.4, 0.4, 0.6, 0.6),
    ("CCC", "AAA", D5, 4, 0.5, 4.5, 0.5, 0.5),
    ("BBB", "CCC", D5, 30, 0.5, 2.5, 0.5, 4.5),
]


def fixture_cube():
    return cube_from_cells(Source.TWITTER_LIKE, GeoScale.WORLD_COUNTRY, CELLS)


def square(min_lon, min_lat, size=1.0):
    return [[
        [min_lon, min_lat], [min_lon + size, min_lat],
        [min_lon + size, min_lat + size], [min_lon, min_lat + size],
        [min_lon, min_lat],
    ]]


BOUNDARIES = {
    "type": "FeatureCollection",
    "features": [
        {
            "type": "Feature",
            "properties": {"id": pid, "name": pid},
            "geometry": {"type": "Polygon", "coordinates": square(lon, 0.0)},
        }
        for pid, lon in (("AAA", 0.0), ("BBB", 2.0), ("CCC", 4.0))
    ],
}


def save(name, text):
    path = os.path.join(OUT, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(f"wrote {path}")


def write_store(store_dir):
    """Persist the fixture cube as a servable store (used by live tests)."""
    cube = fixture_cube()
    persist_cube(cube, os.path.join(store_dir, cube_dir_name(cube.source, cube.scale)))


def main():
    if len(sys.argv) > 2 and sys.argv[1] == "--store-out":
        write_store(sys.argv[2])
        return
    os.makedirs(OUT, exist_ok=True)
    os.makedirs(STATIC, exist_ok=True)
    cube = fixture_cube()
    client = TestClient(create_app(CubeCatalog().add(cube)))

    def get(**params):
        r = client.get("/REST", params=params)
        assert r.status_code == 200, (params, r.text)
        return r.text

    base = {"source": "twitter", "scale": "world_country",
            "begin": "01/01/2020", "end": "01/31/2020"}

    save("catalog.csv", get(operation="list_catalog"))
    save("totals_BBB_inflow.csv", get(
        operation="get_movement_between_places", place="BBB", direction="inflow", **base))
    save("totals_BBB_in_and_out.csv", get(
        operation="get_movement_between_places", place="BBB", direction="in_and_out", **base))
    save("daily_AAA_intraflow_single.csv", get(
        operation="get_daily_movement", place="AAA", direction="intraflow",
        **dict(base, begin="01/04/2020", end="01/04/2020")))
    save("daily_AAA_inflow.csv", get(
        operation="get_daily_movement", place="AAA", direction="inflow",
        **dict(base, begin="01/03/2020", end="01/05/2020")))
    save("daily_CCC_inflow.csv", get(
        operation="get_daily_movement", place="CCC", direction="inflow",
        **dict(base, begin="01/03/2020", end="01/05/2020")))
    save("flows_aggregated.csv", get(operation="extract_odt_flows", type="aggregated", **base))
    save("flows_daily.csv", get(operation="extract_odt_flows", type="daily", **base))
    save("totals_BBB_inflow_empty.csv", get(
        operation="get_movement_between_places", place="BBB", direction="inflow",
        **dict(base, begin="06/01/2021", end="06/30/2021")))
    save("flows_daily_empty.csv", get(
        operation="extract_odt_flows", type="daily",
        **dict(base, begin="06/01/2021", end="06/30/2021")))

    with open(os.path.join(OUT, "boundaries.geojson"), "w", encoding="utf-8") as fh:
        json.dump(BOUNDARIES, fh)
    with open(os.path.join(STATIC, "world_country.geojson"), "w", encoding="utf-8") as fh:
        json.dump(BOUNDARIES, fh)

    # download golden comes from the CLI exporter over a persisted store
    with tempfile.TemporaryDirectory() as td:
        store_dir = os.path.join(td, "store")
        persist_cube(cube, os.path.join(store_dir, cube_dir_name(cube.source, cube.scale)))
        golden = os.path.join(OUT, "download_golden_aggregated.csv")
        subprocess.run(
            [sys.executable, "-m", "odtcube.cli", "export",
             "--store", store_dir, "--source", "twitter", "--scale", "world_country",
             "--begin", "01/01/2020", "--end", "01/31/2020",
             "--type", "aggregated", "--output", golden],
            check=True,
        )
        print(f"wrote {golden}")


if __name__ == "__main__":
    main()
