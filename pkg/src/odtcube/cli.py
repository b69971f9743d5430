"""Command-line entry point.

Subcommands:
    build    ingest raw records, build cubes at the requested scales, persist
    export   write a flow CSV (daily or aggregated) from a persisted cube
    serve    run the HTTP query service over a store directory
    dump     canonical sorted-CSV dump of one cube (golden-file friendly)

Every flag can also come from a key=value config file via --config; flags on
the command line win.  Exit status is 0 on success and nonzero with a
stage-tagged message on stderr otherwise.
"""
from __future__ import annotations

import argparse
import datetime as dt
import os
import sys
from typing import Optional

from .cube import DateRange, Source
from .geo import GeoScale
from .pipeline import PipelineConfig, PipelineError, run_build
from .queries import BoundingBox, export_flows_lines
from .service import CubeCatalog, serve
from .store import StoreError, canonical_dump_lines, cube_dir_name, open_cube

__all__ = ["main"]


def _parse_cli_date(raw: str) -> dt.date:
    for parse in (
        lambda s: dt.datetime.strptime(s, "%m/%d/%Y").date(),
        dt.date.fromisoformat,
    ):
        try:
            return parse(raw)
        except ValueError:
            continue
    raise ValueError(f"{raw!r} is not a MM/DD/YYYY or YYYY-MM-DD date")


def _parse_scale_paths(pairs: list[str]) -> dict[GeoScale, str]:
    out = {}
    for pair in pairs:
        key, _, path = pair.partition("=")
        if not path:
            raise ValueError(f"expected SCALE=PATH, got {pair!r}")
        out[GeoScale.from_key(key)] = path
    return out


def _load_config_defaults(path: str) -> dict[str, str]:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merged(args: argparse.Namespace, key: str, fallback=None):
    value = getattr(args, key, None)
    if value not in (None, []):
        return value
    if args.config_values and key in args.config_values:
        raw = args.config_values[key]
        if key in ("input", "boundary", "centroids"):
            return raw.split()
        return raw
    return fallback


def _open_store_cube(store: str, source_key: str, scale_key: str):
    source = {"twitter": Source.TWITTER_LIKE, "safegraph": Source.SDM_LIKE}.get(source_key)
    if source is None:
        source = Source.from_key(source_key)
    scale = GeoScale.from_key(scale_key)
    return open_cube(os.path.join(store, cube_dir_name(source, scale)))


def cmd_build(args: argparse.Namespace) -> int:
    scales_raw = _merged(args, "scales")
    if not scales_raw:
        raise PipelineError("config", "--scales is required")
    config = PipelineConfig(
        kind=_merged(args, "kind", "point-events"),
        inputs=_merged(args, "input", []),
        scales=[GeoScale.from_key(s.strip()) for s in scales_raw.split(",")],
        store_dir=_merged(args, "store") or _fail_config("--store is required"),
        boundaries=_parse_scale_paths(_merged(args, "boundary", [])),
        centroids=_parse_scale_paths(_merged(args, "centroids", [])),
        filter_path=_merged(args, "source_filter"),
        parallelism=int(_merged(args, "parallelism", 0)),
        deterministic=bool(getattr(args, "deterministic", False)),
    )
    if not config.inputs:
        raise PipelineError("config", "at least one --input is required")
    for path in config.inputs:
        if not os.path.exists(path):
            raise PipelineError("config", f"input {path} does not exist")
    run_build(config)
    return 0


def _fail_config(message: str):
    raise PipelineError("config", message)


def cmd_export(args: argparse.Namespace) -> int:
    cube = _open_store_cube(args.store, args.source, args.scale)
    rng = DateRange(_parse_cli_date(args.begin), _parse_cli_date(args.end))
    area = None
    if args.bbox:
        min_lon, min_lat, max_lon, max_lat = (float(v) for v in args.bbox.split(","))
        area = BoundingBox(min_lat, min_lon, max_lat, max_lon)
    elif args.places:
        area = {p.strip() for p in args.places.split(",") if p.strip()}
    lines = export_flows_lines(
        cube, rng, args.type, area, args.min_count, args.suppress_below
    )
    _write_lines(lines, args.output)
    return 0


def cmd_dump(args: argparse.Namespace) -> int:
    cube = _open_store_cube(args.store, args.source, args.scale)
    _write_lines(canonical_dump_lines(cube), args.output)
    return 0


def _write_lines(lines, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
    else:
        for line in lines:
            sys.stdout.write(line + "\n")


def cmd_serve(args: argparse.Namespace) -> int:
    listen = args.listen or os.environ.get("ODTCUBE_LISTEN", "127.0.0.1:8080")
    store = args.store or os.environ.get("ODTCUBE_STORE")
    boundaries = args.boundaries or os.environ.get("ODTCUBE_BOUNDARIES")
    if not store:
        raise PipelineError("config", "--store (or ODTCUBE_STORE) is required")
    host, _, port = listen.rpartition(":")
    host = host or "127.0.0.1"
    catalog = CubeCatalog.load(store)
    serve(catalog, host, int(port), boundaries)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odtcube", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="ingest raw records and build cubes")
    p_build.add_argument("--config", help="key=value file supplying defaults for any flag")
    p_build.add_argument("--kind", choices=["point-events", "sdm"], default=None,
                         help="input record shape (default point-events)")
    p_build.add_argument("--input", action="append", default=None, help="input file (repeatable)")
    p_build.add_argument("--boundary", action="append", default=None, metavar="SCALE=PATH",
                         help="boundary file for one scale (repeatable)")
    p_build.add_argument("--centroids", action="append", default=None, metavar="SCALE=PATH",
                         help="id,lat,lon centroid table for one scale (repeatable)")
    p_build.add_argument("--scales", default=None,
                         help="comma-separated scales to materialize; finest is the extraction scale")
    p_build.add_argument("--store", default=None, help="store directory to write")
    p_build.add_argument("--source-filter", dest="source_filter", default=None,
                         help="label filter file (mode=denylist|allowlist, one label per line)")
    p_build.add_argument("--parallelism", type=int, default=None, help="worker processes (default: cores)")
    p_build.add_argument("--deterministic", action="store_true",
                         help="single merge order for byte-stable logs")
    p_build.set_defaults(func=cmd_build)

    p_export = sub.add_parser("export", help="export flows as CSV")
    p_export.add_argument("--store", required=True)
    p_export.add_argument("--source", required=True, help="twitter or safegraph")
    p_export.add_argument("--scale", required=True)
    p_export.add_argument("--begin", required=True, help="MM/DD/YYYY or YYYY-MM-DD")
    p_export.add_argument("--end", required=True)
    p_export.add_argument("--type", choices=["daily", "aggregated"], default="aggregated")
    p_export.add_argument("--bbox", default=None, help="min_lon,min_lat,max_lon,max_lat")
    p_export.add_argument("--places", default=None, help="comma-separated place ids to keep")
    p_export.add_argument("--min-count", dest="min_count", type=int, default=0)
    p_export.add_argument("--suppress-below", dest="suppress_below", type=int, default=0,
                          help="privacy floor: drop cells with count below this before export")
    p_export.add_argument("--output", "-o", default=None)
    p_export.set_defaults(func=cmd_export)

    p_serve = sub.add_parser("serve", help="serve the HTTP query API")
    p_serve.add_argument("--store", default=None, help="store directory (env ODTCUBE_STORE)")
    p_serve.add_argument("--listen", default=None, help="host:port (env ODTCUBE_LISTEN)")
    p_serve.add_argument("--boundaries", default=None,
                         help="directory of <scale>.geojson files served at /boundaries "
                              "(env ODTCUBE_BOUNDARIES)")
    p_serve.set_defaults(func=cmd_serve)

    p_dump = sub.add_parser("dump", help="canonical sorted CSV dump of one cube")
    p_dump.add_argument("--store", required=True)
    p_dump.add_argument("--source", required=True)
    p_dump.add_argument("--scale", required=True)
    p_dump.add_argument("--output", "-o", default=None)
    p_dump.set_defaults(func=cmd_dump)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.config_values = {}
    if getattr(args, "config", None):
        try:
            args.config_values = _load_config_defaults(args.config)
        except OSError as exc:
            print(f"error: [config] {exc}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StoreError as exc:
        print(f"error: [store] {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: [serve] {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"error: [params] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
