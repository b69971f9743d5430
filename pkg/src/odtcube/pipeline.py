"""End-to-end build pipeline: raw records -> filtered events -> entity flows
-> cubes at every requested scale -> persisted store.

Extraction parallelizes across worker processes.  Point events are
partitioned by entity hash so each entity's history stays on one worker
(distinct-entity counting is then exact after a plain merge); visit records
are independent and chunk round-robin.  Partial results are per-cell integer
sums, so the merged cube is identical for any worker count.
"""
from __future__ import annotations

import datetime as dt
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .cube import CubeAccumulator, OdtCube, Source, rollup
from .extraction import (
    DropReport,
    SourceFilter,
    extract_point_event_flows,
    extract_sdm_flows,
    filter_human_events,
    parse_point_event_line,
    read_sdm_records,
)
from .geo import GeoPoint, GeoScale, PlaceHierarchy, load_places, stable_bucket
from .store import cube_dir_name, persist_cube

__all__ = ["PipelineConfig", "PipelineError", "run_build", "load_source_filter", "load_centroid_table"]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    kind: str  # "point-events" | "sdm"
    inputs: list[str]
    scales: list[GeoScale]
    store_dir: str
    boundaries: dict[GeoScale, str] = field(default_factory=dict)
    centroids: dict[GeoScale, str] = field(default_factory=dict)
    filter_path: Optional[str] = None
    parallelism: int = 0  # 0 = available cores
    deterministic: bool = False

    def workers(self) -> int:
        if self.parallelism > 0:
            return self.parallelism
        return max(1, os.cpu_count() or 1)


def load_source_filter(path: str) -> SourceFilter:
    """Filter file: first line ``mode=denylist|allowlist``, then one label per
    line; blank lines and ``#`` comments are ignored."""
    mode = None
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if mode is None and line.startswith("mode="):
                mode = line.split("=", 1)[1].strip()
                continue
            labels.append(line)
    if mode is None:
        raise PipelineError("config", f"{path}: filter file must start with mode=denylist|allowlist")
    return SourceFilter(mode, frozenset(labels))


def load_centroid_table(path: str) -> dict[str, GeoPoint]:
    """CSV of ``id,lat,lon`` (header optional) mapping place ids to label points."""
    table: dict[str, GeoPoint] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if line_no == 1 and not _is_float(parts[-1]):
                continue  # header row
            if len(parts) != 3:
                raise PipelineError("config", f"{path}:{line_no}: expected id,lat,lon")
            table[parts[0]] = GeoPoint(float(parts[1]), float(parts[2]))
    return table


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def build_hierarchy(config: PipelineConfig) -> PlaceHierarchy:
    hierarchy = PlaceHierarchy()
    for scale, path in config.boundaries.items():
        hierarchy.register(load_places(scale, path))
    for scale, path in config.centroids.items():
        hierarchy.register_centroids(scale, load_centroid_table(path))
    return hierarchy


# ---------------------------------------------------------------------------
# worker plumbing (module level so ProcessPoolExecutor can pickle it)

_worker_ctx: dict = {}


def _init_point_worker(places, source_filter):
    _worker_ctx["places"] = places
    _worker_ctx["filter"] = source_filter


def _point_worker(lines: list[str]):
    places = _worker_ctx["places"]
    source_filter = _worker_ctx["filter"]
    events = [parse_point_event_line(line) for line in lines]
    kept = list(filter_human_events(events, source_filter))
    report = DropReport()
    flows = extract_point_event_flows(kept, places, report=report)
    acc = CubeAccumulator(Source.TWITTER_LIKE, places.scale)
    acc.add_many(flows)
    return acc.cell_partial(), len(events), len(kept), len(flows), report


def _init_sdm_worker(hierarchy):
    _worker_ctx["hierarchy"] = hierarchy


def _sdm_worker(records):
    hierarchy = _worker_ctx["hierarchy"]
    report = DropReport()
    acc = CubeAccumulator(Source.SDM_LIKE, GeoScale.US_CBG)
    n_flows = 0
    for flow in extract_sdm_flows(records, hierarchy, report=report):
        acc.add(flow)
        n_flows += 1
    return acc.cell_partial(), n_flows, report


@dataclass
class BuildResult:
    stats: dict
    drop_report: DropReport
    cubes: dict[GeoScale, OdtCube]


def run_build(config: PipelineConfig, log=print) -> BuildResult:
    """Run the full build and persist one cube directory per requested scale."""
    if not config.scales:
        raise PipelineError("config", "at least one scale is required")
    families = {s.family for s in config.scales}
    if len(families) > 1:
        raise PipelineError("config", "requested scales span multiple hierarchy families")
    finest = max(config.scales, key=lambda s: s.rank)

    try:
        hierarchy = build_hierarchy(config)
    except Exception as exc:
        raise PipelineError("boundaries", str(exc)) from exc

    source_filter = None
    if config.filter_path:
        source_filter = load_source_filter(config.filter_path)

    if config.kind == "point-events":
        result = _build_point_events(config, hierarchy, finest, source_filter, log)
    elif config.kind == "sdm":
        result = _build_sdm(config, hierarchy, log)
    else:
        raise PipelineError("config", f"unknown input kind {config.kind!r}")

    fine_cube = next(iter(result.cubes.values()))
    for scale in sorted(config.scales, key=lambda s: s.rank, reverse=True):
        if scale is fine_cube.scale:
            cube = fine_cube
        else:
            try:
                cube = rollup(fine_cube, scale, hierarchy)
            except Exception as exc:
                raise PipelineError("rollup", str(exc)) from exc
        result.cubes[scale] = cube
        path = os.path.join(config.store_dir, cube_dir_name(cube.source, scale))
        try:
            persist_cube(cube, path)
        except OSError as exc:
            raise PipelineError("persist", str(exc)) from exc
        log(f"[cube {scale.value}] {cube.n_cells} cells, total count {cube.total_count} -> {path}")
        result.stats[f"cells_{scale.value}"] = cube.n_cells
    return result


def _chunk_lines_by_entity(paths: list[str], n_chunks: int) -> tuple[list[list[str]], int]:
    chunks: list[list[str]] = [[] for _ in range(n_chunks)]
    total = 0
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                entity = line.split("\t", 1)[0]
                chunks[stable_bucket(entity, n_chunks)].append(line)
                total += 1
    return [c for c in chunks if c], total


def _build_point_events(config, hierarchy, finest, source_filter, log) -> BuildResult:
    places = hierarchy.sets.get(finest)
    if places is None:
        raise PipelineError("boundaries", f"no boundary file registered for extraction scale {finest.value}")

    workers = config.workers()
    try:
        chunks, total_lines = _chunk_lines_by_entity(config.inputs, max(workers * 2, 1))
    except OSError as exc:
        raise PipelineError("read", str(exc)) from exc
    log(f"[read] {total_lines} point events from {len(config.inputs)} file(s)")

    acc = CubeAccumulator(Source.TWITTER_LIKE, finest)
    report = DropReport()
    n_events = n_kept = n_flows = 0
    try:
        if workers <= 1 or config.deterministic:
            _init_point_worker(places, source_filter)
            results = map(_point_worker, chunks)
        else:
            pool = ProcessPoolExecutor(
                max_workers=workers, initializer=_init_point_worker, initargs=(places, source_filter)
            )
            results = pool.map(_point_worker, chunks)
        for partial, n_ev, n_kp, n_fl, part_report in results:
            acc.merge_cells(partial)
            n_events += n_ev
            n_kept += n_kp
            n_flows += n_fl
            report.flows.update(part_report.flows)
            report.weight.update(part_report.weight)
        if workers > 1 and not config.deterministic:
            pool.shutdown()
    except Exception as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError("extract", str(exc)) from exc

    log(f"[filter] kept {n_kept} of {n_events} events")
    log(f"[extract] {n_flows} flows; drops: {report.summary()}")
    cube = acc.finalize()
    return BuildResult(
        {"events": n_events, "events_kept": n_kept, "flows": n_flows, "dropped": report.total_flows},
        report, {finest: cube},
    )


def _build_sdm(config, hierarchy, log) -> BuildResult:
    if not hierarchy.has_scale(GeoScale.US_CBG):
        raise PipelineError(
            "boundaries", "sdm extraction requires a us_cbg centroid table or boundary file"
        )
    try:
        records = [rec for path in config.inputs for rec in read_sdm_records(path)]
    except Exception as exc:
        raise PipelineError("read", str(exc)) from exc
    log(f"[read] {len(records)} visit records from {len(config.inputs)} file(s)")

    workers = config.workers()
    acc = CubeAccumulator(Source.SDM_LIKE, GeoScale.US_CBG)
    report = DropReport()
    n_flows = 0
    try:
        if workers <= 1 or config.deterministic or len(records) < 1000:
            _init_sdm_worker(hierarchy)
            results = map(_sdm_worker, [records])
        else:
            chunk_size = (len(records) + workers - 1) // workers
            chunks = [records[i : i + chunk_size] for i in range(0, len(records), chunk_size)]
            pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_sdm_worker, initargs=(hierarchy,))
            results = pool.map(_sdm_worker, chunks)
        for partial, n_fl, part_report in results:
            acc.merge_cells(partial)
            n_flows += n_fl
            report.flows.update(part_report.flows)
            report.weight.update(part_report.weight)
    except Exception as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError("extract", str(exc)) from exc

    log(f"[extract] {n_flows} flows; drops: {report.summary()}")
    cube = acc.finalize()
    return BuildResult(
        {"records": len(records), "flows": n_flows, "dropped": report.total_flows,
         "dropped_weight": report.total_weight},
        report, {GeoScale.US_CBG: cube},
    )
