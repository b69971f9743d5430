"""On-disk cube stores: a manifest plus one columnar file per partition.

Layout of a cube directory:

    manifest                 key=value lines (source, scale, date range,
                             place dictionary, partition list with row counts)
    part-<YYYYMM>-<bucket>.col   binary columns, independently readable

Stores are written once and never mutated; readers may open them
concurrently.  A canonical CSV dump of all cells in sorted order serves as
the byte-stable identity for golden-file tests.
"""
from __future__ import annotations

import datetime as dt
import os
import struct
from typing import Iterator, Optional

import numpy as np

from .cube import MICRO, OdtCube, Partition, Source
from .geo import GeoScale

__all__ = ["StoreError", "persist_cube", "open_cube", "canonical_dump", "canonical_dump_lines", "cube_dir_name"]

_MAGIC = b"ODTCOL1\n"
_COLUMN_DTYPES = (
    ("origin", "<i4"), ("dest", "<i4"), ("date", "<i4"), ("count", "<i8"),
    ("o_lat", "<i8"), ("o_lon", "<i8"), ("d_lat", "<i8"), ("d_lon", "<i8"),
)
_ROW_BYTES = sum(np.dtype(d).itemsize for _, d in _COLUMN_DTYPES)


class StoreError(IOError):
    """Raised for unreadable, missing, or corrupt store files."""


def cube_dir_name(source: Source, scale: GeoScale) -> str:
    return f"{source.value}-{scale.value}"


def _partition_filename(month: str, bucket: int) -> str:
    return f"part-{month}-{bucket:02d}.col"


def persist_cube(cube: OdtCube, store_path: str) -> None:
    """Write a cube into a directory; output bytes are deterministic."""
    os.makedirs(store_path, exist_ok=True)
    lines = [
        f"source={cube.source.value}",
        f"scale={cube.scale.value}",
        f"first_date={cube.first_date.isoformat() if cube.first_date else ''}",
        f"last_date={cube.last_date.isoformat() if cube.last_date else ''}",
    ]
    lines.extend(f"place={pid}" for pid in cube.place_ids)
    for (month, bucket), part in cube.partitions.items():
        name = _partition_filename(month, bucket)
        lines.append(f"partition={name},{part.n_rows}")
        with open(os.path.join(store_path, name), "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", part.n_rows))
            for (_, dtype), col in zip(_COLUMN_DTYPES, part.columns()):
                fh.write(np.ascontiguousarray(col, dtype=dtype).tobytes())
    with open(os.path.join(store_path, "manifest"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(store_path: str) -> dict:
    path = os.path.join(store_path, "manifest")
    if not os.path.isfile(path):
        raise StoreError(f"{store_path}: no manifest found")
    meta = {"places": [], "partitions": []}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw or "=" not in raw:
                continue
            key, value = raw.split("=", 1)
            if key == "place":
                meta["places"].append(value)
            elif key == "partition":
                name, _, rows = value.partition(",")
                meta["partitions"].append((name, int(rows)))
            else:
                meta[key] = value
    for required in ("source", "scale"):
        if required not in meta:
            raise StoreError(f"{path}: manifest missing {required}")
    return meta


def _read_partition(store_path: str, name: str, expected_rows: int) -> Partition:
    path = os.path.join(store_path, name)
    stem = name.removesuffix(".col")
    try:
        _, month, bucket = stem.split("-")
    except ValueError:
        raise StoreError(f"{name}: unrecognized partition filename") from None
    if not os.path.isfile(path):
        raise StoreError(f"missing partition file {name} (month {month}, bucket {int(bucket)})")
    size = os.path.getsize(path)
    expected_size = len(_MAGIC) + 8 + expected_rows * _ROW_BYTES
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC or size != expected_size:
            raise StoreError(f"corrupt partition file {name}")
        (n_rows,) = struct.unpack("<Q", fh.read(8))
        if n_rows != expected_rows:
            raise StoreError(f"corrupt partition file {name}: row count mismatch")
        cols = []
        for _, dtype in _COLUMN_DTYPES:
            buf = fh.read(np.dtype(dtype).itemsize * n_rows)
            cols.append(np.frombuffer(buf, dtype=dtype).copy())
    return Partition(month, int(bucket), *cols)


def open_cube(store_path: str) -> OdtCube:
    """Load a persisted cube; round-trips the canonical cell multiset."""
    meta = read_manifest(store_path)
    first = dt.date.fromisoformat(meta["first_date"]) if meta.get("first_date") else None
    last = dt.date.fromisoformat(meta["last_date"]) if meta.get("last_date") else None
    partitions = {}
    for name, rows in meta["partitions"]:
        part = _read_partition(store_path, name, rows)
        partitions[(part.month, part.bucket)] = part
    return OdtCube(
        Source.from_key(meta["source"]),
        GeoScale.from_key(meta["scale"]),
        first, last, meta["places"], partitions,
    )


def list_cubes(store_root: str) -> Iterator[str]:
    """Paths of cube directories under a store root (any dir with a manifest)."""
    if not os.path.isdir(store_root):
        return
    for entry in sorted(os.listdir(store_root)):
        path = os.path.join(store_root, entry)
        if os.path.isdir(path) and os.path.isfile(os.path.join(path, "manifest")):
            yield path


def canonical_dump_lines(cube: OdtCube) -> Iterator[str]:
    """Cells as sorted CSV rows (header first), the cube's canonical text form."""
    yield "origin,dest,date,count,o_lat,o_lon,d_lat,d_lon"
    if not cube.partitions:
        return
    cols = [np.concatenate([p.columns()[i] for p in cube.partitions.values()]) for i in range(8)]
    order = np.lexsort((cols[2], cols[1], cols[0]))
    o, d, t, n = (cols[i][order] for i in range(4))
    sums = [cols[i][order] for i in range(4, 8)]
    ids = cube.place_ids
    for i in range(len(o)):
        cnt = int(n[i])
        scale = cnt * MICRO
        yield (
            f"{ids[int(o[i])]},{ids[int(d[i])]},{dt.date.fromordinal(int(t[i])).isoformat()},{cnt},"
            f"{int(sums[0][i]) / scale:.6f},{int(sums[1][i]) / scale:.6f},"
            f"{int(sums[2][i]) / scale:.6f},{int(sums[3][i]) / scale:.6f}"
        )


def canonical_dump(cube: OdtCube) -> str:
    return "\n".join(canonical_dump_lines(cube)) + "\n"
