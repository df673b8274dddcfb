"""On-disk artifact formats: station/line GeoJSON, grid CSV, run manifest.

GeoJSON geometries carry WGS84 coordinates for mapping tools; the exact
planar coordinates ride along as feature properties so artifacts round-trip
bit-for-bit through JSON float repr.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .coverage import CoverageReport
from .errors import ParseError
from .geomodel import DemandGrid, GeoPoint, PlanarPoint, unproject
from .lines import LineGenome
from .stations import StationGenome


def _dump_geojson(path: Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_stations_geojson(path: Path, genome: StationGenome, report: CoverageReport,
                           origin: GeoPoint) -> None:
    features = []
    for i, p in enumerate(genome.stations):
        geo = unproject(p, origin)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [geo.lon, geo.lat]},
                "properties": {
                    "station_id": i,
                    "serviced_population": float(report.per_station[i]),
                    "x": p.x,
                    "y": p.y,
                },
            }
        )
    _dump_geojson(path, {"type": "FeatureCollection", "features": features})


def read_stations_geojson(path: Path) -> tuple[tuple[PlanarPoint, ...], np.ndarray]:
    """Load station coordinates and serviced populations back from disk."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    features = doc.get("features")
    if doc.get("type") != "FeatureCollection" or not isinstance(features, list) or not features:
        raise ParseError(f"{path}: expected a non-empty FeatureCollection")
    stations: list[PlanarPoint | None] = [None] * len(features)
    serviced = np.zeros(len(features))
    for feat in features:
        props = feat.get("properties") or {}
        try:
            idx = int(props["station_id"])
            stations[idx] = PlanarPoint(float(props["x"]), float(props["y"]))
            serviced[idx] = float(props.get("serviced_population", 0.0))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"{path}: malformed station feature: {exc}") from exc
    if any(s is None for s in stations):
        raise ParseError(f"{path}: station_id values must cover 0..{len(features) - 1}")
    return tuple(stations), serviced  # type: ignore[return-value]


def write_lines_geojson(path: Path, genome: LineGenome,
                        stations: Sequence[PlanarPoint], origin: GeoPoint) -> None:
    features = []
    for li, line in enumerate(genome.lines):
        coords = []
        for s in line:
            geo = unproject(stations[s], origin)
            coords.append([geo.lon, geo.lat])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {"line_id": li, "station_ids": list(line)},
            }
        )
    _dump_geojson(path, {"type": "FeatureCollection", "features": features})


def read_lines_geojson(path: Path) -> LineGenome:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    features = doc.get("features")
    if doc.get("type") != "FeatureCollection" or not isinstance(features, list) or not features:
        raise ParseError(f"{path}: expected a non-empty FeatureCollection")
    lines = []
    for feat in sorted(features, key=lambda f: (f.get("properties") or {}).get("line_id", 0)):
        props = feat.get("properties") or {}
        try:
            lines.append(tuple(int(s) for s in props["station_ids"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: malformed line feature: {exc}") from exc
    return LineGenome(tuple(lines))


def write_grid_csv(path: Path, grid: DemandGrid) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "population"])
        for cx, cy, pop in zip(grid.x, grid.y, grid.population):
            writer.writerow([repr(float(cx)), repr(float(cy)), repr(float(pop))])


def write_manifest(path: Path, entries: Sequence[tuple[str, str]],
                   results: Sequence[tuple[str, str]] = ()) -> None:
    """Write the resolved configuration; the file is itself loadable via --config."""
    out = ["# metronet run manifest (reusable as a --config file)"]
    out += [f"{key} = {value}" for key, value in entries]
    out += [f"# result_{key} = {value}" for key, value in results]
    Path(path).write_text("\n".join(out) + "\n")
