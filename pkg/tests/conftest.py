"""Shared fixtures: synthetic districts, file-backed regions, reference data paths."""
import json
from pathlib import Path

import pytest

from metronet.geomodel import (
    District,
    GeoPoint,
    PlanarPoint,
    PlanarPolygon,
    unproject,
)

DATA_DIR = Path(__file__).parent / "data"

# Symmetric about the planar origin so the recomputed bbox-center origin of
# written GeoJSON matches the origin used to generate it.
FIXTURE_ORIGIN = GeoPoint(3.0, 101.5)


def rect_polygon(x0: float, y0: float, x1: float, y1: float) -> PlanarPolygon:
    return PlanarPolygon(
        outer=(
            PlanarPoint(x0, y0),
            PlanarPoint(x1, y0),
            PlanarPoint(x1, y1),
            PlanarPoint(x0, y1),
        )
    )


def rect_district(district_id: str, x0, y0, x1, y1, density: float) -> District:
    return District(district_id, (rect_polygon(x0, y0, x1, y1),), density)


def planar_ring_to_geojson(ring, origin: GeoPoint = FIXTURE_ORIGIN) -> list:
    coords = []
    for x, y in [*ring, ring[0]]:
        geo = unproject(PlanarPoint(x, y), origin)
        coords.append([geo.lon, geo.lat])
    return coords


def write_region_files(tmp_path: Path, rects, origin: GeoPoint = FIXTURE_ORIGIN):
    """Write boundaries.geojson + densities.csv for planar rectangles.

    ``rects`` rows are (district_id, x0, y0, x1, y1, density). The rectangles
    should be symmetric about (0, 0) so reloading reproduces the same origin.
    """
    features = []
    density_rows = ["district_id,density_per_km2"]
    for district_id, x0, y0, x1, y1, density in rects:
        ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        features.append(
            {
                "type": "Feature",
                "properties": {"district_id": district_id},
                "geometry": {"type": "Polygon", "coordinates": [planar_ring_to_geojson(ring, origin)]},
            }
        )
        density_rows.append(f"{district_id},{density}")
    boundaries = tmp_path / "boundaries.geojson"
    densities = tmp_path / "densities.csv"
    boundaries.write_text(json.dumps({"type": "FeatureCollection", "features": features}))
    densities.write_text("\n".join(density_rows) + "\n")
    return boundaries, densities


def write_generator_file(tmp_path: Path, rows, origin: GeoPoint = FIXTURE_ORIGIN) -> Path:
    """Write generators.csv from (name, daily_visitors, x_m, y_m) planar rows."""
    out = ["name,daily_visitors,latitude,longitude"]
    for name, visitors, x, y in rows:
        geo = unproject(PlanarPoint(x, y), origin)
        out.append(f"{name},{visitors},{geo.lat},{geo.lon}")
    path = tmp_path / "generators.csv"
    path.write_text("\n".join(out) + "\n")
    return path


@pytest.fixture
def unit_square_km() -> District:
    """1 km x 1 km district at density 1000/km^2 (implied population 1000)."""
    return rect_district("unit", 0.0, 0.0, 1000.0, 1000.0, 1000.0)


@pytest.fixture
def two_district_region():
    """Smooth synthetic region: two adjacent rectangles with different densities."""
    west = rect_district("west", -8000.0, -4000.0, 0.0, 4000.0, 2000.0)
    east = rect_district("east", 0.0, -4000.0, 8000.0, 4000.0, 800.0)
    return [west, east]


@pytest.fixture
def selangor_paths():
    return {
        "boundaries": DATA_DIR / "selangor_boundary.geojson",
        "densities": DATA_DIR / "selangor_densities.csv",
        "generators": DATA_DIR / "selangor_generators.csv",
    }
