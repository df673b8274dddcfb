"""Metro network design from geospatial demand data via a two-stage GA.

Stage 1 places K stations by maximizing Gaussian-weighted population and
attraction coverage; stage 2 evolves L lines over those stations minimizing
demand-weighted pairwise shortest-path cost under connectivity constraints.
"""

from .coverage import CoverageParams, CoverageReport
from .evolve import EvolutionHistory, GaConfig
from .geomodel import (
    DemandGrid,
    District,
    GeneratorPoint,
    GeoPoint,
    PlanarPoint,
    PlanarPolygon,
    Region,
    load_generators,
    load_region,
    project,
    rasterize,
    unproject,
)
from .lines import LineFitness, LineGenome, LineStageConfig, optimize_lines
from .netgraph import DistanceMatrix, LineNetwork
from .stations import StationGenome, StationStageConfig, optimize_stations

__version__ = "0.1.0"

__all__ = [
    "CoverageParams",
    "CoverageReport",
    "DemandGrid",
    "DistanceMatrix",
    "District",
    "EvolutionHistory",
    "GaConfig",
    "GeneratorPoint",
    "GeoPoint",
    "LineFitness",
    "LineGenome",
    "LineNetwork",
    "LineStageConfig",
    "PlanarPoint",
    "PlanarPolygon",
    "Region",
    "StationGenome",
    "StationStageConfig",
    "load_generators",
    "load_region",
    "optimize_lines",
    "optimize_stations",
    "project",
    "rasterize",
    "unproject",
]
