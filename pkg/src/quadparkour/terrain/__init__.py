"""Procedural obstacle terrains, difficulty interpolation, file formats, and
robot-centric elevation sampling."""

from .categories import (
    CATEGORIES,
    N_LEVELS,
    PARAM_RANGES,
    ObstacleSpec,
    difficulty,
    generate,
)
from .elevation import (
    FORWARD_SHIFT,
    MAP_COLS,
    MAP_ROWS,
    ElevationMap,
    sample_elevation,
    sample_elevation_batch,
)
from .heightfield import (
    RESOLUTION,
    TILE_LENGTH,
    TILE_WIDTH,
    Heightfield,
    load_heightfield,
    sample_height,
    save_heightfield,
)

__all__ = [
    "CATEGORIES", "N_LEVELS", "PARAM_RANGES", "ObstacleSpec", "difficulty",
    "generate", "FORWARD_SHIFT", "MAP_COLS", "MAP_ROWS", "ElevationMap",
    "sample_elevation", "sample_elevation_batch", "RESOLUTION", "TILE_LENGTH",
    "TILE_WIDTH", "Heightfield", "load_heightfield", "sample_height",
    "save_heightfield",
]
