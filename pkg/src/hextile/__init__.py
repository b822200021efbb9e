"""Diamond tilings of hexagonal phased-array apertures.

Geometry, tiling enumeration, sub-array pattern evaluation and tiling
search (exhaustive and genetic).
"""

from .enumeration import EnumerationCursor, brute_force_enumerate, cardinality, enumerate_all, successor
from .iga import GAConfig, run_cdm
from .lattice import HexAperture, boundary_heights, build_aperture, element_positions, vertex_depth
from .pattern import (
    ExcitationSet,
    PowerMask,
    UVGrid,
    array_factor,
    build_reference,
    cost,
    metrics,
    scan_map,
    steering_phases,
    subarray_coefficients,
)
from .tiling import (
    Tiling,
    decode,
    encode,
    height_field,
    is_tileable,
    is_valid_word,
    maximal_word,
    minimal_tiling,
    thurston_complete,
)

__version__ = "0.1.0"

__all__ = [
    "EnumerationCursor",
    "ExcitationSet",
    "GAConfig",
    "HexAperture",
    "PowerMask",
    "Tiling",
    "UVGrid",
    "array_factor",
    "boundary_heights",
    "brute_force_enumerate",
    "build_aperture",
    "build_reference",
    "cardinality",
    "cost",
    "decode",
    "element_positions",
    "encode",
    "enumerate_all",
    "height_field",
    "is_tileable",
    "is_valid_word",
    "maximal_word",
    "metrics",
    "minimal_tiling",
    "run_cdm",
    "scan_map",
    "steering_phases",
    "subarray_coefficients",
    "successor",
    "thurston_complete",
    "vertex_depth",
]
