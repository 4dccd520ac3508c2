"""Tube formulas for fractal sprays via complex dimensions, with a direct oracle."""

__version__ = "0.1.0"

from .core import (
    FractalSpray,
    FractalString,
    SelfSimilarSystem,
    SteinerLikeRep,
    enumerate_scales,
    validate_rep,
)
from .errors import ConfigError, SprayTubeError
from .generators import builtin, custom_rep
from .oracle import apollonian_packing, apollonian_string, direct_tube, volume_split
from .scalingzeta import Window, complex_dimensions, lattice_classify, zeta_eval
from .tubeformula import (
    TruncationSpec,
    exact_tube,
    expand,
    monophase_tube,
    screen_error_term,
    tube_value,
    tube_with_error,
)
from .tubularzeta import TubularZetaContext, zeta_T

__all__ = [
    "FractalSpray", "FractalString", "SelfSimilarSystem", "SteinerLikeRep",
    "enumerate_scales", "validate_rep", "ConfigError", "SprayTubeError",
    "builtin", "custom_rep", "apollonian_packing", "apollonian_string",
    "direct_tube", "volume_split", "Window", "complex_dimensions",
    "lattice_classify", "zeta_eval", "TruncationSpec", "exact_tube", "expand",
    "monophase_tube", "screen_error_term", "tube_value", "tube_with_error",
    "TubularZetaContext", "zeta_T",
]
