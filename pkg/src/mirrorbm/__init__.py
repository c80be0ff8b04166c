"""Mirror-coupled reflected Brownian motion on convex planar domains.

The package splits into geometry primitives, chord/hinge machinery and its
assumption checkers, construction of the invariant region for the coupled
boundary-projection process, Monte Carlo simulation of the mirror coupling,
and an independent finite-element Neumann eigensolver used to cross-check
the probabilistic predictions.
"""

from .geometry import (
    BoundaryCurve,
    CircleArc,
    EllipseArc,
    LineRepr,
    Segment,
    build_curve,
    curve_from_json,
    curve_to_json,
    fillet_smooth,
)
from .presets import PRESET_NAMES, preset_domain

__all__ = [
    "BoundaryCurve",
    "CircleArc",
    "EllipseArc",
    "LineRepr",
    "Segment",
    "build_curve",
    "curve_from_json",
    "curve_to_json",
    "fillet_smooth",
    "preset_domain",
    "PRESET_NAMES",
]

__version__ = "0.1.0"
