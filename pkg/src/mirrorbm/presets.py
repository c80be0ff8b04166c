"""Built-in example domains.

Each preset returns (curve, alpha) where alpha is the reference angle used
by the chord machinery; presets are also exposed as JSON-able dicts so the
command line can write them out.
"""

from __future__ import annotations

import math

from .geometry import CircleArc, EllipseArc, Segment, build_curve

SQRT2 = math.sqrt(2.0)


def _example1_pieces():
    """Egg-like C^1-except-one-corner domain glued from conics.

    Counterclockwise from (3, 0): a quarter of the ellipse x^2/9 + y^2/4 = 1,
    an arc of the circle of radius 3 about (0, -1), an arc of the small circle
    of radius sqrt(2) about (-sqrt(2), 0), a flat bottom segment, and a
    quarter of the flatter ellipse x^2/9 + y^2/2 = 1.  The only corner sits
    at (-2 sqrt(2), 0).
    """
    big_end = math.pi - math.atan2(1.0, 2.0 * SQRT2)
    return [
        EllipseArc((0.0, 0.0), 3.0, 2.0, 0.0, 0.5 * math.pi),
        CircleArc((0.0, -1.0), 3.0, 0.5 * math.pi, big_end),
        CircleArc((-SQRT2, 0.0), SQRT2, math.pi, 1.5 * math.pi),
        Segment((-SQRT2, -SQRT2), (0.0, -SQRT2)),
        EllipseArc((0.0, 0.0), 3.0, SQRT2, -0.5 * math.pi, 0.0),
    ]


def _example2_pieces():
    """A stadium: unit-radius caps joined by short horizontal segments.

    Total width 2.8 versus height 2, so the long axis is horizontal and the
    second Neumann eigenfunction sorts points left to right.
    """
    return [
        CircleArc((0.4, 0.0), 1.0, -0.5 * math.pi, 0.5 * math.pi),
        Segment((0.4, 1.0), (-0.4, 1.0)),
        CircleArc((-0.4, 0.0), 1.0, 0.5 * math.pi, 1.5 * math.pi),
        Segment((-0.4, -1.0), (0.4, -1.0)),
    ]


def _disk_pieces():
    return [CircleArc((0.0, 0.0), 1.0, 0.0, 2.0 * math.pi)]


def _rect_pieces(w, h):
    return [
        Segment((0.0, 0.0), (w, 0.0)),
        Segment((w, 0.0), (w, h)),
        Segment((w, h), (0.0, h)),
        Segment((0.0, h), (0.0, 0.0)),
    ]


_BUILDERS = {
    "example1": (_example1_pieces, 0.25 * math.pi),
    "example2": (_example2_pieces, 0.65),
    "disk": (_disk_pieces, 0.25 * math.pi),
    "rect-1x2": (lambda: _rect_pieces(1.0, 2.0), 0.25 * math.pi),
    "square": (lambda: _rect_pieces(1.0, 1.0), 0.25 * math.pi),
}

PRESET_NAMES = tuple(_BUILDERS)


def preset_domain(name):
    """Build a named example domain: returns (curve, alpha)."""
    try:
        pieces_fn, alpha = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    return build_curve(pieces_fn()), alpha


def preset_json_obj(name):
    curve, alpha = preset_domain(name)
    return curve.to_json_obj(alpha=alpha)
