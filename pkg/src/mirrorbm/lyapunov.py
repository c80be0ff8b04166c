"""Invariant region for mirror-coupled pairs, in boundary-pair coordinates.

The region is a closed loop inside the rectangle [0, ubar1] x [0, ubar2] of
chord-feet coordinates, stitched from eight arcs: on each of the two sides
(the plain one and its x-mirror) a sampled arc of fixed-angle chords, two
arcs obtained by integrating an ODE driven by the extremal active points,
and an axis-aligned two-segment connector bridging over to the other side.

The ODE arcs follow the motion of a chord whose feet slide so that the pair
of outermost active boundary points pushes them apart; each arc ends when
the chord becomes normal to the boundary at one of its feet.  That terminal
configuration is an accessibility boundary: past it the reflected boundary
part no longer crosses the boundary, so the driving term ceases to exist.
The integrator therefore treats any failure of the crossing search as an
overshoot signal, shrinks the step, and polishes the final approach using
the signed angle gap between the chord and the boundary normal line, which
stays transversal where the dot-product criterion degenerates
quadratically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, NoIntersection, TangentLine
from .hinges import (
    CrossingTracker,
    DegenerateChord,
    SpecialPoints,
    chord_from_feet,
    chord_through,
    extremal_points,
    mirror_line,
    normal_line_angle,
    partner_foot,
)

TOL_NORMAL = 1e-6  # terminal normality |p . n(foot) -+ 1| at the arc ends
_PSI_BAND = 1e-3  # angle gap below which the terminal polish takes over
_PSI_STOP = 1e-6  # angle gap at which the polish stops and extrapolates
_ANGLE_SLACK = 1e-9  # strictness buffer for family membership checks

FAMILY_LABELS = ("P", "Q", "Pp", "Qp")
_ARC_OF_FAMILY = {"P": ("u2", "u3"), "Q": ("u4", "u5"),
                  "Pp": ("u2p", "u3p"), "Qp": ("u4p", "u5p")}


class FamilyViolation(GeometryError):
    """A chord left the admissible angle window of its chord family."""


class NoTermination(GeometryError):
    """An ODE arc failed to reach its normal-chord terminal configuration."""


class OrderingViolated(GeometryError):
    """Constructed points broke the required order along the boundary."""


class ArcsIntersect(GeometryError):
    """The assembled loop is not simple: two arcs cross each other."""


class ConnectorImpossible(GeometryError):
    """The axis-aligned connector cannot be drawn in the required direction."""


class CoincidentPoints(GeometryError):
    """A pair query needs two distinct points."""


@dataclass(frozen=True)
class UPoint:
    """A point of the chord-feet chart: arclengths along the two parts."""

    u1: float
    u2: float

    def as_array(self):
        return np.array([self.u1, self.u2])


@dataclass(frozen=True)
class RegionArc:
    """One labeled piece of the region boundary, as a polyline in the chart."""

    label: str  # 'u2-u3', 'u3-u4', ...
    kind: str  # 'ode', 'alpha', or 'connector'
    points: np.ndarray  # (n, 2)
    a_star: float | None = None  # ODE arcs only: total parameter length


@dataclass
class LyapunovSet:
    """The assembled invariant region: eight arcs, corners, closed loop."""

    arcs: list
    corners: dict  # label -> UPoint, the eight junctions + connector elbows
    a_star: dict  # family label -> parameter length of its ODE arc
    loop: np.ndarray  # (n, 2) closed polyline, first point == last point
    ubar: tuple  # (ubar1, ubar2) chart rectangle

    def to_json_obj(self):
        return {
            "ubar": [float(self.ubar[0]), float(self.ubar[1])],
            "a_star": {k: float(v) for k, v in self.a_star.items()},
            "corners": {k: [c.u1, c.u2] for k, c in self.corners.items()},
            "arcs": [
                {
                    "label": a.label,
                    "kind": a.kind,
                    "a_star": None if a.a_star is None else float(a.a_star),
                    "points": np.asarray(a.points).tolist(),
                }
                for a in self.arcs
            ],
        }

    @classmethod
    def from_json_obj(cls, obj):
        arcs = [
            RegionArc(
                label=a["label"],
                kind=a["kind"],
                points=np.asarray(a["points"], dtype=float),
                a_star=a["a_star"],
            )
            for a in obj["arcs"]
        ]
        corners = {k: UPoint(float(v[0]), float(v[1])) for k, v in obj["corners"].items()}
        loop = _stitch_loop([a.points for a in arcs])
        return cls(arcs=arcs, corners=corners,
                   a_star={k: float(v) for k, v in obj["a_star"].items()},
                   loop=loop, ubar=(float(obj["ubar"][0]), float(obj["ubar"][1])))


def _wrap_half_pi(x):
    """Wrap an angle difference of two lines into (-pi/2, pi/2]."""
    y = (x + 0.5 * math.pi) % math.pi - 0.5 * math.pi
    return 0.5 * math.pi if y == -0.5 * math.pi else y


def mirrored_special_points(curve, special):
    """Special points of curve.mirrored_x(), transported from `special`.

    Mirroring the domain swaps the plain and primed labels, so the mirrored
    domain's points come from the primed entries (and vice versa) with the
    arclengths pushed through the exact piecewise parameter map.  Saves the
    cost of rerunning the chord scans on the mirrored domain.
    """
    s_m = {}
    pts_m = {}
    for key, s_val in special.s.items():
        twin = key[:-1] if key.endswith("p") else key + "p"
        if twin not in special.s:
            continue
        s_m[key] = curve.mirror_s(special.s[twin])
        x, y = special.points[twin]
        pts_m[key] = np.array([-x, y])
    out = SpecialPoints(
        alpha=special.alpha,
        total_length=special.total_length,
        s=s_m,
        points=pts_m,
    )
    out.ubar1 = (s_m["P1p"] - s_m["P1"]) % special.total_length
    out.ubar2 = (s_m["Q6p"] - s_m["Q6"]) % special.total_length
    return out


def _chord_of_u(curve, special, u):
    u = np.asarray(u, dtype=float)
    return chord_from_feet(curve, special.s_of_u1(u[0]), special.s_of_u2(u[1]))


def _psi(curve, chord, foot):
    """Signed angle gap between the chord line and the normal line at a foot.

    Vanishes exactly where the chord is normal to the boundary, and unlike
    1 + p.n it crosses zero transversally there, so it makes a clean event
    function for terminating the ODE arcs.
    """
    s_val = chord.s_Q if foot == "Q" else chord.s_P
    return _wrap_half_pi(chord.angle - normal_line_angle(curve, s_val))


def _rhs_from_pair(curve, chord, pair):
    """Feet velocities of the arc ODE from the extremal active points.

    Both components are positive on every admissible family chord: each
    scalar product (A - B) . n(A) of distinct boundary points is negative on
    a convex domain, and the chord-direction factors p . n(P) > 0 > p . n(Q)
    fix the signs.
    """
    P, Q, p = chord.P, chord.Q, chord.p
    nP = curve.normal_at(chord.s_P)
    nQ = curve.normal_at(chord.s_Q)
    nL = curve.normal_at(pair.s_left)
    nR = curve.normal_at(pair.s_right)
    AL, AR = pair.A_left, pair.A_right
    d1 = (-(AL - P) @ nL - (AR - P) @ nR) / float(p @ nP)
    d2 = ((AL - Q) @ nL + (AR - Q) @ nR) / float(p @ nQ)
    return np.array([d1, d2])


def _check_family_window(curve, special, chord, family):
    """Angle-window membership of a chord, with a strictness buffer."""
    alpha = special.alpha
    if family in ("P", "Q"):
        if chord.angle < alpha - _ANGLE_SLACK:
            raise FamilyViolation(
                f"chord angle {chord.angle:.6f} below the reference angle {alpha:.6f}")
        foot = "Q" if family == "Q" else "P"
        if _psi(curve, chord, foot) > _ANGLE_SLACK:
            raise FamilyViolation(
                "chord angle beyond the normal line at the %s foot" % foot)
    else:
        if chord.angle > math.pi - alpha + _ANGLE_SLACK:
            raise FamilyViolation(
                f"chord angle {chord.angle:.6f} above the mirrored reference angle")
        foot = "Q" if family == "Qp" else "P"
        if _psi(curve, chord, foot) < -_ANGLE_SLACK:
            raise FamilyViolation(
                "chord angle beyond the normal line at the %s foot" % foot)
    if not special.on_lower_part(chord.s_P, slack=1e-9 * curve.total_length):
        raise FamilyViolation("lower foot left the lower boundary part")
    if not special.on_upper_part(chord.s_Q, slack=1e-9 * curve.total_length):
        raise FamilyViolation("upper foot left the upper boundary part")


def ode_rhs(curve, special, u, family):
    """Feet velocities at a chart point, for one of the four chord families.

    Single-shot evaluation with the strict full-scan crossing search; the
    arc integrator uses a warm tracker instead.  The formula extends
    continuously to the window-edge chords where the crossing point
    degenerates to the boundary point whose tangent is parallel to the
    chord, so no special casing is needed at the arc start.
    """
    if family not in FAMILY_LABELS:
        raise ValueError(f"unknown family {family!r}")
    u = np.asarray(u, dtype=float) if not isinstance(u, UPoint) else u.as_array()
    chord = _chord_of_u(curve, special, u)
    _check_family_window(curve, special, chord, family)
    pair = extremal_points(curve, chord)
    d = _rhs_from_pair(curve, chord, pair)
    return float(d[0]), float(d[1])


def _march_arc(curve, special, u0, sign, foot, tol, h0=0.01):
    """Integrate du/da = sign * rhs(u) until the chord is normal at `foot`.

    Adaptive classic Runge-Kutta with step doubling; crossing-search
    failures and angle-gap overshoots both halve the step.  Once inside the
    angle band the arc finishes with Newton steps in the parameter and a
    final linear extrapolation onto the terminal manifold.  Returns
    (path array, u_end, a_star).
    """
    tracker = CrossingTracker(curve, every=50)
    k_last = [None]

    def f(u):
        chord = _chord_of_u(curve, special, u)
        pair = tracker.pair(chord)
        val = sign * _rhs_from_pair(curve, chord, pair)
        k_last[0] = val
        return val

    def rk4(u, h, k1):
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def psi_of(u):
        return _psi(curve, _chord_of_u(curve, special, u), foot)

    u = np.asarray(u0, dtype=float).copy()
    a = 0.0
    h = h0
    a_cap = 10.0 * curve.diameter
    path = [u.copy()]
    ps = psi_of(u)
    if ps >= 0.0:
        raise FamilyViolation("arc start already past the normal-chord terminal")
    hist = [(a, ps)]
    while abs(ps) > _PSI_BAND:
        if a > a_cap:
            raise NoTermination(f"no normal-chord terminal before parameter {a_cap:.3f}")
        if h < 1e-11:
            raise NoTermination("step size underflow before the terminal band")
        try:
            k1 = f(u)
            _assert_step_ok(curve, special, u, sign, k1, at_start=(a == 0.0))
            u_big = rk4(u, h, k1)
            u_mid = rk4(u, 0.5 * h, k1)
            u_half = rk4(u_mid, 0.5 * h, f(u_mid))
        except GeometryError as exc:
            if isinstance(exc, (FamilyViolation, OrderingViolated)):
                raise
            h *= 0.5
            continue
        err = float(np.max(np.abs(u_big - u_half))) / 15.0
        if err > tol:
            h *= 0.5
            continue
        ps_new = psi_of(u_half)
        if ps_new >= 0.0:
            h *= 0.5
            continue
        u = u_half
        a += h
        ps = ps_new
        path.append(u.copy())
        hist.append((a, ps))
        h *= min(2.5, max(0.3, 0.9 * (tol / max(err, 1e-300)) ** 0.2))
        if abs(ps) < 10.0 * _PSI_BAND:
            # near the terminal the crossing flattens and the strict
            # full-scan verification would trip its own shallowness guard;
            # stay on the warm Newton tracker from here on
            tracker.every = 10 ** 9

    # terminal polish: Newton in the parameter on the angle gap
    if len(hist) < 2:
        # arc started inside the band; take one micro step for a slope
        k1 = f(u)
        u_probe = rk4(u, 1e-6, k1)
        u = u_probe
        a += 1e-6
        ps = psi_of(u)
        path.append(u.copy())
        hist.append((a, ps))
    for _ in range(60):
        if abs(ps) <= _PSI_STOP:
            break
        slope = _psi_slope(hist)
        da = -ps / slope
        while da > 1e-14:
            try:
                k1 = f(u)
                u_try = rk4(u, da, k1)
                ps_try = psi_of(u_try)
            except GeometryError:
                da *= 0.5
                continue
            if ps_try >= 0.0:
                da *= 0.5
                continue
            u = u_try
            a += da
            ps = ps_try
            # bookkeeping only: polish steps move less than the band width,
            # below the resolution of the recorded polyline
            hist.append((a, ps))
            break
        else:
            break
    else:
        raise NoTermination("terminal polish failed to reach the angle tolerance")

    # first-order extrapolation onto psi = 0; the remaining parameter gap is
    # O(psi) so the quadratic remainder is far below the path tolerance
    try:
        k1 = f(u)
    except GeometryError:
        if k_last[0] is None:
            raise
        k1 = k_last[0]
    slope = _psi_slope(hist)
    da = -ps / slope
    u_end = u + da * k1
    a += da
    path.append(u_end.copy())
    chord_end = _chord_of_u(curve, special, u_end)
    n_end = curve.normal_at(chord_end.s_Q if foot == "Q" else chord_end.s_P)
    normality = abs(float(chord_end.p @ n_end) + (1.0 if foot == "Q" else -1.0))
    if normality > TOL_NORMAL:
        raise NoTermination(f"terminal normality {normality:.2e} exceeds {TOL_NORMAL:.0e}")
    return np.asarray(path), u_end, a


def _psi_slope(hist):
    (a0, p0), (a1, p1) = hist[-2], hist[-1]
    if a1 <= a0:
        raise NoTermination("terminal slope estimate degenerate")
    slope = (p1 - p0) / (a1 - a0)
    if slope <= 0:
        raise NoTermination("angle gap stopped increasing before the terminal")
    return slope


def _assert_step_ok(curve, special, u, sign, k1, at_start=False):
    """Per-step invariants: positive driving term, chart-interior state.

    Positivity is an open-interval statement: at the window corner itself
    one component can vanish (the extremal points' tangent lines pass
    exactly through a foot there), so the start of an arc only requires
    nonnegativity up to roundoff.
    """
    rhs_val = sign * k1
    floor = -1e-12 if at_start else 0.0
    if not (rhs_val[0] > floor and rhs_val[1] > floor):
        raise FamilyViolation(
            f"driving term lost positivity: ({rhs_val[0]:.3e}, {rhs_val[1]:.3e})")
    if not (0.0 < u[0] < special.ubar1 and 0.0 < u[1] < special.ubar2):
        raise OrderingViolated("chart point left the coordinate rectangle")


def integrate_ode_arc(curve, special, family, tol=1e-9):
    """One ODE arc of the region boundary, as (polyline, u_end, a_star).

    Plain families run on the given domain; primed families run the same
    machinery on the x-mirrored domain and map the result back through the
    chart flip (u1, u2) -> (ubar1 - u1, ubar2 - u2).  The returned polyline
    is oriented along the integration (away from the fixed-angle arc), and
    ends exactly on the normal-chord terminal.
    """
    if family not in FAMILY_LABELS:
        raise ValueError(f"unknown family {family!r}")
    if family.endswith("p"):
        curve_m = curve.mirrored_x()
        special_m = mirrored_special_points(curve, special)
        poly_m, u_end_m, a_star = integrate_ode_arc(curve_m, special_m, family[:-1], tol=tol)
        flip = np.array([special.ubar1, special.ubar2])
        poly = flip - poly_m
        u_end = UPoint(float(flip[0] - u_end_m.u1), float(flip[1] - u_end_m.u2))
        _check_arc_ordering(special, family, u_end)
        return poly, u_end, a_star

    if family == "Q":
        s0, s1 = special.s["P4"], special.s["Q4"]
        sign, foot = +1.0, "Q"
    else:
        s0, s1 = special.s["P3"], special.s["Q3"]
        sign, foot = -1.0, "P"
    u0 = np.array([special.u1_of_s(s0), special.u2_of_s(s1)])
    path, u_end, a_star = _march_arc(curve, special, u0, sign, foot, tol)
    u_end_pt = UPoint(float(u_end[0]), float(u_end[1]))
    _check_arc_ordering(special, family, u_end_pt)
    return path, u_end_pt, a_star


def _check_arc_ordering(special, family, u_end):
    """Terminal feet must land strictly between the window and far points."""
    if family == "Q":
        lo = special.u2_of_s(special.s["Q4"])
        hi = special.ubar2
        val, what = u_end.u2, "upper terminal foot"
    elif family == "P":
        lo = 0.0
        hi = special.u1_of_s(special.s["P3"])
        val, what = u_end.u1, "lower terminal foot"
    elif family == "Qp":
        lo = 0.0
        hi = special.u2_of_s(special.s["Q4p"])
        val, what = u_end.u2, "mirrored upper terminal foot"
    else:
        lo = special.u1_of_s(special.s["P3p"])
        hi = special.ubar1
        val, what = u_end.u1, "mirrored lower terminal foot"
    if not (lo < val < hi):
        raise OrderingViolated(
            f"{what} at {val:.6f} outside its required open interval ({lo:.6f}, {hi:.6f})")


def arc_alpha(curve, special, which="plain", n=200):
    """The fixed-angle arc of the region boundary, sampled at n chords.

    Chords at the reference angle (its supplement on the primed side) with
    the lower foot sliding between the two window corners.  Endpoints land
    on the chart images of the window-corner chords by construction.
    """
    if which == "plain":
        key_a, key_b = "P3", "P4"
        angle = special.alpha
    elif which == "primed":
        key_a, key_b = "P3p", "P4p"
        angle = math.pi - special.alpha
    else:
        raise ValueError(f"which must be 'plain' or 'primed', got {which!r}")
    u1_a = special.u1_of_s(special.s[key_a])
    u1_b = special.u1_of_s(special.s[key_b])
    out = np.empty((n, 2))
    for k, u1 in enumerate(np.linspace(u1_a, u1_b, n)):
        s_anchor = special.s_of_u1(u1)
        chord = chord_through(curve, s_anchor, angle)
        s_other = partner_foot(curve, chord, s_anchor)
        out[k] = (u1, special.u2_of_s(s_other))
    return out


def _connector(u_from, u_to, forward):
    """Axis-aligned two-segment bridge: horizontal first, then vertical.

    `forward` bridges from the plain upper terminal to the primed lower
    terminal (rightward then down); the mirrored one goes leftward then up.
    Raises when the required strict orderings fail, which is how a domain
    violating the chord-intersection assumption shows up here.
    """
    du1 = u_to[0] - u_from[0]
    du2 = u_to[1] - u_from[1]
    if forward:
        if du1 <= 0:
            raise ConnectorImpossible(
                "plain upper terminal foot does not precede the mirrored lower one")
        if du2 >= 0:
            raise ConnectorImpossible(
                "mirrored lower terminal sits above the plain upper terminal")
    else:
        if du1 >= 0:
            raise ConnectorImpossible(
                "lower terminal foot does not precede the mirrored upper one")
        if du2 <= 0:
            raise ConnectorImpossible(
                "lower terminal sits above the mirrored upper terminal")
    elbow = np.array([u_to[0], u_from[1]])
    return np.vstack([u_from, elbow, u_to]), elbow


def _stitch_loop(point_lists):
    """Concatenate arc polylines into one closed loop, deduping shared ends."""
    parts = []
    for k, pts in enumerate(point_lists):
        pts = np.asarray(pts, dtype=float)
        parts.append(pts if k == 0 else pts[1:])
    loop = np.vstack(parts)
    if not np.allclose(loop[0], loop[-1], atol=1e-12):
        loop = np.vstack([loop, loop[0]])
    return loop


def _loop_is_simple(loop, tol=1e-12):
    """No two non-adjacent segments of the closed polyline may cross."""
    a = loop[:-1]
    b = loop[1:]
    n = len(a)
    d = b - a
    for i in range(n - 2):
        j0 = i + 2
        j1 = n if i > 0 else n - 1  # first and last segment are adjacent
        if j0 >= j1:
            continue
        aj = a[j0:j1]
        dj = d[j0:j1]
        denom = d[i, 0] * dj[:, 1] - d[i, 1] * dj[:, 0]
        rel = aj - a[i]
        t_num = rel[:, 0] * dj[:, 1] - rel[:, 1] * dj[:, 0]
        s_num = rel[:, 0] * d[i, 1] - rel[:, 1] * d[i, 0]
        safe = np.where(denom == 0.0, np.inf, denom)
        t = t_num / safe
        s = s_num / safe
        hit = (t > tol) & (t < 1 - tol) & (s > tol) & (s < 1 - tol)
        if np.any(hit):
            return False
    return True


def assemble(curve, special, tol=1e-9, n_alpha=200):
    """Build the full invariant region and fill the terminal special points.

    Integrates the four ODE arcs, samples the two fixed-angle arcs, bridges
    the sides with the axis-aligned connectors, and verifies the loop is
    closed and simple.  The terminal chords' feet are written back into
    `special` under the window-corner labels with index 2 and 5.
    """
    poly_q, u5, a_q = integrate_ode_arc(curve, special, "Q", tol=tol)
    poly_p, u2, a_p = integrate_ode_arc(curve, special, "P", tol=tol)
    poly_qp, u5p, a_qp = integrate_ode_arc(curve, special, "Qp", tol=tol)
    poly_pp, u2p, a_pp = integrate_ode_arc(curve, special, "Pp", tol=tol)

    _fill_terminals(curve, special, {"u2": u2, "u5": u5, "u2p": u2p, "u5p": u5p})

    alpha_plain = arc_alpha(curve, special, "plain", n=n_alpha)
    alpha_primed = arc_alpha(curve, special, "primed", n=n_alpha)

    conn_1, elbow_1 = _connector(u5.as_array(), u2p.as_array(), forward=True)
    conn_2, elbow_2 = _connector(u5p.as_array(), u2.as_array(), forward=False)

    u3 = UPoint(special.u1_of_s(special.s["P3"]), special.u2_of_s(special.s["Q3"]))
    u4 = UPoint(special.u1_of_s(special.s["P4"]), special.u2_of_s(special.s["Q4"]))
    u3p = UPoint(special.u1_of_s(special.s["P3p"]), special.u2_of_s(special.s["Q3p"]))
    u4p = UPoint(special.u1_of_s(special.s["P4p"]), special.u2_of_s(special.s["Q4p"]))

    arcs = [
        RegionArc("u2-u3", "ode", poly_p[::-1].copy(), a_p),
        RegionArc("u3-u4", "alpha", alpha_plain),
        RegionArc("u4-u5", "ode", poly_q, a_q),
        RegionArc("u5-u2p", "connector", conn_1),
        RegionArc("u2p-u3p", "ode", poly_pp[::-1].copy(), a_pp),
        RegionArc("u3p-u4p", "alpha", alpha_primed),
        RegionArc("u4p-u5p", "ode", poly_qp, a_qp),
        RegionArc("u5p-u2", "connector", conn_2),
    ]

    gap = 0.0
    for k in range(len(arcs)):
        tail = arcs[k].points[-1]
        head = arcs[(k + 1) % len(arcs)].points[0]
        gap = max(gap, float(np.max(np.abs(tail - head))))
    if gap > 1e-7:
        raise ArcsIntersect(f"arc endpoints fail to meet: worst gap {gap:.2e}")

    loop = _stitch_loop([a.points for a in arcs])
    if not _loop_is_simple(loop):
        raise ArcsIntersect("assembled loop crosses itself")

    corners = {
        "u2": u2, "u3": u3, "u4": u4, "u5": u5,
        "u2p": u2p, "u3p": u3p, "u4p": u4p, "u5p": u5p,
        "c1": UPoint(float(elbow_1[0]), float(elbow_1[1])),
        "c2": UPoint(float(elbow_2[0]), float(elbow_2[1])),
    }
    a_star = {"P": a_p, "Q": a_q, "Pp": a_pp, "Qp": a_qp}
    return LyapunovSet(arcs=arcs, corners=corners, a_star=a_star, loop=loop,
                       ubar=(special.ubar1, special.ubar2))


def _fill_terminals(curve, special, ends):
    """Write the ODE terminal feet back into the special-point table."""
    labels = {"u2": ("P2", "Q2"), "u5": ("P5", "Q5"),
              "u2p": ("P2p", "Q2p"), "u5p": ("P5p", "Q5p")}
    for key, (lab_P, lab_Q) in labels.items():
        u = ends[key]
        s_P = special.s_of_u1(u.u1)
        s_Q = special.s_of_u2(u.u2)
        special.set_point(lab_P, s_P, curve.point_at(s_P))
        special.set_point(lab_Q, s_Q, curve.point_at(s_Q))


def contains(lset, u, tol=1e-9):
    """Even-odd membership of a chart point in the closed region.

    Points within `tol` of the loop count as inside, matching the closed-set
    convention (the connector elbows are corners of the region).
    """
    pt = u.as_array() if isinstance(u, UPoint) else np.asarray(u, dtype=float)
    a = lset.loop[:-1]
    b = lset.loop[1:]
    d = b - a
    # distance to the nearest boundary segment
    rel = pt - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", rel, d) / np.where(seg_len2 == 0, 1.0, seg_len2), 0.0, 1.0)
    near = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", pt - near, pt - near)
    if float(np.min(dist2)) <= tol * tol:
        return True
    ya, yb = a[:, 1], b[:, 1]
    straddle = (ya > pt[1]) != (yb > pt[1])
    if not np.any(straddle):
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hit = a[straddle, 0] + (pt[1] - ya[straddle]) / (yb[straddle] - ya[straddle]) * d[straddle, 0]
    return bool(np.sum(x_hit > pt[0]) % 2 == 1)


def pair_in_T(curve, special, lset, x, y):
    """Is the ordered pair admissible: mirror chord inside the region, x left.

    Builds the perpendicular bisector of the two points, finds its boundary
    chord, and requires the lower/upper feet to sit on the lower/upper
    boundary parts, the chart image to lie in the region, and the first
    coordinate of y - x to be positive.  A mirror line that misses one of
    the parts makes the pair inadmissible rather than an error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if float(np.hypot(*(y - x))) < 1e-12 * max(1.0, curve.diameter):
        raise CoincidentPoints("pair membership needs two distinct points")
    if float(y[0] - x[0]) <= 0.0:
        return False
    line, p_dir, m_dir, V = mirror_line(x, y)
    try:
        s_a, s_b = curve.line_boundary_intersections(line)
    except (NoIntersection, TangentLine):
        return False
    try:
        chord = chord_from_feet(curve, s_a, s_b)
    except DegenerateChord:
        return False
    slack = 1e-9 * curve.total_length
    if not special.on_lower_part(chord.s_P, slack=slack):
        return False
    if not special.on_upper_part(chord.s_Q, slack=slack):
        return False
    u = np.array([special.u1_of_s(chord.s_P), special.u2_of_s(chord.s_Q)])
    return contains(lset, u)
