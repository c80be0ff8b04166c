"""Tests for the invariant-region construction in chart coordinates.

The heavy fixtures (special points + full region assembly) are built once
per module.  Oracles that matter are independent re-derivations: the rhs
ratio is recomputed from a hand-written expression, membership is checked
against a winding-number implementation living in this file, and loop
simplicity is cross-checked with shapely.
"""

import copy
import math

import numpy as np
import pytest
from shapely.geometry import LinearRing, Polygon

from mirrorbm.geometry import GeometryError
from mirrorbm.hinges import (
    chord_from_feet,
    compute_special_points,
    extremal_points,
)
from mirrorbm.lyapunov import (
    CoincidentPoints,
    FamilyViolation,
    LyapunovSet,
    UPoint,
    arc_alpha,
    assemble,
    contains,
    integrate_ode_arc,
    mirrored_special_points,
    ode_rhs,
    pair_in_T,
)
from mirrorbm.presets import preset_domain


@pytest.fixture(scope="module")
def region1(example1, example1_specials):
    curve, alpha = example1
    special = copy.deepcopy(example1_specials)
    lset = assemble(curve, special)
    return curve, alpha, special, lset


@pytest.fixture(scope="module")
def region2():
    curve, alpha = preset_domain("example2")
    special = compute_special_points(curve, alpha)
    lset = assemble(curve, special)
    return curve, alpha, special, lset


def _arc(lset, label):
    for arc in lset.arcs:
        if arc.label == label:
            return arc
    raise AssertionError(f"missing arc {label}")


_ODE_ARCS = {"Q": "u4-u5", "P": "u2-u3", "Qp": "u4p-u5p", "Pp": "u2p-u3p"}


def _indices_by_fraction(points, fractions):
    """Indices at given fractions of cumulative polyline length.

    The integrator's accepted steps pile up near the terminal end, so index
    spacing is a bad proxy for position along the arc.
    """
    seg = np.hypot(*np.diff(points, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return [int(np.searchsorted(cum, f * cum[-1])) for f in fractions]


# -- rhs ---------------------------------------------------------------------


def test_rhs_positive_on_all_families(region1):
    curve, _, special, lset = region1
    for family, label in _ODE_ARCS.items():
        pts = _arc(lset, label).points
        for idx in _indices_by_fraction(pts, (0.15, 0.4, 0.7)):
            d1, d2 = ode_rhs(curve, special, UPoint(*pts[idx]), family)
            assert d1 > 0 and d2 > 0, (family, idx, d1, d2)


def test_rhs_ratio_matches_independent_expression(region1):
    # oracle: the chart-velocity ratio written as a single quotient of
    # boundary-normal scalar products, implemented here from scratch
    curve, _, special, lset = region1
    pts = _arc(lset, "u4-u5").points
    for idx in _indices_by_fraction(pts, (0.15, 0.4, 0.7)):
        u = np.asarray(pts[idx], dtype=float)
        chord = chord_from_feet(curve, special.s_of_u1(u[0]), special.s_of_u2(u[1]))
        pair = extremal_points(curve, chord)
        nP = curve.normal_at(chord.s_P)
        nQ = curve.normal_at(chord.s_Q)
        nL = curve.normal_at(pair.s_left)
        nR = curve.normal_at(pair.s_right)
        num = (pair.A_left - chord.P) @ nL + (pair.A_right - chord.P) @ nR
        den = (pair.A_left - chord.Q) @ nL + (pair.A_right - chord.Q) @ nR
        oracle = -(chord.p @ nQ) / (chord.p @ nP) * num / den
        d1, d2 = ode_rhs(curve, special, UPoint(*u), "Q")
        assert d1 / d2 == pytest.approx(float(oracle), rel=1e-9)


def test_rhs_rejects_wrong_family(region1):
    curve, _, special, _ = region1
    with pytest.raises(FamilyViolation):
        ode_rhs(curve, special, UPoint(2.6, 2.5), "Q")
    with pytest.raises(ValueError):
        ode_rhs(curve, special, UPoint(2.6, 2.5), "bogus")


def test_rhs_propagates_geometry_errors_off_family(region1):
    # at the terminal corner of the other family the crossing search itself
    # degenerates; that surfaces as a geometry error, not a wrong answer
    curve, _, special, lset = region1
    u5 = lset.corners["u5"]
    with pytest.raises(GeometryError):
        ode_rhs(curve, special, UPoint(u5.u1, u5.u2), "P")


def test_extended_crossing_point_at_arc_start(region1):
    # just past the start corner the right crossing point sits where the
    # boundary normal makes angle alpha + pi/2, the tangent-parallel point
    curve, alpha, special, lset = region1
    u4 = lset.corners["u4"]
    chord = chord_from_feet(
        curve,
        special.s_of_u1(u4.u1 + 2e-4),
        special.s_of_u2(u4.u2 + 1e-4),
    )
    pair = extremal_points(curve, chord)
    n_right = curve.normal_at(pair.s_right)
    ang = math.atan2(n_right[1], n_right[0])
    assert ang == pytest.approx(alpha + math.pi / 2, abs=5e-3)


# -- ODE arcs ----------------------------------------------------------------


def test_ode_arcs_strictly_monotone(region1):
    _, _, _, lset = region1
    for label in _ODE_ARCS.values():
        pts = _arc(lset, label).points
        d = np.diff(pts, axis=0)
        for col in (0, 1):
            sgn = 1.0 if pts[-1, col] > pts[0, col] else -1.0
            assert np.all(sgn * d[:, col] > 0), (label, col)


def test_angle_stays_above_alpha_along_upper_arc(region1):
    curve, alpha, special, lset = region1
    pts = _arc(lset, "u4-u5").points
    for idx in range(1, len(pts), max(1, len(pts) // 12)):
        chord = chord_from_feet(
            curve, special.s_of_u1(pts[idx, 0]), special.s_of_u2(pts[idx, 1])
        )
        assert chord.angle > alpha


def test_angle_stays_below_mirrored_alpha_along_primed_arc(region1):
    curve, alpha, special, lset = region1
    pts = _arc(lset, "u4p-u5p").points
    for idx in range(1, len(pts), max(1, len(pts) // 12)):
        chord = chord_from_feet(
            curve, special.s_of_u1(pts[idx, 0]), special.s_of_u2(pts[idx, 1])
        )
        assert chord.angle < math.pi - alpha


def test_terminal_chords_are_normal(region1):
    curve, _, special, _ = region1
    cases = [("P5", "Q5", "Q5", -1.0), ("P2", "Q2", "P2", +1.0),
             ("P5p", "Q5p", "Q5p", -1.0), ("P2p", "Q2p", "P2p", +1.0)]
    for p_key, q_key, foot_key, target in cases:
        chord = chord_from_feet(curve, special.s[p_key], special.s[q_key])
        n_foot = curve.normal_at(special.s[foot_key])
        assert abs(float(chord.p @ n_foot) - target) <= 1e-6, foot_key


def test_terminal_ordering_along_boundary(region1):
    _, _, special, _ = region1
    u1, u2 = special.u1_of_s, special.u2_of_s
    assert 0.0 < u1(special.s["P2"]) < u1(special.s["P3"])
    assert u2(special.s["Q4"]) < u2(special.s["Q5"]) < u2(special.s["Q6"])
    assert u1(special.s["P3p"]) < u1(special.s["P2p"]) < special.ubar1
    assert 0.0 < u2(special.s["Q5p"]) < u2(special.s["Q4p"])


def test_tolerance_halving_moves_endpoint_below_1e6(example1, example1_specials):
    curve, _ = example1
    special = copy.deepcopy(example1_specials)
    _, end_a, a_a = integrate_ode_arc(curve, special, "Q", tol=1e-9)
    _, end_b, a_b = integrate_ode_arc(curve, special, "Q", tol=5e-10)
    assert abs(end_a.u1 - end_b.u1) < 1e-6
    assert abs(end_a.u2 - end_b.u2) < 1e-6
    assert abs(a_a - a_b) < 1e-5


# -- constant-angle arc ------------------------------------------------------


def test_arc_alpha_endpoints_and_angles(region1):
    curve, alpha, special, lset = region1
    pts = arc_alpha(curve, special, which="plain")
    assert pts.shape == (200, 2)
    u3, u4 = lset.corners["u3"], lset.corners["u4"]
    assert np.hypot(*(pts[0] - u3.as_array())) < 1e-8
    assert np.hypot(*(pts[-1] - u4.as_array())) < 1e-8
    for idx in range(10, 200, 20):
        chord = chord_from_feet(
            curve, special.s_of_u1(pts[idx, 0]), special.s_of_u2(pts[idx, 1])
        )
        assert abs(chord.angle - alpha) < 1e-9
    d = np.diff(pts, axis=0)
    assert np.all(d[:, 0] > 0) and np.all(d[:, 1] > 0)


def test_arc_alpha_primed_uses_mirrored_angle(region1):
    curve, alpha, special, lset = region1
    pts = arc_alpha(curve, special, which="primed")
    ends = {tuple(np.round(pts[0], 6)), tuple(np.round(pts[-1], 6))}
    want = {
        tuple(np.round(lset.corners["u3p"].as_array(), 6)),
        tuple(np.round(lset.corners["u4p"].as_array(), 6)),
    }
    assert ends == want
    for idx in range(10, 200, 20):
        chord = chord_from_feet(
            curve, special.s_of_u1(pts[idx, 0]), special.s_of_u2(pts[idx, 1])
        )
        assert abs(chord.angle - (math.pi - alpha)) < 1e-9


# -- assembled region --------------------------------------------------------


def test_loop_closed_and_junction_gaps_small(region1):
    _, _, _, lset = region1
    assert np.allclose(lset.loop[0], lset.loop[-1])
    arcs = lset.arcs
    assert [a.label for a in arcs] == [
        "u2-u3", "u3-u4", "u4-u5", "u5-u2p",
        "u2p-u3p", "u3p-u4p", "u4p-u5p", "u5p-u2",
    ]
    for i, arc in enumerate(arcs):
        nxt = arcs[(i + 1) % len(arcs)]
        gap = np.hypot(*(arc.points[-1] - nxt.points[0]))
        assert gap < 1e-7, (arc.label, nxt.label, gap)


def test_loop_simple_by_shapely(region1):
    _, _, _, lset = region1
    ring = LinearRing(lset.loop[:-1])
    assert ring.is_simple and ring.is_valid
    assert Polygon(lset.loop[:-1]).area > 1.0


def test_loop_stays_in_chart_rectangle(region1):
    _, _, special, lset = region1
    loop = lset.loop
    assert loop[:, 0].min() >= 0.0 and loop[:, 0].max() <= special.ubar1
    assert loop[:, 1].min() >= 0.0 and loop[:, 1].max() <= special.ubar2


def test_connectors_are_axis_aligned(region1):
    _, _, _, lset = region1
    for label, elbow_key in (("u5-u2p", "c1"), ("u5p-u2", "c2")):
        arc = _arc(lset, label)
        assert arc.kind == "connector"
        assert arc.points.shape == (3, 2)
        first, elbow, last = arc.points
        assert elbow[0] == last[0] and elbow[1] == first[1]
        np.testing.assert_allclose(elbow, lset.corners[elbow_key].as_array())


def test_connector_ordering_holds(region1):
    # the two terminal chords cross inside the domain, so the lower foot of
    # the primed terminal sits ahead of the plain one in the first chart
    _, _, _, lset = region1
    assert lset.corners["u2p"].u1 > lset.corners["u5"].u1
    assert lset.corners["u2"].u1 < lset.corners["u5p"].u1


def test_assemble_fills_terminal_points_on_boundary(region1):
    curve, _, special, _ = region1
    for key in ("P2", "Q2", "P5", "Q5", "P2p", "Q2p", "P5p", "Q5p"):
        assert key in special.s and key in special.points
        sd = float(curve.signed_distance_many(special.points[key][None, :])[0])
        assert abs(sd) < 1e-9, key


def test_region_regression_anchors(region1):
    _, _, _, lset = region1
    assert lset.a_star["Q"] == pytest.approx(0.105809, abs=1e-3)
    assert lset.a_star["P"] == pytest.approx(0.175059, abs=1e-3)
    u5 = lset.corners["u5"]
    assert u5.u1 == pytest.approx(2.711005, abs=1e-3)
    assert u5.u2 == pytest.approx(4.738277, abs=1e-3)


def test_json_roundtrip(region1):
    _, _, _, lset = region1
    back = LyapunovSet.from_json_obj(lset.to_json_obj())
    np.testing.assert_allclose(back.loop, lset.loop)
    assert back.a_star == pytest.approx(lset.a_star)
    for key, val in lset.corners.items():
        np.testing.assert_allclose(back.corners[key].as_array(), val.as_array())


def test_stadium_region_assembles_with_symmetry(region2):
    _, _, _, lset = region2
    assert np.allclose(lset.loop[0], lset.loop[-1])
    assert LinearRing(lset.loop[:-1]).is_simple
    # the stadium is symmetric across both axes, which pairs up the families
    assert abs(lset.a_star["P"] - lset.a_star["Q"]) < 1e-4
    assert abs(lset.a_star["Pp"] - lset.a_star["Qp"]) < 1e-4


# -- membership --------------------------------------------------------------


def _winding_inside(loop, pt):
    """Independent membership oracle: total turning of the loop around pt."""
    rel = loop - pt
    a = rel[:-1]
    b = rel[1:]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    turn = np.arctan2(cross, dot).sum()
    return abs(turn) > math.pi


def _dist_to_loop(loop, pt):
    a = loop[:-1]
    d = loop[1:] - a
    t = np.clip(((pt - a) * d).sum(axis=1) / (d * d).sum(axis=1), 0.0, 1.0)
    feet = a + t[:, None] * d
    return float(np.min(np.hypot(feet[:, 0] - pt[0], feet[:, 1] - pt[1])))


def test_contains_agrees_with_winding_oracle(region1, rng):
    _, _, special, lset = region1
    pts = rng.uniform([0.0, 0.0], [special.ubar1, special.ubar2], size=(10_000, 2))
    checked = 0
    for pt in pts:
        if _dist_to_loop(lset.loop, pt) < 1e-6:
            continue
        got = contains(lset, UPoint(*pt))
        want = _winding_inside(lset.loop, pt)
        assert got == want, pt
        checked += 1
    assert checked > 9_000


def test_contains_special_values(region1):
    _, _, _, lset = region1
    assert contains(lset, lset.corners["u4"])
    centroid = lset.loop[:-1].mean(axis=0)
    assert contains(lset, UPoint(*centroid))
    assert not contains(lset, UPoint(0.0, 0.0))


# -- pair membership ---------------------------------------------------------


def test_pair_with_mirror_on_a_loop_chord(region1):
    curve, _, special, lset = region1
    chord = chord_from_feet(curve, special.s["P3"], special.s["Q3"])
    mid = 0.5 * (chord.P + chord.Q)
    x = mid - 0.05 * chord.m
    y = mid + 0.05 * chord.m
    assert float((x - chord.P) @ chord.m) < 0  # x on the left of the mirror
    assert pair_in_T(curve, special, lset, x, y)
    assert not pair_in_T(curve, special, lset, y, x)


def test_pair_examples(region1):
    curve, _, special, lset = region1
    # mid-domain mirror chord, well inside the region
    assert pair_in_T(curve, special, lset, np.array([-0.3, 0.2]), np.array([0.3, 0.2]))
    # mirror chord hugging the left corner maps outside the loop
    assert not pair_in_T(
        curve, special, lset, np.array([-2.75, 0.05]), np.array([-2.65, 0.05])
    )


def test_pair_coincident_raises(region1):
    curve, _, special, lset = region1
    x = np.array([0.4, 0.1])
    with pytest.raises(CoincidentPoints):
        pair_in_T(curve, special, lset, x, x.copy())


def test_pair_antisymmetry_random(region1, rng):
    curve, _, special, lset = region1
    ring = curve.points_at(np.linspace(0.0, curve.total_length, 512, endpoint=False))
    lo, hi = ring.min(axis=0), ring.max(axis=0)
    hits = 0
    trials = 0
    while hits < 120 and trials < 3000:
        trials += 1
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        if not (curve.contains(x) and curve.contains(y)):
            continue
        if np.hypot(*(y - x)) < 1e-9:
            continue
        fwd = pair_in_T(curve, special, lset, x, y)
        bwd = pair_in_T(curve, special, lset, y, x)
        assert not (fwd and bwd)
        if fwd:
            assert float((y - x)[0]) > 0
            hits += 1
    assert hits >= 120


# -- mirrored charts ---------------------------------------------------------


def test_mirrored_special_points_match_direct_recompute(example1, example1_specials):
    curve, alpha = example1
    special = example1_specials
    # mirroring x maps a chord at angle theta to one at pi - theta, so the
    # primed families of the original domain are the plain families of the
    # mirrored domain at the same reference angle
    transported = mirrored_special_points(curve, special)
    mirrored = curve.mirrored_x()
    direct = compute_special_points(mirrored, alpha)
    L = curve.total_length
    for key in direct.s:
        assert key in transported.s
        gap = abs(transported.s[key] - direct.s[key]) % L
        assert min(gap, L - gap) < 1e-9 * L, key
    assert transported.ubar1 == pytest.approx(direct.ubar1, abs=1e-9)
    assert transported.ubar2 == pytest.approx(direct.ubar2, abs=1e-9)
