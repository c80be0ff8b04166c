"""Chord machinery: activity, hinges, extremal points, charts, drift fields."""

import math

import numpy as np
import pytest

from mirrorbm import hinges
from mirrorbm.geometry import LineRepr, line_angle
from mirrorbm.hinges import (
    DegenerateChord,
    EmptyHingeFreeArc,
    NotAdmissible,
    OnMirror,
    SpecialPoints,
    chord_from_feet,
    chord_through,
    classify_scan,
    compute_special_points,
    extremal_points,
    family_angle_window,
    family_anchor_arc,
    family_chord,
    family_level,
    field_F,
    field_G,
    hinge_of,
    hinge_presence,
    is_active,
    mirror_chord,
    normal_line_angle,
    partner_foot,
    phi,
    phi_inv,
    scan_extremal_d,
    scan_table,
)
from mirrorbm.presets import preset_domain

SQRT2 = math.sqrt(2.0)

# Reference coordinates for the sixteen distinguished points of the first
# example domain, accurate to the displayed digits.
SIXTEEN_POINTS = {
    "P1": (-2.41, -1.00),
    "P3": (-2.005, -1.28),
    "P4": (-0.7, -1.41),
    "P6": (-0.027, -1.41),
    "Q1": (0.55, 1.97),
    "Q3": (1.13, 1.85),
    "Q4": (2.13, 1.41),
    "Q6": (2.50, 1.11),
    "P1p": (2.71, -0.6),
    "P3p": (2.09, -1.01),
    "P4p": (0.9, -1.35),
    "P6p": (0.4, -1.40),
    "Q1p": (0.11, 2.0),
    "Q3p": (-0.81, 1.89),
    "Q4p": (-1.83, 1.38),
    "Q6p": (-2.12, 1.12),
}


# -- disk chord with hand-computable hinges ------------------------------------------


@pytest.fixture(scope="module")
def disk_chord(disk_domain):
    curve, _ = disk_domain
    h = 0.3
    line = LineRepr(0.5 * math.pi, np.array([h, 0.0]))
    ch = chord_from_feet(curve, *curve.line_hits_fast(line))
    return curve, h, ch


def test_disk_chord_feet_ordered(disk_chord):
    curve, h, ch = disk_chord
    assert ch.P[1] == pytest.approx(-math.sqrt(1 - h * h), abs=1e-9)
    assert ch.Q[1] == pytest.approx(+math.sqrt(1 - h * h), abs=1e-9)
    assert ch.P[0] == pytest.approx(h, abs=1e-9)
    # direction convention: p . e2 >= 0 and m = -i p
    assert ch.p @ np.array([0.0, 1.0]) >= 0
    assert np.allclose(ch.m, [math.sin(ch.angle), -math.cos(ch.angle)], atol=1e-12)


def test_disk_activity_rule(disk_chord):
    curve, h, ch = disk_chord
    # a boundary point at angle theta is active exactly when cos(theta) > h
    for theta in (0.2, -0.4, 0.9, -1.1, 1.5, 2.5, math.pi, -2.0):
        s = theta % (2 * math.pi)
        if abs(math.cos(theta) - h) < 1e-3:
            continue
        assert is_active(curve, ch, s) == (math.cos(theta) > h)


def test_disk_on_mirror_raises(disk_chord):
    curve, h, ch = disk_chord
    with pytest.raises(OnMirror):
        is_active(curve, ch, ch.s_P)


def test_disk_hinge_closed_form(disk_chord):
    curve, h, ch = disk_chord
    yQ = math.sqrt(1 - h * h)
    for theta in (0.25, 0.6, 1.0, -0.3, -0.8):
        hinge = hinge_of(curve, ch, theta % (2 * math.pi))
        assert hinge is not None
        y_H = (1.0 - h * math.cos(theta)) / math.sin(theta)
        assert np.allclose(hinge.H, [h, y_H], atol=1e-9)
        assert hinge.side == "right"
        expected_level = "upper" if y_H >= yQ else "lower"
        assert hinge.level == expected_level
        expected_d = abs(y_H - yQ) if expected_level == "upper" else abs(y_H + yQ)
        assert hinge.d == pytest.approx(expected_d, abs=1e-9)


def test_disk_parallel_tangent_has_no_hinge(disk_chord):
    curve, h, ch = disk_chord
    # at theta=0 the tangent is vertical, parallel to the chord
    assert hinge_of(curve, ch, 0.0) is None


def test_disk_inactive_has_no_hinge(disk_chord):
    curve, h, ch = disk_chord
    assert hinge_of(curve, ch, math.pi) is None  # leftmost point, inactive


def test_classify_scan_matches_scalar(disk_chord):
    curve, h, ch = disk_chord
    c = classify_scan(curve, ch, 256)
    for k in range(0, 256, 17):
        s = float(c["s"][k])
        if c["on_line"][k]:
            continue
        assert c["active"][k] == is_active(curve, ch, s)
        hinge = hinge_of(curve, ch, s)
        if hinge is not None:
            assert c["active"][k] and c["has_hinge"][k]
            assert (hinge.side == "left") == bool(c["left"][k])
            assert (hinge.level == "upper") == bool(c["upper"][k])
            assert hinge.d == pytest.approx(float(c["d"][k]), abs=1e-9)


# -- distinguished points -------------------------------------------------------------


def test_sixteen_point_table(example1, example1_specials):
    _curve, _alpha = example1
    sp = example1_specials
    for label, expected in SIXTEEN_POINTS.items():
        got = sp.points[label]
        err = float(np.hypot(got[0] - expected[0], got[1] - expected[1]))
        assert err < 0.015, f"{label}: got {got}, expected {expected}, err {err:.4f}"


def test_endpoint_closed_forms(example1_specials):
    sp = example1_specials
    assert np.allclose(sp.points["P1"], [-1 - SQRT2, -1.0], atol=1e-8)
    assert np.allclose(sp.points["Q6"], [9 / math.sqrt(13), 4 / math.sqrt(13)], atol=1e-8)
    assert np.allclose(sp.points["Q6p"], [-1.5 * SQRT2, -1 + 1.5 * SQRT2], atol=1e-8)
    assert np.allclose(sp.points["P1p"], [9 / math.sqrt(11), -2 / math.sqrt(11)], atol=1e-8)


def test_mirrored_endpoints_match_direct_normal_inversion(example1, example1_specials):
    curve, alpha = example1
    sp = example1_specials
    # the mirrored-domain route must agree with inverting the normal angle
    # directly on the original domain
    s_direct, _ = curve.find_by_normal_angle(math.pi - alpha)
    assert sp.s["P1p"] == pytest.approx(s_direct, abs=1e-6)
    s_direct, _ = curve.find_by_normal_angle(2 * math.pi - alpha)
    assert sp.s["Q6p"] == pytest.approx(s_direct, abs=1e-6)


def test_u_coordinate_ordering(example1_specials):
    sp = example1_specials
    u1 = {k: sp.u1_of_s(sp.s[k]) for k in ("P1", "P3", "P4", "P6", "P6p", "P4p", "P3p", "P1p")}
    order = ["P1", "P3", "P4", "P6", "P6p", "P4p", "P3p", "P1p"]
    vals = [u1[k] for k in order]
    assert vals[0] == pytest.approx(0.0, abs=1e-9)
    assert vals[-1] == pytest.approx(sp.ubar1, abs=1e-9)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    u2 = {k: sp.u2_of_s(sp.s[k]) for k in ("Q6p", "Q4p", "Q3p", "Q1p", "Q1", "Q3", "Q4", "Q6")}
    order2 = ["Q6p", "Q4p", "Q3p", "Q1p", "Q1", "Q3", "Q4", "Q6"]
    vals2 = [u2[k] for k in order2]
    assert vals2[0] == pytest.approx(0.0, abs=1e-9)
    assert vals2[-1] == pytest.approx(sp.ubar2, abs=1e-9)
    assert all(a < b for a, b in zip(vals2, vals2[1:]))


def test_midpoint_alignments(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials

    def line_intersection(a1, a2, b1, b2):
        d1 = a2 - a1
        d2 = b2 - b1
        mat = np.array([d1, -d2]).T
        t = np.linalg.solve(mat, b1 - a1)
        return a1 + t[0] * d1

    x = line_intersection(sp.points["P3"], sp.points["Q3"], sp.points["P6p"], sp.points["Q6p"])
    mid = 0.5 * (sp.points["P6p"] + sp.points["Q6p"])
    assert np.hypot(*(x - mid)) < 0.02
    x2 = line_intersection(sp.points["P4p"], sp.points["Q4p"], sp.points["P1"], sp.points["Q1"])
    mid2 = 0.5 * (sp.points["P1"] + sp.points["Q1"])
    assert np.hypot(*(x2 - mid2)) < 0.02


def test_disk_has_no_window(disk_domain):
    curve, alpha = disk_domain
    with pytest.raises(EmptyHingeFreeArc):
        compute_special_points(curve, alpha)


def test_hinge_presence_brackets_the_window(example1, example1_specials):
    curve, alpha = example1
    sp = example1_specials
    L = curve.total_length
    span34 = (sp.s["P4"] - sp.s["P3"]) % L
    mid = (sp.s["P3"] + 0.5 * span34) % L
    g_ll, g_ur = hinge_presence(curve, chord_through(curve, mid, alpha), n=1600)
    assert g_ll <= 0 and g_ur <= 0
    before = (sp.s["P3"] - 0.3 * (sp.s["P3"] - sp.s["P1"]) % L) % L
    g_ll, _ = hinge_presence(curve, chord_through(curve, before, alpha), n=1600)
    assert g_ll > 0
    after = (sp.s["P4"] + 0.1) % L
    _, g_ur = hinge_presence(curve, chord_through(curve, after, alpha), n=1600)
    assert g_ur > 0


def test_special_points_json_roundtrip(example1_specials):
    sp = example1_specials
    obj = sp.to_json_obj()
    sp2 = SpecialPoints.from_json_obj(obj)
    assert sp2.alpha == sp.alpha
    assert sp2.ubar1 == pytest.approx(sp.ubar1)
    for k in sp.s:
        assert sp2.s[k] == pytest.approx(sp.s[k], abs=1e-12)
        assert np.allclose(sp2.points[k], sp.points[k], atol=1e-12)


# -- chord families and extremal points ------------------------------------------------


def _family_probe_chords(curve, sp, family, count=3):
    s_lo, s_hi = family_anchor_arc(sp, family)
    span = (s_hi - s_lo) % curve.total_length
    out = []
    for fr in np.linspace(0.2, 0.8, count):
        s_anchor = (s_lo + fr * span) % curve.total_length
        lo, hi = family_angle_window(curve, sp, family, s_anchor)
        ang = lo + 0.5 * ((hi - lo) % math.pi)
        out.append(family_chord(curve, sp, family, s_anchor, ang))
    return out


@pytest.mark.parametrize("family", ["P", "Q", "Pp", "Qp"])
def test_extremal_points_bound_the_active_arcs(example1, example1_specials, family):
    curve, _ = example1
    sp = example1_specials
    for ch in _family_probe_chords(curve, sp, family):
        ep = extremal_points(curve, ch)
        assert is_active(curve, ch, ep.s_left)
        assert is_active(curve, ch, ep.s_right)
        # the mirror image of one extremal point is the other
        from mirrorbm.geometry import reflect_point

        assert np.allclose(reflect_point(ep.A_left, ch.line), ep.A_right, atol=1e-6)
        # warm restart around the known crossing returns the same pair
        ep2 = extremal_points(curve, ch, bracket=(ep.v_star - 0.05, ep.v_star + 0.05))
        assert ep2.s_left == pytest.approx(ep.s_left, abs=1e-6)


@pytest.mark.parametrize(
    "family,big,small",
    [
        ("P", ("left", "lower"), ("right", "lower")),
        ("Q", ("right", "upper"), ("left", "upper")),
        ("Pp", ("right", "lower"), ("left", "lower")),
        ("Qp", ("left", "upper"), ("right", "upper")),
    ],
)
def test_extreme_hinge_separation(example1, example1_specials, family, big, small):
    curve, _ = example1
    sp = example1_specials
    for ch in _family_probe_chords(curve, sp, family):
        r_big = scan_extremal_d(curve, ch, big[0], big[1], n=2000)
        r_small = scan_extremal_d(curve, ch, small[0], small[1], n=2000)
        assert r_big is not None and r_small is not None
        d_min_big = r_big[0]
        d_max_small = r_small[1]
        assert d_min_big > d_max_small


@pytest.mark.parametrize("family", ["P", "Q", "Pp", "Qp"])
def test_extremal_hinges_are_the_scan_extremes(example1, example1_specials, family):
    curve, _ = example1
    sp = example1_specials
    level = family_level(family)
    for ch in _family_probe_chords(curve, sp, family):
        ep = extremal_points(curve, ch)
        h_left = hinge_of(curve, ch, ep.s_left)
        h_right = hinge_of(curve, ch, ep.s_right)
        assert h_left is not None and h_right is not None
        assert h_left.side == "left" and h_right.side == "right"
        assert h_left.level == level and h_right.level == level
        # scan extremes bracket the exact hinge distances at the crossing
        r_l = scan_extremal_d(curve, ch, "left", level, n=4000)
        r_r = scan_extremal_d(curve, ch, "right", level, n=4000)
        for exact, scanned in ((h_left.d, r_l), (h_right.d, r_r)):
            d_min, d_max = scanned[0], scanned[1]
            assert d_min - 1e-6 <= exact <= d_max + 1e-6 or (
                exact == pytest.approx(d_min, rel=0.05) or exact == pytest.approx(d_max, rel=0.05)
            )


def test_family_angle_window_closes_at_the_far_end(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    # at Q6 the window (alpha, normal line angle) has zero width
    def gap(lo, hi):
        g = (hi - lo) % math.pi
        return min(g, math.pi - g)

    lo, hi = family_angle_window(curve, sp, "Q", sp.s["Q6"])
    assert gap(lo, hi) == pytest.approx(0.0, abs=1e-6)
    lo, hi = family_angle_window(curve, sp, "P", sp.s["P1"])
    assert gap(lo, hi) == pytest.approx(0.0, abs=1e-6)


def test_family_chord_rejects_out_of_window_angles(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    s_lo, s_hi = family_anchor_arc(sp, "P")
    s_anchor = (s_lo + 0.5 * ((s_hi - s_lo) % curve.total_length)) % curve.total_length
    with pytest.raises(NotAdmissible):
        family_chord(curve, sp, "P", s_anchor, sp.alpha - 0.05)


# -- chart and drift fields --------------------------------------------------------------


def test_phi_roundtrip(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    for u1_frac, u2_frac in ((0.2, 0.3), (0.5, 0.5), (0.9, 0.1)):
        u = np.array([u1_frac * sp.ubar1, u2_frac * sp.ubar2])
        s_P, s_Q = phi_inv(sp, u)
        back = phi(sp, s_P, s_Q)
        assert np.allclose(back, u, atol=1e-9)


def test_phi_rejects_feet_off_their_parts(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    s_on_upper = sp.s_of_u2(0.5 * sp.ubar2)
    with pytest.raises(NotAdmissible):
        phi(sp, s_on_upper, s_on_upper)
    with pytest.raises(NotAdmissible):
        phi_inv(sp, np.array([-0.1, 0.0]))


def test_chart_corners(example1_specials):
    sp = example1_specials
    assert sp.u1_of_s(sp.s["P1"]) == pytest.approx(0.0, abs=1e-12)
    assert sp.u1_of_s(sp.s["P1p"]) == pytest.approx(sp.ubar1, abs=1e-9)
    assert sp.u2_of_s(sp.s["Q6p"]) == pytest.approx(0.0, abs=1e-12)
    assert sp.u2_of_s(sp.s["Q6"]) == pytest.approx(sp.ubar2, abs=1e-9)


def _coupled_pair_on_boundary(curve, sp):
    """An (s_X, Y) pair whose mirror line is a clean admissible chord."""
    s_P, s_Q = phi_inv(sp, np.array([0.35 * sp.ubar1, 0.45 * sp.ubar2]))
    ch = chord_from_feet(curve, s_P, s_Q)
    # take X on the boundary off the chord, mirror to get Y
    s_X = (s_P + 0.27 * ((s_Q - s_P) % curve.total_length)) % curve.total_length
    from mirrorbm.geometry import reflect_point

    X = curve.point_at(s_X)
    Y = reflect_point(X, ch.line)
    return s_X, X, Y, ch


def test_mirror_chord_recovers_the_line(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    s_X, X, Y, ch = _coupled_pair_on_boundary(curve, sp)
    ch2 = mirror_chord(curve, X, Y)
    assert ch2.s_P == pytest.approx(ch.s_P, abs=1e-7)
    assert ch2.s_Q == pytest.approx(ch.s_Q, abs=1e-7)


def test_field_F_matches_finite_difference(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    s_X, X, Y, ch = _coupled_pair_on_boundary(curve, sp)
    F = field_F(curve, s_X, Y)
    n_X = curve.normal_at(s_X)
    eps = 1e-7
    ch0 = mirror_chord(curve, X, Y)
    ch1 = mirror_chord(curve, X + eps * n_X, Y)
    u0 = phi(sp, ch0.s_P, ch0.s_Q)
    u1 = phi(sp, ch1.s_P, ch1.s_Q)
    fd = (u1 - u0) / eps
    assert np.allclose(F, fd, rtol=2e-3, atol=2e-3)


def test_field_G_matches_finite_difference(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    s_X, X, Y, ch = _coupled_pair_on_boundary(curve, sp)
    # swap roles: put the partner on the boundary
    d, s_Y, foot = curve.project(Y)
    if d > 1e-9:
        # Y is interior; instead reflect a boundary point across the chord and
        # use the projected foot as the boundary partner
        s_Y = ch.s_Q
    s_Y = (ch.s_Q + 0.31 * ((ch.s_P - ch.s_Q) % curve.total_length)) % curve.total_length
    from mirrorbm.geometry import reflect_point

    Yb = curve.point_at(s_Y)
    Xi = reflect_point(Yb, ch.line)
    G = field_G(curve, Xi, s_Y)
    n_Y = curve.normal_at(s_Y)
    eps = 1e-7
    ch0 = mirror_chord(curve, Xi, Yb)
    ch1 = mirror_chord(curve, Xi, Yb + eps * n_Y)
    u0 = phi(sp, ch0.s_P, ch0.s_Q)
    u1 = phi(sp, ch1.s_P, ch1.s_Q)
    fd = (u1 - u0) / eps
    assert np.allclose(G, fd, rtol=2e-3, atol=2e-3)


def test_field_degenerate_pair_raises(example1):
    curve, _ = example1
    with pytest.raises(DegenerateChord):
        hinges.mirror_line(np.array([0.5, 0.5]), np.array([0.5, 0.5]))


# -- scan table -------------------------------------------------------------------------


def test_scan_table_rows(example1, example1_specials):
    curve, _ = example1
    sp = example1_specials
    ch = _family_probe_chords(curve, sp, "P", count=1)[0]
    rows = scan_table(curve, ch, n=128)
    assert len(rows) == 128
    actives = [r for r in rows if r["active"]]
    assert actives, "family chord should have active points"
    for r in actives:
        if r["side"]:
            assert r["side"] in ("left", "right")
            assert r["level"] in ("upper", "lower")
            assert r["d"] >= 0


def test_normal_line_angle_wraps(example1, example1_specials):
    curve, alpha = example1
    sp = example1_specials
    assert normal_line_angle(curve, sp.s["P1"]) == pytest.approx(alpha, abs=1e-8)
    # at Q6 the normal points along alpha + pi: same line angle
    assert normal_line_angle(curve, sp.s["Q6"]) == pytest.approx(alpha, abs=1e-8)
