"""Checks of the five geometric-condition verdicts on the preset domains."""

import json
import math

import numpy as np
import pytest

from mirrorbm.assumptions import (
    Resolutions,
    Witness,
    _family_samples,
    check_a1,
    check_a3,
    check_assumptions,
    recheck_witness,
)
from mirrorbm.geometry import fillet_smooth
from mirrorbm.hinges import compute_special_points
from mirrorbm.presets import preset_domain

# deliberately coarse grids: the checks are config-knob sampled scans and the
# verdicts on the presets are robust well below the default resolutions
RES = Resolutions(
    a1_positions=10, a1_angles=10, a1_scan=200,
    a2_positions=8, a2_angles=5, a2_scan=300,
    a3_positions=6, a3_angles=6, a3_scan=800,
    a4_positions=4, a4_angles=4, a4_scan=600,
    a5_positions=3, a5_angles=2,
)


@pytest.fixture(scope="module")
def example1_report(example1):
    curve, alpha = example1
    return check_assumptions(curve, alpha, RES)


@pytest.fixture(scope="module")
def disk_report(disk_domain):
    curve, alpha = disk_domain
    return check_assumptions(curve, alpha, RES)


def test_example1_all_pass(example1_report):
    assert not example1_report.degraded
    assert example1_report.all_pass
    for name in ("a1", "a2", "a3", "a4", "a5"):
        r = example1_report.results[name]
        assert r.verdict == "Pass"
        assert r.witness is None
        assert r.samples > 0


def test_example1_a2_margin(example1_report):
    r = example1_report.results["a2"]
    assert r.nu_found is not None and r.nu_found >= 0.001
    # the presence scores stayed strictly negative over the scanned band
    assert r.margin is not None and r.margin > 0


def test_example2_all_pass():
    curve, alpha = preset_domain("example2")
    rep = check_assumptions(curve, alpha, RES)
    assert not rep.degraded
    assert rep.all_pass


def test_filleted_example1_passes(example1):
    curve, alpha = example1
    smooth = fillet_smooth(curve, 0.05)
    special = compute_special_points(smooth, alpha)
    assert check_a1(smooth, special, RES).verdict == "Pass"
    assert check_a3(smooth, special, RES).verdict == "Pass"


def test_disk_fails_degraded(disk_report):
    assert disk_report.degraded
    assert disk_report.any_fail and not disk_report.all_pass
    assert disk_report.results["a1"].verdict == "Fail"
    assert disk_report.results["a1"].witness.kind in (
        "active-right-point", "active-left-point")
    a2 = disk_report.results["a2"]
    assert a2.verdict == "Fail" and a2.nu_found == 0.0
    assert disk_report.results["a4"].verdict == "Fail"
    a5 = disk_report.results["a5"]
    assert a5.verdict == "Skipped" and a5.reason


def test_square_a2_fails():
    curve, alpha = preset_domain("square")
    rep = check_assumptions(curve, alpha, RES)
    assert rep.degraded
    assert rep.results["a2"].verdict == "Fail"
    assert rep.results["a2"].witness is not None


def test_disk_witnesses_replay(disk_domain, disk_report):
    curve, alpha = disk_domain
    for name in ("a1", "a2", "a3", "a4"):
        w = disk_report.results[name].witness
        assert w is not None
        assert recheck_witness(curve, alpha, w, RES), name


def test_marginal_activity_is_not_a_witness(example1):
    # a window-edge chord: reflections of near-anchor samples land within
    # boundary tolerance; such points must not replay as violations
    curve, alpha = example1
    w = Witness(kind="active-left-point", s_P=11.448331, s_Q=1.513691,
                angle=0.898440, s_A=1.514978)
    assert not recheck_witness(curve, alpha, w, RES)


def test_unknown_witness_kind_rejected(example1):
    curve, alpha = example1
    w = Witness(kind="no-such-kind", s_P=9.0, s_Q=3.0, angle=1.0)
    with pytest.raises(ValueError):
        recheck_witness(curve, alpha, w, RES)


def test_determinism(example1):
    curve, alpha = example1
    a = check_assumptions(curve, alpha, RES).to_json_obj()
    b = check_assumptions(curve, alpha, RES).to_json_obj()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_monotone_refinement_on_failures(disk_domain, disk_report):
    curve, alpha = disk_domain
    finer = check_assumptions(curve, alpha, RES.doubled())
    for name, r in disk_report.results.items():
        if r.verdict == "Fail":
            assert finer.results[name].verdict == "Fail", name


def test_doubled_scales_every_knob_but_buffer():
    d = RES.doubled()
    assert d.buffer == RES.buffer
    assert d.a1_positions == 2 * RES.a1_positions
    assert d.a3_scan == 2 * RES.a3_scan
    assert d.a5_angles == 2 * RES.a5_angles


def test_report_json_shape(example1_report, disk_report):
    obj = example1_report.to_json_obj()
    assert set(obj["results"]) == {"a1", "a2", "a3", "a4", "a5"}
    assert obj["all_pass"] is True and obj["degraded"] is False
    assert obj["resolutions"]["a1_positions"] == RES.a1_positions
    dobj = disk_report.to_json_obj()
    w = dobj["results"]["a1"]["witness"]
    for key in ("kind", "s_P", "s_Q", "angle", "mirrored", "detail"):
        assert key in w
    assert dobj["results"]["a5"]["reason"]


def test_a5_pair_intersections_inside_oracle(example1, example1_specials):
    # independent route: the lower-window chords of the plain frame crossed
    # with the upper-window chords of the mirrored frame (pulled back by
    # negating x), each pair solved as a 2x2 linear system and membership
    # tested via signed distance, at the default pair count (5 x 4 each)
    from mirrorbm.lyapunov import mirrored_special_points

    curve, _alpha = example1
    sp = example1_specials
    res = Resolutions()
    plain = [
        (ch.P, ch.Q)
        for ch in _family_samples(curve, sp, "P", res.a5_positions,
                                  res.a5_angles, res.buffer)
    ]
    mirrored = curve.mirrored_x()
    sp_m = mirrored_special_points(curve, sp)
    flip = np.array([-1.0, 1.0])
    primed_upper = [
        (ch.P * flip, ch.Q * flip)
        for ch in _family_samples(mirrored, sp_m, "Q", res.a5_positions,
                                  res.a5_angles, res.buffer)
    ]
    assert len(plain) == 20 and len(primed_upper) == 20
    checked = 0
    for pa, qa in plain:
        da = (qa - pa) / np.linalg.norm(qa - pa)
        for pb, qb in primed_upper:
            db = (qb - pb) / np.linalg.norm(qb - pb)
            t = np.linalg.solve(np.column_stack([da, -db]), pb - pa)
            x = pa + t[0] * da
            assert np.allclose(x, pb + t[1] * db, atol=1e-9)
            assert float(curve.signed_distance_many(x[None, :])[0]) <= curve.tol_bd
            checked += 1
    assert checked == 400


def test_family_samples_respect_windows(example1, example1_specials):
    from mirrorbm.hinges import normal_line_angle

    curve, _alpha = example1
    sp = example1_specials
    for family in ("P", "Q"):
        chords = list(_family_samples(curve, sp, family, 5, 4, 1e-6))
        assert chords
        for ch in chords:
            anchor = ch.s_P if family == "P" else ch.s_Q
            assert sp.alpha < ch.angle < normal_line_angle(curve, anchor)
            if family == "P":
                assert 0 < sp.u1_of_s(ch.s_P) < sp.u1_of_s(sp.s["P3"])
            else:
                u2 = sp.u2_of_s(ch.s_Q)
                assert sp.u2_of_s(sp.s["Q4"]) < u2 < sp.u2_of_s(sp.s["Q6"])
