"""Monte Carlo simulation of mirror-coupled reflected Brownian motions.

Two reflected Brownian motions X and Y run in the same convex domain; Y's
driving increments are the mirror images of X's across the perpendicular
bisector of the pair, so the bisector (the "mirror") stays put while both
points are interior and rotates only through boundary pushes.  The pair is
declared coupled once the separation drops below a detection radius, after
which Y rides along with X.

Discretization is explicit Euler with nearest-point convex projection: a
candidate point that lands outside is snapped back to the closest boundary
point, and the snap distance serves as the local-time increment.  The
detection radius defaults to 3*sqrt(dt) because a discrete mirror coupling
cannot resolve separations below the per-step noise scale.

Each path consumes its own counter-based RNG stream keyed by (seed, path
index), so ensembles are reproducible regardless of batching or thread
scheduling.  The ensemble driver advances a few thousand paths per numpy
block; chart-coordinate monitoring (is the boundary-projection pair still
inside the invariant region?) happens at sampling times only, via a
vectorized root-find for the mirror's two boundary feet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import GeometryError, norm_angle_0pi, rot90
from .hinges import (
    DegenerateChord,
    NotAdmissible,
    field_F,
    field_G,
    mirror_chord,
    phi,
)
from .lyapunov import contains, pair_in_T

__all__ = [
    "SimulationError",
    "StepTooLarge",
    "InsufficientSurvivors",
    "SimConfig",
    "CouplingState",
    "DriftRow",
    "PathRecord",
    "LadderRung",
    "InvarianceReport",
    "MarginalReport",
    "SeparationEstimate",
    "step_reflected",
    "step_coupling",
    "simulate",
    "invariance_mc",
    "drift_diagnostic",
    "drift_order",
    "marginal_law_test",
    "estimate_separation",
]


class SimulationError(Exception):
    """Base class for simulation failures."""


class StepTooLarge(SimulationError):
    """A single Brownian increment exceeded a quarter of the domain diameter."""


class InsufficientSurvivors(SimulationError):
    """Too few paths remained uncoupled long enough to estimate separation."""


_MASK64 = (1 << 64) - 1


def _path_rng(seed, index):
    """Counter-based generator for one path: stream key (seed, index)."""
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _wrap_line_angle_diff(d):
    """Increment between two line angles, folded into (-pi/2, pi/2]."""
    return -((math.pi / 2 - d) % math.pi - math.pi / 2)


# ---------------------------------------------------------------------------
# Configuration and state containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon, coupling radius, RNG seed, and sampling stride."""

    dt: float
    t_max: float
    eps_couple: float | None = None
    seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.t_max > self.dt:
            raise ValueError("t_max must exceed dt")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be a positive integer")
        object.__setattr__(self, "record_stride", int(self.record_stride))
        if self.eps_couple is None:
            object.__setattr__(self, "eps_couple", 3.0 * math.sqrt(self.dt))
        if not self.eps_couple > 0.0:
            raise ValueError("eps_couple must be positive")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_max / self.dt)))


@dataclass(frozen=True)
class CouplingState:
    """Snapshot of the coupled pair at one sampling time.

    m is the unit vector from X to Y while uncoupled (frozen at its last
    value afterwards); theta is the mirror's line angle in [0, pi); U holds
    the chart coordinates of the mirror's boundary feet when the mirror is
    admissible, None otherwise.
    """

    t: float
    X: np.ndarray
    Y: np.ndarray
    m: np.ndarray
    V: float
    theta: float
    U: np.ndarray | None
    absL: float
    absM: float
    coupled: bool

    def to_row(self):
        u1 = "" if self.U is None else f"{self.U[0]:.9g}"
        u2 = "" if self.U is None else f"{self.U[1]:.9g}"
        return [
            f"{self.t:.9g}",
            f"{self.X[0]:.9g}",
            f"{self.X[1]:.9g}",
            f"{self.Y[0]:.9g}",
            f"{self.Y[1]:.9g}",
            f"{self.V:.9g}",
            "nan" if math.isnan(self.theta) else f"{self.theta:.9g}",
            u1,
            u2,
            f"{self.absL:.9g}",
            f"{self.absM:.9g}",
            "1" if self.coupled else "0",
        ]


CSV_COLUMNS = ("t", "Xx", "Xy", "Yx", "Yy", "V", "theta", "u1", "u2", "absL", "absM", "coupled")


@dataclass(frozen=True)
class DriftRow:
    """One boundary-contact step: observed vs predicted chart increments."""

    t: float
    du_actual: np.ndarray
    du_pred: np.ndarray
    dtheta_actual: float
    dtheta_pred: float
    dl: float
    dm: float


@dataclass
class PathRecord:
    """Full diagnostics of a single coupled path."""

    config: SimConfig
    states: list
    zeta: float | None
    exit_time_from_L: float | None
    drift_rows: list
    drift_skipped: int
    v_dom_max: float
    n_crossover: int
    bisector_err_max: float
    boundary_fraction: float


@dataclass(frozen=True)
class LadderRung:
    """Aggregate exit statistics of one time-step level."""

    dt: float
    n_paths: int
    n_exited: int
    exit_fraction: float
    n_coupled: int
    mean_zeta: float
    e1_fraction: float
    exited_per_start: tuple

    def to_json_obj(self):
        return {
            "dt": self.dt,
            "n_paths": self.n_paths,
            "n_exited": self.n_exited,
            "exit_fraction": self.exit_fraction,
            "n_coupled": self.n_coupled,
            "mean_zeta": self.mean_zeta,
            "e1_fraction": self.e1_fraction,
            "exited_per_start": list(self.exited_per_start),
        }


@dataclass(frozen=True)
class InvarianceReport:
    """Exit fractions across a time-step ladder, finest level summarized."""

    rungs: tuple
    n_paths: int
    n_exited: int
    exit_fraction: float

    @property
    def nonincreasing_within_error(self):
        """Exit fraction does not grow as dt shrinks, modulo binomial noise."""
        for a, b in zip(self.rungs, self.rungs[1:]):
            pa, pb = a.exit_fraction, b.exit_fraction
            pool = (a.n_exited + b.n_exited) / max(1, a.n_paths + b.n_paths)
            sigma = math.sqrt(max(pool * (1.0 - pool), 1e-12) * (1.0 / a.n_paths + 1.0 / b.n_paths))
            if pb > pa + 2.0 * sigma:
                return False
        return True

    def to_json_obj(self):
        return {
            "rungs": [r.to_json_obj() for r in self.rungs],
            "n_paths": self.n_paths,
            "n_exited": self.n_exited,
            "exit_fraction": self.exit_fraction,
            "nonincreasing_within_error": self.nonincreasing_within_error,
        }


@dataclass(frozen=True)
class MarginalReport:
    """Two-sample KS comparison of one marginal against plain reflected BM."""

    which: str
    n_paths: int
    t_max: float
    stat_x: float
    p_x: float
    stat_y: float
    p_y: float

    @property
    def min_p(self):
        return min(self.p_x, self.p_y)


@dataclass(frozen=True)
class SeparationEstimate:
    """Empirical lower-bound constants for separation at unit time."""

    c1_hat: float
    p1_hat: float
    n_survivors: int
    per_start: tuple


# ---------------------------------------------------------------------------
# Scalar stepping
# ---------------------------------------------------------------------------


def _step_reflected_s(curve, x, dW):
    """Euler projection step returning the contact parameter as well."""
    dW = np.asarray(dW, dtype=float)
    if float(np.hypot(dW[0], dW[1])) > 0.25 * curve.diameter:
        raise StepTooLarge(
            f"increment {float(np.hypot(dW[0], dW[1])):.4g} exceeds a quarter diameter"
        )
    cand = np.asarray(x, dtype=float) + dW
    if curve.is_inside(cand) != "outside":
        return cand, 0.0, None
    dist, s, foot = curve.project(cand)
    return foot, float(dist), float(s)


def step_reflected(curve, x, dW):
    """One Euler step of reflected Brownian motion via convex projection.

    Returns (new point, local-time increment, inward normal used); the
    normal is None when the candidate stayed inside the closed domain.
    """
    x_new, dl, s = _step_reflected_s(curve, x, dW)
    return x_new, dl, (None if s is None else curve.normal_at(s))


def _chart_point(curve, special, X, Y):
    """Chart coordinates of the mirror's feet, or None when inadmissible."""
    if special is None:
        return None
    try:
        chord = mirror_chord(curve, X, Y)
        return phi(special, chord.s_P, chord.s_Q)
    except (NotAdmissible, GeometryError):
        return None


def step_coupling(curve, state, dW, special=None, eps_couple=0.0, dt=None):
    """Advance the coupled pair by one increment of X's driving noise.

    Y receives the mirror image of dW across the current mirror; both
    points are projected back into the domain if they stray.  The pair
    couples (Y freezes onto X) once the new separation drops below
    eps_couple.  The chart point U is recomputed only when a boundary push
    can have moved the mirror; interior steps keep the mirror (hence U and
    theta) frozen.  dt, when given, advances the clock.
    """
    if state.coupled:
        raise ValueError("the pair is already coupled")
    dW = np.asarray(dW, dtype=float)
    m = state.m
    dZ = dW - 2.0 * m * float(m @ dW)
    X_new, dl, _ = step_reflected(curve, state.X, dW)
    Y_new, dm, _ = step_reflected(curve, state.Y, dZ)
    t_new = state.t + (dt if dt is not None else 0.0)
    diff = Y_new - X_new
    V_new = float(np.hypot(diff[0], diff[1]))
    if V_new < eps_couple:
        return CouplingState(
            t_new, X_new, X_new, m, 0.0, float("nan"), None,
            state.absL + dl, state.absM + dm, True,
        )
    m_new = diff / V_new
    p_new = rot90(m_new)
    theta_new = norm_angle_0pi(math.atan2(p_new[1], p_new[0]))
    if dl > 0.0 or dm > 0.0 or state.U is None:
        U_new = _chart_point(curve, special, X_new, Y_new)
    else:
        U_new = state.U
    return CouplingState(
        t_new, X_new, Y_new, m_new, V_new, theta_new, U_new,
        state.absL + dl, state.absM + dm, False,
    )


# ---------------------------------------------------------------------------
# Single-path simulation with full diagnostics
# ---------------------------------------------------------------------------


def _initial_state(curve, special, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y - x
    V = float(np.hypot(diff[0], diff[1]))
    if V <= 0.0:
        raise ValueError("coupling needs two distinct starting points")
    m = diff / V
    p = rot90(m)
    theta = norm_angle_0pi(math.atan2(p[1], p[0]))
    U = _chart_point(curve, special, x, y)
    return CouplingState(0.0, x, y, m, V, theta, U, 0.0, 0.0, False)


def simulate(curve, special, lset, x, y, cfg, require_in_T=True, path_index=0):
    """Run one coupled path, recording states and per-contact drift rows.

    The record samples every cfg.record_stride steps (plus the final step),
    monitors whether the chart point stays inside the invariant region at
    those samples, accumulates the observed-vs-predicted chart increments
    at boundary contacts, and tracks the pathwise domination and bisector
    identities that the scheme should preserve.
    """
    if require_in_T and (special is None or lset is None or not pair_in_T(curve, special, lset, x, y)):
        raise ValueError("starting pair is outside the invariant family; pass require_in_T=False to override")
    state = _initial_state(curve, special, x, y)
    rng = _path_rng(cfg.seed, path_index)
    sqdt = math.sqrt(cfg.dt)
    n_steps = cfg.n_steps
    eps = cfg.eps_couple

    states = [state]
    zeta = None
    exit_time = None
    drift_rows = []
    drift_skipped = 0
    v_dom_max = -math.inf
    n_crossover = 0
    bis_err_max = 0.0
    n_contact = 0

    chord = None
    if state.U is not None:
        chord = mirror_chord(curve, state.X, state.Y)
    if lset is not None and (state.U is None or not contains(lset, state.U)):
        exit_time = 0.0

    V0 = state.V
    Wbar = 0.0
    chunk = 512
    increments = None

    for k in range(n_steps):
        j = k % chunk
        if j == 0:
            increments = rng.standard_normal((min(chunk, n_steps - k), 2)) * sqdt
        dW = increments[j]
        t_next = (k + 1) * cfg.dt

        if state.coupled:
            X_new, dl, _ = step_reflected(curve, state.X, dW)
            state = replace(state, t=t_next, X=X_new, Y=X_new, absL=state.absL + dl)
            if dl > 0.0:
                n_contact += 1
            if (k + 1) % cfg.record_stride == 0 or k + 1 == n_steps:
                states.append(state)
            continue

        m_pre = state.m
        dwbar = -2.0 * float(m_pre @ dW)
        if state.V + dwbar < 0.0:
            n_crossover += 1
        Wbar += dwbar

        dZ = dW - 2.0 * m_pre * float(m_pre @ dW)
        X_new, dl, sX = _step_reflected_s(curve, state.X, dW)
        Y_new, dm, sY = _step_reflected_s(curve, state.Y, dZ)
        if dl > 0.0 or dm > 0.0:
            n_contact += 1

        diff = Y_new - X_new
        V_new = float(np.hypot(diff[0], diff[1]))
        v_dom_max = max(v_dom_max, V_new - V0 - Wbar)

        if V_new < eps:
            if zeta is None:
                zeta = t_next
            state = CouplingState(
                t_next, X_new, X_new, m_pre, 0.0, float("nan"), None,
                state.absL + dl, state.absM + dm, True,
            )
            if (k + 1) % cfg.record_stride == 0 or k + 1 == n_steps:
                states.append(state)
            continue

        m_new = diff / V_new
        p_new = rot90(m_new)
        theta_new = norm_angle_0pi(math.atan2(p_new[1], p_new[0]))

        if dl > 0.0 or dm > 0.0:
            U_prev, theta_prev, V_prev = state.U, state.theta, state.V
            X_prev, Y_prev = state.X, state.Y
            try:
                chord = mirror_chord(curve, X_new, Y_new)
                U_new = phi(special, chord.s_P, chord.s_Q) if special is not None else None
            except (NotAdmissible, GeometryError):
                chord = None
                U_new = None
            if U_prev is not None and U_new is not None:
                try:
                    pred = np.zeros(2)
                    dth_pred = 0.0
                    p_prev = rot90(m_pre)
                    if dl > 0.0:
                        pred += field_F(curve, sX, Y_prev) * dl
                        nX = curve.normal_at(sX)
                        dth_pred -= float(p_prev @ nX) * dl / V_prev
                    if dm > 0.0:
                        pred += field_G(curve, X_prev, sY) * dm
                        nY = curve.normal_at(sY)
                        dth_pred += float(p_prev @ nY) * dm / V_prev
                    drift_rows.append(
                        DriftRow(
                            t_next,
                            U_new - U_prev,
                            pred,
                            _wrap_line_angle_diff(theta_new - theta_prev),
                            dth_pred,
                            dl,
                            dm,
                        )
                    )
                except DegenerateChord:
                    drift_skipped += 1
            else:
                drift_skipped += 1
            U_carry = U_new
        else:
            U_carry = state.U
            if chord is not None:
                err = abs(
                    float(np.hypot(*(X_new - chord.P))) - float(np.hypot(*(Y_new - chord.P)))
                )
                bis_err_max = max(bis_err_max, err)

        state = CouplingState(
            t_next, X_new, Y_new, m_new, V_new, theta_new, U_carry,
            state.absL + dl, state.absM + dm, False,
        )

        if (k + 1) % cfg.record_stride == 0 or k + 1 == n_steps:
            states.append(state)
            if exit_time is None and lset is not None:
                if state.U is None or not contains(lset, state.U):
                    exit_time = t_next

    return PathRecord(
        config=cfg,
        states=states,
        zeta=zeta,
        exit_time_from_L=exit_time,
        drift_rows=drift_rows,
        drift_skipped=drift_skipped,
        v_dom_max=(v_dom_max if v_dom_max > -math.inf else 0.0),
        n_crossover=n_crossover,
        bisector_err_max=bis_err_max,
        boundary_fraction=n_contact / n_steps,
    )


# ---------------------------------------------------------------------------
# Vectorized ensembles
# ---------------------------------------------------------------------------


@dataclass
class _EnsembleOut:
    """Flat per-path arrays produced by the block driver."""

    coupled: np.ndarray
    zeta: np.ndarray
    exited: np.ndarray
    exit_time: np.ndarray
    e1_ok: np.ndarray
    absL: np.ndarray
    absM: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    V_capture: np.ndarray
    coupled_at_capture: np.ndarray
    v_dom_max: np.ndarray
    n_crossover: np.ndarray
    contact_steps: int
    path_steps: int


def _contains_many(lset, U):
    """Vectorized even-odd membership of chart points in the region loop."""
    loop = lset.loop
    a = loop[:-1]
    b = loop[1:]
    ya = a[:, 1][None, :]
    yb = b[:, 1][None, :]
    uy = U[:, 1][:, None]
    straddle = (ya > uy) != (yb > uy)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (uy - ya) / (yb - ya)
        x_hit = a[:, 0][None, :] + t * (b[:, 0] - a[:, 0])[None, :]
    hits = straddle & (x_hit > U[:, 0][:, None])
    return (hits.sum(axis=1) % 2).astype(bool)


def _advance_block(curve, P, d):
    """Candidate move + convex projection for an (n,2) block of points."""
    cand = P + d
    sure = curve.inside_quick_mask(cand)
    dl = np.zeros(len(P))
    check = ~sure
    if check.any():
        pts = cand[check]
        dist, s, feet = curve.project_many(pts)
        _, _, nrm = curve.frame_at_many(s)
        outside = ((pts - feet) * nrm).sum(axis=1) <= 0.0
        if outside.any():
            pts = pts.copy()
            pts[outside] = feet[outside]
            cand[check] = pts
            dsub = np.zeros(len(dist))
            dsub[outside] = dist[outside]
            dl[check] = dsub
    return cand, dl


def _mirror_feet_block(curve, X, Y, grid_s, grid_pts, iters=44):
    """Boundary feet of each pair's perpendicular bisector, by bisection.

    Returns (s_a, s_b, bad): bad marks rows whose bisector did not cross
    the sampled boundary exactly twice (tangency or grid degeneracy).
    """
    n = len(X)
    mid = 0.5 * (X + Y)
    diff = Y - X
    V = np.hypot(diff[:, 0], diff[:, 1])
    m = diff / np.maximum(V, 1e-300)[:, None]
    g = m @ grid_pts.T - (m * mid).sum(axis=1)[:, None]
    gg = np.concatenate([g, g[:, :1]], axis=1)
    cross = (gg[:, :-1] * gg[:, 1:]) < 0.0
    ncross = cross.sum(axis=1)
    bad = ncross != 2
    i1 = np.argmax(cross, axis=1)
    cross2 = cross.copy()
    cross2[np.arange(n), i1] = False
    i2 = np.argmax(cross2, axis=1)

    lo = np.concatenate([grid_s[i1], grid_s[i2]])
    hi = np.concatenate([grid_s[i1 + 1], grid_s[i2 + 1]])
    sign_lo = np.concatenate([g[np.arange(n), i1], g[np.arange(n), i2]]) > 0.0
    mid2 = np.concatenate([mid, mid])
    m2 = np.concatenate([m, m])
    for _ in range(iters):
        sm = 0.5 * (lo + hi)
        pts = curve.points_at(sm)
        gm = ((pts - mid2) * m2).sum(axis=1)
        go_lo = (gm > 0.0) == sign_lo
        lo = np.where(go_lo, sm, lo)
        hi = np.where(go_lo, hi, sm)
    s_res = 0.5 * (lo + hi)
    return s_res[:n], s_res[n:], bad


def _chart_exit_mask(curve, special, lset, X, Y, grid_s, grid_pts):
    """Which rows' mirrors are inadmissible or map outside the region."""
    n = len(X)
    s_a, s_b, bad = _mirror_feet_block(curve, X, Y, grid_s, grid_pts)
    slack = 1e-9 * curve.total_length
    # role assignment: a foot belongs to the part whose chart window holds it
    a_low = special.u1_of_s(s_a) <= special.ubar1 + slack
    a_up = special.u2_of_s(s_a) <= special.ubar2 + slack
    b_low = special.u1_of_s(s_b) <= special.ubar1 + slack
    b_up = special.u2_of_s(s_b) <= special.ubar2 + slack
    case_ab = a_low & b_up
    case_ba = b_low & a_up & ~case_ab
    admissible = (case_ab | case_ba) & ~bad
    sP = np.where(case_ab, s_a, s_b)
    sQ = np.where(case_ab, s_b, s_a)
    exit_mask = ~admissible
    if admissible.any():
        U = np.stack(
            [special.u1_of_s(sP[admissible]), special.u2_of_s(sQ[admissible])], axis=1
        )
        inside = _contains_many(lset, U)
        sub = exit_mask[admissible]
        sub |= ~inside
        exit_mask[admissible] = sub
    if bad.any():
        # rare tangency/degeneracy: decide those rows with the scalar path
        idx = np.nonzero(bad)[0]
        for i in idx:
            u = _chart_point(curve, special, X[i], Y[i])
            exit_mask[i] = u is None or not contains(lset, u)
    return exit_mask


def _run_ensemble(
    curve,
    X0,
    Y0,
    cfg,
    mode="pair",
    special=None,
    lset=None,
    check_every=None,
    capture_time=None,
    stream_offset=0,
    block_size=4096,
    chunk_steps=512,
):
    """Advance an ensemble of paths and collect per-path statistics.

    mode "pair" runs the mirror coupling; mode "single" runs plain
    reflected Brownian motion (Y columns mirror X).  Chart monitoring
    happens only when special and lset are given and check_every > 0.
    """
    X0 = np.asarray(X0, dtype=float)
    N = len(X0)
    n_steps = cfg.n_steps
    sqdt = math.sqrt(cfg.dt)
    eps = cfg.eps_couple
    monitor = special is not None and lset is not None and check_every is not None
    check_stride = max(1, int(round(check_every / cfg.dt))) if monitor else 0
    capture_step = None
    if capture_time is not None:
        capture_step = int(round(capture_time / cfg.dt))
        if capture_step > n_steps:
            raise ValueError("capture_time exceeds the horizon")
    guard = 0.25 * curve.diameter

    if monitor:
        n_grid = 512
        grid_s = np.linspace(0.0, curve.total_length, n_grid + 1)
        grid_pts = curve.points_at(grid_s[:-1])
    else:
        grid_s = grid_pts = None

    out = _EnsembleOut(
        coupled=np.zeros(N, bool),
        zeta=np.full(N, np.nan),
        exited=np.zeros(N, bool),
        exit_time=np.full(N, np.nan),
        e1_ok=np.ones(N, bool),
        absL=np.zeros(N),
        absM=np.zeros(N),
        X=X0.copy(),
        Y=(np.asarray(Y0, dtype=float).copy() if mode == "pair" else X0.copy()),
        V_capture=np.full(N, np.nan),
        coupled_at_capture=np.zeros(N, bool),
        v_dom_max=np.full(N, -np.inf),
        n_crossover=np.zeros(N, np.int64),
        contact_steps=0,
        path_steps=N * n_steps,
    )

    for b0 in range(0, N, block_size):
        b1 = min(N, b0 + block_size)
        nb = b1 - b0
        X = out.X[b0:b1]
        Y = out.Y[b0:b1]
        coupled = out.coupled[b0:b1]
        zeta = out.zeta[b0:b1]
        exited = out.exited[b0:b1]
        exit_time = out.exit_time[b0:b1]
        e1_ok = out.e1_ok[b0:b1]
        absL = out.absL[b0:b1]
        absM = out.absM[b0:b1]
        vdom = out.v_dom_max[b0:b1]
        ncross = out.n_crossover[b0:b1]

        diff0 = Y - X
        V0 = np.hypot(diff0[:, 0], diff0[:, 1])
        Wbar = np.zeros(nb)

        gens = [_path_rng(cfg.seed, stream_offset + b0 + i) for i in range(nb)]

        if monitor and mode == "pair":
            e1_ok &= diff0[:, 0] > 0.0
            exit_now = _chart_exit_mask(curve, special, lset, X, Y, grid_s, grid_pts)
            exited |= exit_now
            exit_time[exit_now] = 0.0

        k = 0
        while k < n_steps:
            kc = min(chunk_steps, n_steps - k)
            inc = np.empty((nb, kc, 2))
            for i, gen in enumerate(gens):
                inc[i] = gen.standard_normal((kc, 2))
            inc *= sqdt
            if math.sqrt(2.0) * float(np.abs(inc).max()) > guard:
                nrm = np.hypot(inc[..., 0], inc[..., 1])
                if float(nrm.max()) > guard:
                    raise StepTooLarge("an ensemble increment exceeds a quarter diameter")

            for j in range(kc):
                dW = inc[:, j, :]
                if mode == "pair":
                    live = ~coupled
                    if live.any():
                        Xl = X[live]
                        Yl = Y[live]
                        diff = Yl - Xl
                        Vl = np.hypot(diff[:, 0], diff[:, 1])
                        m = diff / Vl[:, None]
                        dWl = dW[live]
                        mdw = (m * dWl).sum(axis=1)
                        dwbar = -2.0 * mdw
                        crossed = Vl + dwbar < 0.0
                        if crossed.any():
                            nsub = ncross[live]
                            nsub[crossed] += 1
                            ncross[live] = nsub
                        wsub = Wbar[live]
                        wsub += dwbar
                        Wbar[live] = wsub
                        dZ = dWl - 2.0 * m * mdw[:, None]

                        Xl, dlx = _advance_block(curve, Xl, dWl)
                        Yl, dly = _advance_block(curve, Yl, dZ)
                        out.contact_steps += int((dlx > 0).sum())
                        diff = Yl - Xl
                        Vl = np.hypot(diff[:, 0], diff[:, 1])
                        vsub = vdom[live]
                        np.maximum(vsub, Vl - V0[live] - Wbar[live], out=vsub)
                        vdom[live] = vsub
                        newly = Vl < eps
                        if newly.any():
                            zsub = zeta[live]
                            zsub[newly] = (k + j + 1) * cfg.dt
                            zeta[live] = zsub
                            Yl[newly] = Xl[newly]
                        X[live] = Xl
                        Y[live] = Yl
                        lsub = absL[live]
                        lsub += dlx
                        absL[live] = lsub
                        msub = absM[live]
                        msub += dly
                        absM[live] = msub
                        if newly.any():
                            csub = coupled[live]
                            csub |= newly
                            coupled[live] = csub
                    done = coupled
                    if done.any():
                        Xd, dlx = _advance_block(curve, X[done], dW[done])
                        X[done] = Xd
                        Y[done] = Xd
                        out.contact_steps += int((dlx > 0).sum())
                        lsub = absL[done]
                        lsub += dlx
                        absL[done] = lsub
                else:
                    Xn, dlx = _advance_block(curve, X, dW)
                    X[:] = Xn
                    Y[:] = Xn
                    out.contact_steps += int((dlx > 0).sum())
                    absL += dlx

                step_idx = k + j + 1
                if capture_step is not None and step_idx == capture_step:
                    dcap = Y - X
                    out.V_capture[b0:b1] = np.hypot(dcap[:, 0], dcap[:, 1])
                    out.coupled_at_capture[b0:b1] = coupled
                if monitor and mode == "pair" and step_idx % check_stride == 0:
                    live = ~coupled & ~exited
                    if live.any():
                        dlv = Y[live] - X[live]
                        esub = e1_ok[live]
                        esub &= dlv[:, 0] > 0.0
                        e1_ok[live] = esub
                        exit_now = _chart_exit_mask(
                            curve, special, lset, X[live], Y[live], grid_s, grid_pts
                        )
                        if exit_now.any():
                            xsub = exited[live]
                            tsub = exit_time[live]
                            tsub[exit_now] = step_idx * cfg.dt
                            xsub |= exit_now
                            exited[live] = xsub
                            exit_time[live] = tsub
            k += kc

    out.v_dom_max[~np.isfinite(out.v_dom_max)] = 0.0
    return out


def _repeat_starts(starts, n_paths):
    xs = np.array([np.asarray(s[0], dtype=float) for s in starts])
    ys = np.array([np.asarray(s[1], dtype=float) for s in starts])
    X0 = np.repeat(xs, n_paths, axis=0)
    Y0 = np.repeat(ys, n_paths, axis=0)
    return X0, Y0


def invariance_mc(
    curve,
    special,
    lset,
    starts,
    cfgs,
    n_paths=200,
    require_in_T=True,
    check_every=0.01,
    block_size=4096,
):
    """Exit fractions of the chart process across a time-step ladder.

    Runs n_paths coupled paths from every start for each config, monitors
    region membership every check_every time units, and aggregates exit
    fractions per rung.  The finest rung's counts fill the report summary.
    """
    if require_in_T:
        for x, y in starts:
            if not pair_in_T(curve, special, lset, x, y):
                raise ValueError("a start lies outside the invariant family")
    X0, Y0 = _repeat_starts(starts, n_paths)
    rungs = []
    for cfg in sorted(cfgs, key=lambda c: -c.dt):
        out = _run_ensemble(
            curve,
            X0,
            Y0,
            cfg,
            mode="pair",
            special=special,
            lset=lset,
            check_every=check_every,
            block_size=block_size,
        )
        n_total = len(X0)
        n_exited = int(out.exited.sum())
        n_coupled = int(out.coupled.sum())
        mean_zeta = float(np.nanmean(out.zeta)) if n_coupled else float("nan")
        per_start = tuple(
            int(out.exited[i * n_paths : (i + 1) * n_paths].sum()) for i in range(len(starts))
        )
        rungs.append(
            LadderRung(
                dt=cfg.dt,
                n_paths=n_total,
                n_exited=n_exited,
                exit_fraction=n_exited / n_total,
                n_coupled=n_coupled,
                mean_zeta=mean_zeta,
                e1_fraction=float(out.e1_ok.mean()),
                exited_per_start=per_start,
            )
        )
    finest = rungs[-1]
    return InvarianceReport(
        rungs=tuple(rungs),
        n_paths=finest.n_paths,
        n_exited=finest.n_exited,
        exit_fraction=finest.exit_fraction,
    )


# ---------------------------------------------------------------------------
# Drift diagnostics
# ---------------------------------------------------------------------------


def drift_diagnostic(record):
    """Normalized residuals of the boundary drift and angle identities.

    Aggregates over the record's contact rows: the chart-increment residual
    is sum ||dU - (F dl + G dm)|| / sum ||dU||, and likewise for the mirror
    angle against its local-time expression.
    """
    rows = record.drift_rows
    if not rows:
        return {"n_rows": 0, "u_residual": float("nan"), "theta_residual": float("nan")}
    du = np.array([r.du_actual for r in rows])
    dp = np.array([r.du_pred for r in rows])
    num = float(np.hypot(*(du - dp).T).sum())
    den = float(np.hypot(*du.T).sum())
    dth = np.array([r.dtheta_actual for r in rows])
    dthp = np.array([r.dtheta_pred for r in rows])
    tnum = float(np.abs(dth - dthp).sum())
    tden = float(np.abs(dth).sum())
    return {
        "n_rows": len(rows),
        "u_residual": num / den if den > 0 else float("nan"),
        "theta_residual": tnum / tden if tden > 0 else float("nan"),
    }


def drift_order(curve, special, lset, x, y, dts, seed=0, n_paths=6, t_max=0.5):
    """Fitted log-log slopes of the drift residuals across a dt ladder.

    Pools contact rows over n_paths independent paths per dt and fits
    log(residual) against log(dt); returns (slope_u, slope_theta, rows)
    where rows list the pooled residuals per dt.
    """
    rows = []
    for dt in sorted(dts, reverse=True):
        cfg = SimConfig(dt=dt, t_max=t_max, seed=seed, record_stride=max(1, int(round(0.01 / dt))))
        num = den = tnum = tden = 0.0
        count = 0
        for i in range(n_paths):
            rec = simulate(curve, special, lset, x, y, cfg, require_in_T=False, path_index=i)
            for r in rec.drift_rows:
                e = r.du_actual - r.du_pred
                num += float(np.hypot(e[0], e[1]))
                den += float(np.hypot(r.du_actual[0], r.du_actual[1]))
                tnum += abs(r.dtheta_actual - r.dtheta_pred)
                tden += abs(r.dtheta_actual)
                count += 1
        rows.append(
            {
                "dt": dt,
                "n_rows": count,
                "u_residual": num / den if den > 0 else float("nan"),
                "theta_residual": tnum / tden if tden > 0 else float("nan"),
            }
        )
    ldt = np.log([r["dt"] for r in rows])
    slope_u = float(np.polyfit(ldt, np.log([r["u_residual"] for r in rows]), 1)[0])
    slope_th = float(np.polyfit(ldt, np.log([r["theta_residual"] for r in rows]), 1)[0])
    return slope_u, slope_th, rows


# ---------------------------------------------------------------------------
# Marginal laws and separation constants
# ---------------------------------------------------------------------------


def _default_partner(curve, x):
    """A deterministic interior partner point distinct from x."""
    x = np.asarray(x, dtype=float)
    cen = curve.centroid
    y = 0.5 * (x + cen)
    if float(np.hypot(*(y - x))) > 1e-9 * curve.diameter:
        return y
    probe = cen + np.array([0.1 * curve.diameter, 0.0])
    if curve.is_inside(probe) == "outside":
        dist, s, foot = curve.project(probe)
        probe = foot + 0.05 * curve.diameter * curve.normal_at(s)
    return probe


def marginal_law_test(curve, x, cfg, n_paths, which="X", y=None, block_size=4096):
    """KS comparison of one coupling marginal against plain reflected BM.

    Runs the mirror coupling from (x, y) and an independently seeded plain
    reflected Brownian motion from x, then applies a two-sample
    Kolmogorov-Smirnov test to each coordinate of the chosen marginal at
    the horizon.
    """
    from scipy import stats

    if which not in ("X", "Y"):
        raise ValueError("which must be 'X' or 'Y'")
    if y is None:
        y = _default_partner(curve, x)
    X0 = np.tile(np.asarray(x, dtype=float), (n_paths, 1))
    Y0 = np.tile(np.asarray(y, dtype=float), (n_paths, 1))
    pair = _run_ensemble(curve, X0, Y0, cfg, mode="pair", block_size=block_size)
    ref = _run_ensemble(
        curve, X0, Y0, cfg, mode="single", stream_offset=n_paths, block_size=block_size
    )
    sample = pair.X if which == "X" else pair.Y
    kx = stats.ks_2samp(sample[:, 0], ref.X[:, 0])
    ky = stats.ks_2samp(sample[:, 1], ref.X[:, 1])
    return MarginalReport(
        which=which,
        n_paths=n_paths,
        t_max=cfg.t_max,
        stat_x=float(kx.statistic),
        p_x=float(kx.pvalue),
        stat_y=float(ky.statistic),
        p_y=float(ky.pvalue),
    )


def estimate_separation(curve, lset, starts, cfg, n_paths, special=None, block_size=4096):
    """Empirical separation constants at unit time for uncoupled pairs.

    For each start, runs n_paths coupled paths and looks at the separation
    at time 1 among paths that have not yet coupled.  c1_hat is the
    smallest per-start 10th percentile of those separations; p1_hat is the
    smallest per-start fraction of survivors separated by at least c1_hat.
    """
    if cfg.t_max < 1.0:
        raise ValueError("the horizon must reach time 1")
    if special is not None and lset is not None:
        for x, y in starts:
            if not pair_in_T(curve, special, lset, x, y):
                raise ValueError("a start lies outside the invariant family")
    X0, Y0 = _repeat_starts(starts, n_paths)
    out = _run_ensemble(curve, X0, Y0, cfg, capture_time=1.0, block_size=block_size)
    survivors = ~out.coupled_at_capture
    if int(survivors.sum()) < 100:
        raise InsufficientSurvivors(
            f"only {int(survivors.sum())} of {len(X0)} paths were uncoupled at time 1"
        )
    per_start = []
    pctiles = []
    for i in range(len(starts)):
        sl = slice(i * n_paths, (i + 1) * n_paths)
        surv = survivors[sl]
        if not surv.any():
            raise InsufficientSurvivors(f"start {i} has no uncoupled paths at time 1")
        vals = out.V_capture[sl][surv]
        pctiles.append(float(np.percentile(vals, 10.0)))
        per_start.append(
            {
                "n_survivors": int(surv.sum()),
                "median_V1": float(np.median(vals)),
                "pct10_V1": pctiles[-1],
            }
        )
    c1_hat = min(pctiles)
    fracs = []
    for i in range(len(starts)):
        sl = slice(i * n_paths, (i + 1) * n_paths)
        surv = survivors[sl]
        vals = out.V_capture[sl][surv]
        fracs.append(float((vals >= c1_hat).mean()))
        per_start[i]["frac_above_c1"] = fracs[-1]
    return SeparationEstimate(
        c1_hat=c1_hat,
        p1_hat=min(fracs),
        n_survivors=int(survivors.sum()),
        per_start=tuple(per_start),
    )
