"""Convex planar domains with piecewise-analytic boundaries.

A domain is described by a closed, counterclockwise chain of boundary pieces
(circular arcs, elliptic arcs, straight segments).  The curve object built
from the chain carries an arclength parametrization and answers the primitive
queries everything else in this package needs: points, tangents, inward
normals, curvature, normal-angle inversion, line intersections, reflection,
point classification, nearest-point projection, and corner smoothing.

Points are numpy arrays of shape (2,); batches of points are arrays of shape
(n, 2).  Angles are radians.  Arclength s is measured counterclockwise from
the start of the first piece and interpreted modulo the total length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Tolerance defaults; the length-scaled ones are multiplied by the domain
# diameter when a curve is built.
TOL_CLOSE_REL = 1e-9
TOL_CONVEX = 1e-12
TOL_ROOT_REL = 1e-10
TOL_BD_REL = 1e-9


class GeometryError(ValueError):
    """Base class for geometry failures."""


class NotClosed(GeometryError):
    pass


class NotConvex(GeometryError):
    pass


class DegeneratePiece(GeometryError):
    pass


class JointPoint(GeometryError):
    """Raised when a one-sided quantity is requested at a non-smooth joint.

    Carries both one-sided values so callers can pick a side.
    """

    def __init__(self, s, before, after):
        super().__init__(f"non-smooth joint at s={s:.12g}")
        self.s = s
        self.before = before
        self.after = after


class FlatMatch(GeometryError):
    """Normal-angle inversion hit a straight segment: an interval matches."""

    def __init__(self, s_lo, s_hi):
        super().__init__(f"normal angle matches the segment s=[{s_lo:.6g}, {s_hi:.6g}]")
        self.s_lo = s_lo
        self.s_hi = s_hi


class NoIntersection(GeometryError):
    pass


class TangentLine(GeometryError):
    pass


class RhoTooLarge(GeometryError):
    pass


def vec(x, y):
    return np.array([float(x), float(y)])


def rot90(v):
    """Rotate by +90 degrees (counterclockwise)."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return np.array([-v[1], v[0]])
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=(v.ndim > 1))
    return v / n


def norm_angle_02pi(a):
    return float(a) % TWO_PI


def norm_angle_0pi(a):
    """Normalize a line angle into [0, pi)."""
    a = float(a) % math.pi
    if a < 0:
        a += math.pi
    return a


@dataclass(frozen=True)
class LineRepr:
    """An undirected line: angle in [0, pi) plus a point on it.

    p is the unit direction e^{i angle}; m = -i p is the unit normal chosen
    so that (p, m) stays right-handed with the package's orientation rules.
    """

    angle: float
    anchor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angle", norm_angle_0pi(self.angle))
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))

    @property
    def p(self):
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def m(self):
        # m = -i p: rotate p by -90 degrees
        return np.array([math.sin(self.angle), -math.cos(self.angle)])


def line_through(a, b):
    """The line through two distinct points; angle normalized to [0, pi)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    if not np.any(np.abs(d) > 0):
        raise GeometryError("line through coincident points")
    return LineRepr(math.atan2(d[1], d[0]), a)


def line_angle(a, b):
    """Angle of the line through a and b, in [0, pi)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    return norm_angle_0pi(math.atan2(d[1], d[0]))


def reflect_point(a, line: LineRepr):
    """Mirror image of a point (or an (n,2) batch) across a line."""
    a = np.asarray(a, dtype=float)
    m = line.m
    offs = (a - line.anchor) @ m
    if a.ndim == 1:
        return a - 2.0 * offs * m
    return a - 2.0 * offs[:, None] * m[None, :]


# ---------------------------------------------------------------------------
# Boundary pieces
# ---------------------------------------------------------------------------


class _Piece:
    """Common interface: parametrized position over t in [t0, t1]."""

    t0: float
    t1: float

    def point(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def speed(self, t):
        v = self.velocity(t)
        return np.hypot(v[..., 0], v[..., 1]) if np.ndim(t) else float(np.hypot(v[0], v[1]))

    def curvature(self, t):
        raise NotImplementedError

    def length(self):
        raise NotImplementedError

    def t_of_s(self, s_local):
        raise NotImplementedError

    def t_of_s_many(self, s_local):
        return np.array([self.t_of_s(v) for v in np.asarray(s_local, dtype=float)])

    def s_of_t(self, t):
        raise NotImplementedError

    def s_of_t_many(self, t):
        return self.s_of_t(np.asarray(t, dtype=float))

    def normal_angle(self, t):
        """Inward normal angle, continuous and nondecreasing in t."""
        raise NotImplementedError

    def t_of_normal_angle(self, psi):
        raise NotImplementedError

    def project(self, a):
        """Nearest point: returns (dist, t)."""
        raise NotImplementedError

    def project_many(self, pts):
        """Vectorized nearest point: (dists, ts) for an (n,2) array."""
        raise NotImplementedError

    def line_hits(self, line: LineRepr):
        """Intersections with a line: list of (t_line, t_piece)."""
        raise NotImplementedError

    def mirrored_x(self):
        """The piece mapped under x -> -x, re-oriented to stay CCW."""
        raise NotImplementedError

    def truncated(self, t_lo=None, t_hi=None):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


class CircleArc(_Piece):
    def __init__(self, center, radius, angle_from, angle_to):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.t0 = float(angle_from)
        self.t1 = float(angle_to)
        if self.radius <= 0 or not self.t1 > self.t0:
            raise DegeneratePiece("circle arc needs radius > 0 and angle_to > angle_from")

    def point(self, t):
        t = np.asarray(t, dtype=float)
        p = self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
        return p

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def curvature(self, t):
        return 1.0 / self.radius

    def length(self):
        return self.radius * (self.t1 - self.t0)

    def t_of_s(self, s_local):
        return self.t0 + s_local / self.radius

    def t_of_s_many(self, s_local):
        return self.t0 + np.asarray(s_local, dtype=float) / self.radius

    def s_of_t(self, t):
        return (t - self.t0) * self.radius

    def normal_angle(self, t):
        # inward normal is -(cos t, sin t): angle t + pi, already monotone
        return t + math.pi

    def t_of_normal_angle(self, psi):
        return psi - math.pi

    def project(self, a):
        d = np.asarray(a, dtype=float) - self.center
        r = math.hypot(d[0], d[1])
        if r == 0.0:
            t = 0.5 * (self.t0 + self.t1)
            return self.radius, t
        ang = math.atan2(d[1], d[0])
        # bring ang into [t0, t0 + 2pi)
        t = self.t0 + (ang - self.t0) % TWO_PI
        if t <= self.t1:
            return abs(r - self.radius), t
        best = None
        for te in (self.t0, self.t1):
            q = self.point(te)
            dist = float(np.hypot(*(np.asarray(a) - q)))
            if best is None or dist < best[0]:
                best = (dist, te)
        return best

    def project_many(self, pts):
        d = pts - self.center
        r = np.hypot(d[:, 0], d[:, 1])
        ang = np.arctan2(d[:, 1], d[:, 0])
        t = self.t0 + (ang - self.t0) % TWO_PI
        inside_arc = t <= self.t1
        dists = np.where(inside_arc, np.abs(r - self.radius), np.inf)
        ts = np.where(inside_arc, t, self.t0)
        for te in (self.t0, self.t1):
            q = self.point(te)
            de = np.hypot(pts[:, 0] - q[0], pts[:, 1] - q[1])
            better = de < dists
            dists = np.where(better, de, dists)
            ts = np.where(better, te, ts)
        return dists, ts

    def line_hits(self, line: LineRepr):
        p = line.p
        f = line.anchor - self.center
        b = f @ p
        c = f @ f - self.radius**2
        disc = b * b - c
        if disc < 0:
            return []
        out = []
        for tl in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
            x = line.anchor + tl * p - self.center
            ang = math.atan2(x[1], x[0])
            t = self.t0 + (ang - self.t0) % TWO_PI
            if t <= self.t1 + 1e-13:
                out.append((tl, min(t, self.t1)))
        return out

    def mirrored_x(self):
        c = np.array([-self.center[0], self.center[1]])
        return CircleArc(c, self.radius, math.pi - self.t1, math.pi - self.t0)

    def truncated(self, t_lo=None, t_hi=None):
        a0 = self.t0 if t_lo is None else t_lo
        a1 = self.t1 if t_hi is None else t_hi
        return CircleArc(self.center, self.radius, a0, a1)

    def to_json(self):
        return {
            "kind": "circle_arc",
            "center": [self.center[0], self.center[1]],
            "radius": self.radius,
            "from": self.t0,
            "to": self.t1,
        }


class EllipseArc(_Piece):
    _TABLE_N = 256

    def __init__(self, center, semi_axis_x, semi_axis_y, angle_from, angle_to):
        self.center = np.asarray(center, dtype=float)
        self.a = float(semi_axis_x)
        self.b = float(semi_axis_y)
        self.t0 = float(angle_from)
        self.t1 = float(angle_to)
        if self.a <= 0 or self.b <= 0 or not self.t1 > self.t0:
            raise DegeneratePiece("ellipse arc needs positive semi-axes and angle_to > angle_from")
        self._build_length_table()

    def _build_length_table(self):
        # cumulative arclength by composite Simpson; doubled until stable
        n = self._TABLE_N
        prev = None
        while True:
            tk = np.linspace(self.t0, self.t1, 2 * n + 1)
            sp = self._speed_arr(tk)
            h = (self.t1 - self.t0) / (2 * n)
            panels = (h / 3.0) * (sp[0:-2:2] + 4.0 * sp[1::2] + sp[2::2])
            total = float(panels.sum())
            if prev is not None and abs(total - prev) <= 1e-11 * max(total, 1.0):
                break
            if n >= 4096:
                break
            prev = total
            n *= 2
        self._knots_t = tk[::2]
        self._knots_s = np.concatenate([[0.0], np.cumsum(panels)])
        self._len = total

    def _speed_arr(self, t):
        return np.sqrt((self.a * np.sin(t)) ** 2 + (self.b * np.cos(t)) ** 2)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1)

    def curvature(self, t):
        sp = self._speed_arr(np.asarray(t, dtype=float))
        return self.a * self.b / sp**3

    def length(self):
        return self._len

    def s_of_t(self, t):
        i = int(np.searchsorted(self._knots_t, t) - 1)
        i = max(0, min(i, len(self._knots_t) - 2))
        ta, tb = self._knots_t[i], float(t)
        if tb <= ta:
            return float(self._knots_s[i]) + 0.0
        # one adaptive Simpson panel on the remainder
        mid = 0.5 * (ta + tb)
        sp = self._speed_arr(np.array([ta, mid, tb]))
        rem = (tb - ta) / 6.0 * (sp[0] + 4.0 * sp[1] + sp[2])
        return float(self._knots_s[i] + rem)

    def _s_of_t_arr(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self._knots_t, t) - 1, 0, len(self._knots_t) - 2)
        ta = self._knots_t[i]
        mid = 0.5 * (ta + t)
        rem = (t - ta) / 6.0 * (
            self._speed_arr(ta) + 4.0 * self._speed_arr(mid) + self._speed_arr(t)
        )
        return self._knots_s[i] + np.where(t > ta, rem, 0.0)

    def s_of_t_many(self, t):
        return self._s_of_t_arr(t)

    def t_of_s_many(self, s_local):
        s = np.clip(np.asarray(s_local, dtype=float), 0.0, self._len)
        t = np.interp(s, self._knots_s, self._knots_t)
        for _ in range(6):
            err = self._s_of_t_arr(t) - s
            t = t - err / self._speed_arr(t)
        return np.clip(t, self.t0, self.t1)

    def t_of_s(self, s_local):
        s_local = min(max(s_local, 0.0), self._len)
        i = int(np.searchsorted(self._knots_s, s_local) - 1)
        i = max(0, min(i, len(self._knots_s) - 2))
        # linear seed then Newton on s_of_t(t) - s_local
        span_s = self._knots_s[i + 1] - self._knots_s[i]
        frac = (s_local - self._knots_s[i]) / span_s if span_s > 0 else 0.0
        t = self._knots_t[i] + frac * (self._knots_t[i + 1] - self._knots_t[i])
        for _ in range(30):
            err = self.s_of_t(t) - s_local
            sp = float(self._speed_arr(np.asarray(t)))
            step = err / sp
            t -= step
            if abs(step) < 1e-15 * max(abs(self.t1 - self.t0), 1.0):
                break
        return min(max(t, self.t0), self.t1)

    def normal_angle(self, t):
        # inward normal direction is -(b cos t, a sin t); unwrap against t0
        raw = math.pi + math.atan2(self.a * math.sin(t), self.b * math.cos(t))
        raw0 = math.pi + math.atan2(self.a * math.sin(self.t0), self.b * math.cos(self.t0))
        return raw0 + (raw - raw0) % TWO_PI if t > self.t0 else raw0

    def t_of_normal_angle(self, psi):
        lo, hi = self.t0, self.t1
        flo = self.normal_angle(lo) - psi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = self.normal_angle(mid) - psi
            if flo * fm <= 0:
                hi = mid
            else:
                lo = mid
                flo = fm
            if hi - lo < 1e-15:
                break
        return 0.5 * (lo + hi)

    def project(self, a):
        d, t = self.project_many(np.asarray(a, dtype=float)[None, :])
        return float(d[0]), float(t[0])

    def project_many(self, pts):
        nseed = 17
        tseed = np.linspace(self.t0, self.t1, nseed)
        rel = pts[:, None, :] - self.point(tseed)[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", rel, rel)
        t = tseed[np.argmin(d2, axis=1)]
        px, py = pts[:, 0], pts[:, 1]
        cx, cy = self.center
        a, b = self.a, self.b
        # Newton on g(t) = (E(t)-A).E'(t), with trig written out flat: the
        # batches here are often tiny, so per-call numpy overhead dominates
        for _ in range(40):
            ct = np.cos(t)
            st = np.sin(t)
            rx = cx + a * ct - px
            ry = cy + b * st - py
            vx = -a * st
            vy = b * ct
            g = rx * vx + ry * vy
            gp = vx * vx + vy * vy - rx * a * ct - ry * b * st
            step = g / np.where(np.abs(gp) > 1e-300, gp, 1.0)
            np.clip(step, -0.3, 0.3, out=step)
            t_new = np.clip(t - step, self.t0, self.t1)
            moved = float(np.max(np.abs(t_new - t)))
            t = t_new
            if moved < 1e-14:
                break
        e = self.point(t)
        dists = np.hypot(pts[:, 0] - e[:, 0], pts[:, 1] - e[:, 1])
        for te in (self.t0, self.t1):
            q = self.point(te)
            de = np.hypot(pts[:, 0] - q[0], pts[:, 1] - q[1])
            better = de < dists
            dists = np.where(better, de, dists)
            t = np.where(better, te, t)
        return dists, t

    def line_hits(self, line: LineRepr):
        # scale to the unit circle
        p = line.p
        f = (line.anchor - self.center) / np.array([self.a, self.b])
        q = p / np.array([self.a, self.b])
        aa = q @ q
        bb = f @ q
        cc = f @ f - 1.0
        disc = bb * bb - aa * cc
        if disc < 0:
            return []
        out = []
        for tl in ((-bb - math.sqrt(disc)) / aa, (-bb + math.sqrt(disc)) / aa):
            x = f + tl * q
            ang = math.atan2(x[1] * 1.0, x[0] * 1.0)
            t = self.t0 + (ang - self.t0) % TWO_PI
            if t <= self.t1 + 1e-13:
                out.append((tl, min(t, self.t1)))
        return out

    def mirrored_x(self):
        c = np.array([-self.center[0], self.center[1]])
        return EllipseArc(c, self.a, self.b, math.pi - self.t1, math.pi - self.t0)

    def truncated(self, t_lo=None, t_hi=None):
        a0 = self.t0 if t_lo is None else t_lo
        a1 = self.t1 if t_hi is None else t_hi
        return EllipseArc(self.center, self.a, self.b, a0, a1)

    def to_json(self):
        return {
            "kind": "ellipse_arc",
            "center": [self.center[0], self.center[1]],
            "semi_axes": [self.a, self.b],
            "from": self.t0,
            "to": self.t1,
        }


class Segment(_Piece):
    def __init__(self, p_from, p_to):
        self.p0 = np.asarray(p_from, dtype=float)
        self.p1 = np.asarray(p_to, dtype=float)
        self._d = self.p1 - self.p0
        self._len = float(np.hypot(*self._d))
        if self._len <= 0:
            raise DegeneratePiece("segment of zero length")
        self.t0 = 0.0
        self.t1 = 1.0

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.p0 + np.multiply.outer(t, self._d) if t.ndim else self.p0 + t * self._d

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim:
            return np.broadcast_to(self._d, t.shape + (2,)).copy()
        return self._d.copy()

    def curvature(self, t):
        return 0.0

    def length(self):
        return self._len

    def t_of_s(self, s_local):
        return s_local / self._len

    def s_of_t(self, t):
        return t * self._len

    def normal_angle(self, t):
        n = rot90(self._d / self._len)
        return norm_angle_02pi(math.atan2(n[1], n[0]))

    def t_of_normal_angle(self, psi):
        return 0.5

    def project(self, a):
        a = np.asarray(a, dtype=float)
        t = float(np.clip((a - self.p0) @ self._d / self._len**2, 0.0, 1.0))
        q = self.p0 + t * self._d
        return float(np.hypot(*(a - q))), t

    def project_many(self, pts):
        t = np.clip((pts - self.p0) @ self._d / self._len**2, 0.0, 1.0)
        q = self.p0 + t[:, None] * self._d
        return np.hypot(pts[:, 0] - q[:, 0], pts[:, 1] - q[:, 1]), t

    def line_hits(self, line: LineRepr):
        p = line.p
        denom = self._d[0] * (-p[1]) + self._d[1] * p[0]
        if abs(denom) < 1e-300:
            return []
        rel = line.anchor - self.p0
        # solve p0 + u d = anchor + tl p
        u = (rel[0] * (-p[1]) + rel[1] * p[0]) / denom
        if -1e-13 <= u <= 1.0 + 1e-13:
            u = min(max(u, 0.0), 1.0)
            x = self.p0 + u * self._d
            tl = (x - line.anchor) @ p
            return [(float(tl), u)]
        return []

    def mirrored_x(self):
        m0 = np.array([-self.p1[0], self.p1[1]])
        m1 = np.array([-self.p0[0], self.p0[1]])
        return Segment(m0, m1)

    def truncated(self, t_lo=None, t_hi=None):
        a0 = self.t0 if t_lo is None else t_lo
        a1 = self.t1 if t_hi is None else t_hi
        return Segment(self.point(a0), self.point(a1))

    def to_json(self):
        return {
            "kind": "segment",
            "from": [self.p0[0], self.p0[1]],
            "to": [self.p1[0], self.p1[1]],
        }


# ---------------------------------------------------------------------------
# The assembled curve
# ---------------------------------------------------------------------------


class BoundaryCurve:
    """A closed convex counterclockwise boundary chain.

    Construct with build_curve(); the constructor assumes the pieces already
    passed validation.
    """

    def __init__(self, pieces, cumulative_lengths, total_length):
        self.pieces = list(pieces)
        self.cumulative_lengths = np.asarray(cumulative_lengths, dtype=float)
        self.total_length = float(total_length)
        self._init_geometry_cache()

    def _init_geometry_cache(self):
        samples = self.sample_points(512)
        self.centroid = samples.mean(axis=0)
        d = samples[:, None, :] - samples[None, :, :]
        self.diameter = float(np.sqrt((d**2).sum(axis=2).max()))
        self.tol_root = TOL_ROOT_REL * self.diameter
        self.tol_close = TOL_CLOSE_REL * self.diameter
        self.tol_bd = TOL_BD_REL * self.diameter
        # polar lower bound of the boundary radius around the centroid, for a
        # cheap "certainly inside" test (convexity makes the chord bound valid)
        m = 2048
        pts = self.sample_points(m)
        rel = pts - self.centroid
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        rad = np.hypot(rel[:, 0], rel[:, 1])
        order = np.argsort(ang)
        self._polar_ang = ang[order]
        self._polar_rad = rad[order]
        # lifted normal-angle table per piece for find_by_normal_angle
        self._psi_start = []
        self._psi_end = []
        lift = None
        for k, pc in enumerate(self.pieces):
            a0 = pc.normal_angle(pc.t0)
            a1 = pc.normal_angle(pc.t1)
            if lift is None:
                base = norm_angle_02pi(a0)
                off = base - a0
            else:
                jump = (a0 + off - lift) % TWO_PI
                if jump > TWO_PI - 1e-9:
                    jump = 0.0  # smooth junction whose turn rounded negative
                elif jump > math.pi + 1e-9:
                    raise NotConvex(f"reflex corner before piece {k}")
                off = lift + jump - a0
            self._psi_start.append(a0 + off)
            self._psi_end.append(a1 + off)
            lift = a1 + off
        closing = (self._psi_start[0] + TWO_PI - lift) % TWO_PI
        if closing > TWO_PI - 1e-9:
            closing = 0.0
        total_turn = lift + closing - self._psi_start[0]
        if abs(total_turn - TWO_PI) > 1e-6:
            raise NotConvex(f"total turning {total_turn:.6f} != 2 pi")

    # -- basic parametrization ------------------------------------------------

    def _locate(self, s):
        s = float(s) % self.total_length
        i = int(np.searchsorted(self.cumulative_lengths, s, side="right") - 1)
        i = max(0, min(i, len(self.pieces) - 1))
        return i, s - self.cumulative_lengths[i]

    def piece_t(self, s):
        """(piece index, intrinsic parameter) at arclength s."""
        i, s_loc = self._locate(s)
        return i, self.pieces[i].t_of_s(s_loc)

    def point_at(self, s):
        i, t = self.piece_t(s)
        return np.asarray(self.pieces[i].point(t), dtype=float)

    def points_at(self, s_arr):
        s_arr = np.asarray(s_arr, dtype=float) % self.total_length
        idx = np.clip(
            np.searchsorted(self.cumulative_lengths, s_arr, side="right") - 1,
            0,
            len(self.pieces) - 1,
        )
        out = np.empty((len(s_arr), 2))
        for i, pc in enumerate(self.pieces):
            mask = idx == i
            if not mask.any():
                continue
            ts = pc.t_of_s_many(s_arr[mask] - self.cumulative_lengths[i])
            out[mask] = pc.point(ts)
        return out

    def frame_at_many(self, s_arr):
        """Vectorized boundary frames: (points, unit tangents, inward normals).

        Joints resolve to the piece starting there; callers that care nudge
        their sample grids off the joints.
        """
        s_arr = np.asarray(s_arr, dtype=float) % self.total_length
        idx = np.clip(
            np.searchsorted(self.cumulative_lengths, s_arr, side="right") - 1,
            0,
            len(self.pieces) - 1,
        )
        pts = np.empty((len(s_arr), 2))
        tang = np.empty((len(s_arr), 2))
        for i, pc in enumerate(self.pieces):
            mask = idx == i
            if not mask.any():
                continue
            ts = pc.t_of_s_many(s_arr[mask] - self.cumulative_lengths[i])
            pts[mask] = pc.point(ts)
            v = pc.velocity(ts)
            tang[mask] = v / np.hypot(v[:, 0], v[:, 1])[:, None]
        return pts, tang, rot90(tang)

    def scan_grid(self, n):
        """A cached uniform boundary sample: dict with s, X, T, N arrays.

        The grid is nudged off piece joints so tangents are single-valued.
        """
        cache = getattr(self, "_scan_cache", None)
        if cache is None:
            cache = self._scan_cache = {}
        if n not in cache:
            s = np.linspace(0.0, self.total_length, n, endpoint=False)
            nudge = 0.37 * self.total_length / n
            s = (s + nudge) % self.total_length
            pts, tang, nrm = self.frame_at_many(s)
            cache[n] = {"s": s, "X": pts, "T": tang, "N": nrm}
        return cache[n]

    def _joint_index(self, s):
        """Index of the piece starting at s, or None if s is not a joint."""
        s = float(s) % self.total_length
        tol = 1e-12 * max(self.total_length, 1.0)
        knots = np.concatenate([self.cumulative_lengths, [self.total_length]])
        k = int(np.argmin(np.abs(knots - s)))
        if abs(knots[k] - s) < tol:
            return k % len(self.pieces)
        return None

    def _is_joint(self, s):
        return self._joint_index(s) is not None

    def tangent_at(self, s, side=None):
        def raw(sv):
            i, t = self.piece_t(sv)
            v = self.pieces[i].velocity(t)
            return v / np.hypot(v[0], v[1])

        def at_end(i, which):
            pc = self.pieces[i]
            v = np.asarray(pc.velocity(pc.t1 if which == "end" else pc.t0), dtype=float)
            return v / np.hypot(v[0], v[1])

        return self._smooth_query(s, raw, at_end, side)

    def normal_at(self, s, side=None):
        try:
            return rot90(self.tangent_at(s, side=side))
        except JointPoint as exc:
            raise JointPoint(exc.s, rot90(exc.before), rot90(exc.after)) from None

    def curvature_at(self, s, side=None):
        def raw(sv):
            i, t = self.piece_t(sv)
            return float(self.pieces[i].curvature(t))

        def at_end(i, which):
            pc = self.pieces[i]
            return float(pc.curvature(pc.t1 if which == "end" else pc.t0))

        return self._smooth_query(s, raw, at_end, side, scalar=True)

    def _smooth_query(self, s, raw, at_end, side, scalar=False):
        k = self._joint_index(s)
        if k is None:
            if side in (None, "before", "after"):
                return raw(s % self.total_length)
            raise ValueError(f"side must be None, 'before' or 'after', got {side!r}")
        before = at_end((k - 1) % len(self.pieces), "end")
        after = at_end(k, "start")
        if side == "before":
            return before
        if side == "after":
            return after
        gap = abs(before - after) if scalar else float(np.hypot(*(before - after)))
        if gap > 1e-7:
            raise JointPoint(s % self.total_length, before, after)
        return after

    def normal_angle_at(self, s):
        n = self.normal_at(s)
        return norm_angle_02pi(math.atan2(n[1], n[0]))

    def sample_points(self, n):
        s = np.linspace(0.0, self.total_length, n, endpoint=False)
        return self.points_at(s)

    # -- normal-angle inversion -------------------------------------------------

    def find_by_normal_angle(self, beta):
        """The boundary point whose inward normal has angle beta in [0, 2pi).

        Returns (s, point).  On a straight segment the match is a whole
        interval: FlatMatch is raised with its endpoints.  If beta falls in
        the normal cone of a corner, the corner point is returned.
        """
        beta = norm_angle_02pi(beta)
        base = self._psi_start[0]
        target = base + (beta - base) % TWO_PI
        npieces = len(self.pieces)
        for k in range(npieces):
            lo, hi = self._psi_start[k], self._psi_end[k]
            if lo - 1e-12 <= target <= hi + 1e-12:
                pc = self.pieces[k]
                if isinstance(pc, Segment):
                    raise FlatMatch(
                        self.cumulative_lengths[k],
                        self.cumulative_lengths[k] + pc.length(),
                    )
                psi_local = pc.normal_angle(pc.t0) + (target - lo)
                t = pc.t_of_normal_angle(psi_local)
                s = self.cumulative_lengths[k] + pc.s_of_t(t)
                return float(s % self.total_length), self.point_at(s)
            nxt_lo = self._psi_start[(k + 1) % npieces] + (TWO_PI if k + 1 == npieces else 0.0)
            if hi < target < nxt_lo:
                # corner normal cone
                s = self.cumulative_lengths[(k + 1) % npieces] if k + 1 < npieces else 0.0
                return float(s), self.point_at(s)
        raise GeometryError(f"normal angle {beta} not located")  # pragma: no cover

    # -- membership / projection -------------------------------------------------

    def project(self, a):
        """Nearest boundary point: (distance, s, foot)."""
        a = np.asarray(a, dtype=float)
        best = None
        for i, pc in enumerate(self.pieces):
            dist, t = pc.project(a)
            if best is None or dist < best[0]:
                best = (dist, i, t)
        dist, i, t = best
        s = self.cumulative_lengths[i] + self.pieces[i].s_of_t(t)
        return float(dist), float(s % self.total_length), np.asarray(self.pieces[i].point(t), dtype=float)

    def project_many(self, pts):
        """Vectorized nearest boundary point: (distances, s values, feet)."""
        pts = np.asarray(pts, dtype=float)
        nd = len(pts)
        dists = np.full(nd, np.inf)
        s_out = np.zeros(nd)
        feet = np.zeros((nd, 2))
        for i, pc in enumerate(self.pieces):
            d, t = pc.project_many(pts)
            better = d < dists
            if better.any():
                dists[better] = d[better]
                tb = np.asarray(t)[better]
                s_out[better] = self.cumulative_lengths[i] + pc.s_of_t_many(tb)
                feet[better] = pc.point(tb)
        return dists, s_out % self.total_length, feet

    def signed_distance(self, a):
        """Distance to the boundary, negative inside, positive outside."""
        a = np.asarray(a, dtype=float)
        dist, s, foot = self.project(a)
        if dist == 0.0:
            return 0.0
        nb = self.tangent_at(s, side="before")
        na = self.tangent_at(s, side="after")
        n = rot90(unit(nb + na))
        sign = -1.0 if (a - foot) @ n > 0 else 1.0
        return sign * dist

    def is_inside(self, a):
        """Classify a point: 'inside', 'boundary', or 'outside'."""
        sd = self.signed_distance(a)
        if abs(sd) <= self.tol_bd:
            return "boundary"
        return "inside" if sd < 0 else "outside"

    def contains(self, a):
        return self.is_inside(a) != "outside"

    def inside_quick_mask(self, pts, margin=0.0):
        """Vectorized 'certainly inside' test via the polar chord bound.

        Conservative: True implies inside by at least `margin`; False says
        nothing (caller refines with project_many).
        """
        rel = pts - self.centroid
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        rad = np.hypot(rel[:, 0], rel[:, 1])
        j = np.searchsorted(self._polar_ang, ang)
        j0 = (j - 1) % len(self._polar_ang)
        j1 = j % len(self._polar_ang)
        rmin = np.minimum(self._polar_rad[j0], self._polar_rad[j1])
        # chord sag of the 2048-gon plus requested margin
        sag = (self.total_length / len(self._polar_ang)) ** 2
        return rad < rmin - sag - margin

    def signed_distance_many(self, pts):
        dists, s_vals, feet = self.project_many(pts)
        _pts, _tang, nrm = self.frame_at_many(s_vals)
        inward = np.einsum("ij,ij->i", pts - feet, nrm) > 0
        return np.where(inward, -dists, dists)

    # -- line intersection -------------------------------------------------------

    def line_boundary_intersections(self, line: LineRepr, nscan=720):
        """The two boundary hits of a line, ordered by the chord convention.

        Returns (s_P, s_Q) with (Q - P) . e2 > 0, falling back to
        (Q - P) . e1 > 0 for horizontal lines.  Raises NoIntersection or
        TangentLine when the line misses or merely grazes the domain.
        """
        m = line.m
        s_grid = np.linspace(0.0, self.total_length, nscan, endpoint=False)
        f = (self.points_at(s_grid) - line.anchor) @ m
        roots = []
        for k in range(nscan):
            f0, f1 = f[k], f[(k + 1) % nscan]
            if f0 == 0.0:
                roots.append(s_grid[k])
                continue
            if f0 * f1 < 0:
                lo, hi = s_grid[k], s_grid[k] + self.total_length / nscan
                flo = f0
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    fm = (self.point_at(mid) - line.anchor) @ m
                    if flo * fm <= 0:
                        hi = mid
                    else:
                        lo = mid
                        flo = fm
                    if hi - lo < self.tol_root:
                        break
                roots.append(0.5 * (lo + hi) % self.total_length)
        # merge duplicates
        roots = sorted(roots)
        merged = []
        for r in roots:
            if not merged or min(abs(r - merged[-1]), self.total_length - abs(r - merged[-1])) > 10 * self.tol_root:
                merged.append(r)
        if len(merged) > 2 and len(merged) % 2 == 0:
            merged = merged[:2] if False else merged  # pragma: no cover
        if len(merged) == 0:
            dmin = float(np.abs(f).min())
            if dmin < 100 * self.tol_bd:
                raise TangentLine("line grazes the boundary")
            raise NoIntersection("line misses the domain")
        if len(merged) == 1:
            raise TangentLine("line touches the boundary at one point")
        if len(merged) > 2:
            raise GeometryError(f"{len(merged)} boundary hits; domain not convex?")
        return self.order_chord_endpoints(merged[0], merged[1])

    def order_chord_endpoints(self, s_a, s_b):
        pa, pb = self.point_at(s_a), self.point_at(s_b)
        dy = pb[1] - pa[1]
        if abs(dy) > 1e-12 * self.diameter:
            return (s_a, s_b) if dy > 0 else (s_b, s_a)
        return (s_a, s_b) if pb[0] - pa[0] > 0 else (s_b, s_a)

    def line_hits_fast(self, line: LineRepr):
        """Closed-form intersections (same contract as the scanning routine)."""
        hits = []
        for i, pc in enumerate(self.pieces):
            for tl, t in pc.line_hits(line):
                s = self.cumulative_lengths[i] + pc.s_of_t(t)
                hits.append((tl, float(s % self.total_length)))
        merged = []
        for tl, s in sorted(hits):
            if not merged or abs(tl - merged[-1][0]) > 100 * self.tol_root:
                merged.append((tl, s))
        if len(merged) == 0:
            raise NoIntersection("line misses the domain")
        if len(merged) == 1:
            raise TangentLine("line touches the boundary at one point")
        if len(merged) > 2:
            # keep the extreme pair; interior duplicates come from joint hits
            merged = [merged[0], merged[-1]]
        return self.order_chord_endpoints(merged[0][1], merged[1][1])

    # -- transforms ----------------------------------------------------------------

    def mirrored_x(self):
        """The domain mapped under x -> -x (orientation preserved)."""
        new_pieces = [pc.mirrored_x() for pc in reversed(self.pieces)]
        return build_curve(new_pieces)

    def mirror_s(self, s):
        """Arclength on mirrored_x() of the image of the point at s here."""
        i, s_loc = self._locate(s)
        n = len(self.pieces)
        li = self.pieces[i].length()
        # piece i maps to mirrored piece n-1-i with its parameter reversed
        lengths = np.diff(self.cumulative_lengths, append=self.total_length)
        cum_m = np.concatenate([[0.0], np.cumsum(lengths[::-1])])
        return float((cum_m[n - 1 - i] + (li - s_loc)) % self.total_length)

    def arc_contains(self, s_lo, s_hi, s):
        """Is s on the counterclockwise arc from s_lo to s_hi?"""
        span = (s_hi - s_lo) % self.total_length
        off = (s - s_lo) % self.total_length
        return off <= span + 1e-12 * self.total_length

    def arc_length_between(self, s_lo, s_hi):
        return (s_hi - s_lo) % self.total_length

    # -- serialization ----------------------------------------------------------------

    def to_json_obj(self, alpha=None):
        obj = {"pieces": [pc.to_json() for pc in self.pieces]}
        if alpha is not None:
            obj["alpha"] = float(alpha)
        return obj


def build_curve(pieces, tol_close=None, tol_convex=TOL_CONVEX):
    """Validate a piece chain and assemble the curve.

    Checks closure (cyclic endpoint matching), counterclockwise convexity
    (sampled tangent cross products plus total turning), and nondegeneracy.
    """
    if not pieces:
        raise DegeneratePiece("empty piece list")
    lengths = []
    for k, pc in enumerate(pieces):
        ell = pc.length()
        if not np.isfinite(ell) or ell <= 0:
            raise DegeneratePiece(f"piece {k} has length {ell}")
        lengths.append(ell)
    total = float(np.sum(lengths))
    scale = max(total, 1e-12)
    tol_c = (TOL_CLOSE_REL * scale) if tol_close is None else tol_close
    for k, pc in enumerate(pieces):
        nxt = pieces[(k + 1) % len(pieces)]
        gap = np.hypot(*(np.asarray(pc.point(pc.t1)) - np.asarray(nxt.point(nxt.t0))))
        if gap > tol_c:
            raise NotClosed(f"gap {gap:.3g} between piece {k} and piece {(k + 1) % len(pieces)}")
    cum = np.concatenate([[0.0], np.cumsum(lengths)])[:-1]
    curve = object.__new__(BoundaryCurve)
    curve.pieces = list(pieces)
    curve.cumulative_lengths = cum
    curve.total_length = total
    # convexity: sampled cross products of successive tangents
    nchk = 1024
    s = np.linspace(0.0, total, nchk, endpoint=False)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(pieces) - 1)
    tang = np.empty((nchk, 2))
    for i, pc in enumerate(pieces):
        mask = idx == i
        if not mask.any():
            continue
        ts = np.array([pc.t_of_s(sv - cum[i]) for sv in s[mask]])
        v = pc.velocity(ts)
        tang[mask] = v / np.hypot(v[:, 0], v[:, 1])[:, None]
    cross = tang[:, 0] * np.roll(tang[:, 1], -1) - tang[:, 1] * np.roll(tang[:, 0], -1)
    if cross.min() < -tol_convex:
        raise NotConvex(f"negative turning {cross.min():.3g} detected")
    curve._init_geometry_cache()  # raises NotConvex on reflex corners / bad total turn
    return curve


# ---------------------------------------------------------------------------
# Corner smoothing
# ---------------------------------------------------------------------------


def _corner_indices(curve, angle_tol=1e-7):
    out = []
    n = len(curve.pieces)
    for k in range(n):
        pc = curve.pieces[k]
        nxt = curve.pieces[(k + 1) % n]
        v1 = unit(np.asarray(pc.velocity(pc.t1), dtype=float))
        v2 = unit(np.asarray(nxt.velocity(nxt.t0), dtype=float))
        ang = math.atan2(v1[0] * v2[1] - v1[1] * v2[0], float(v1 @ v2))
        if abs(ang) > angle_tol:
            out.append((k, ang))
    return out


def fillet_smooth(curve, rho):
    """Round every non-smooth corner with an inscribed tangent circular arc.

    The result is C^1, convex, and contained in the input domain; it tends to
    the input in Hausdorff distance as rho -> 0.
    """
    rho = float(rho)
    shortest = min(pc.length() for pc in curve.pieces)
    if rho <= 0 or rho >= 0.5 * shortest:
        raise RhoTooLarge(f"rho={rho} vs shortest piece {shortest}")
    corners = _corner_indices(curve)
    if not corners:
        return curve
    pieces = list(curve.pieces)
    n = len(pieces)
    # walk corners and record (piece index, trim t, fillet arc) updates
    trims_end = {}
    trims_start = {}
    fillets_after = {}
    for k, _turn in corners:
        pa = pieces[k]
        pb = pieces[(k + 1) % n]

        def center_from(delta, pa=pa):
            s_loc = pa.length() - delta
            t = pa.t_of_s(s_loc)
            pt = np.asarray(pa.point(t), dtype=float)
            v = unit(np.asarray(pa.velocity(t), dtype=float))
            return pt + rho * rot90(v), t

        def gap(delta, pb=pb):
            z, _ = center_from(delta)
            dist, _t = pb.project(z)
            return dist - rho

        lo, hi = 1e-9 * pa.length(), min(0.9 * pa.length(), 20 * rho)
        glo, ghi = gap(lo), gap(hi)
        if glo > 0 or ghi < 0:
            raise RhoTooLarge(f"no tangent fillet of radius {rho} fits at corner after piece {k}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = gap(mid)
            if glo * gm <= 0:
                hi = mid
                ghi = gm
            else:
                lo = mid
                glo = gm
            if hi - lo < 1e-14 * pa.length():
                break
        delta = 0.5 * (lo + hi)
        z, t_a = center_from(delta)
        _dist, t_b = pb.project(z)
        if not (pb.t0 + 1e-12 < t_b < pb.t1 - 1e-12):
            raise RhoTooLarge(f"fillet foot leaves piece {(k + 1) % n}")
        foot_a = np.asarray(pa.point(t_a), dtype=float)
        foot_b = np.asarray(pb.point(t_b), dtype=float)
        a0 = math.atan2(foot_a[1] - z[1], foot_a[0] - z[0])
        a1 = math.atan2(foot_b[1] - z[1], foot_b[0] - z[0])
        a1 = a0 + (a1 - a0) % TWO_PI
        if a1 - a0 > math.pi:
            raise RhoTooLarge("fillet arc would exceed a half turn")
        trims_end[k] = t_a
        trims_start[(k + 1) % n] = t_b
        fillets_after[k] = CircleArc(z, rho, a0, a1)
    new_pieces = []
    for k in range(n):
        pc = pieces[k].truncated(trims_start.get(k), trims_end.get(k))
        new_pieces.append(pc)
        if k in fillets_after:
            new_pieces.append(fillets_after[k])
    return build_curve(new_pieces)


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------


def piece_from_json(obj):
    kind = obj["kind"]
    if kind == "circle_arc":
        return CircleArc(obj["center"], obj["radius"], obj["from"], obj["to"])
    if kind == "ellipse_arc":
        a, b = obj["semi_axes"]
        return EllipseArc(obj["center"], a, b, obj["from"], obj["to"])
    if kind == "segment":
        return Segment(obj["from"], obj["to"])
    raise GeometryError(f"unknown piece kind {kind!r}")


def curve_from_json(obj):
    """Build a curve (and read alpha if present) from a domain-spec object.

    Accepts a dict or a JSON string; returns (curve, alpha_or_None).
    """
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    pieces = [piece_from_json(p) for p in obj["pieces"]]
    return build_curve(pieces), obj.get("alpha")


def curve_to_json(curve, alpha=None, indent=None):
    return json.dumps(curve.to_json_obj(alpha=alpha), indent=indent)
