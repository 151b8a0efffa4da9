"""Gaps of arbitrary shape between planar electrodes.

Each gap is described by its centre curve gamma(t), given as samples, with a
width g(t). The left normal e(t) (the tangent rotated by +90 degrees) points
into the electrode named ``electrode``; the other side belongs to ``other``
(ground when omitted). Inside the gap, at signed distance u from the centre,

    phi = V_other + (V_electrode - V_other) phi_gap(u) + alpha(t) phi_pol(u)

with alpha(t) a cubic spline through per-sample amplitudes. The amplitudes
are found by requiring zero charge at every sample on the gap centres.

The charge at a gap centre uses the square split of the charge integral:
a Taylor term for a tiny square around the point plus the remaining plane
in polar coordinates about the point. Every ray is cut where it crosses a
gap edge; electrode stretches are integrated exactly and gap stretches with
fixed Gauss rules, so the charge is an exactly affine function of the
amplitudes and the nulling conditions form a dense linear system.

Curves whose first and last samples coincide are closed (periodic splines);
open curves continue as straight lines beyond their end samples, with g and
alpha frozen at the end values. Junctions between gaps are not supported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import ConfigurationError, ConvergenceError, DomainError, GeometryError
from .gap1d import phi_gap, phi_pol
from .kernel import SurfacePotential

__all__ = [
    "GapCurve",
    "GapSusceptibilityModel",
    "SolverSettings",
    "GapSolution",
    "gap_local_potential",
    "assemble_plane_potential",
    "plane_potential",
    "center_sigma",
    "sigma_at",
    "solve_alphas",
    "apply_susceptibility",
    "circle_curve",
    "line_curve",
]

_ASINH1 = math.asinh(1.0)


@dataclass(frozen=True, eq=False)
class GapCurve:
    """Sampled gap centre curve with widths and (optionally) solved amplitudes.

    For closed curves ``alpha`` has one entry per distinct sample (the
    repeated closing sample is dropped).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    g: np.ndarray
    electrode: str = "rf"
    other: Optional[str] = None
    alpha: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        arrs = {}
        for key in ("t", "x", "y", "g"):
            a = np.asarray(getattr(self, key), dtype=float).ravel()
            arrs[key] = a
        n = arrs["t"].size
        if any(a.size != n for a in arrs.values()):
            raise GeometryError(f"curve {self.name!r}: t, x, y, g must have equal length")
        if n < 2:
            raise GeometryError(f"curve {self.name!r}: need at least two samples")
        if not np.all(np.diff(arrs["t"]) > 0):
            raise GeometryError(f"curve {self.name!r}: t must increase strictly")
        if not np.all(arrs["g"] > 0) or not np.all(np.isfinite(arrs["g"])):
            raise GeometryError(f"curve {self.name!r}: gap widths must be positive")
        for key, a in arrs.items():
            object.__setattr__(self, key, a)
        if self.closed:
            if n < 4:
                raise GeometryError(f"closed curve {self.name!r} needs at least 3 distinct samples")
            if abs(arrs["g"][-1] - arrs["g"][0]) > 1e-12 * arrs["g"][0]:
                raise GeometryError(f"closed curve {self.name!r}: g differs at the closing sample")
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float).ravel()
            if a.size != self.n_unknowns:
                raise GeometryError(
                    f"curve {self.name!r}: expected {self.n_unknowns} amplitudes, got {a.size}"
                )
            object.__setattr__(self, "alpha", a)

    @property
    def closed(self):
        scale = max(np.ptp(self.x), np.ptp(self.y), float(np.max(self.g)))
        return bool(math.hypot(self.x[-1] - self.x[0], self.y[-1] - self.y[0]) <= 1e-12 * scale)

    @property
    def n_unknowns(self):
        return self.t.size - (1 if self.closed else 0)

    def with_alpha(self, alpha):
        return replace(self, alpha=np.asarray(alpha, dtype=float))


@dataclass(frozen=True)
class GapSusceptibilityModel:
    """Global scalar applied to all polarization amplitudes (0.5 emulates thick electrodes)."""

    multiplier: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.multiplier <= 1.5):
            raise DomainError(f"multiplier must lie in (0, 1.5], got {self.multiplier}")


@dataclass(frozen=True)
class SolverSettings:
    """Fixed quadrature orders for the gap-centre charge rule."""

    n_theta: int = 16
    n_radial: int = 16
    max_panel: float = math.pi / 8.0
    dense: int = 16
    curvature_warn: float = 0.2
    max_condition: float = 1e12


DEFAULT_SETTINGS = SolverSettings()


@dataclass
class GapSolution:
    curves: List[GapCurve]
    residual: float
    condition: float
    warnings: List[str] = field(default_factory=list)


def circle_curve(R, g, n=24, center=(0.0, 0.0), clockwise=False, electrode="rf", other=None, name=""):
    """Closed circular gap curve with n distinct samples; t is the polar angle."""
    t = np.linspace(0.0, 2.0 * math.pi, n + 1)
    sgn = -1.0 if clockwise else 1.0
    x = center[0] + R * np.cos(sgn * t)
    y = center[1] + R * np.sin(sgn * t)
    x[-1], y[-1] = x[0], y[0]
    return GapCurve(t, x, y, np.full(n + 1, float(g)), electrode, other, name=name)


def line_curve(p0, p1, g, n=8, electrode="rf", other=None, name=""):
    """Straight open curve from p0 to p1 (continued beyond both ends)."""
    t = np.linspace(0.0, 1.0, n)
    x = p0[0] + (p1[0] - p0[0]) * t
    y = p0[1] + (p1[1] - p0[1]) * t
    return GapCurve(t, x, y, np.full(n, float(g)), electrode, other, name=name)


def _rot(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class _CurveModel:
    """Spline geometry of one curve, with straight continuation for open curves."""

    def __init__(self, curve: GapCurve, offset: int, dense: int):
        self.curve = curve
        self.offset = offset
        self.closed = curve.closed
        t = curve.t
        self.t0, self.t1 = float(t[0]), float(t[-1])
        self.period = self.t1 - self.t0
        xy = np.stack([curve.x, curve.y], axis=1)
        g = curve.g.copy()
        nb = curve.n_unknowns
        eye = np.eye(nb)
        if self.closed:
            xy[-1] = xy[0]
            g[-1] = g[0]
            eye = np.vstack([eye, eye[:1]])
            bc_pos = bc_g = bc_a = "periodic"
        else:
            bc_pos, bc_g, bc_a = "natural", "clamped", "clamped"
        self.pos = CubicSpline(t, xy, bc_type=bc_pos)
        self.gs = CubicSpline(t, g, bc_type=bc_g)
        self.basis = CubicSpline(t, eye, bc_type=bc_a)
        self.n = nb
        sub = np.linspace(0.0, 1.0, dense + 1)[:-1]
        td = (t[:-1, None] + np.diff(t)[:, None] * sub[None, :]).ravel()
        if not self.closed:
            td = np.append(td, t[-1])
        self.td = td
        self.h = float(np.min(np.diff(t))) / dense
        self.tree = cKDTree(self.position(td))
        self.gmax = float(np.max(g))
        self.scale = max(float(np.ptp(xy[:, 0])), float(np.ptp(xy[:, 1])), self.gmax)

    # --- evaluation with wrap-around or straight continuation ---

    def wrap(self, t):
        if self.closed:
            return self.t0 + np.mod(t - self.t0, self.period)
        return t

    def position(self, t, nu=0):
        t = np.asarray(t, dtype=float)
        if self.closed:
            return self.pos(self.wrap(t), nu)
        tc = np.clip(t, self.t0, self.t1)
        out = self.pos(tc, nu)
        lo, hi = t < self.t0, t > self.t1
        if np.any(lo) or np.any(hi):
            for mask, te in ((lo, self.t0), (hi, self.t1)):
                if not np.any(mask):
                    continue
                if nu == 0:
                    out[mask] = self.pos(te) + (t[mask] - te)[:, None] * self.pos(te, 1)
                elif nu == 1:
                    out[mask] = self.pos(te, 1)
                else:
                    out[mask] = 0.0
        return out

    def _frozen(self, spline, t, nu):
        t = np.asarray(t, dtype=float)
        if self.closed:
            return spline(self.wrap(t), nu)
        tc = np.clip(t, self.t0, self.t1)
        out = spline(tc, nu)
        if nu > 0:
            outside = (t < self.t0) | (t > self.t1)
            out[outside] = 0.0
        return out

    def width(self, t, nu=0):
        return self._frozen(self.gs, t, nu)

    def amp_basis(self, t, nu=0):
        return self._frozen(self.basis, t, nu)

    def frame(self, t):
        d1 = self.position(t, 1)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        T = d1 / speed[..., None]
        return T, _rot(T), speed

    def curvature(self, t):
        d1 = self.position(t, 1)
        d2 = self.position(t, 2)
        return _cross(d1, d2) / np.hypot(d1[..., 0], d1[..., 1]) ** 3

    def offset_point(self, t, sgn):
        _, e, _ = self.frame(t)
        return self.position(t) + (0.5 * sgn * self.width(t))[..., None] * e

    def offset_deriv(self, t, sgn):
        d1 = self.position(t, 1)
        d2 = self.position(t, 2)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        T = d1 / speed[..., None]
        e = _rot(T)
        dT = (d2 - T * np.sum(T * d2, axis=-1)[..., None]) / speed[..., None]
        de = _rot(dT)
        g = self.width(t)
        dg = self.width(t, 1)
        return d1 + 0.5 * sgn * (dg[..., None] * e + g[..., None] * de)

    def project(self, q, t=None, iters=30):
        """Foot point parameter and signed normal distance u of points q."""
        q = np.atleast_2d(q)
        if t is None:
            _, idx = self.tree.query(q)
            t = self.td[idx]
        t = np.array(t, dtype=float)
        for _ in range(iters):
            P = self.position(t)
            d1 = self.position(t, 1)
            d2 = self.position(t, 2)
            r = P - q
            F = np.sum(r * d1, axis=1)
            dF = np.sum(d1 * d1, axis=1) + np.sum(r * d2, axis=1)
            dF = np.where(dF > 0, dF, np.sum(d1 * d1, axis=1))
            step = -F / dF
            new = t + step
            if self.closed:
                step = np.clip(step, -4 * self.h, 4 * self.h)
            else:
                # the straight continuation is linear in t, so big outward steps are exact
                inside = (new >= self.t0) & (new <= self.t1)
                step = np.where(inside, np.clip(step, -4 * self.h, 4 * self.h), step)
            t = t + step
            if np.all(np.abs(step) <= 1e-13 * max(1.0, abs(self.period))):
                break
        t = self.wrap(t)
        _, e, _ = self.frame(t)
        u = np.sum((q - self.position(t)) * e, axis=1)
        return t, u

    def dense_offsets(self, sgn):
        td = self.td
        if self.closed:
            td = np.append(td, self.t0 + self.period)
        return td, self.offset_point(td, sgn)

    def end_lines(self, sgn):
        """(anchor, outward direction) of the straight offset continuations."""
        if self.closed:
            return []
        out = []
        for te, s in ((self.t0, -1.0), (self.t1, 1.0)):
            T, _, _ = self.frame(np.array([te]))
            out.append((self.offset_point(np.array([te]), sgn)[0], s * T[0]))
        return out


class _Plane:
    """All curves plus electrode potentials; evaluates phi and its affine form."""

    def __init__(self, electrodes: Dict[str, float], curves: Sequence[GapCurve], settings=DEFAULT_SETTINGS):
        if not curves:
            raise GeometryError("at least one gap curve is required")
        self.electrodes = {str(k): float(v) for k, v in electrodes.items()}
        self.settings = settings
        self.models = []
        off = 0
        for c in curves:
            for lab in (c.electrode, c.other):
                if lab is not None and lab not in self.electrodes:
                    raise ConfigurationError(f"curve {c.name!r}: unknown electrode label {lab!r}")
            m = _CurveModel(c, off, settings.dense)
            self.models.append(m)
            off += m.n
        self.n_unknowns = off
        self.scale = max(m.scale for m in self.models)

    def side_values(self, ci):
        c = self.models[ci].curve
        v_el = self.electrodes[c.electrode]
        v_ot = 0.0 if c.other is None else self.electrodes[c.other]
        return v_el, v_ot

    def alpha_vector(self):
        out = np.zeros(self.n_unknowns)
        for m in self.models:
            if m.curve.alpha is not None:
                out[m.offset:m.offset + m.n] = m.curve.alpha
        return out

    # --- point classification ---

    def locate(self, q):
        """Nearest curve index, foot parameter and signed distance for points q."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        best = np.full(len(q), np.inf)
        ci = np.zeros(len(q), dtype=int)
        tt = np.zeros(len(q))
        uu = np.zeros(len(q))
        for k, m in enumerate(self.models):
            t, u = m.project(q)
            dist = np.hypot(*(q - m.position(t)).T)
            better = dist < best
            best = np.where(better, dist, best)
            ci = np.where(better, k, ci)
            tt = np.where(better, t, tt)
            uu = np.where(better, u, uu)
        return ci, tt, uu

    def affine_values(self, ci, t, u):
        """base values and per-point (curve, coefficient-weight) pairs.

        Returns base (n,), in_gap mask, polarization weight phi_pol(u) (n,).
        """
        base = np.empty(len(ci))
        pol = np.zeros(len(ci))
        in_gap = np.zeros(len(ci), dtype=bool)
        for k, m in enumerate(self.models):
            sel = ci == k
            if not np.any(sel):
                continue
            v_el, v_ot = self.side_values(k)
            g = m.width(t[sel])
            uk = u[sel]
            gap = np.abs(uk) < 0.5 * g
            b = np.where(uk > 0, v_el, v_ot).astype(float)
            if np.any(gap):
                ug = np.clip(uk[gap], -0.5 * g[gap], 0.5 * g[gap])
                b[gap] = v_ot + (v_el - v_ot) * phi_gap_vec(ug, g[gap])
                p = np.zeros(sel.sum())
                p[gap] = phi_pol_vec(ug, g[gap])
                pol[sel] = p
            base[sel] = b
            in_gap[sel] = gap
        return base, in_gap, pol

    def evaluate(self, q, alpha=None):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        alpha = self.alpha_vector() if alpha is None else alpha
        ci, t, u = self.locate(q)
        base, in_gap, pol = self.affine_values(ci, t, u)
        out = base.copy()
        for k, m in enumerate(self.models):
            sel = (ci == k) & in_gap
            if np.any(sel):
                out[sel] += pol[sel] * (m.amp_basis(t[sel]) @ alpha[m.offset:m.offset + m.n])
        return out

    # --- ray crossings ---

    def crossings(self, p, D):
        """Signed distances along the lines p + rho D where gap edges are crossed.

        Returns a list (one per direction) of 1D arrays of signed rho.
        """
        R = len(D)
        hits = [[] for _ in range(R)]
        for m in self.models:
            for sgn in (1.0, -1.0):
                td, O = m.dense_offsets(sgn)
                rel = O - p
                cr = D[:, 0, None] * rel[None, :, 1] - D[:, 1, None] * rel[None, :, 0]
                s = cr >= 0
                rr, jj = np.nonzero(s[:, :-1] != s[:, 1:])
                if rr.size:
                    lo = td[jj].copy()
                    hi = td[jj + 1].copy()
                    flo = cr[rr, jj]
                    Dr = D[rr]
                    for _ in range(48):
                        mid = 0.5 * (lo + hi)
                        fm = _cross(Dr, m.offset_point(mid, sgn) - p)
                        same = (fm >= 0) == (flo >= 0)
                        lo = np.where(same, mid, lo)
                        flo = np.where(same, fm, flo)
                        hi = np.where(same, hi, mid)
                    tm = 0.5 * (lo + hi)
                    rho = np.sum((m.offset_point(tm, sgn) - p) * Dr, axis=1)
                    for r_, rho_ in zip(rr, rho):
                        hits[r_].append(rho_)
                for A, T in m.end_lines(sgn):
                    den = _cross(D, T)
                    ok = np.abs(den) > 1e-14
                    rel = A - p
                    with np.errstate(divide="ignore", invalid="ignore"):
                        rho = _cross(rel, T) / den
                        sp = _cross(rel, D) / den
                    for r_ in np.nonzero(ok & (sp > 0))[0]:
                        hits[r_].append(rho[r_])
        return [np.sort(np.array(h)) for h in hits]

    def tangent_angles(self, p):
        """Directions (angles in [0, 2 pi)) from p tangent to any gap edge."""
        out = []
        for m in self.models:
            for sgn in (1.0, -1.0):
                td, O = m.dense_offsets(sgn)
                dO = m.offset_deriv(td, sgn)
                h = _cross(O - p, dO)
                s = h >= 0
                jj = np.nonzero(s[:-1] != s[1:])[0]
                if jj.size:
                    lo, hi = td[jj].copy(), td[jj + 1].copy()
                    flo = h[jj]
                    for _ in range(48):
                        mid = 0.5 * (lo + hi)
                        fm = _cross(m.offset_point(mid, sgn) - p, m.offset_deriv(mid, sgn))
                        same = (fm >= 0) == (flo >= 0)
                        lo = np.where(same, mid, lo)
                        flo = np.where(same, fm, flo)
                        hi = np.where(same, hi, mid)
                    P = m.offset_point(0.5 * (lo + hi), sgn) - p
                    out.extend(np.arctan2(P[:, 1], P[:, 0]).tolist())
                for _, T in m.end_lines(sgn):
                    out.append(math.atan2(T[1], T[0]))
        return [a % (2.0 * math.pi) for a in out]


def phi_gap_vec(u, g):
    s = np.clip(2.0 * u / g, -1.0, 1.0)
    return 0.5 + np.arcsin(s) / np.pi


def phi_pol_vec(u, g):
    s = 2.0 * u / g
    return np.sqrt(np.clip(1.0 - s * s, 0.0, None))


def _graded(n):
    """Gauss-Legendre on [0, 1] after x = (1 - cos(pi s)) / 2 (clusters at both ends)."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    return 0.5 * (1.0 - np.cos(np.pi * s)), ws * 0.5 * np.pi * np.sin(np.pi * s)


def _sigma_form(plane: _Plane, p, home, d=None):
    """Affine form (base, coef) of sigma/eps0 at point p.

    ``home`` is (curve index, t) when p is a gap centre, or None when p lies
    on an electrode. sigma = base + coef @ alpha.
    """
    st = plane.settings
    n_unk = plane.n_unknowns
    coef = np.zeros(n_unk)
    base = 0.0
    p = np.asarray(p, dtype=float)
    if home is not None:
        ci, tp = home
        m = plane.models[ci]
        tpa = np.array([tp])
        T, e, speed = m.frame(tpa)
        T, e, speed = T[0], e[0], float(speed[0])
        gp = float(m.width(tpa)[0])
        v_el, v_ot = plane.side_values(ci)
        dv = v_el - v_ot
        N0 = m.amp_basis(tpa)[0]
        cols = slice(m.offset, m.offset + m.n)
        phi_p_base = v_ot + 0.5 * dv
        phi_p_coef = np.zeros(n_unk)
        phi_p_coef[cols] = N0
        if d is None:
            d = 1e-3 * gp
        # Taylor term of the square: 2 d asinh(1) lap(phi) at the gap centre
        k = float(m.curvature(tpa)[0])
        d1 = m.position(tpa, 1)[0]
        d2 = m.position(tpa, 2)[0]
        N1 = m.amp_basis(tpa, 1)[0]
        N2 = m.amp_basis(tpa, 2)[0]
        Nss = N2 / speed ** 2 - float(np.dot(d1, d2)) / speed ** 4 * N1
        lap_coef = np.zeros(n_unk)
        lap_coef[cols] = -4.0 / gp ** 2 * N0 + Nss
        lap_base = -k * dv * 2.0 / (math.pi * gp)
        base += 2.0 * d * _ASINH1 * lap_base
        coef += 2.0 * d * _ASINH1 * lap_coef
        frame_angle = math.atan2(T[1], T[0])
    else:
        ci = None
        v = plane.evaluate(p[None, :], np.zeros(n_unk))[0]
        phi_p_base = v
        phi_p_coef = np.zeros(n_unk)
        if d is None:
            d = 1e-3 * min(m.gmax for m in plane.models)
        frame_angle = 0.0

    # theta panels in the local frame, broken at octants and tangent directions
    brk = {0.0, math.pi}
    for kq in (1, 2, 3):
        brk.add(kq * math.pi / 4.0)
    for a in plane.tangent_angles(p):
        brk.add((a - frame_angle) % math.pi)
    brk = np.array(sorted(brk))
    brk = brk[np.concatenate([[True], np.diff(brk) > 1e-10])]
    if brk[-1] < math.pi - 1e-10:
        brk = np.append(brk, math.pi)
    else:
        brk[-1] = math.pi
    edges = [brk[0]]
    for a, b in zip(brk[:-1], brk[1:]):
        npan = max(1, int(math.ceil((b - a) / st.max_panel)))
        edges.extend(np.linspace(a, b, npan + 1)[1:].tolist())
    edges = np.array(edges)
    xs, ws = _graded(st.n_theta)
    th = (edges[:-1, None] + np.diff(edges)[:, None] * xs[None, :]).ravel()
    wth = (np.diff(edges)[:, None] * ws[None, :]).ravel()
    ang = th + frame_angle
    D = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rb = d / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
    hits = plane.crossings(p, D)

    xr, wr = _graded(st.n_radial)
    # accumulated quadrature of phi over gap nodes: points, weights, curve hint
    pts, wts = [], []
    phi_p_weight = 0.0
    seg_mid, seg_w, seg_a, seg_b = [], [], [], []
    for r in range(len(D)):
        h = hits[r]
        plus = h[h > 0]
        minus = -h[h < 0][::-1]
        w_th = wth[r]
        if home is not None:
            rho0 = min(plus[0] if plus.size else np.inf, minus[0] if minus.size else np.inf)
            if not np.isfinite(rho0):
                raise GeometryError("a ray from a gap centre never leaves its gap")
            rho0 = max(rho0, rb[r])
            rq = rb[r] + (rho0 - rb[r]) * xr
            wq = (rho0 - rb[r]) * wr / rq ** 2 * w_th
            for sgn in (1.0, -1.0):
                pts.append(p + sgn * rq[:, None] * D[r])
                wts.append(wq)
            phi_p_weight -= 2.0 * wq.sum()
            start = rho0
        else:
            start = rb[r]
        for sgn, cs in ((1.0, plus), (-1.0, minus)):
            bnds = [start] + [c for c in cs if c > start * (1.0 + 1e-12)] + [np.inf]
            for a, b in zip(bnds[:-1], bnds[1:]):
                mid = 2.0 * a + plane.scale if not np.isfinite(b) else 0.5 * (a + b)
                seg_mid.append(p + sgn * mid * D[r])
                seg_w.append(w_th)
                seg_a.append(a)
                seg_b.append((b, sgn, r))
    # classify every segment by its midpoint
    seg_mid = np.array(seg_mid)
    ci_s, t_s, u_s = plane.locate(seg_mid)
    g_s = np.empty(len(seg_mid))
    for k, m in enumerate(plane.models):
        sel = ci_s == k
        if np.any(sel):
            g_s[sel] = m.width(t_s[sel])
    in_gap = np.abs(u_s) < 0.5 * g_s
    for idx in range(len(seg_mid)):
        a = seg_a[idx]
        b, sgn, r = seg_b[idx]
        w_th = seg_w[idx]
        inv = 1.0 / a - (0.0 if not np.isfinite(b) else 1.0 / b)
        phi_p_weight -= w_th * inv
        if not in_gap[idx]:
            v_el, v_ot = plane.side_values(ci_s[idx])
            base += w_th * inv * (v_el if u_s[idx] > 0 else v_ot)
            continue
        # gap stretch: integrate phi dw with w = 1/rho
        w_lo = 0.0 if not np.isfinite(b) else 1.0 / b
        w_hi = 1.0 / a
        wq = w_lo + (w_hi - w_lo) * xr
        pts.append(p + sgn * (1.0 / wq)[:, None] * D[r])
        wts.append((w_hi - w_lo) * wr * w_th)
    if pts:
        P = np.concatenate(pts)
        W = np.concatenate(wts)
        ci_q, t_q, u_q = plane.locate(P)
        b_q, gap_q, pol_q = plane.affine_values(ci_q, t_q, u_q)
        base += float(np.dot(W, b_q))
        for k, m in enumerate(plane.models):
            sel = (ci_q == k) & gap_q
            if np.any(sel):
                coef[m.offset:m.offset + m.n] += (W[sel] * pol_q[sel]) @ m.amp_basis(t_q[sel])
    base += phi_p_weight * phi_p_base
    coef += phi_p_weight * phi_p_coef
    return -base / math.pi, -coef / math.pi


def _centers(plane):
    out = []
    for k, m in enumerate(plane.models):
        ts = m.curve.t[: m.n]
        P = m.position(ts)
        for t, p in zip(ts, P):
            out.append((k, float(t), p))
    return out


def _check_geometry(plane: _Plane):
    msgs = []
    st = plane.settings
    for k, m in enumerate(plane.models):
        ts = m.curve.t[: m.n]
        kap = np.abs(m.curvature(ts))
        g = m.width(ts)
        bad = np.nonzero(kap * g > st.curvature_warn)[0]
        if bad.size:
            i = bad[np.argmax((kap * g)[bad])]
            msgs.append(
                f"curve {m.curve.name!r}: g times curvature exceeds {st.curvature_warn:g} at "
                f"{bad.size} of {ts.size} samples (worst at t={ts[i]:.6g}: radius of curvature "
                f"{1.0 / kap[i]:.3g}, g={g[i]:.3g})"
            )
    # bands of different curves must not touch
    for a in range(len(plane.models)):
        for b in range(a + 1, len(plane.models)):
            ma, mb = plane.models[a], plane.models[b]
            Pa = ma.position(ma.td)
            dist, idx = mb.tree.query(Pa)
            need = 0.5 * (ma.width(ma.td) + mb.width(mb.td[idx]))
            if np.any(dist <= need):
                i = int(np.argmin(dist - need))
                raise GeometryError(
                    f"gaps {ma.curve.name!r} and {mb.curve.name!r} touch near t={ma.td[i]:.6g}; "
                    "gap junctions are not supported"
                )
    return msgs


def _check_edges(plane: _Plane, tol=1e-12):
    """Every electrode region must carry a single potential."""
    for k, m in enumerate(plane.models):
        ts = m.curve.t[: m.n]
        v_el, v_ot = plane.side_values(k)
        for t in ts:
            ta = np.array([t])
            p = m.position(ta)[0]
            _, e, _ = m.frame(ta)
            hits = plane.crossings(p, e)[0]
            for sgn, mine in ((1.0, v_el), (-1.0, v_ot)):
                far = np.sort(sgn * hits[sgn * hits > 0])
                if far.size < 2:
                    continue
                mid = p + sgn * 0.5 * (far[0] + far[1]) * e[0]
                # the point between this gap and the next one along the normal
                ci, tq, uq = plane.locate(mid[None, :])
                base, in_gap, _ = plane.affine_values(ci, tq, uq)
                if in_gap[0]:
                    continue
                for j, mm in enumerate(plane.models):
                    tj, uj = mm.project(mid[None, :])
                    if j == k:
                        continue
                    dist = np.hypot(*(mid - mm.position(tj)[0]))
                    if dist <= 0.5 * (far[1] - far[0]) + 0.5 * mm.gmax + 1e-9 * plane.scale:
                        ve, vo = plane.side_values(j)
                        theirs = ve if uj[0] > 0 else vo
                        if abs(theirs - mine) > tol * max(1.0, abs(mine)):
                            raise GeometryError(
                                f"curve {m.curve.name!r} at t={t:.6g}: electrode potential "
                                f"{mine} on its {'electrode' if sgn > 0 else 'other'} side "
                                f"disagrees with {theirs} from curve {mm.curve.name!r}"
                            )


def gap_local_potential(t, u, curve: GapCurve, electrodes: Optional[Dict[str, float]] = None):
    """In-gap potential at parameter t and signed distance u (|u| <= g(t)/2).

    Without ``electrodes`` the electrode side is at 1 and the other side at 0.
    alpha(t) comes from the spline through ``curve.alpha`` (zero if unsolved).
    """
    m = _CurveModel(curve, 0, 2)
    ta = np.array([float(t)])
    g = float(m.width(ta)[0])
    if abs(u) > 0.5 * g * (1.0 + 1e-12):
        raise DomainError(f"|u| = {abs(u)} lies outside the gap half-width {0.5 * g}")
    if electrodes is None:
        v_el, v_ot = 1.0, 0.0
    else:
        v_el = float(electrodes[curve.electrode])
        v_ot = 0.0 if curve.other is None else float(electrodes[curve.other])
    a = 0.0 if curve.alpha is None else float(m.amp_basis(ta)[0] @ curve.alpha)
    u = max(-0.5 * g, min(0.5 * g, float(u)))
    return v_ot + (v_el - v_ot) * phi_gap(u, g) + a * phi_pol(u, g)


def assemble_plane_potential(electrodes: Dict[str, float], curves: Sequence[GapCurve],
                             settings: SolverSettings = DEFAULT_SETTINGS, check=True):
    """In-plane potential of the whole electrode plane as a SurfacePotential.

    The support is finite (bounding box of the gaps) when every curve is
    closed and the unbounded region is at zero; otherwise it is left
    infinite, which still allows charge evaluations but not propagation.
    """
    plane = _Plane(electrodes, curves, settings)
    if check:
        _check_geometry(plane)
        _check_edges(plane)

    def profile(x, y):
        return float(plane.evaluate(np.array([[x, y]]))[0])

    def ray_breaks(x, y, theta):
        D = np.array([[math.cos(theta), math.sin(theta)]])
        h = plane.crossings(np.array([x, y]), D)[0]
        return [float(v) for v in h if v > 0]

    def angle_breaks(x, y):
        return plane.tangent_angles(np.array([x, y]))

    support = None
    if all(m.closed for m in plane.models):
        xs = np.concatenate([m.curve.x for m in plane.models])
        ys = np.concatenate([m.curve.y for m in plane.models])
        far = np.array([[xs.mean() + 1e3 * plane.scale, ys.mean()]])
        if plane.evaluate(far)[0] == 0.0:
            pad = max(m.gmax for m in plane.models)
            support = (xs.min() - pad, xs.max() + pad, ys.min() - pad, ys.max() + pad)
    return SurfacePotential(
        profile,
        "general",
        support=support,
        scale=min(float(np.min(c.g)) for c in curves),
        ray_breaks=ray_breaks,
        angle_breaks=angle_breaks,
    )


def _potential_point(plane: _Plane, alpha, x, y, z):
    """Half-space potential at height z > 0 from polar rays about (x, y)."""
    st = plane.settings
    p = np.array([x, y], dtype=float)
    brk = {kq * math.pi / 4.0 for kq in range(8)}
    brk.update(plane.tangent_angles(p))
    brk = np.array(sorted(brk) + [2.0 * math.pi])
    brk = brk[np.concatenate([[True], np.diff(brk) > 1e-10])]
    edges = [brk[0]]
    for a, b in zip(brk[:-1], brk[1:]):
        npan = max(1, int(math.ceil((b - a) / st.max_panel)))
        edges.extend(np.linspace(a, b, npan + 1)[1:].tolist())
    edges = np.array(edges)
    xs, ws = _graded(st.n_theta)
    th = (edges[:-1, None] + np.diff(edges)[:, None] * xs[None, :]).ravel()
    wth = (np.diff(edges)[:, None] * ws[None, :]).ravel() / (2.0 * math.pi)
    D = np.stack([np.cos(th), np.sin(th)], axis=1)
    hits = plane.crossings(p, D)
    xr, wr = _graded(st.n_radial)
    far = 64.0 * max(z, plane.scale)
    # radial splits so that every Gauss piece sees a kernel of bounded variation
    ladder = z * 2.0 ** np.arange(-2, 1 + int(math.ceil(math.log2(far / z))))

    def kern(a, b):
        ia = z / math.sqrt(a * a + z * z)
        ib = 0.0 if not np.isfinite(b) else z / math.sqrt(b * b + z * z)
        return ia - ib

    total = 0.0
    mids, wts_seg, segs = [], [], []
    for r in range(len(D)):
        h = hits[r]
        bnds = [0.0] + [c for c in h if c > 0.0] + [np.inf]
        for a, b in zip(bnds[:-1], bnds[1:]):
            mid = 2.0 * a + plane.scale if not np.isfinite(b) else 0.5 * (a + b)
            mids.append(p + mid * D[r])
            segs.append((r, a, b))
    ci, t, u = plane.locate(np.array(mids))
    base, in_gap, _ = plane.affine_values(ci, t, u)
    pts, wts = [], []
    for i, (r, a, b) in enumerate(segs):
        if not in_gap[i]:
            total += wth[r] * base[i] * kern(a, b)
            continue
        cuts = [a] + [v for v in ladder if a < v < min(b, far)] + [min(b, far)]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            rq = lo + (hi - lo) * xr
            pts.append(p + rq[:, None] * D[r])
            wts.append(wth[r] * (hi - lo) * wr * rq * z / (rq * rq + z * z) ** 1.5)
        if b > far:
            # tail in w = 1/rho
            w_hi = 1.0 / far
            w_lo = 0.0 if not np.isfinite(b) else 1.0 / b
            wq = w_lo + (w_hi - w_lo) * xr
            pts.append(p + (1.0 / wq)[:, None] * D[r])
            wts.append(wth[r] * (w_hi - w_lo) * wr * z / (1.0 + (z * wq) ** 2) ** 1.5)
    if pts:
        total += float(np.dot(np.concatenate(wts), plane.evaluate(np.concatenate(pts), alpha)))
    return total


def plane_potential(electrodes, curves, points, settings: SolverSettings = DEFAULT_SETTINGS):
    """Potential above the electrode plane at points (x, y, z), vectorized over points.

    The potential is even in z; points with z = 0 return the in-plane value.
    """
    plane = _Plane(electrodes, curves, settings)
    alpha = plane.alpha_vector()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise DomainError("points must have shape (n, 3)")
    out = np.empty(len(pts))
    for i, (x, y, z) in enumerate(pts):
        z = abs(z)
        if z == 0.0:
            out[i] = plane.evaluate(np.array([[x, y]]), alpha)[0]
        else:
            out[i] = _potential_point(plane, alpha, x, y, z)
    return out


def center_sigma(electrodes, curves, settings: SolverSettings = DEFAULT_SETTINGS, d=None):
    """sigma/eps0 at every gap-centre sample with the curves' current amplitudes."""
    plane = _Plane(electrodes, curves, settings)
    alpha = plane.alpha_vector()
    out = []
    for k, t, p in _centers(plane):
        b, a = _sigma_form(plane, p, (k, t), d)
        out.append(b + a @ alpha)
    return np.array(out)


def sigma_at(electrodes, curves, points, settings: SolverSettings = DEFAULT_SETTINGS, d=None):
    """sigma/eps0 at points lying on electrodes (outside every gap)."""
    plane = _Plane(electrodes, curves, settings)
    alpha = plane.alpha_vector()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ci, t, u = plane.locate(pts)
    _, in_gap, _ = plane.affine_values(ci, t, u)
    if np.any(in_gap):
        raise DomainError("sigma_at evaluates on electrodes only; use center_sigma for gap centres")
    out = []
    for p in pts:
        b, a = _sigma_form(plane, p, None, d)
        out.append(b + a @ alpha)
    return np.array(out)


def solve_alphas(electrodes, curves, d=None, settings: SolverSettings = DEFAULT_SETTINGS,
                 full_output=False):
    """Amplitudes nulling the charge at every gap-centre sample.

    Returns the curves with ``alpha`` filled (or a GapSolution with
    ``full_output``). Curvature warnings are issued and attached to the
    solution; an ill-conditioned system raises ConvergenceError.
    """
    plane = _Plane(electrodes, curves, settings)
    msgs = _check_geometry(plane)
    for msg in msgs:
        warnings.warn(msg, stacklevel=2)
    centers = _centers(plane)
    n = plane.n_unknowns
    A = np.empty((len(centers), n))
    b = np.empty(len(centers))
    for i, (k, t, p) in enumerate(centers):
        b[i], A[i] = _sigma_form(plane, p, (k, t), d)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > settings.max_condition:
        raise ConvergenceError(f"gap amplitude system is ill-conditioned (condition {cond:.3g})",
                               trace={"A": A, "b": b})
    alpha = np.linalg.solve(A, -b)
    resid = float(np.max(np.abs(A @ alpha + b)))
    out = []
    for m in plane.models:
        out.append(m.curve.with_alpha(alpha[m.offset:m.offset + m.n]))
    if full_output:
        return GapSolution(out, resid, cond, msgs)
    return out


def apply_susceptibility(curves, model: GapSusceptibilityModel):
    """Scale every solved amplitude by the model's multiplier."""
    out = []
    for c in curves:
        if c.alpha is None:
            raise ConfigurationError(f"curve {c.name!r} has no solved amplitudes")
        out.append(c.with_alpha(model.multiplier * c.alpha))
    return out
