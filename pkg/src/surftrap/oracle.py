"""Reference computations and closed-form versus quadrature comparison suites.

The references deliberately avoid the library's own series: scipy.special
for hypergeometric values, plain tensor-product quadrature for 2D integrals
and the kernel module's adaptive quadrature for propagated fields.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .finiteplane import modified_greens
from .gap1d import (
    field_gap,
    field_pol,
    gap_potential,
    pol_potential,
    strip_far_field,
    strip_potential,
)
from .kernel import Point3, propagate
from .ringtrap import RingTrapGeometry, _unit_gapless, ring_axis_potential, ring_potential, solve_ring_alphas

__all__ = [
    "SuiteResult",
    "SUITES",
    "run_suite",
    "CompensationQuadrature",
    "comp_sigma_radial",
    "compensated_pixel_potential",
]


def _gauss_composite(lo, hi, panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * (x + 1.0) + a)
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def comp_sigma_radial(m, n, S, r):
    """Radial factor of a compensated multipole density (inside: compensation, outside: r^-n)."""
    r = np.asarray(r, dtype=float)
    pre = -special.poch(0.5 * (n + m + 2), -1.5) / (2.0 * math.sqrt(math.pi))
    inside = pre * r ** m / S ** (n + m) * special.hyp2f1(1.5, 0.5 * (n + m), 0.5 * (n + m + 2), (r / S) ** 2)
    outside = 1.0 / np.maximum(r, 1e-300) ** n
    return np.where(r < S, inside, outside)


class CompensationQuadrature:
    """Potential of compensated multipole densities at a 3D point by 2D quadrature.

    phi(p) = (1/4 pi) int sigma(r') cos(m theta') / |p - p'| r' dr' dtheta'.
    The angular integral uses the periodic trapezoid rule; the radial one
    Gauss-Legendre after r' = S (1 - s^2) inside (removes the edge
    singularity) and r' = S / u outside.
    """

    def __init__(self, S, panels=40, order=16, nang=512):
        self.S = S
        s, ws = _gauss_composite(0.0, 1.0, panels, order)
        r_in = S * (1.0 - s * s)
        w_in = ws * 2.0 * S * s
        u, wu = _gauss_composite(0.0, 1.0, panels, order)
        r_out = S / u
        w_out = wu * S / (u * u)
        self.r = np.concatenate([r_in, r_out])
        self.w = np.concatenate([w_in, w_out])
        self.inside = np.concatenate([np.ones_like(r_in, bool), np.zeros_like(r_out, bool)])
        self.nang = nang

    def angular_moments(self, p, mmax):
        """K[m, k] = int_0^{2 pi} cos(m psi) / dist dpsi at every radial node."""
        r, _, z = p
        psi = 2.0 * math.pi * np.arange(self.nang) / self.nang
        d = np.sqrt(r * r + self.r[:, None] ** 2 - 2.0 * r * self.r[:, None] * np.cos(psi)[None, :] + z * z)
        f = np.fft.rfft(1.0 / d, axis=1).real * (2.0 * math.pi / self.nang)
        return f[:, : mmax + 1].T

    def potential(self, m, n, p, K=None):
        r, theta, z = p
        if K is None:
            K = self.angular_moments(p, m)
        rad = np.empty_like(self.r)
        rad[self.inside] = comp_sigma_radial(m, n, self.S, self.r[self.inside])
        rad[~self.inside] = self.r[~self.inside] ** (-float(n))
        val = np.sum(self.w * self.r * rad * K[m])
        return math.cos(m * theta) * val / (4.0 * math.pi)


def _pixel_coefficient(m, n):
    w = 4.0 if m == 0 else 8.0
    a, b = 0.5 * (n - m - 1), 0.5 * (n + m - 1)
    return w * math.exp(
        special.gammaln(a + 0.5) - special.gammaln(a) + special.gammaln(b + 0.5) - special.gammaln(b)
    ) / math.pi ** 2


def compensated_pixel_potential(rho, S, p, nmax=60, quad=None):
    """Free-space pixel field plus quadrature of all compensation terms up to order nmax."""
    r, theta, z = p
    quad = quad or CompensationQuadrature(S)
    K = quad.angular_moments(p, nmax)
    d2 = rho * rho + r * r + z * z - 2.0 * rho * r * math.cos(theta)
    total = abs(z) / (2.0 * math.pi * d2 ** 1.5)
    for m in range(nmax - 2):
        for n in range(m + 3, nmax + 1, 2):
            total += _pixel_coefficient(m, n) * rho ** (n - 3) * quad.potential(m, n, p, K)
    return total


@dataclass
class SuiteResult:
    name: str
    count: int
    max_err: float
    median_err: float
    tol: float
    passed: bool
    note: str = ""


def _rel_summary(name, got, ref, tol, note=""):
    got, ref = np.asarray(got, float), np.asarray(ref, float)
    if got.size == 0:
        return SuiteResult(name, 0, 0.0, 0.0, tol, True, note)
    err = np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)
    return SuiteResult(name, got.size, float(err.max()), float(np.median(err)), tol, bool(err.max() < tol), note)


def _line_points(rng, count, g):
    x = rng.uniform(-3.0 * g, 3.0 * g, count)
    z = rng.uniform(0.1 * g, 3.0 * g, count)
    return x, z


def suite_gap_field(count=50, seed=0, g=1.0, tol=1e-4):
    """Closed-form interpolation field against propagated surface profile."""
    rng = np.random.default_rng(seed)
    x, z = _line_points(rng, count, g)
    phi = gap_potential(g)
    got = [field_gap(a, b, g) for a, b in zip(x, z)]
    ref = [propagate(phi, Point3(a, 0.0, b)) for a, b in zip(x, z)]
    return _rel_summary("gap-field", got, ref, tol)


def suite_pol_field(count=50, seed=0, g=1.0, tol=1e-4):
    """Closed-form polarization field against propagated surface profile."""
    rng = np.random.default_rng(seed + 1)
    x, z = _line_points(rng, count, g)
    phi = pol_potential(g)
    got = [field_pol(a, b, g) for a, b in zip(x, z)]
    ref = [propagate(phi, Point3(a, 0.0, b)) for a, b in zip(x, z)]
    return _rel_summary("pol-field", got, ref, tol)


def suite_strip_far(count=5, seed=0, w=1.0, tol=1e-2):
    """Exact-prefactor strip far field against propagation at r = 30 w (g = w/2)."""
    g = 0.5 * w
    r = 30.0 * w
    rng = np.random.default_rng(seed + 2)
    theta = rng.uniform(-1.2, 1.2, count)
    phi = strip_potential(w, g)
    got = [strip_far_field(r, t, w, g) for t in theta]
    # theta is measured from the surface normal: x = r sin(theta), z = r cos(theta)
    ref = [propagate(phi, Point3(r * math.sin(t), 0.0, r * math.cos(t))) for t in theta]
    return _rel_summary("strip-far", got, ref, tol)


def ring_axis_errors(gaps=(0.2, 0.1, 0.05), z=1.0):
    """Absolute on-axis error of the ring expansion against propagation, per gap width.

    The radii are those of the optimal gapless ring at height z.
    """
    R1, R2, _ = _unit_gapless()
    R1, R2 = R1 * z, R2 * z
    errs = []
    for g in gaps:
        geom = RingTrapGeometry(R1, R2, g)
        amps = solve_ring_alphas(geom)
        errs.append(abs(ring_axis_potential(z, geom, amps) - propagate(ring_potential(geom, amps), Point3(0.0, 0.0, z))))
    return np.array(errs)


def fitted_order(gaps, errs):
    return float(np.polyfit(np.log(gaps), np.log(errs), 1)[0])


def suite_ring_axis(count=3, seed=0, min_order=2.9):
    """Fitted order of the ring expansion error in g (terms through g^2 are modelled)."""
    gaps = np.array([0.2, 0.1, 0.05, 0.025][: max(2, count)])
    errs = ring_axis_errors(gaps)
    order = fitted_order(gaps, errs)
    return SuiteResult("ring-axis", len(gaps), float(errs.max()), float(np.median(errs)), min_order,
                       bool(order >= min_order), note=f"fitted order {order:.3f}")


def suite_finite_pixel(count=20, seed=0, S=10.0, tol=1e-5):
    """Disc Green's function series against 2D quadrature of the compensated pixel."""
    rng = np.random.default_rng(seed + 3)
    quad = CompensationQuadrature(S)
    got, ref = [], []
    for _ in range(count):
        rho = rng.uniform(0.5, 3.0)
        p = (rng.uniform(0.0, 4.0), rng.uniform(0.0, 2.0 * math.pi), rng.uniform(0.5, 3.0))
        got.append(modified_greens(rho, S, p))
        ref.append(compensated_pixel_potential(rho, S, p, quad=quad))
    return _rel_summary("finite-pixel", got, ref, tol)


SUITES = {
    "gap-field": suite_gap_field,
    "pol-field": suite_pol_field,
    "strip-far": suite_strip_far,
    "ring-axis": suite_ring_axis,
    "finite-pixel": suite_finite_pixel,
}


def run_suite(name, count=None, seed=0):
    """Run one suite by name ("none" gives no results, "all" runs every suite)."""
    if name == "none":
        return []
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise DomainError(f"unknown oracle suite {name!r}; choose from none, all, {', '.join(SUITES)}")
    out = []
    for n in names:
        kw = {"seed": seed}
        if count is not None:
            kw["count"] = count
        out.append(SUITES[n](**kw))
    return out
