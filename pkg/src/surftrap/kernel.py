"""Gapless-plane electrostatics.

A potential phi(x, y) prescribed on the plane z = 0 extends to 3D through the
half-space Green's function G = |z| / (2 pi rho^3). This module propagates
surface potentials to 3D and converts between surface potentials and sheet
charge densities. Charge densities are stored as sigma / epsilon_0, so no
physical constant ever appears numerically.

Everything here is evaluated by adaptive quadrature and serves as the
independent oracle for the closed forms in the other modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError, ConvergenceError, DomainError, SingularityError
from .quadrature import DEFAULT_QUAD, QuadSettings, integrate_1d

__all__ = [
    "Point3",
    "UniformBackground",
    "StepBackground",
    "SurfacePotential",
    "SurfaceChargeDensity",
    "uniform_plane",
    "greens_function",
    "propagate",
    "sigma_to_phi",
    "sigma_split",
    "phi_to_sigma",
    "numerical_laplacian",
]

SYMMETRIES = ("general", "translation", "axisymmetric")
_ASINH1 = math.asinh(1.0)
_SQRT2 = math.sqrt(2.0)


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class UniformBackground:
    """phi = value on the whole plane; its 3D field is the same constant."""

    value: float

    def surface(self, x, y):
        return self.value

    def field(self, x, y, z):
        return self.value


@dataclass(frozen=True)
class StepBackground:
    """phi = left for x < x0 and right for x > x0 (translation invariant)."""

    x0: float
    left: float
    right: float

    def surface(self, x, y):
        return self.left if x < self.x0 else self.right

    def field(self, x, y, z):
        jump = self.right - self.left
        return self.left + jump * (0.5 + math.atan((x - self.x0) / abs(z)) / math.pi)


@dataclass(frozen=True)
class SurfacePotential:
    """Scaled in-plane potential.

    ``profile`` is called as profile(x) for translation symmetry, profile(r)
    for axisymmetric potentials and profile(x, y) otherwise. The part of the
    potential that differs from ``background`` must vanish outside
    ``support``: (lo, hi) in the symmetry coordinate, or
    (xmin, xmax, ymin, ymax) for general potentials. ``support=None`` flags an
    infinite support, which only propagates if nothing beyond the background
    is left (``support="empty"``). ``breaks`` lists coordinates where the
    profile is not smooth; ``scale`` is the local feature length. General
    potentials may supply ``ray_breaks(x, y, theta)`` (distances along a ray
    where the profile is not smooth) and ``angle_breaks(x, y)`` (ray
    directions where those distances jump, e.g. tangents to gap edges).
    """

    profile: Callable
    symmetry: str = "general"
    support: object = None
    background: Optional[object] = None
    breaks: Sequence[float] = ()
    scale: float = 1.0
    ray_breaks: Optional[Callable] = None
    angle_breaks: Optional[Callable] = None

    def __post_init__(self):
        if self.symmetry not in SYMMETRIES:
            raise ConfigurationError(f"unknown symmetry {self.symmetry!r}")

    def __call__(self, x, y=0.0):
        if self.symmetry == "translation":
            return self.profile(x)
        if self.symmetry == "axisymmetric":
            return self.profile(math.hypot(x, y))
        return self.profile(x, y)

    def background_surface(self, x, y):
        return 0.0 if self.background is None else self.background.surface(x, y)


@dataclass(frozen=True)
class SurfaceChargeDensity:
    """sigma / epsilon_0 on the plane.

    ``profile`` follows the :class:`SurfacePotential` convention; an
    axisymmetric density may carry an angular ``harmonic`` m, meaning
    sigma(r, theta) = profile(r) cos(m theta). ``singular`` lists coordinates
    with integrable inverse-square-root edge divergences.
    """

    profile: Callable
    symmetry: str = "general"
    support: object = None
    harmonic: int = 0
    breaks: Sequence[float] = ()
    singular: Sequence[float] = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.symmetry not in SYMMETRIES:
            raise ConfigurationError(f"unknown symmetry {self.symmetry!r}")

    def __call__(self, x, y=0.0):
        if self.symmetry == "translation":
            return self.profile(x)
        if self.symmetry == "axisymmetric":
            r = math.hypot(x, y)
            if self.harmonic:
                return self.profile(r) * math.cos(self.harmonic * math.atan2(y, x))
            return self.profile(r)
        return self.profile(x, y)


def uniform_plane(value=1.0):
    return SurfacePotential(
        lambda x, y: value, "general", support="empty", background=UniformBackground(value)
    )


def greens_function(p):
    """Half-space Green's function |z| / (2 pi (x^2 + y^2 + z^2)^{3/2})."""
    x, y, z = (float(c) for c in p)
    rho2 = x * x + y * y + z * z
    if rho2 == 0.0:
        raise SingularityError("Green's function evaluated at the origin")
    if z == 0.0:
        return 0.0
    return abs(z) / (2.0 * math.pi * rho2 ** 1.5)


def _check_support(obj):
    if obj.support is None:
        raise ConfigurationError(
            "infinite support: supply a background with an analytic field "
            "and the compact support of the remainder"
        )


def propagate(phi: SurfacePotential, p, quad: QuadSettings = DEFAULT_QUAD):
    """3D potential of a surface potential at p (|z| > 0) by quadrature."""
    x, y, z = (float(c) for c in p)
    z = abs(z)
    if z == 0.0:
        raise DomainError("propagate needs |z| > 0; use the surface potential itself")
    base = 0.0 if phi.background is None else phi.background.field(x, y, z)
    _check_support(phi)
    if phi.support == "empty":
        return base
    bg = phi.background_surface

    if phi.symmetry == "translation":
        lo, hi = phi.support

        def integrand(xp):
            return (phi.profile(xp) - bg(xp, 0.0)) * z / (math.pi * ((x - xp) ** 2 + z * z))

        val, _ = integrate_1d(integrand, lo, hi, breaks=phi.breaks, settings=quad)
        return base + val

    if phi.symmetry == "axisymmetric":
        lo, hi = phi.support
        r = math.hypot(x, y)
        if r == 0.0:

            def integrand(rp):
                return (phi.profile(rp) - bg(rp, 0.0)) * rp * z / (rp * rp + z * z) ** 1.5

        else:

            def integrand(rp):
                # int_0^{2 pi} (a - b cos)^{-3/2} = 4 E(m) / ((a - b) sqrt(a + b))
                a = r * r + rp * rp + z * z
                b = 2.0 * r * rp
                ang = 4.0 * special.ellipe(2.0 * b / (a + b)) / ((a - b) * math.sqrt(a + b))
                return (phi.profile(rp) - bg(rp, 0.0)) * rp * z * ang / (2.0 * math.pi)

        val, _ = integrate_1d(integrand, lo, hi, breaks=phi.breaks, settings=quad)
        return base + val

    xmin, xmax, ymin, ymax = phi.support
    inner = quad.inner()

    def radial(theta):
        c, s = math.cos(theta), math.sin(theta)
        rmin, rmax = _ray_span(x, y, c, s, xmin, xmax, ymin, ymax)
        if rmax <= rmin:
            return 0.0

        def f(rho):
            xp, yp = x + rho * c, y + rho * s
            return (phi.profile(xp, yp) - bg(xp, yp)) * rho * z / (
                2.0 * math.pi * (rho * rho + z * z) ** 1.5
            )

        br = phi.ray_breaks(x, y, theta) if phi.ray_breaks is not None else ()
        return integrate_1d(f, rmin, rmax, breaks=br, settings=inner)[0]

    angles = _corner_angles(x, y, phi.support)
    if phi.angle_breaks is not None:
        angles += [a % (2.0 * math.pi) for a in phi.angle_breaks(x, y)]
    val, _ = integrate_1d(radial, 0.0, 2.0 * math.pi, breaks=angles, settings=quad)
    return base + val


def _ray_span(x, y, c, s, xmin, xmax, ymin, ymax):
    """Distances (enter, leave) along (c, s) from (x, y) between which the ray is in the box."""
    t0, t1 = 0.0, math.inf
    for p0, d, lo, hi in ((x, c, xmin, xmax), (y, s, ymin, ymax)):
        if d == 0.0:
            if not lo <= p0 <= hi:
                return 0.0, 0.0
            continue
        a, b = (lo - p0) / d, (hi - p0) / d
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
    return (t0, t1) if t1 > t0 else (0.0, 0.0)


def _corner_angles(x, y, box):
    xmin, xmax, ymin, ymax = box
    out = []
    for cx in (xmin, xmax):
        for cy in (ymin, ymax):
            out.append(math.atan2(cy - y, cx - x) % (2.0 * math.pi))
    return out


def sigma_to_phi(sigma: SurfaceChargeDensity, x, y=0.0, phi0=0.0, quad: QuadSettings = DEFAULT_QUAD):
    """In-plane potential phi0 + (1/4pi) int sigma/eps0 / |r - r'| dA'.

    For translation-invariant densities the y integral is done analytically,
    leaving the 2D kernel -(1/2pi) ln|x - x'|; this is exact for neutral
    densities (zero net charge per unit length) and otherwise fixes the
    reference length at 1.
    """
    x, y = float(x), float(y)
    if sigma.support is None:
        raise ConfigurationError("sigma_to_phi needs an explicit support, e.g. (-inf, inf)")
    if sigma.support == "empty":
        return phi0

    if sigma.symmetry == "translation":
        lo, hi = sigma.support

        def integrand(xp):
            d = abs(x - xp)
            if d == 0.0:
                return 0.0
            return -sigma.profile(xp) * math.log(d) / (2.0 * math.pi)

        brk = list(sigma.breaks) + [x]
        val, _ = integrate_1d(integrand, lo, hi, breaks=brk, singular=sigma.singular,
                              settings=quad, tail_scale=sigma.scale)
        return phi0 + val

    if sigma.symmetry == "axisymmetric":
        lo, hi = sigma.support
        r = math.hypot(x, y)
        m = sigma.harmonic
        theta = math.atan2(y, x)
        inner = quad.inner()

        def angular(rp):
            if r == 0.0:
                return 2.0 * math.pi / rp if m == 0 else 0.0
            if rp == r:
                return 0.0
            # K(k) with 1 - k = ((r - rp) / (r + rp))^2 formed without cancellation
            kc = ((r - rp) / (r + rp)) ** 2
            if m == 0:
                return 4.0 * special.ellipkm1(kc) / (r + rp)
            if abs(rp - r) > 0.5 * max(r, rp):
                def smooth(psi):
                    return math.cos(m * psi) / math.sqrt(r * r + rp * rp - 2.0 * r * rp * math.cos(psi))

                return 2.0 * integrate_1d(smooth, 0.0, math.pi, settings=inner)[0]

            # near rp = r, cos(m psi) = 1 + (cos(m psi) - 1): the log peak at
            # psi = 0 stays in the elliptic part, the remainder is bounded
            base = 4.0 * special.ellipkm1(kc) / (r + rp)
            def g(psi):
                d = math.sqrt((r - rp) ** 2 + 4.0 * r * rp * math.sin(0.5 * psi) ** 2)
                return -2.0 * math.sin(0.5 * m * psi) ** 2 / d

            knee = min(0.5 * math.pi, 4.0 * abs(rp - r) / r)
            return base + 2.0 * integrate_1d(g, 0.0, math.pi, breaks=(knee,), settings=inner)[0]

        def integrand(rp):
            return rp * sigma.profile(rp) * angular(rp) / (4.0 * math.pi)

        brk = list(sigma.breaks) + ([r] if r > 0 else [])
        val, _ = integrate_1d(integrand, lo, hi, breaks=brk, singular=sigma.singular,
                              settings=quad, tail_scale=sigma.scale)
        return phi0 + (math.cos(m * theta) if m else 1.0) * val

    xmin, xmax, ymin, ymax = sigma.support
    inner = quad.inner()

    def radial(theta):
        c, s = math.cos(theta), math.sin(theta)
        rmin, rmax = _ray_span(x, y, c, s, xmin, xmax, ymin, ymax)
        if rmax <= rmin:
            return 0.0
        return integrate_1d(lambda rho: sigma.profile(x + rho * c, y + rho * s), rmin, rmax,
                            settings=inner)[0]

    val, _ = integrate_1d(radial, 0.0, 2.0 * math.pi, breaks=_corner_angles(x, y, sigma.support),
                          settings=quad)
    return phi0 + val / (4.0 * math.pi)


def _laplacian_2d(phi, x, y, h):
    c = phi(x, y)
    if phi.symmetry == "translation":
        return (phi(x + h, y) - 2.0 * c + phi(x - h, y)) / (h * h)
    return (phi(x + h, y) + phi(x - h, y) + phi(x, y + h) + phi(x, y - h) - 4.0 * c) / (h * h)


def _square_edge(theta, d):
    return d / max(abs(math.cos(theta)), abs(math.sin(theta)))


def _axis_ray_breaks(px, py, c, s, radii):
    """Distances along +-(c, s) from (px, py) at which |p +- rho e| crosses a radius."""
    pe = px * c + py * s
    p2 = px * px + py * py
    out = []
    for rk in radii:
        for sgn in (1.0, -1.0):
            b = sgn * pe
            disc = b * b - p2 + rk * rk
            if disc < 0:
                continue
            sq = math.sqrt(disc)
            for rho in (-b - sq, -b + sq):
                if rho > 0:
                    out.append(rho)
    return out


def sigma_split(phi: SurfacePotential, x, y=0.0, d=None, quad: QuadSettings = DEFAULT_QUAD):
    """sigma/eps0 at (x, y) from the square-split evaluation with half-width d.

    Inside the square the potential is replaced by its second-order Taylor
    expansion, contributing -4 sqrt(2) phi / d + 2 d asinh(1) lap(phi). The
    remainder of the plane is integrated with the limit z -> 0 taken first.
    The 1/d pieces cancel analytically by integrating phi(r') - phi(r) outside
    the square, and odd terms cancel by folding r' - r with r - r'.
    """
    x, y = float(x), float(y)
    if d is None:
        d = 1e-3 * phi.scale
    if d <= 0:
        raise DomainError("square half-width d must be positive")
    # the integrals carry units of 1/length; second differences at rho ~ d lose
    # about eps/d to roundoff, so the absolute floor cannot go much below 1e-9/scale
    quad = replace(quad, epsabs=max(quad.epsabs, 1e-9) / phi.scale)
    p0 = phi(x, y)
    lap = _laplacian_2d(phi, x, y, d)
    local = 2.0 * d * _ASINH1 * lap

    if phi.symmetry == "translation":
        # y-integrated weight of rho^-3 outside the square, folded in u
        def w(u):
            if u >= d:
                return 2.0 / (u * u)
            if u == 0.0:
                return 1.0 / (d * d)
            return 2.0 * (1.0 - d / math.sqrt(u * u + d * d)) / (u * u)

        def integrand(u):
            return (phi.profile(x + u) + phi.profile(x - u) - 2.0 * p0) * w(u)

        brk = [d] + [abs(b - x) for b in phi.breaks]
        val, _ = integrate_1d(integrand, 0.0, math.inf, breaks=brk, settings=quad,
                              tail_scale=phi.scale)
        return -(local + val) / math.pi

    inner = quad.inner()
    if phi.symmetry == "axisymmetric":
        lo, hi = phi.support if phi.support not in (None, "empty") else (0.0, 0.0)
        far = phi.profile(hi) if phi.support not in (None, "empty") else p0
        reach = math.hypot(x, y) + hi
        radii = list(phi.breaks)
    else:
        reach = math.inf
        far = None

    def radial(theta):
        c, s = math.cos(theta), math.sin(theta)
        rb = _square_edge(theta, d)

        def f(rho):
            return (phi(x + rho * c, y + rho * s) + phi(x - rho * c, y - rho * s) - 2.0 * p0) / (rho * rho)

        if phi.symmetry == "axisymmetric":
            br = _axis_ray_breaks(x, y, c, s, radii)
        elif phi.ray_breaks is not None:
            br = list(phi.ray_breaks(x, y, theta)) + list(phi.ray_breaks(x, y, theta + math.pi))
        else:
            br = []
        if reach > rb and math.isfinite(reach):
            # gap edges along a ray behave like |rho - rho_k|^{1/2}; the substitution helps
            v = integrate_1d(f, rb, reach, breaks=br, singular=br, settings=inner)[0]
            return v + 2.0 * (far - p0) / reach
        return integrate_1d(f, rb, math.inf, breaks=br, singular=br, settings=inner,
                            tail_scale=phi.scale)[0]

    angles = [k * math.pi / 4.0 for k in (1, 2, 3)]
    if phi.symmetry == "axisymmetric":
        rp = math.hypot(x, y)
        base = math.atan2(y, x)
        for rk in radii:
            if 0 < rk < rp:
                a = math.asin(rk / rp)
                for t in (base + a, base - a, base + math.pi - a, base - math.pi + a):
                    angles.append(t % math.pi)
    elif phi.angle_breaks is not None:
        angles += [a % math.pi for a in phi.angle_breaks(x, y)]
    val, _ = integrate_1d(radial, 0.0, math.pi, breaks=angles, settings=quad)
    return -(local + val) / math.pi


def phi_to_sigma(phi: SurfacePotential, x, y=0.0, d=None, quad: QuadSettings = DEFAULT_QUAD,
                 check_tol=1e-6, full_output=False):
    """sigma/eps0 at (x, y), verified by repeating the split with d/2.

    Raises :class:`ConvergenceError` when the two evaluations differ by more
    than ``check_tol`` relative to max(|sigma|, 1/scale); set check_tol=None
    to skip the comparison. With ``full_output`` the discrepancy is returned
    too.
    """
    if d is None:
        d = 1e-3 * phi.scale
    s1 = sigma_split(phi, x, y, d, quad)
    s2 = sigma_split(phi, x, y, 0.5 * d, quad)
    disc = abs(s1 - s2)
    ref = max(abs(s2), 1.0 / phi.scale)
    if check_tol is not None and disc > check_tol * ref:
        raise ConvergenceError(
            f"sigma at ({x}, {y}) changed by {disc:.3g} when halving d={d:.3g}; "
            "the potential is probably not smooth there"
        )
    if full_output:
        return s2, disc
    return s2


def numerical_laplacian(field, p, h):
    """Sum of central second differences of field(x, y, z) at p."""
    x, y, z = (float(c) for c in p)
    if abs(z) <= 2.0 * h:
        raise DomainError("numerical_laplacian needs |z| > 2h")
    c = 2.0 * field(x, y, z)
    return (
        field(x + h, y, z) + field(x - h, y, z) - c
        + field(x, y + h, z) + field(x, y - h, z) - c
        + field(x, y, z + h) + field(x, y, z - h) - c
    ) / (h * h)
