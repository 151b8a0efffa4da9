"""Straight gaps in an otherwise infinite electrode plane.

Two surface potentials describe a thin straight gap of width g centred at
x = 0: the *interpolation* profile (arcsine step from 0 to 1, no charge in
the gap) and the *polarization* profile (half ellipse, constant charge in the
gap). Both have closed-form 3D fields in terms of the complex variable
Z = (|z| + i x) / (g/2), taken with principal branches.

A strip electrode of width w (between gap centres) at unit potential uses two
interpolation profiles plus polarization profiles whose amplitude alpha nulls
the charge at the gap centres.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .kernel import StepBackground, SurfaceChargeDensity, SurfacePotential

__all__ = [
    "StraightGapSpec",
    "StripSpec",
    "phi_gap",
    "sigma_gap",
    "field_gap",
    "phi_pol",
    "sigma_pol",
    "field_pol",
    "field_gap_gradient",
    "field_pol_gradient",
    "field_gap_far",
    "field_pol_far",
    "strip_alpha",
    "strip_alpha_leading",
    "strip_surface_potential",
    "strip_far_field",
    "strip_far_field_approx",
    "gap_potential",
    "pol_potential",
    "pol_density",
    "strip_potential",
]


@dataclass(frozen=True)
class StraightGapSpec:
    g: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise DomainError(f"gap width must be positive, got {self.g}")


@dataclass(frozen=True)
class StripSpec:
    w: float
    g: float

    def __post_init__(self):
        if not (0 < self.g < self.w):
            raise DomainError(f"strip needs 0 < g < w, got g={self.g}, w={self.w}")


def _check_g(g):
    if not g > 0:
        raise DomainError(f"gap width must be positive, got {g}")


def phi_gap(x, g):
    """Interpolation profile: 0 for x <= -g/2, 1/2 + asin(2x/g)/pi inside, 1 beyond."""
    _check_g(g)
    if isinstance(x, (float, int)):
        s = min(1.0, max(-1.0, 2.0 * x / g))
        return 0.5 + math.asin(s) / math.pi
    s = np.clip(2.0 * np.asarray(x, dtype=float) / g, -1.0, 1.0)
    out = 0.5 + np.arcsin(s) / np.pi
    return float(out) if out.ndim == 0 else out


def sigma_gap(x, g):
    """sigma/eps0 of the interpolation profile; +-inf exactly at the edges."""
    _check_g(g)
    x = float(x)
    if abs(x) < 0.5 * g:
        return 0.0
    if abs(x) == 0.5 * g:
        return math.copysign(math.inf, x)
    return math.copysign(4.0 / (math.pi * math.sqrt(4.0 * x * x - g * g)), x)


def phi_pol(x, g):
    """Polarization profile sqrt(1 - (2x/g)^2) inside the gap, 0 outside."""
    _check_g(g)
    if isinstance(x, (float, int)):
        s = 2.0 * x / g
        return math.sqrt(max(0.0, 1.0 - s * s))
    s = 2.0 * np.asarray(x, dtype=float) / g
    out = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    return float(out) if out.ndim == 0 else out


def sigma_pol(x, g):
    """sigma/eps0 of the polarization profile: 4/g inside, 4/g (1 - 2|x|/sqrt(4x^2 - g^2)) outside.

    The outer branch diverges to -inf at |x| = g/2.
    """
    _check_g(g)
    x = abs(float(x))
    if x < 0.5 * g:
        return 4.0 / g
    if x == 0.5 * g:
        return -math.inf
    # 1 - 1/sqrt(1 - q) without cancellation, q = g^2 / 4x^2
    q = g * g / (4.0 * x * x)
    root = math.sqrt(1.0 - q)
    return -4.0 / g * q / (root * (1.0 + root))


def _zvar(x, z, g):
    return complex(abs(z), x) / (0.5 * g)


def field_gap(x, z, g):
    """3D potential of the interpolation profile at in-plane offset x, height z.

    On the plane (z = 0) the surface profile is returned, which also fixes the
    convention at the edges x = +-g/2 (values 0 and 1).
    """
    _check_g(g)
    if z == 0:
        return phi_gap(x, g)
    zz = _zvar(x, z, g)
    w = np.sqrt(1.0 + zz * zz) + zz
    return 0.5 + math.atan2(w.imag, w.real) / math.pi


def field_pol(x, z, g):
    """3D potential of the polarization profile, Re(sqrt(1 + Z^2) - Z)."""
    _check_g(g)
    if z == 0:
        return phi_pol(x, g)
    zz = _zvar(x, z, g)
    return (np.sqrt(1.0 + zz * zz) - zz).real


def _zroot(x, z, g):
    """(Z, sqrt(1 + Z^2)) with the branch of the z -> 0+ limit on the plane."""
    if z == 0:
        y = 2.0 * x / g
        return complex(0.0, y), cmath.sqrt(complex(1.0 - y * y, math.copysign(0.0, y)))
    zz = _zvar(x, z, g)
    return zz, cmath.sqrt(1.0 + zz * zz)


def field_gap_gradient(x, z, g):
    """(dPhi/dx, dPhi/dz) of the interpolation field; d/dZ log(s + Z) = 1/s."""
    _check_g(g)
    _, s = _zroot(float(x), float(z), g)
    if s == 0:
        raise SingularityError(f"gradient is singular at the gap edge x={x}")
    d = 2.0 / g / s
    return d.real / math.pi, math.copysign(1.0, z) * d.imag / math.pi


def field_pol_gradient(x, z, g):
    """(dPhi/dx, dPhi/dz) of the polarization field; d/dZ (s - Z) = Z/s - 1."""
    _check_g(g)
    zz, s = _zroot(float(x), float(z), g)
    if s == 0:
        raise SingularityError(f"gradient is singular at the gap edge x={x}")
    d = 2.0 / g * (zz / s - 1.0)
    return -d.imag, math.copysign(1.0, z) * d.real


def field_gap_far(r, theta, g):
    """Far-field series 1/2 + theta/pi - g^2 sin(2 theta) / (16 pi r^2); x = r sin(theta), |z| = r cos(theta)."""
    return 0.5 + theta / math.pi - g * g * math.sin(2.0 * theta) / (16.0 * math.pi * r * r)


def field_pol_far(r, theta, g):
    """Leading far field g cos(theta) / (4 r)."""
    return g * math.cos(theta) / (4.0 * r)


def strip_alpha(w, g):
    """Polarization amplitude that nulls the charge at both strip gap centres."""
    StripSpec(w, g)
    return g / (2.0 * math.pi * (w - math.sqrt(4.0 * w * w - g * g)))


def strip_alpha_leading(w, g):
    return -g / (2.0 * math.pi * w)


def strip_surface_potential(x, w, g, alpha=None):
    """Strip at unit potential between grounded half-planes (gap centres at +-w/2)."""
    if alpha is None:
        alpha = strip_alpha(w, g)
    x = np.asarray(x, dtype=float)
    out = (
        phi_gap(x + 0.5 * w, g)
        - phi_gap(x - 0.5 * w, g)
        + alpha * (phi_pol(x + 0.5 * w, g) + phi_pol(x - 0.5 * w, g))
    )
    return float(out) if np.ndim(out) == 0 else out


def strip_far_field(r, theta, w, g):
    """Leading far field (1 + pi alpha g / 2w) w cos(theta) / (pi r) of the strip."""
    StripSpec(w, g)
    alpha = strip_alpha(w, g)
    return (1.0 + math.pi * alpha * g / (2.0 * w)) * w * math.cos(theta) / (math.pi * r)


def strip_far_field_approx(r, theta, w, g):
    """Same with the prefactor expanded to (1 - g^2 / 4w^2)."""
    StripSpec(w, g)
    return (1.0 - g * g / (4.0 * w * w)) * w * math.cos(theta) / (math.pi * r)


def strip_far_prefactor(w, g, exact=True):
    if exact:
        return 1.0 + math.pi * strip_alpha(w, g) * g / (2.0 * w)
    return 1.0 - g * g / (4.0 * w * w)


# --- SurfacePotential / SurfaceChargeDensity wrappers for the kernel oracle ---


def gap_potential(g):
    return SurfacePotential(
        lambda x: phi_gap(x, g),
        "translation",
        support=(-0.5 * g, 0.5 * g),
        background=StepBackground(0.0, 0.0, 1.0),
        breaks=(-0.5 * g, 0.0, 0.5 * g),
        scale=g,
    )


def pol_potential(g):
    return SurfacePotential(
        lambda x: phi_pol(x, g),
        "translation",
        support=(-0.5 * g, 0.5 * g),
        breaks=(-0.5 * g, 0.5 * g),
        scale=g,
    )


def pol_density(g):
    return SurfaceChargeDensity(
        lambda x: sigma_pol(x, g),
        "translation",
        support=(-math.inf, math.inf),
        breaks=(),
        singular=(-0.5 * g, 0.5 * g),
        scale=g,
    )


def strip_potential(w, g, alpha=None):
    if alpha is None:
        alpha = strip_alpha(w, g)
    h = 0.5 * w
    return SurfacePotential(
        lambda x: strip_surface_potential(x, w, g, alpha),
        "translation",
        support=(-h - 0.5 * g, h + 0.5 * g),
        breaks=(-h - 0.5 * g, -h, -h + 0.5 * g, h - 0.5 * g, h, h + 0.5 * g),
        scale=g,
    )
