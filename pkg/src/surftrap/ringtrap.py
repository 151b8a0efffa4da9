"""Gapped ring rf trap on an infinite grounded plane.

The rf electrode is the annulus between two gaps of width g whose centres
sit at radii R1 < R2. Inside each gap the surface potential is the straight
gap interpolation profile plus a polarization profile with amplitude
alpha_i; the amplitudes are fixed by requiring zero charge at both gap
centres, using leading-order closed forms in g. On the symmetry axis the 3D
potential is known in closed form to the same order, which is all the trap
optimisation needs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError
from .gap1d import phi_gap, phi_pol
from .kernel import SurfacePotential
from .specfun import elliptic_e, elliptic_k

__all__ = [
    "RingTrapGeometry",
    "GapAmplitudes",
    "IonParameters",
    "TrapReport",
    "ring_surface_potential",
    "ring_potential",
    "ring_gap_center_sigma",
    "solve_ring_alphas",
    "ring_axis_potential",
    "ring_axis_derivatives",
    "pseudopotential",
    "curvature_kappa",
    "kappa_from_d2",
    "optimize_ring",
    "gap_sweep",
    "GAP_SWEEP_GRID",
]

AMU = 1.66053906660e-27
E_CHARGE = 1.602176634e-19
_CBRT4 = 4.0 ** (1.0 / 3.0)
GAP_SWEEP_GRID = tuple(round(0.05 * k, 2) for k in range(11))


@dataclass(frozen=True)
class RingTrapGeometry:
    """Radii R1 < R2 to the gap centres and the common gap width g."""

    R1: float
    R2: float
    g: float = 0.0

    def __post_init__(self):
        if not (0 < self.R1 < self.R2):
            raise DomainError(f"need 0 < R1 < R2, got R1={self.R1}, R2={self.R2}")
        if self.g < 0:
            raise DomainError(f"gap width must be non-negative, got {self.g}")
        if self.g > 0 and not (self.g < self.R2 - self.R1 and self.g < 2.0 * self.R1):
            raise DomainError(
                f"gap width {self.g} must be below R2 - R1 = {self.R2 - self.R1} "
                f"and 2 R1 = {2 * self.R1}"
            )


@dataclass(frozen=True)
class GapAmplitudes:
    alpha1: float = 0.0
    alpha2: float = 0.0

    def scaled(self, factor):
        return GapAmplitudes(factor * self.alpha1, factor * self.alpha2)


@dataclass(frozen=True)
class IonParameters:
    """Ion and drive in SI units: kg, C, V, rad/s."""

    mass: float
    charge: float
    u_rf: float
    omega_rf: float

    def __post_init__(self):
        for name in ("mass", "charge", "u_rf", "omega_rf"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @classmethod
    def from_lab_units(cls, mass_amu, charge_e, urf_volt, omega_rf_hz):
        """``omega_rf_hz`` is the ordinary frequency; it is multiplied by 2 pi."""
        return cls(mass_amu * AMU, charge_e * E_CHARGE, urf_volt, 2.0 * math.pi * omega_rf_hz)

    @property
    def prefactor(self):
        """q^2 U_rf^2 / (4 m Omega_rf^2), multiplying |grad Phi_scaled|^2 (1/m^2)."""
        return self.charge ** 2 * self.u_rf ** 2 / (4.0 * self.mass * self.omega_rf ** 2)


@dataclass(frozen=True)
class TrapReport:
    z: float
    kappa: float
    R1: float
    R2: float
    g: float = 0.0
    S: float = math.inf
    amplitudes: GapAmplitudes = field(default_factory=GapAmplitudes)
    prefactor: Optional[float] = None
    R1_ratio: float = 1.0
    R2_ratio: float = 1.0
    kappa_ratio: float = 1.0
    evaluations: int = 0


def ring_surface_potential(r, geom: RingTrapGeometry, amps: GapAmplitudes = GapAmplitudes()):
    """Scaled in-plane potential of the gapped ring at radius r >= 0."""
    r = float(r)
    if r < 0:
        raise DomainError("radius must be non-negative")
    R1, R2, g = geom.R1, geom.R2, geom.g
    h = 0.5 * g
    if r <= R1 - h:
        return 0.0
    if abs(r - R1) < h:
        return phi_gap(r - R1, g) + amps.alpha1 * phi_pol(r - R1, g)
    if r <= R2 - h:
        return 1.0
    if abs(r - R2) < h:
        return phi_gap(R2 - r, g) + amps.alpha2 * phi_pol(r - R2, g)
    return 0.0


def ring_potential(geom: RingTrapGeometry, amps: GapAmplitudes = GapAmplitudes()):
    """The ring surface potential packaged for the kernel oracle."""
    h = 0.5 * geom.g
    brk = (geom.R1 - h, geom.R1, geom.R1 + h, geom.R2 - h, geom.R2, geom.R2 + h)
    return SurfacePotential(
        lambda r: ring_surface_potential(r, geom, amps),
        "axisymmetric",
        support=(0.0, geom.R2 + h),
        breaks=tuple(sorted(set(b for b in brk if b >= 0))),
        scale=geom.g if geom.g > 0 else geom.R1,
    )


def _sigma_terms(geom):
    R1, R2, g = geom.R1, geom.R2, geom.g
    m = 4.0 * R1 * R2 / (R1 + R2) ** 2
    K = elliptic_k(m)
    E = elliptic_e(m)
    Eneg = elliptic_e(-4.0 * R1 * R2 / (R2 - R1) ** 2)
    a1 = -K / (math.pi * (R1 + R2)) - E / (math.pi * (R2 - R1)) - math.log(g / (32.0 * R1)) / (2.0 * math.pi * R1)
    a2 = K / (math.pi * (R1 + R2)) - E / (math.pi * (R2 - R1)) + math.log(g / (32.0 * R2)) / (2.0 * math.pi * R2)
    cross = g * Eneg / (2.0 * (R1 + R2) ** 2 * (R2 - R1))
    return a1, a2, cross


def ring_gap_center_sigma(geom: RingTrapGeometry, amps: GapAmplitudes = GapAmplitudes()):
    """Leading-order sigma/eps0 at the two gap centres (r = R1, r = R2)."""
    if geom.g <= 0:
        raise DomainError("gap-centre charge needs g > 0")
    if geom.g >= 0.2 * (geom.R2 - geom.R1):
        warnings.warn(
            f"g = {geom.g} is not small against R2 - R1 = {geom.R2 - geom.R1}; "
            "the leading-order gap-centre charge is unreliable",
            stacklevel=2,
        )
    a1, a2, cross = _sigma_terms(geom)
    g = geom.g
    s1 = -2.0 * (a1 - 2.0 * amps.alpha1 / g + geom.R2 * amps.alpha2 * cross)
    s2 = -2.0 * (a2 - 2.0 * amps.alpha2 / g + geom.R1 * amps.alpha1 * cross)
    return s1, s2


def solve_ring_alphas(geom: RingTrapGeometry):
    """Amplitudes nulling both leading-order gap-centre charges (alpha = 0 for g = 0)."""
    if geom.g == 0:
        return GapAmplitudes(0.0, 0.0)
    a1, a2, cross = _sigma_terms(geom)
    g = geom.g
    mat = np.array([[-2.0 / g, geom.R2 * cross], [geom.R1 * cross, -2.0 / g]])
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    assert det != 0.0, "ring alpha system is singular"
    alpha1, alpha2 = np.linalg.solve(mat, [-a1, -a2])
    return GapAmplitudes(float(alpha1), float(alpha2))


def _f0(R, z):
    u = R * R + z * z
    return (
        z / math.sqrt(u),
        R * R / u ** 1.5,
        -3.0 * R * R * z / u ** 2.5,
        3.0 * R * R * (2.0 * z - R) * (2.0 * z + R) / u ** 3.5,
    )


def _f1(R, z):
    u = R * R + z * z
    z2 = z * z
    R2 = R * R
    return (
        z * R / u ** 1.5,
        R * (R2 - 2.0 * z2) / u ** 2.5,
        3.0 * R * z * (2.0 * z2 - 3.0 * R2) / u ** 3.5,
        -3.0 * R * (3.0 * R2 * R2 - 24.0 * R2 * z2 + 8.0 * z2 * z2) / u ** 4.5,
    )


def _f2(R, z):
    u = R * R + z * z
    z2 = z * z
    R2 = R * R
    return (
        z * (2.0 * R2 - z2) / u ** 2.5,
        (2.0 * R2 * R2 - 11.0 * R2 * z2 + 2.0 * z2 * z2) / u ** 3.5,
        -3.0 * z * (12.0 * R2 * R2 - 21.0 * R2 * z2 + 2.0 * z2 * z2) / u ** 4.5,
        3.0 * (-12.0 * R2 ** 3 + 159.0 * R2 * R2 * z2 - 136.0 * R2 * z2 * z2 + 8.0 * z2 ** 3) / u ** 5.5,
    )


def ring_axis_derivatives(z, geom: RingTrapGeometry, amps: GapAmplitudes = GapAmplitudes(),
                          interpolation=True):
    """On-axis potential and its first three z-derivatives, shape (4,).

    Includes the gapless annulus, the polarization term (prefactor
    pi g |z| / 4) and, unless ``interpolation`` is False, the g^2 |z| / 16
    interpolation term. Higher orders in g are not modelled.
    """
    z = float(z)
    if z == 0:
        raise DomainError("on-axis potential needs z != 0")
    sgn = np.array([1.0, math.copysign(1.0, z), 1.0, math.copysign(1.0, z)])
    za = abs(z)
    R1, R2, g = geom.R1, geom.R2, geom.g
    out = np.array(_f0(R1, za)) - np.array(_f0(R2, za))
    if g > 0:
        out += 0.25 * math.pi * g * (amps.alpha1 * np.array(_f1(R1, za)) + amps.alpha2 * np.array(_f1(R2, za)))
        if interpolation:
            out += g * g / 16.0 * (np.array(_f2(R1, za)) - np.array(_f2(R2, za)))
    return out * sgn


def ring_axis_potential(z, geom: RingTrapGeometry, amps: GapAmplitudes = GapAmplitudes(), order=0):
    if order not in (0, 1, 2, 3):
        raise DomainError("order must be 0..3")
    return float(ring_axis_derivatives(z, geom, amps)[order])


def pseudopotential(grad_scaled, ion: IonParameters):
    """Ponderomotive energy (J) for a scaled-potential gradient given in 1/m."""
    grad = np.atleast_1d(np.asarray(grad_scaled, dtype=float))
    return ion.prefactor * float(np.dot(grad, grad))


def kappa_from_d2(z, d2):
    """z^2 |det H|^{1/3} on the axis, where det H = (d2 Phi/dz2)^3 / 4."""
    return z * z * abs(d2) / _CBRT4


def curvature_kappa(geom: RingTrapGeometry, amps: GapAmplitudes, z, stationary_tol=1e-10):
    """Dimensionless curvature at an on-axis trap height z.

    z must be a stationary point: |dPhi/dz| * |z| <= ``stationary_tol``.
    """
    d = ring_axis_derivatives(z, geom, amps)
    if abs(d[1]) * abs(z) > stationary_tol:
        raise DomainError(f"z = {z} is not a stationary point (dPhi/dz = {d[1]:.3g})")
    return kappa_from_d2(z, d[2])


def _solve_outer(R1, z, g, susceptibility):
    """R2 making z stationary for given R1 (amplitudes re-solved each call)."""

    def geom_amps(R2):
        geom = RingTrapGeometry(R1, R2, g)
        return geom, solve_ring_alphas(geom).scaled(susceptibility)

    def slope(R2):
        geom, amps = geom_amps(R2)
        return ring_axis_derivatives(z, geom, amps)[1]

    lo = max(math.sqrt(2.0) * z, R1 + 1.01 * g)
    hi = 50.0 * z
    flo, fhi = slope(lo), slope(hi)
    if not (flo < 0 < fhi):
        raise ConvergenceError(f"no stationary outer radius for R1={R1}, g={g}, z={z}")
    R2 = optimize.brentq(slope, lo, hi, xtol=1e-15 * z, rtol=1e-15, maxiter=200)
    return geom_amps(R2)


def _kappa_of(R1, z, g, susceptibility):
    geom, amps = _solve_outer(R1, z, g, susceptibility)
    d2 = ring_axis_derivatives(z, geom, amps)[2]
    return kappa_from_d2(z, d2), geom, amps


@lru_cache(maxsize=None)
def _unit_gapless():
    rep = _optimize(0.0, 1.0, 1.0)
    return rep.R1, rep.R2, rep.kappa


def _optimize(g, z, susceptibility, xatol=1e-10):
    count = [0]

    def neg(R1):
        count[0] += 1
        return -_kappa_of(R1, z, g, susceptibility)[0]

    lo = max(0.05 * z, 0.5 * g * 1.02)
    hi = 1.35 * z
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                   options={"xatol": xatol * z, "maxiter": 500})
    if not res.success:
        raise ConvergenceError(f"ring optimisation failed: {res.message}", trace=res)
    R1 = float(res.x)
    if min(R1 - lo, hi - R1) < 1e-6 * z:
        raise ConvergenceError(f"optimum R1={R1} sits on the search bound", trace=res)
    kappa, geom, amps = _kappa_of(R1, z, g, susceptibility)
    return TrapReport(z=z, kappa=kappa, R1=geom.R1, R2=geom.R2, g=g, amplitudes=amps,
                      evaluations=count[0])


def optimize_ring(g, z=1.0, susceptibility=1.0, ion: Optional[IonParameters] = None):
    """Radii maximising the curvature at trap height z for gap width g.

    The stationarity constraint fixes R2 for each R1 (root of dPhi/dz = 0),
    and kappa is maximised over R1 with bounded Brent (golden section plus
    parabolic steps). ``susceptibility`` scales the solved amplitudes.
    Ratios in the report are relative to the gapless optimum.
    """
    if not (0 <= g < z):
        raise DomainError(f"need 0 <= g < z, got g={g}, z={z}")
    rep = _optimize(g, z, susceptibility)
    r1u, r2u, k0 = _unit_gapless()
    return replace(
        rep,
        prefactor=None if ion is None else ion.prefactor,
        R1_ratio=rep.R1 / (r1u * z),
        R2_ratio=rep.R2 / (r2u * z),
        kappa_ratio=rep.kappa / k0,
    )


def gap_sweep(gaps=GAP_SWEEP_GRID, z=1.0, susceptibility=1.0):
    """optimize_ring over a list of g/z values; failures come back as the exception."""
    out = []
    for gz in gaps:
        try:
            out.append(optimize_ring(gz * z, z, susceptibility))
        except (ConvergenceError, DomainError) as exc:
            out.append(exc)
    return out
