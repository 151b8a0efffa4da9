import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from surftrap.errors import ConfigurationError, DomainError, SingularityError
from surftrap.gap1d import gap_potential, phi_pol, pol_density, pol_potential, sigma_gap
from surftrap.kernel import (
    Point3,
    SurfaceChargeDensity,
    SurfacePotential,
    greens_function,
    numerical_laplacian,
    phi_to_sigma,
    propagate,
    sigma_split,
    sigma_to_phi,
    uniform_plane,
)


def unit_disc():
    return SurfacePotential(lambda r: 1.0 if r < 1.0 else 0.0, "axisymmetric", support=(0.0, 1.0),
                            breaks=(1.0,))


def square_pad(a):
    return SurfacePotential(lambda x, y: 1.0, "general", support=(-a, a, -a, a), scale=a)


def test_greens_values():
    assert greens_function((0, 0, 1)) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)
    assert greens_function((3, 4, 12)) == pytest.approx(12.0 / (2.0 * math.pi * 13.0 ** 3), rel=1e-14)
    assert greens_function((1.0, 2.0, 0.0)) == 0.0
    with pytest.raises(SingularityError):
        greens_function((0, 0, 0))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 5))
def test_greens_mirror_symmetry(x, y, z):
    assert greens_function((x, y, z)) == greens_function((x, y, -z))


def test_greens_normalization():
    # int G dA over the plane is 1 at any height
    for z in (0.1, 1.0, 7.0):
        assert propagate(uniform_plane(1.0), Point3(0.3, -0.2, z)) == 1.0
        val = propagate(SurfacePotential(lambda r: 1.0, "axisymmetric", support=(0.0, 1e4 * z)),
                        Point3(0.0, 0.0, z))
        assert val == pytest.approx(1.0 - 1e-4, rel=1e-8)


@pytest.mark.parametrize("z", [0.1, 0.5, 1.0, 3.0])
def test_unit_disc_on_axis(z):
    assert propagate(unit_disc(), Point3(0.0, 0.0, z)) == pytest.approx(1.0 - z / math.sqrt(1.0 + z * z), rel=1e-10)


def test_unit_disc_off_axis_against_general():
    # the same disc through the general (ray) quadrature
    disc = SurfacePotential(lambda x, y: 1.0 if x * x + y * y < 1.0 else 0.0, "general",
                            support=(-1.0, 1.0, -1.0, 1.0),
                            ray_breaks=lambda x, y, t: _circle_hits(x, y, t))
    for p in [(0.3, 0.2, 0.5), (1.2, -0.4, 0.8)]:
        assert propagate(disc, Point3(*p)) == pytest.approx(propagate(unit_disc(), Point3(*p)), rel=1e-8)


def _circle_hits(x, y, t):
    c, s = math.cos(t), math.sin(t)
    b = x * c + y * s
    disc = b * b - (x * x + y * y - 1.0)
    if disc < 0:
        return ()
    sq = math.sqrt(disc)
    return tuple(r for r in (-b - sq, -b + sq) if r > 0)


@pytest.mark.parametrize("z", [0.2, 1.0, 2.5])
def test_square_pad_on_axis(z):
    a = 0.7
    ref = 2.0 / math.pi * math.atan(a * a / (z * math.sqrt(2.0 * a * a + z * z)))
    assert propagate(square_pad(a), Point3(0.0, 0.0, z)) == pytest.approx(ref, rel=1e-9)


def test_propagate_mirror_symmetry():
    phi = gap_potential(1.0)
    for x, z in [(0.2, 0.3), (-1.5, 2.0)]:
        assert propagate(phi, Point3(x, 0.0, z)) == propagate(phi, Point3(x, 0.0, -z))
    assert propagate(unit_disc(), Point3(0.4, 0.1, 0.6)) == propagate(unit_disc(), Point3(0.4, 0.1, -0.6))


def test_propagate_laplace_residual():
    f = lambda x, y, z: propagate(unit_disc(), Point3(x, y, z))
    p = (0.4, 0.2, 0.7)
    r1 = numerical_laplacian(f, p, 0.04)
    r2 = numerical_laplacian(f, p, 0.02)
    assert abs(r2) < 0.3 * abs(r1)
    assert abs(r2) < 1e-3


def test_propagate_errors():
    with pytest.raises(DomainError):
        propagate(unit_disc(), Point3(0.0, 0.0, 0.0))
    with pytest.raises(ConfigurationError):
        propagate(SurfacePotential(lambda x: x, "translation"), Point3(0.0, 0.0, 1.0))
    with pytest.raises(ConfigurationError):
        SurfacePotential(lambda x: x, "helical")
    with pytest.raises(DomainError):
        numerical_laplacian(lambda x, y, z: 0.0, (0, 0, 0.01), 0.01)


@pytest.mark.parametrize("g", [1.0, 0.2])
def test_gap_sigma_outside(g):
    # sigma of the interpolation profile on the electrode at x = g
    ref = 4.0 / (math.pi * math.sqrt(3.0) * g)
    assert sigma_gap(g, g) == pytest.approx(ref, rel=1e-14)
    assert phi_to_sigma(gap_potential(g), g) == pytest.approx(ref, rel=1e-6)
    assert phi_to_sigma(gap_potential(g), -1.7 * g) == pytest.approx(sigma_gap(-1.7 * g, g), rel=1e-6)


def test_gap_sigma_inside_zero():
    g = 1.0
    for x in (0.0, 0.2, -0.35):
        assert abs(phi_to_sigma(gap_potential(g), x)) < 1e-6


def test_pol_sigma_inside():
    g = 0.5
    for x in (0.0, 0.1):
        assert phi_to_sigma(pol_potential(g), x) == pytest.approx(4.0 / g, rel=1e-6)


def test_d_halving_stability():
    phi = gap_potential(1.0)
    for x in (0.8, 1.5, -2.0):
        s1 = sigma_split(phi, x, d=1e-3)
        s2 = sigma_split(phi, x, d=5e-4)
        assert abs(s1 - s2) < 1e-6 * abs(s2)
    _, disc = phi_to_sigma(unit_disc(), 0.5, full_output=True)
    assert disc < 1e-6


def _disc_sigma_oracle(r):
    # -(1/pi) int (phi(q) - phi(p)) / |q - p|^3 dA done in polar coordinates about p
    if r < 1.0:
        def f(t):
            return 1.0 / (-r * math.cos(t) + math.sqrt(1.0 - (r * math.sin(t)) ** 2))

        return integrate.quad(f, 0.0, 2.0 * math.pi, epsabs=0, epsrel=1e-12)[0] / math.pi
    tmax = math.asin(1.0 / r)

    def f(t):
        b = r * math.cos(t)
        sq = math.sqrt(1.0 - (r * math.sin(t)) ** 2)
        return 1.0 / (b - sq) - 1.0 / (b + sq)

    return -2.0 * integrate.quad(f, 0.0, tmax, epsabs=0, epsrel=1e-12)[0] / math.pi


@pytest.mark.parametrize("r", [0.0, 0.5, 1.5, 3.0])
def test_disc_sigma_against_polar_oracle(r):
    ref = _disc_sigma_oracle(r)
    if r == 0.0:
        assert ref == pytest.approx(2.0, rel=1e-12)
    assert phi_to_sigma(unit_disc(), r) == pytest.approx(ref, rel=1e-6)


def test_round_trip_pol():
    g = 1.0
    sig = pol_density(g)
    for x in (0.0, 0.3, 0.45, 0.8, 2.0):
        assert sigma_to_phi(sig, x) == pytest.approx(phi_pol(x, g), abs=1e-8)


def test_sigma_to_phi_needs_support():
    with pytest.raises(ConfigurationError):
        sigma_to_phi(SurfaceChargeDensity(lambda x: 0.0, "translation"), 0.0)
    assert sigma_to_phi(SurfaceChargeDensity(lambda x: 0.0, "translation", support="empty"), 0.0, phi0=2.0) == 2.0


def test_sigma_to_phi_uniform_square():
    a = 0.5
    sig = SurfaceChargeDensity(lambda x, y: 1.0, "general", support=(-a, a, -a, a), scale=a)
    # centre of a uniformly charged square of side 2a: (1/4 pi) 8 a asinh(1)
    ref = 8.0 * a * math.asinh(1.0) / (4.0 * math.pi)
    assert sigma_to_phi(sig, 0.0, 0.0) == pytest.approx(ref, rel=1e-8)
    # far field: monopole 4a^2 plus the in-plane quadrupole Q_xx = int (2x^2 - y^2) dA = 4a^4/3
    r = 20.0
    ref = (4.0 * a * a / r + 4.0 * a ** 4 / 3.0 / (2.0 * r ** 3)) / (4.0 * math.pi)
    assert sigma_to_phi(sig, r, 0.0) == pytest.approx(ref, rel=1e-6)
    # outside the box on a diagonal ray (enters and leaves the support)
    assert sigma_to_phi(sig, 3.0, 2.0) == pytest.approx(
        _square_potential_oracle(a, 3.0, 2.0), rel=1e-8)


def _square_potential_oracle(a, x, y):
    # (1/4 pi) int dA / |r - r'| with the inner integral in closed form (asinh)
    def inner(xp):
        dx = abs(x - xp)
        return math.asinh((a - y) / dx) - math.asinh((-a - y) / dx)

    return integrate.quad(inner, -a, a, epsabs=0, epsrel=1e-12)[0] / (4.0 * math.pi)
