"""Adaptive 1D quadrature with breakpoint and edge-singularity handling.

Thin layer over :func:`scipy.integrate.quad`. Intervals ending at an inverse
square-root singularity are integrated after the substitution x = s +- t**2,
which turns the integrand into a bounded one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import QuadratureError

__all__ = ["QuadSettings", "DEFAULT_QUAD", "integrate_1d", "gauss_legendre"]


@dataclass(frozen=True)
class QuadSettings:
    epsabs: float = 1e-12
    epsrel: float = 1e-10
    limit: int = 200
    # an inner integral inside a nested quadrature uses this tolerance factor
    inner_factor: float = 0.1

    def inner(self):
        return QuadSettings(
            self.epsabs * self.inner_factor,
            self.epsrel * self.inner_factor,
            self.limit,
            self.inner_factor,
        )


DEFAULT_QUAD = QuadSettings()


def _quad(f, a, b, settings):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            f,
            a,
            b,
            epsabs=settings.epsabs,
            epsrel=settings.epsrel,
            limit=settings.limit,
            full_output=1,
        )
    tol = max(settings.epsabs, settings.epsrel * abs(val))
    if rest and err > 10.0 * tol:
        msg = rest[0] if isinstance(rest[0], str) else "quad failed"
        raise QuadratureError(
            f"quadrature on [{a}, {b}] missed tolerance {tol:.3g} "
            f"(estimate {err:.3g}): {msg.splitlines()[0]}",
            achieved=err,
        )
    return val, err


def _finite_piece(f, lo, hi, sing_lo, sing_hi, settings):
    if sing_lo and sing_hi:
        mid = 0.5 * (lo + hi)
        a = _finite_piece(f, lo, mid, True, False, settings)
        b = _finite_piece(f, mid, hi, False, True, settings)
        return a[0] + b[0], a[1] + b[1]
    if sing_lo:
        return _quad(lambda t: 2.0 * t * f(lo + t * t), 0.0, math.sqrt(hi - lo), settings)
    if sing_hi:
        return _quad(lambda t: 2.0 * t * f(hi - t * t), 0.0, math.sqrt(hi - lo), settings)
    return _quad(f, lo, hi, settings)


def integrate_1d(f, a, b, breaks=(), singular=(), settings=DEFAULT_QUAD, tail_scale=1.0):
    """Integrate scalar ``f`` over [a, b] (either end may be infinite).

    ``breaks`` are interior points of non-smoothness; ``singular`` are points
    (interior or endpoints) with an integrable |x - s|^{-1/2} singularity.
    Returns (value, error_estimate).
    """
    sing = sorted({float(s) for s in singular if a <= s <= b})
    pts = sorted({float(p) for p in breaks if a < p < b} | {s for s in sing if a < s < b})
    nodes = [a] + pts + [b]
    # keep singular points away from infinite pieces
    if math.isinf(b) and nodes[-2] in sing:
        nodes.insert(-1, nodes[-2] + max(tail_scale, abs(nodes[-2])))
    if math.isinf(a) and nodes[1] in sing:
        nodes.insert(1, nodes[1] - max(tail_scale, abs(nodes[1])))
    total = 0.0
    err = 0.0
    sset = set(sing)
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        if hi <= lo:
            continue
        if math.isinf(lo) or math.isinf(hi):
            v, e = _quad(f, lo, hi, settings)
        else:
            v, e = _finite_piece(f, lo, hi, lo in sset, hi in sset, settings)
        total += v
        err += e
    return total, err


def gauss_legendre(n, lo=-1.0, hi=1.0):
    """Gauss-Legendre nodes and weights mapped to [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w
