"""Electrodes on a finite grounded disc of radius S surrounded by vacuum.

A point-like potential "pixel" on the disc induces a charge density that
extends past the disc edge. Multipole compensation densities null that
charge for r >= S while leaving the in-plane potential on the disc
untouched, which gives a modified Green's function valid for r^2 + z^2 < S^2.
On the axis, a gapless ring on the disc has a double-series potential whose
inner sum reduces to Gauss hypergeometric functions.

Charge densities are sigma / eps0 and potentials follow
phi = (1/4 pi) int sigma/eps0 / |r - r'| dA'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError, SeriesError
from .kernel import Point3
from .ringtrap import TrapReport, _unit_gapless, kappa_from_d2
from .specfun import DEFAULT_SERIES, SeriesControl, hyp2f1, hyp2f1_re_gt1, pochhammer

__all__ = [
    "FiniteDiscSpec",
    "MultipoleIndex",
    "pixel_coefficient",
    "pixel_sigma_closed",
    "pixel_sigma_multipole",
    "compensation_sigma",
    "compensation_phi",
    "compensation_field_series",
    "free_greens_cyl",
    "modified_greens",
    "large_s_greens",
    "ring_on_disc_axis_derivatives",
    "ring_on_disc_axis_potential",
    "optimize_ring_on_disc",
    "disc_sweep",
    "DISC_SWEEP_GRID",
]

DISC_SWEEP_GRID = tuple(round(0.025 * k, 3) for k in range(1, 13))


@dataclass(frozen=True)
class FiniteDiscSpec:
    """Disc radius S and the fraction of S inside which series are evaluated."""

    S: float
    margin: float = 0.9

    def __post_init__(self):
        if not self.S > 0:
            raise DomainError(f"disc radius must be positive, got {self.S}")
        if not (0 < self.margin < 1):
            raise DomainError(f"margin must lie in (0, 1), got {self.margin}")

    def check(self, r, z):
        if r * r + z * z > (self.margin * self.S) ** 2:
            raise DomainError(
                f"point (r={r}, z={z}) lies outside the convergence margin "
                f"{self.margin} S = {self.margin * self.S}"
            )


@dataclass(frozen=True)
class MultipoleIndex:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise DomainError(f"m must be a non-negative integer, got {self.m}")
        if int(self.n) != self.n or self.n < self.m + 3 or (self.n - self.m) % 2 == 0:
            raise DomainError(f"n must be m+3, m+5, ..., got m={self.m}, n={self.n}")


def _disc(S, margin=0.9):
    return S if isinstance(S, FiniteDiscSpec) else FiniteDiscSpec(float(S), margin)


# --- pixel multipole expansion ---


def pixel_coefficient(m, n):
    """Weight 2^{3 - delta_m0} ((n-m-1)/2)_{1/2} ((n+m-1)/2)_{1/2} / pi^2."""
    w = 4.0 if m == 0 else 8.0
    return w * pochhammer(0.5 * (n - m - 1), 0.5) * pochhammer(0.5 * (n + m - 1), 0.5) / math.pi ** 2


def pixel_sigma_closed(rho, r, theta):
    """sigma/eps0 of the unit pixel at (rho, 0), evaluated at (r, theta) != pixel."""
    d2 = rho * rho + r * r - 2.0 * rho * r * math.cos(theta)
    if d2 <= 0:
        raise DomainError("pixel charge evaluated at the pixel itself")
    return -1.0 / (math.pi * d2 ** 1.5)


def _log_pixel_coeff(m, n):
    """log of pixel_coefficient for arrays m, n (m broadcast)."""
    a = 0.5 * (n - m - 1)
    b = 0.5 * (n + m - 1)
    lw = np.where(m == 0, math.log(4.0), math.log(8.0))
    return lw + gammaln(a + 0.5) - gammaln(a) + gammaln(b + 0.5) - gammaln(b) - 2.0 * math.log(math.pi)


def pixel_sigma_multipole(rho, r, theta, truncation: SeriesControl = DEFAULT_SERIES):
    """Multipole partial sums of the pixel charge for r > rho.

    Summed in m shells; within a shell over n = m+3, m+5, ... Each sum stops
    once its geometric tail bound drops below ``rel_tol`` of the running
    total (using |cos| <= 1), or raises SeriesError at ``max_terms``.
    """
    rho, r, theta = float(rho), float(r), float(theta)
    if not rho > 0:
        raise DomainError("pixel radius must be positive")
    if not r > rho:
        raise DomainError(f"multipole expansion needs r > rho, got r={r}, rho={rho}")
    x = rho / r
    # stopping tests compare against the theta = 0 sum (all shells added); the
    # value itself can be smaller by up to ((r - rho) / (r + rho))^3 (theta = pi)
    tol = truncation.rel_tol * ((r - rho) / (r + rho)) ** 3
    nmax = truncation.max_terms
    total = 0.0
    bound = 0.0
    for m in range(nmax):
        ls = np.arange(nmax)
        n = m + 3 + 2 * ls
        # magnitude of terms, each c rho^{n-3} / r^n, built in log space
        logt = _log_pixel_coeff(np.full_like(n, m), n) + (n - 3) * math.log(rho) - n * math.log(r)
        t = np.exp(logt)
        # stop where the remainder bound (ratio x^2 per step) is small
        tail = t * x * x / (1.0 - x * x)
        cum = np.cumsum(t)
        ok = np.nonzero(tail <= tol * 0.1 * np.maximum(cum, 1e-300))[0]
        if ok.size == 0:
            raise SeriesError(f"pixel multipole shell m={m} did not converge in {nmax} terms")
        k = ok[0] + 1
        shell = float(cum[k - 1])
        total += math.cos(m * theta) * shell
        bound += shell
        # next shells are smaller by at least x each
        if shell * x / (1.0 - x) <= tol * 0.1 * bound:
            return -total
    raise SeriesError(f"pixel multipole sum over m did not converge in {nmax} shells")


# --- compensation densities ---


def compensation_sigma(idx: MultipoleIndex, S, r, theta=0.0):
    """Compensation density: cos(m theta)/r^n outside the disc, hypergeometric inside.

    Infinite as r -> S from inside (inverse square root edge singularity).
    """
    m, n = idx.m, idx.n
    S = _disc(S).S
    r = float(r)
    if r < 0:
        raise DomainError("radius must be non-negative")
    ang = math.cos(m * theta)
    if r >= S:
        return ang / r ** n
    pre = -pochhammer(0.5 * (n + m + 2), -1.5) / (2.0 * math.sqrt(math.pi))
    # r^{n+m} / (S^{n+m} r^n) written without the 0/0 at r = 0
    radial = (r ** m if m else 1.0) / S ** (n + m)
    return ang * pre * radial * hyp2f1(1.5, 0.5 * (n + m), 0.5 * (n + m + 2), (r / S) ** 2)


def compensation_phi(idx: MultipoleIndex, S, r, theta=0.0):
    """In-plane potential of the compensation density: zero on the disc."""
    m, n = idx.m, idx.n
    S = _disc(S).S
    r = float(r)
    if r < 0:
        raise DomainError("radius must be non-negative")
    if r <= S:
        return 0.0
    pre = -2.0 * math.sqrt(math.pi) * pochhammer(0.5 * (n + m), -0.5) / (S ** n * (n - m - 1))
    f = hyp2f1_re_gt1(1.0, 0.5 * (n - m), 0.5 * (n - m + 1), (r / S) ** 2)
    return math.cos(m * theta) * pre * math.sqrt(r * r - S * S) / (r / S) ** m * f / (4.0 * math.pi)


def _jk_block(m, b, c, nj, nk):
    """Signed magnitudes of the (j, k) terms shared by the compensation series.

    Returns an (nj, nk) array of
    (-4)^k (j+1)_{k+1/2} (j+m+1)_k b^{2j} c^{2k} / (1+2k)!
    (the b^m, c and denominators are applied by the callers).
    """
    j = np.arange(nj)[:, None].astype(float)
    k = np.arange(nk)[None, :].astype(float)
    logt = (
        gammaln(j + k + 1.5) - gammaln(j + 1.0)
        + gammaln(j + m + 1.0 + k) - gammaln(j + m + 1.0)
        + k * math.log(4.0) - gammaln(2.0 * k + 2.0)
    )
    if b > 0:
        logt = logt + 2.0 * j * math.log(b)
    else:
        logt = np.where(j == 0, logt, -np.inf)
    if c > 0:
        logt = logt + 2.0 * k * math.log(c)
    else:
        logt = np.where(k == 0, logt, -np.inf)
    sign = np.where(k.astype(int) % 2 == 0, 1.0, -1.0)
    return sign * np.exp(logt)


def _tail_ok(block, total, tol):
    edge = np.abs(block[-1, :]).sum() + np.abs(block[:, -1]).sum()
    return edge <= tol * max(abs(total), np.abs(block).sum() * 1e-300, 1e-300)


def compensation_field_series(idx: MultipoleIndex, S, p, truncation: SeriesControl = DEFAULT_SERIES,
                              margin=0.9):
    """3D potential of a compensation density inside r^2 + z^2 < S^2.

    p is (r, theta, z) in cylindrical coordinates. The (j, k) block is grown
    until its outer edge is below ``rel_tol`` of the total.
    """
    disc = _disc(S, margin)
    S = disc.S
    r, theta, z = (float(v) for v in p)
    disc.check(r, z)
    m, n = idx.m, idx.n
    if z == 0.0:
        return 0.0
    b, c = r / S, abs(z) / S
    size = 32
    while True:
        blk = _jk_block(m, b, c, size, size)
        j = np.arange(size)[:, None]
        k = np.arange(size)[None, :]
        terms = blk / (n + m + 2.0 * (j + k))
        total = float(terms.sum())
        if _tail_ok(terms, total, truncation.rel_tol):
            break
        size *= 2
        if size > truncation.max_terms:
            raise SeriesError(f"compensation series ({m},{n}) not converged at p={p}")
    # (-4)^{k+1} = -4 (-4)^k; the leading minus sign of the series cancels it
    pref = 4.0 * pochhammer(0.5 * (n + m), -0.5) / (4.0 * math.pi * S ** (n - 1))
    radial = b ** m if m else 1.0
    return math.cos(m * theta) * pref * radial * c * total


# --- modified Green's function ---


def free_greens_cyl(rho, p):
    r, theta, z = (float(v) for v in p)
    d2 = rho * rho + r * r + z * z - 2.0 * rho * r * math.cos(theta)
    if d2 == 0.0:
        raise DomainError("Green's function evaluated at the source")
    return abs(z) / (2.0 * math.pi * d2 ** 1.5)


def _greens_correction(rho, S, r, theta, z, truncation):
    a, b, c = rho / S, r / S, abs(z) / S
    tol = truncation.rel_tol
    if c == 0.0:
        return 0.0
    total = 0.0
    bound = 0.0
    ni = 32
    njk = 32
    for m in range(truncation.max_terms):
        while True:
            blk = _jk_block(m, b, c, njk, njk)
            if _tail_ok(blk, blk.sum(), tol) or njk >= truncation.max_terms:
                break
            njk *= 2
        if not _tail_ok(blk, blk.sum(), tol):
            raise SeriesError("Green's correction (j, k) block did not converge")
        # i-weights (i+1)_{1/2} a^{2i}; the denominator couples i with j+k+m
        while True:
            i = np.arange(ni, dtype=float)
            if a > 0:
                wi = np.exp(gammaln(i + 1.5) - gammaln(i + 1.0) + 2.0 * i * math.log(a))
            else:
                wi = np.where(i == 0, math.exp(gammaln(1.5)), 0.0)
            if wi[-1] <= tol * 1e-2 * wi.sum() or ni >= truncation.max_terms:
                break
            ni *= 2
        if wi[-1] > tol * 1e-2 * wi.sum():
            raise SeriesError("Green's correction i sum did not converge")
        q = m + np.arange(njk)[:, None] + np.arange(njk)[None, :]
        # sum_i wi / (3 + 2(i + q)) for every q
        qs = np.arange(int(q.max()) + 1)
        denom = 3.0 + 2.0 * (i[None, :] + qs[:, None])
        iw = (wi[None, :] / denom).sum(axis=1)
        shell = float((blk * iw[q]).sum())
        scale_m = (2.0 if m == 0 else 4.0) * (a * b) ** m
        contrib = scale_m * shell
        total += math.cos(m * theta) * contrib
        bound += abs(contrib)
        if m > 2 and abs(contrib) * 10.0 <= tol * bound and (a * b) < 1.0:
            break
        if a * b == 0.0:
            break
    else:
        raise SeriesError("Green's correction m sum did not converge")
    return 2.0 * c * total / (math.pi ** 3 * S * S)


def modified_greens(rho, S, p, truncation: SeriesControl = DEFAULT_SERIES, margin=0.9):
    """Green's function of a unit potential pixel at (rho, 0) on the finite disc.

    p = (r, theta, z). Free-space term plus the compensation correction,
    summed directly over (i, j, k, m).
    """
    disc = _disc(S, margin)
    S = disc.S
    rho = float(rho)
    if not (0 < rho < S):
        raise DomainError(f"pixel radius must lie in (0, S), got {rho}")
    r, theta, z = (float(v) for v in p)
    disc.check(r, z)
    return free_greens_cyl(rho, (r, theta, z)) + _greens_correction(rho, S, r, theta, z, truncation)


def large_s_greens(p_cart, S):
    """Free-space Green's function plus the uniform |z| / (3 pi^2 S^3) correction."""
    x, y, z = (float(v) for v in p_cart)
    d2 = x * x + y * y + z * z
    return abs(z) / (2.0 * math.pi * d2 ** 1.5) + abs(z) / (3.0 * math.pi ** 2 * S ** 3)


# --- ring on the disc, on the axis ---


def _powder(q, order):
    """order-th derivative coefficient of z^q: q (q-1) ... (q-order+1)."""
    out = 1.0
    for t in range(order):
        out *= q - t
    return out


def _axis_series_coeffs(R1, R2, S, kmax, truncation, method):
    """Coefficients C_k multiplying (|z|/S)^{1+2k} in the finite-disc correction."""
    x1, x2 = (R1 / S) ** 2, (R2 / S) ** 2
    if method == "hypergeometric":
        ks = np.arange(kmax)
        out = np.empty(kmax)
        for k in ks:
            f2 = hyp2f1(0.5, k + 0.5, k + 1.5, x2, truncation)
            f1 = hyp2f1(0.5, k + 0.5, k + 1.5, x1, truncation)
            out[k] = (-1.0) ** k * (f2 - f1) / ((k + 0.5) * math.pi)
        return out
    # direct double series over (i, k)
    ni = 64
    while True:
        i = np.arange(ni, dtype=float)[:, None]
        k = np.arange(kmax, dtype=float)[None, :]
        # 1 / (pi^{3/2} (i+3/2)_{1/2}) = Gamma(i+3/2) / (pi^{3/2} (i+1)!)
        lw = gammaln(i + 1.5) - gammaln(i + 2.0) - 1.5 * math.log(math.pi)
        p2 = np.exp(lw + (1.0 + i) * math.log(x2)) if x2 > 0 else 0.0 * i
        p1 = np.exp(lw + (1.0 + i) * math.log(x1)) if x1 > 0 else 0.0 * i
        terms = (p2 - p1) / (1.5 + i + k)
        last = np.abs(terms[-1, :]).max()
        if last * x2 / max(1.0 - x2, 1e-300) <= truncation.rel_tol * np.abs(terms.sum(axis=0)).max():
            break
        ni *= 2
        if ni > truncation.max_terms:
            raise SeriesError("ring-on-disc i sum did not converge; use method='hypergeometric'")
    sign = np.where(np.arange(kmax) % 2 == 0, 1.0, -1.0)
    return sign * terms.sum(axis=0)


def ring_on_disc_axis_derivatives(z, R1, R2, S, truncation: SeriesControl = DEFAULT_SERIES,
                                  method="auto", margin=0.9):
    """On-axis potential of a gapless ring R1 < R2 <= S on the disc, and z-derivatives 1..3.

    ``method`` picks the inner i-sum: "series" sums it directly (slow when
    R2 approaches S), "hypergeometric" uses its closed form via 2F1(1/2,
    k+1/2; k+3/2; (R/S)^2), which stays finite at R2 = S. "auto" uses the
    series for R2 <= 0.9 S.
    """
    disc = _disc(S, margin)
    S = disc.S
    z = float(z)
    if not (0 < R1 < R2 <= S):
        raise DomainError(f"need 0 < R1 < R2 <= S, got R1={R1}, R2={R2}, S={S}")
    if z == 0:
        raise DomainError("on-axis potential needs z != 0")
    disc.check(0.0, z)
    if method == "auto":
        method = "series" if R2 <= 0.9 * S else "hypergeometric"
    if method not in ("series", "hypergeometric"):
        raise DomainError(f"unknown method {method!r}")
    za = abs(z)
    c = za / S
    # k terms shrink like c^{2k}
    kmax = int(math.ceil(math.log(truncation.rel_tol * 1e-2) / (2.0 * math.log(c)))) + 4 if c > 0 else 1
    if kmax > truncation.max_terms:
        raise SeriesError(f"k sum needs {kmax} terms at z/S = {c}")
    coeff = _axis_series_coeffs(R1, R2, S, kmax, truncation, method)
    out = np.zeros(4)
    for order in range(4):
        q = 1.0 + 2.0 * np.arange(kmax)
        powd = np.array([_powder(qq, order) for qq in q])
        out[order] = float((coeff * powd * c ** (q - order)).sum()) / S ** order
    for R, sgn in ((R1, 1.0), (R2, -1.0)):
        u = R * R + za * za
        out += sgn * np.array([
            za / math.sqrt(u),
            R * R / u ** 1.5,
            -3.0 * R * R * za / u ** 2.5,
            3.0 * R * R * (2.0 * za - R) * (2.0 * za + R) / u ** 3.5,
        ])
    if z < 0:
        out *= np.array([1.0, -1.0, 1.0, -1.0])
    return out


def ring_on_disc_axis_potential(z, R1, R2, S, truncation: SeriesControl = DEFAULT_SERIES,
                                method="auto", order=0):
    if order not in (0, 1, 2, 3):
        raise DomainError("order must be 0..3")
    return float(ring_on_disc_axis_derivatives(z, R1, R2, S, truncation, method)[order])


def _r2_on_disc(R1, z, S, truncation, method):
    def slope(R2):
        return ring_on_disc_axis_derivatives(z, R1, R2, S, truncation, method)[1]

    lo = max(math.sqrt(2.0) * z, R1 * 1.0001)
    hi = S
    if lo >= hi:
        return None
    flo, fhi = slope(lo), slope(hi)
    if not flo < 0:
        return None
    if fhi < 0:
        return None
    return optimize.brentq(slope, lo, hi, xtol=1e-15 * z, rtol=1e-15, maxiter=200)


def optimize_ring_on_disc(S, z=1.0, truncation: SeriesControl = DEFAULT_SERIES, method="auto",
                          xatol=1e-10):
    """Radii maximising the on-axis curvature of a gapless ring on a disc of radius S.

    As for the infinite plane, R2 is fixed by dPhi/dz = 0 for each R1 and
    kappa is maximised over R1. The ring must fit on the disc, R2 <= S; when
    the unconstrained optimum would need R2 > S the optimum sits on that
    boundary (R2 = S). Ratios are relative to the infinite-plane optimum.
    """
    S = _disc(S).S
    if not (0 < z < 0.5 * S):
        raise DomainError(f"need 0 < z < S/2, got z={z}, S={S}")
    r1u, r2u, k0 = _unit_gapless()
    count = [0]

    def kappa(R1):
        count[0] += 1
        R2 = _r2_on_disc(R1, z, S, truncation, method)
        if R2 is None:
            raise ConvergenceError(f"no stationary R2 <= S for R1={R1}")
        d2 = ring_on_disc_axis_derivatives(z, R1, R2, S, truncation, method)[2]
        return kappa_from_d2(z, d2), R2

    lo, hi = 0.05 * z, 1.35 * z
    # R2(R1) decreases with R1, so R2 <= S cuts off small R1
    if _r2_on_disc(lo, z, S, truncation, method) is None:
        def edge(R1):
            return ring_on_disc_axis_derivatives(z, R1, S, S, truncation, method)[1]

        if not edge(hi) > 0 > edge(lo):
            raise ConvergenceError(f"cannot bracket the R2 = S boundary for S={S}, z={z}")
        lo = optimize.brentq(edge, lo, hi, xtol=1e-14 * z) * (1.0 + 1e-12)
        on_edge_allowed = True
    else:
        on_edge_allowed = False
    res = optimize.minimize_scalar(lambda R1: -kappa(R1)[0], bounds=(lo, hi), method="bounded",
                                   options={"xatol": xatol * z, "maxiter": 500})
    if not res.success:
        raise ConvergenceError(f"disc optimisation failed: {res.message}", trace=res)
    R1 = float(res.x)
    if R1 - lo < 1e-6 * z:
        if not on_edge_allowed:
            raise ConvergenceError(f"optimum R1={R1} on the search bound", trace=res)
        R1 = lo
    if hi - R1 < 1e-6 * z:
        raise ConvergenceError(f"optimum R1={R1} on the search bound", trace=res)
    k, R2 = kappa(R1)
    return TrapReport(z=z, kappa=k, R1=R1, R2=R2, S=S,
                      R1_ratio=R1 / (r1u * z), R2_ratio=R2 / (r2u * z), kappa_ratio=k / k0,
                      evaluations=count[0])


def disc_sweep(z_over_s=DISC_SWEEP_GRID, z=1.0, truncation: SeriesControl = DEFAULT_SERIES):
    out = []
    for t in z_over_s:
        try:
            out.append(optimize_ring_on_disc(z / t, z, truncation))
        except (ConvergenceError, DomainError, SeriesError) as exc:
            out.append(exc)
    return out
