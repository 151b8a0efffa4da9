"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest

from surftrap.finiteplane import (
    DISC_SWEEP_GRID,
    MultipoleIndex,
    compensation_sigma,
    disc_sweep,
    free_greens_cyl,
    modified_greens,
    pixel_sigma_closed,
    pixel_sigma_multipole,
)
from surftrap.gap1d import (
    field_gap,
    field_pol,
    gap_potential,
    pol_potential,
    strip_far_field,
    strip_far_prefactor,
    strip_potential,
)
from surftrap.gapsolver import center_sigma, circle_curve, line_curve, sigma_at, solve_alphas
from surftrap.kernel import (
    Point3,
    SurfaceChargeDensity,
    greens_function,
    numerical_laplacian,
    phi_to_sigma,
    propagate,
    sigma_split,
    sigma_to_phi,
)
from surftrap.oracle import run_suite
from surftrap.ringtrap import (
    GAP_SWEEP_GRID,
    GapAmplitudes,
    RingTrapGeometry,
    gap_sweep,
    optimize_ring,
    ring_potential,
    solve_ring_alphas,
)
from surftrap.specfun import SeriesControl, elliptic_e, elliptic_k

RF = {"rf": 1.0}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def test_criterion_1_gapless_optimum(report):
    t0 = time.perf_counter()
    rep = optimize_ring(0.0, 1.0)
    dt = time.perf_counter() - t0
    ok = abs(rep.R1 - 0.678) <= 0.002 and dt < 10.0
    assert report(1, ok, f"R1={rep.R1:.6f} (0.678 +- 0.002), {dt:.2f} s (< 10 s)")


def test_criterion_2_strip_far_field(report):
    w = 1.0
    g = 0.5 * w
    approx = strip_far_prefactor(w, g, exact=False)
    r = 30.0 * w
    phi = strip_potential(w, g)
    errs = []
    for th in np.linspace(-1.2, 1.2, 7):
        ref = propagate(phi, Point3(r * math.sin(th), 0.0, r * math.cos(th)))
        errs.append(abs(strip_far_field(r, th, w, g) - ref) / abs(ref))
    ok = approx == 0.9375 and max(errs) < 1e-2
    assert report(2, ok, f"approximate prefactor={approx!r} (0.9375), exact prefactor="
                          f"{strip_far_prefactor(w, g):.6f}, max rel err vs kernel at r=30w {max(errs):.2e} (< 1e-2)")


def test_criterion_3_gap_sweep(report):
    t0 = time.perf_counter()
    reps = gap_sweep(GAP_SWEEP_GRID)
    dt = time.perf_counter() - t0
    k = [r.kappa_ratio for r in reps]
    mono = all(b <= a for a, b in zip(k, k[1:]))
    ok = len(reps) == 11 and mono and all(0.90 <= v <= 1.0 for v in k) and dt < 300.0
    assert report(3, ok, f"{len(reps)} points, kappa ratios {k[0]:.5f}..{k[-1]:.5f}, "
                          f"non-increasing={mono}, {dt:.1f} s (< 300 s)")


def test_criterion_4_finite_plane_sweep(report):
    t0 = time.perf_counter()
    reps = disc_sweep(DISC_SWEEP_GRID)
    dt = time.perf_counter() - t0
    failed = [r for r in reps if isinstance(r, Exception)]
    good = [r for r in reps if not isinstance(r, Exception)]
    in_range = all(0.90 <= r.kappa_ratio <= 1.0 for r in good)
    outer = all(abs(r.R2_ratio - 1.0) > abs(r.R1_ratio - 1.0) for r in good)
    ok = not failed and in_range and outer and dt < 600.0
    kmin = min((r.kappa_ratio for r in good), default=float("nan"))
    assert report(4, ok, f"{len(good)}/{len(reps)} points solved, min kappa ratio {kmin:.5f} (>= 0.90), "
                          f"outer deviation larger everywhere={outer}, {dt:.1f} s (< 600 s)")


def test_criterion_5_oracle_equivalence(report):
    res = {r.name: r for r in run_suite("all")}
    gap, pol, ring, pix = res["gap-field"], res["pol-field"], res["ring-axis"], res["finite-pixel"]
    ok = (gap.count == 50 and gap.max_err < 1e-4 and pol.count == 50 and pol.max_err < 1e-4
          and ring.passed and pix.count == 20 and pix.max_err < 1e-5)
    assert report(5, ok, f"gap max rel {gap.max_err:.1e}, pol max rel {pol.max_err:.1e} (< 1e-4, 50 pts); "
                          f"ring axis {ring.note} (>= {ring.tol}); finite pixel max rel {pix.max_err:.1e} "
                          f"(< 1e-5, 20 pts)")


def _ring_residuals(n=128, g=0.05):
    curves = [circle_curve(1.0, g, n=n, clockwise=True, name="inner"), circle_curve(2.0, g, n=n, name="outer")]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_alphas(RF, curves, full_output=True)
    resid = np.abs(center_sigma(RF, sol.curves))
    rs = np.linspace(1.0 + 0.6 * g, 2.0 - 0.6 * g, 9)
    th = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    pts = [[r * math.cos(t), r * math.sin(t)] for r in rs for t in th]
    electrode = np.median(np.abs(sigma_at(RF, sol.curves, pts)))
    # independent check: the kernel acting on the ring with the solved (mean) amplitudes
    amps = GapAmplitudes(float(np.mean(sol.curves[0].alpha)), float(np.mean(sol.curves[1].alpha)))
    phi = ring_potential(RingTrapGeometry(1.0, 2.0, g), amps)
    kernel = max(abs(phi_to_sigma(phi, r, check_tol=None)) for r in (1.0, 2.0))
    return resid.max(), kernel, electrode


def _strip_residuals(n=8, w=1.0, g=0.2):
    h = 0.5 * w
    curves = [line_curve((h, -2.0), (h, 2.0), g, n=n, name="right"),
              line_curve((-h, 2.0), (-h, -2.0), g, n=n, name="left")]
    sol = solve_alphas(RF, curves, full_output=True)
    resid = np.abs(center_sigma(RF, sol.curves))
    pts = [[x, y] for x in np.linspace(-0.35, 0.35, 5) for y in (-0.5, 0.0, 0.5)]
    pts += [[s * x, 0.0] for s in (-1, 1) for x in (0.7, 1.0, 1.5)]
    electrode = np.median(np.abs(sigma_at(RF, sol.curves, pts)))
    phi = strip_potential(w, g, alpha=float(np.mean(sol.curves[0].alpha)))
    kernel = max(abs(phi_to_sigma(phi, x)) for x in (-h, h))
    return resid.max(), kernel, electrode


def test_criterion_6_charge_nulling(report):
    ring = _ring_residuals()
    strip = _strip_residuals()
    ok = all(max(res, ker) < 1e-4 * med for res, ker, med in (ring, strip))
    assert report(6, ok, "ring n=128 g=0.05: solver {:.1e}, kernel {:.1e}, limit {:.1e}; "
                         "strip: solver {:.1e}, kernel {:.1e}, limit {:.1e}".format(
                             ring[0], ring[1], 1e-4 * ring[2], strip[0], strip[1], 1e-4 * strip[2]))


def _laplace_ratios(f, p):
    r = [numerical_laplacian(f, p, h) for h in (0.04, 0.02, 0.01)]
    return r[0] / r[1], r[1] / r[2]


def test_criterion_7_property_suites(report):
    # Laplace residual falls as h^2 for the five field families
    ring_geom = RingTrapGeometry(0.678, 3.38, 0.1)
    ring_phi = ring_potential(ring_geom, solve_ring_alphas(ring_geom))
    strip_phi = strip_potential(1.0, 0.2)
    families = {
        "gap": (lambda x, y, z: field_gap(x, z, 1.0), (0.3, 0.0, 0.4)),
        "pol": (lambda x, y, z: field_pol(x, z, 1.0), (0.3, 0.0, 0.4)),
        "strip": (lambda x, y, z: propagate(strip_phi, Point3(x, y, z)), (0.3, 0.0, 0.5)),
        "ring": (lambda x, y, z: propagate(ring_phi, Point3(x, y, z)), (0.2, 0.1, 0.9)),
        "disc-greens": (lambda x, y, z: modified_greens(1.0, 10.0, (math.hypot(x, y), math.atan2(y, x), z)),
                        (0.5, 0.3, 1.2)),
    }
    ratios = {k: _laplace_ratios(f, p) for k, (f, p) in families.items()}
    laplace_ok = all(3.5 < a < 4.5 and 3.5 < b < 4.5 for a, b in ratios.values())

    # mirror symmetry z -> -z, bit for bit
    mirror = [
        greens_function((0.3, -0.2, 0.7)) == greens_function((0.3, -0.2, -0.7)),
        field_gap(0.2, 0.5, 1.0) == field_gap(0.2, -0.5, 1.0),
        field_pol(0.2, 0.5, 1.0) == field_pol(0.2, -0.5, 1.0),
        propagate(strip_phi, Point3(0.3, 0.0, 0.5)) == propagate(strip_phi, Point3(0.3, 0.0, -0.5)),
        propagate(ring_phi, Point3(0.2, 0.1, 0.9)) == propagate(ring_phi, Point3(0.2, 0.1, -0.9)),
        modified_greens(1.0, 10.0, (0.5, 0.3, 1.2)) == modified_greens(1.0, 10.0, (0.5, 0.3, -1.2)),
    ]
    mirror_ok = all(mirror)

    # split-square density is independent of the square size
    dh = 0.0
    for phi, x in [(gap_potential(1.0), 0.8), (gap_potential(1.0), -1.5), (pol_potential(1.0), 0.1),
                   (strip_phi, 0.0), (strip_phi, 0.8)]:
        s1, s2 = sigma_split(phi, x, d=1e-3), sigma_split(phi, x, d=5e-4)
        dh = max(dh, abs(s1 - s2) / abs(s2))
    dh_ok = dh < 1e-6

    # Legendre relation for the complete elliptic integrals
    rng = np.random.default_rng(7)
    leg = max(abs(elliptic_e(m) * elliptic_k(1 - m) + elliptic_e(1 - m) * elliptic_k(m)
                  - elliptic_k(m) * elliptic_k(1 - m) - 0.5 * math.pi) for m in rng.uniform(1e-6, 1 - 1e-6, 200))
    leg_ok = leg < 1e-10

    # pixel multipole series against the closed form
    ctl = SeriesControl(rel_tol=1e-12, max_terms=5000)
    pix = 0.0
    for _ in range(100):
        rho = rng.uniform(0.05, 2.0)
        r = rho * rng.uniform(1.2, 10.0)
        th = rng.uniform(0.0, 2.0 * math.pi)
        ref = pixel_sigma_closed(rho, r, th)
        pix = max(pix, abs(pixel_sigma_multipole(rho, r, th, ctl) - ref) / abs(ref))
    pix_ok = pix < ctl.rel_tol

    # compensation densities leave no potential inside the disc
    S = 2.0
    zero = 0.0
    for m, n in [(0, 3), (1, 4), (2, 5), (0, 5)]:
        idx = MultipoleIndex(m, n)
        sig = SurfaceChargeDensity(lambda r, idx=idx: compensation_sigma(idx, S, r), "axisymmetric",
                                   support=(0.0, math.inf), harmonic=m, breaks=(S,), singular=(S,), scale=S)
        zero = max(zero, max(abs(sigma_to_phi(sig, r, 0.0)) for r in (0.3, 1.0, 1.6)))
    zero_ok = zero < 1e-5

    ok = laplace_ok and mirror_ok and dh_ok and leg_ok and pix_ok and zero_ok
    worst = min(min(v) for v in ratios.values()), max(max(v) for v in ratios.values())
    assert report(7, ok, f"Laplace ratios in [{worst[0]:.2f}, {worst[1]:.2f}] (3.5..4.5); mirror exact={mirror_ok}; "
                          f"d-halving {dh:.1e} (< 1e-6); Legendre {leg:.1e} (< 1e-10); "
                          f"multipole series {pix:.1e} (< {ctl.rel_tol:g}); compensation inside {zero:.1e} (< 1e-5)")


def test_criterion_8_large_disc_limit(report):
    rho, p = 0.6, (0.4, 0.9, 1.0)
    Ss = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
    corr = np.array([modified_greens(rho, S, p) - free_greens_cyl(rho, p) for S in Ss])
    expo = -float(np.polyfit(np.log(Ss), np.log(corr), 1)[0])
    ok = bool(np.all(corr > 0)) and abs(expo - 3.0) <= 0.2
    assert report(8, ok, f"fitted exponent {expo:.4f} (3.0 +- 0.2)")


def test_criterion_9_susceptibility_multiplier(report):
    gaps = (0.1, 0.2, 0.3, 0.4, 0.5)
    ratios = []
    for g in gaps:
        full = 1.0 - optimize_ring(g, 1.0, 1.0).kappa_ratio
        half = 1.0 - optimize_ring(g, 1.0, 0.5).kappa_ratio
        ratios.append(full / half)
    ok = all(abs(r - 2.0) <= 0.6 for r in ratios)
    assert report(9, ok, "deficit ratio (multiplier 1 / multiplier 0.5) at g/z=0.1..0.5: "
                          + ", ".join(f"{r:.3f}" for r in ratios) + " (2 +- 0.6)")
