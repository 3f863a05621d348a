"""Acceptance criteria 1-8, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers; the lines are collected again in the terminal summary.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from hypflow import contraction, gaps, kato, radial, semigroup
from hypflow.special import beta_function

# mpmath.beta(1/2, 1/4) at 30 digits, independent of the package's Lanczos code
BETA_HALF_QUARTER = 5.24411510858423962


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def test_criterion_1_gap_algebra():
    start = time.perf_counter()
    d2, d3 = gaps.deformation_gap(2), gaps.deformation_gap(3)
    checks = {
        "lam0(3)": gaps.scalar_gap(3) == Fraction(8, 9),
        "lam0(3/2)": gaps.scalar_gap(Fraction(3, 2)) == Fraction(8, 9),
        "gamma(3)": gaps.bilinear_gamma(3) == Fraction(26, 9),
        "def(3).lower": d3.deformation_lower == Fraction(26, 9),
        "def(2)": (d2.deformation_lower, d2.exact_l2) == (3, 4),
        "laplacians": list(gaps.laplacian_comparison().values()) == [0, 2, 4],
    }
    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 1.0
    failed = [k for k, v in checks.items() if not v]
    assert report(1, ok, f"exact rationals ok, {elapsed * 1e3:.1f} ms"
                  + (f" failed={failed}" if failed else ""))


def test_criterion_2_heat_kernel():
    start = time.perf_counter()
    masses = {t: radial.heat_kernel(t).integral() for t in (0.1, 1.0, 10.0)}
    mass_err = max(abs(m - 1.0) for m in masses.values())

    times = (0.25, 0.5, 1.0)
    kernels = {t: radial.heat_kernel(t) for t in times + (0.5, 0.75, 1.25, 1.5, 2.0)}
    defect = 0.0
    for t in times:
        for s in times:
            conv = radial.convolve_radial(kernels[t], kernels[s])
            exact = kernels.get(t + s) or radial.heat_kernel(t + s)
            defect = max(defect, radial.relative_l2_error(conv, exact))

    spec_err = 0.0
    for t in (0.1, 1.0, 10.0):
        F = radial.spherical_transform(radial.heat_kernel(t))
        spec_err = max(spec_err, float(np.max(np.abs(F.coeffs - np.exp(-t * (1 + F.freqs**2))))))
    elapsed = time.perf_counter() - start
    ok = mass_err <= 1e-6 and defect <= 1e-5 and spec_err <= 1e-6 and elapsed <= 30
    assert report(2, ok, f"mass err {mass_err:.1e}, CK defect {defect:.1e}, "
                         f"transform err {spec_err:.1e}, {elapsed:.1f} s")


def test_criterion_3_semigroup_rates():
    start = time.perf_counter()
    scalar = semigroup.verify_lp_lq(semigroup.SemigroupSpec("scalar"), 2, 2,
                                    time_grid=np.linspace(5, 10, 11))
    deform = semigroup.verify_lp_lq(semigroup.SemigroupSpec("deformation-scalar"), 2, 2,
                                    time_grid=np.linspace(5, 10, 11))
    short = np.geomspace(1e-3, 1e-2, 9)
    exps = {kind: semigroup.verify_lp_lq(semigroup.SemigroupSpec(kind), 1, "inf",
                                         time_grid=short).fitted_exponent
            for kind in semigroup.SHIFTS}
    elapsed = time.perf_counter() - start
    spread = max(exps.values()) - min(exps.values())
    ok = (abs(scalar.fitted_rate - 1.0) <= 0.05 and abs(deform.fitted_rate - 3.0) <= 0.05
          and abs(exps["scalar"] + 1.5) <= 0.05 and spread <= 0.01 and elapsed <= 60)
    assert report(3, ok, f"L2 rates {scalar.fitted_rate:.4f} / {deform.fitted_rate:.4f}, "
                         f"L1->Linf exponent {exps['scalar']:.4f}, "
                         f"shift spread {spread:.1e}, {elapsed:.1f} s")


def test_criterion_4_kato_exponents():
    ex = kato.exponents(3, 6)
    ref_ok = (ex.beta, ex.delta, ex.scaling_exponent) == (Fraction(1, 4), Fraction(3, 4), 0)

    rng = np.random.default_rng(2024)
    identity_ok = True
    for _ in range(100):
        p = Fraction(int(rng.integers(11, 400)), int(rng.integers(1, 10)))
        p = max(p, Fraction(11, 10))
        q = max(p, Fraction(31, 10)) + Fraction(int(rng.integers(0, 200)), int(rng.integers(1, 10)))
        e = kato.exponents(p, q)
        identity_ok &= e.admissible and (1 - e.delta - e.beta == Fraction(1, 2) - Fraction(3, 2) / p)

    p = Fraction(5, 2)
    qrep = kato.q_independence_check(p, [4, 6, 9], tol=0.01)
    grep = kato.gap_independence_check(p, 6, [0.0, 26 / 9, 100.0], tol=1e-3)
    slopes_ok = all(abs(s + 0.1) <= 0.01 for s in qrep.slopes.values())
    ok = ref_ok and identity_ok and slopes_ok and grep.spread <= 1e-3
    slopes = ", ".join(f"q={q}: {s:.6f}" for q, s in qrep.slopes.items())
    assert report(4, ok, f"(3,6) exponents {'ok' if ref_ok else 'wrong'}, identity "
                         f"{'ok' if identity_ok else 'broken'}, slopes {slopes}, "
                         f"gamma spread {grep.spread:.1e}")


def test_criterion_5_scaling_integral():
    values = [kato.scaling_integral(t, 3, 6).value for t in (0.1, 1.0, 10.0)]
    sup = max(values)
    bounded_ok = sup <= BETA_HALF_QUARTER + 1e-6
    # the package's own Beta agrees with the external reference
    beta_ok = abs(beta_function(0.5, 0.25) - BETA_HALF_QUARTER) <= 1e-12

    trace = [v for _, v in kato.scaling_integral(1.0, 2, 6, refinements=20).refinement_trace]
    increasing = all(b > a for a, b in zip(trace, trace[1:]))
    crossing = next((i + 1 for i, v in enumerate(trace) if v > 10 * BETA_HALF_QUARTER), None)
    ok = bounded_ok and beta_ok and increasing and crossing is not None and crossing <= 20
    assert report(5, ok, f"sup I = {sup:.6f} <= B = {BETA_HALF_QUARTER:.6f}; p=2 trace "
                         f"increasing={increasing}, exceeds 10B at refinement {crossing}")


def test_criterion_6_contraction_dichotomy():
    eps = contraction.epsilon0(1, 1)
    below = contraction.majorant_iterate(1, 1, 0.2)
    above = contraction.majorant_iterate(1, 1, 0.3)
    root = (1 - math.sqrt(1 - 4 * 0.2)) / 2
    point_ok = (eps == 0.25 and below.converged and abs(below.limit - root) <= 1e-9
                and below.limit <= 0.4 and not above.converged)

    wrong = []
    for k in range(-100, 101):
        if k == 0:
            continue
        u0 = eps + k * 1e-6
        if contraction.majorant_iterate(1, 1, u0).converged != (u0 < eps):
            wrong.append(k)
    ok = point_ok and not wrong
    assert report(6, ok, f"eps0 = {eps}, u0=0.2 -> {below.limit:.12f} (root {root:.12f}), "
                         f"u0=0.3 {above.verdict}, sweep misclassified {len(wrong)}/200")


def test_criterion_7_galerkin_dichotomy():
    start = time.perf_counter()
    cfg = contraction.CompareConfig(n_modes=32, mu=0.1)
    rep = contraction.compare_geometries(cfg)
    r0, r2, r4 = rep.rates[0], rep.rates[2], rep.rates[4]
    pred4 = rep.predicted[4]

    system = contraction.build_galerkin(32, 4, 0.1)
    rng = np.random.default_rng(7)
    residual = 0.0
    for _ in range(20):
        u = rng.standard_normal(32)
        residual = max(residual, system.energy_residual(u / np.linalg.norm(u)))
    elapsed = time.perf_counter() - start
    ok = (r4 > r2 > r0 and abs(r4 - pred4) <= 0.05 * pred4
          and abs((r4 - r2) - 0.2) <= 0.1 * 0.2 and residual <= 1e-12 and elapsed <= 120)
    assert report(7, ok, f"rates {r0:.5f} < {r2:.5f} < {r4:.5f} (predicted {pred4:.5f}), "
                         f"diff {r4 - r2:.5f}, energy residual {residual:.1e}, "
                         f"{elapsed:.1f} s")


def test_criterion_8_not_reproduced():
    # reported only: these constants are not computable at this scale
    c0 = kato.fitted_prefactor(3, 6)
    d3 = gaps.deformation_gap(3)
    ok = 0 < c0 < math.inf
    assert report(8, ok, f"reported only: C0(3,6) fitted = {c0:.6f}; C1 = C2 = 1 "
                         f"(conventional); L3 lower gap {d3.deformation_lower} vs exact "
                         f"L2 gap {gaps.STOKES_L2_GAP}, sharpness not assessed")
