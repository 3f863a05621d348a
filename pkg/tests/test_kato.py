import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hypflow import kato
from hypflow.errors import ParameterError
from hypflow.special import beta_function


def _quad_oracle(t, p, q, mu=1.0, gamma=None):
    """Independent evaluation with QUADPACK's algebraic endpoint weights."""
    ex = kato.exponents(p, q)
    b, d = float(ex.beta), float(ex.delta)
    g = float(kato.default_gamma(q) if gamma is None else gamma)
    a = mu * g
    val, _ = integrate.quad(lambda s: math.exp(a * t * (1 - 2 * s) - mu * g * t * (1 - s)),
                            0, 1, weight="alg", wvar=(-2 * b, -d), epsabs=1e-13,
                            epsrel=1e-12)
    return t ** float(ex.scaling_exponent) * val


def test_exponents_reference_case():
    ex = kato.exponents(3, 6)
    assert (ex.beta, ex.delta, ex.scaling_exponent) == (Fraction(1, 4), Fraction(3, 4), 0)
    assert ex.klass == kato.BOUNDED
    assert ex.admissible
    assert ex.beta_arguments() == (Fraction(1, 2), Fraction(1, 4))


def test_exponent_classes():
    assert kato.exponents(2, 6).klass == kato.STRICTLY_DIVERGENT
    assert kato.exponents(Fraction(5, 2), 6).klass == kato.UV_DIVERGENT
    assert kato.exponents(4, 8).klass == kato.BOUNDED
    # delta >= 1 needs q <= 3
    assert kato.exponents(2, 3).klass == kato.STRICTLY_DIVERGENT
    assert not kato.exponents(2, 3).admissible


def test_exponents_reject():
    with pytest.raises(ParameterError):
        kato.exponents("inf", 6)
    with pytest.raises(ParameterError):
        kato.exponents(Fraction(1, 2), 6)


def test_exponents_json_round_trip():
    ex = kato.exponents(Fraction(7, 2), 9)
    assert kato.KatoExponents.from_json(ex.to_json()) == ex


@st.composite
def admissible_pairs(draw):
    p = draw(st.fractions(min_value=Fraction(11, 10), max_value=40, max_denominator=50))
    q = draw(st.fractions(min_value=max(p, Fraction(31, 10)), max_value=60,
                          max_denominator=50))
    return p, q


@given(admissible_pairs())
def test_q_cancellation_exact(pq):
    p, q = pq
    ex = kato.exponents(p, q)
    assert 1 - ex.delta - ex.beta == Fraction(1, 2) - Fraction(3, 2) / p
    assert ex.scaling_exponent == 1 - ex.delta - ex.beta


def test_default_gamma():
    assert kato.default_gamma(6) == Fraction(26, 9)
    assert kato.default_gamma(4) == 3


def test_pure_beta_when_no_exponentials():
    for t in (0.1, 1.0, 10.0):
        r = kato.scaling_integral(t, 3, 6, gamma=0.0, alpha=0.0)
        assert r.value == pytest.approx(beta_function(0.5, 0.25), rel=1e-10)


@pytest.mark.parametrize("p,q", [(3, 6), (4, 8), (Fraction(5, 2), 6), (3, 4)])
@pytest.mark.parametrize("t", [1e-4, 0.1, 1.0, 10.0])
def test_matches_quadpack(p, q, t):
    r = kato.scaling_integral(t, p, q)
    assert r.converged and not r.divergent
    assert r.value == pytest.approx(_quad_oracle(t, p, q), rel=1e-8)


def test_bounded_case_under_beta_bound():
    for t in (0.1, 1.0, 10.0):
        r = kato.scaling_integral(t, 3, 6)
        assert r.bound == pytest.approx(5.24411510858423962, rel=1e-13)
        assert r.value <= r.bound


def test_refinement_trace_records_convergence():
    r = kato.scaling_integral(1.0, 3, 6)
    vals = [v for _, v in r.refinement_trace]
    assert len(vals) >= 2
    assert abs(vals[-1] - vals[-2]) <= kato.QUAD_TOL


def test_divergent_trace_grows():
    r = kato.scaling_integral(1.0, 2, 6)
    assert r.divergent and math.isinf(r.value) and r.bound is None
    vals = [v for _, v in r.refinement_trace]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1e3


def test_result_json_round_trip():
    for p in (3, 2):
        r = kato.scaling_integral(0.5, p, 6)
        back = kato.IntegralResult.from_json(r.to_json())
        assert back.value == r.value
        assert back.refinement_trace == [tuple(x) for x in r.refinement_trace]


def test_rejects_bad_time():
    with pytest.raises(ParameterError):
        kato.scaling_integral(0.0, 3, 6)
    with pytest.raises(ParameterError):
        kato.scaling_integral(1.0, 3, 6, mu=0.0)


def test_short_time_slopes():
    assert kato.short_time_slope(Fraction(5, 2), 6) == pytest.approx(-0.1, abs=1e-4)
    assert kato.short_time_slope(3, 6) == pytest.approx(0.0, abs=1e-4)
    with pytest.raises(ParameterError):
        kato.short_time_slope(2, 6)


def test_independence_reports():
    rep = kato.q_independence_check(Fraction(5, 2), [4, 6, 9])
    assert rep.passed and rep.spread < 1e-4
    rep = kato.gap_independence_check(Fraction(5, 2), 6, [0, 26 / 9, 100])
    assert rep.passed


def test_fitted_prefactor_positive():
    c0 = kato.fitted_prefactor(3, 6)
    assert 0 < c0 < math.inf
    # at t -> 0 the integral tends to the Beta value
    assert c0 == pytest.approx(beta_function(0.5, 0.25), rel=1e-4)


def test_csv_output():
    rows = [kato.scaling_integral(t, 3, 6) for t in (0.1, 1.0)] + [
        kato.scaling_integral(1.0, 2, 6)]
    text = kato.results_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(kato.CSV_HEADER)
    assert len(lines) == 4
    assert lines[-1].split(",")[4] == "inf"
    assert float(lines[1].split(",")[4]) == rows[0].value
