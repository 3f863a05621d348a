"""Fujita-Kato exponent algebra and the bilinear scaling integral.

For initial data in L^p and the time-weighted space built on L^q, the
bilinear term of the Duhamel iteration is controlled by

    I(t) = e^{alpha t} t^beta int_0^t (t-s)^{-delta} e^{-mu gamma (t-s)}
                                  e^{-2 alpha s} s^{-2 beta} ds,

with beta = 3/(2p) - 3/(2q) and delta = 1/2 + 3/(2q). Substituting s = tau t,

    I(t) = t^{1 - delta - beta} int_0^1 (1-tau)^{-delta} tau^{-2 beta} E(tau) dtau,

and 1 - delta - beta = 1/2 - 3/(2p) no longer depends on q. With
alpha = mu gamma the exponential E(tau) = e^{-alpha t tau} is at most 1, so
I(t) <= B(1 - 2 beta, 1 - delta) t^{1/2 - 3/(2p)}.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import gaps
from .errors import NumericalError, ParameterError
from .special import beta_function

BOUNDED = "bounded"
UV_DIVERGENT = "uv-divergent"
STRICTLY_DIVERGENT = "strictly-divergent"

QUAD_TOL = 1e-8
SLOPE_TOL = 1e-2
# Short enough that e^{-alpha t} is 1 to ~1e-4 even for gamma = 100.
DEFAULT_SLOPE_TIMES = tuple(np.geomspace(1e-8, 1e-6, 9))

_MAX_LEVELS = 12


@dataclass(frozen=True)
class KatoExponents:
    p: Fraction
    q: Fraction
    beta: Fraction
    delta: Fraction
    scaling_exponent: Fraction
    klass: str
    admissible: bool = True

    @property
    def finite_for_positive_t(self) -> bool:
        return self.beta < Fraction(1, 2) and self.delta < 1

    def beta_arguments(self) -> tuple:
        return (1 - 2 * self.beta, 1 - self.delta)

    def to_dict(self) -> dict:
        return {
            "p": str(self.p), "q": str(self.q), "beta": str(self.beta),
            "delta": str(self.delta), "scaling_exponent": str(self.scaling_exponent),
            "class": self.klass, "admissible": self.admissible,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KatoExponents":
        return cls(Fraction(d["p"]), Fraction(d["q"]), Fraction(d["beta"]),
                   Fraction(d["delta"]), Fraction(d["scaling_exponent"]), d["class"],
                   bool(d.get("admissible", True)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "KatoExponents":
        return cls.from_dict(json.loads(s))


def exponents(p, q) -> KatoExponents:
    """Exponent bundle for L^p data measured in L^q.

    The admissible window is 1 < p <= q with q > 3; outside it the numbers
    are still computed and ``admissible`` is False.

    Classes: ``strictly-divergent`` when the tau-integral is infinite for
    every t (beta >= 1/2 or delta >= 1), ``bounded`` when it is finite and the
    scaling exponent is >= 0 (p >= 3), ``uv-divergent`` otherwise.
    """
    p, q = gaps.as_exponent(p), gaps.as_exponent(q)
    if p == gaps.INF or q == gaps.INF:
        raise ParameterError("exponents need finite p and q")
    if p < 1 or q < 1:
        raise ParameterError(f"exponents need p, q >= 1, got ({p}, {q})")
    beta = Fraction(3, 2) / p - Fraction(3, 2) / q
    delta = Fraction(1, 2) + Fraction(3, 2) / q
    scaling = Fraction(1, 2) - Fraction(3, 2) / p
    if beta >= Fraction(1, 2) or delta >= 1:
        klass = STRICTLY_DIVERGENT
    elif scaling >= 0:
        klass = BOUNDED
    else:
        klass = UV_DIVERGENT
    admissible = 1 < p <= q and q > 3
    return KatoExponents(p, q, beta, delta, scaling, klass, admissible)


def default_gamma(q) -> Fraction:
    """Bilinear gap for u (x) u in L^{q/2}."""
    q = gaps.as_exponent(q)
    return gaps.bilinear_gamma(q / 2)


# --------------------------------------------------------------------------
# quadrature


def _graded_gauss(length: float, levels: int, order: int):
    """Gauss-Legendre on panels [L 2^-(k+1), L 2^-k], k < levels, plus [0, L 2^-levels]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = length * np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def _gauss(a: float, b: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return ((mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel())


class _Integrand:
    """tau^{-2 beta} (1-tau)^{-delta} E(tau) with E evaluated from (tau, 1-tau)."""

    def __init__(self, beta, delta, t, mu, gamma, alpha):
        self.beta, self.delta = beta, delta
        self.at = alpha * t
        self.gt = mu * gamma * t

    def exp_factor(self, tau, one_minus):
        # alpha t (1 - 2 tau) - mu gamma t (1 - tau), written without cancellation
        return np.exp(self.at * (one_minus - tau) - self.gt * one_minus)


def _regular_piece(power: float, smooth, level: int) -> float:
    """int_0^{1/2} x^{-power} smooth(x) dx for power < 1 via x = y^{1/(1-power)}."""
    a = 1.0 - power
    length = 0.5 ** a
    y, w = _graded_gauss(length, 8 + 6 * level, 6 + 2 * level)
    x = y ** (1.0 / a)
    return float(np.dot(w, smooth(x))) / a


def _truncated_piece(power: float, smooth, depth: float) -> float:
    """int_{e^-depth}^{1/2} x^{-power} smooth(x) dx for power >= 1, via x = e^{-u}."""
    lo = math.log(2.0)
    if depth <= lo:
        return 0.0
    c = power - 1.0
    # beyond u = 40, smooth(e^-u) equals smooth(0) to double precision
    split = min(depth, 40.0)
    u, w = _gauss(lo, split, max(8, int(split)), 16)
    total = float(np.dot(w, np.exp(c * u) * smooth(np.exp(-u))))
    if depth > split:
        g0 = float(smooth(np.zeros(1))[0])
        if c == 0:
            total += g0 * (depth - split)
        elif c * depth > 700.0:
            return math.inf
        else:
            total += g0 * (math.exp(c * depth) - math.exp(c * split)) / c
    return total


@dataclass
class IntegralResult:
    t: float
    p: float
    q: float
    gamma: float
    alpha: float
    mu: float
    value: float
    divergent: bool
    klass: str
    bound: Optional[float]
    refinement_trace: list = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "t": self.t, "p": self.p, "q": self.q, "gamma": self.gamma,
            "alpha": self.alpha, "mu": self.mu,
            "value": "inf" if math.isinf(self.value) else self.value,
            "divergent": self.divergent, "class": self.klass, "bound": self.bound,
            "refinement_trace": [[n, "inf" if math.isinf(v) else v]
                                 for n, v in self.refinement_trace],
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntegralResult":
        def num(v):
            return math.inf if v == "inf" else float(v)
        return cls(t=d["t"], p=d["p"], q=d["q"], gamma=d["gamma"], alpha=d["alpha"],
                   mu=d["mu"], value=num(d["value"]), divergent=d["divergent"],
                   klass=d["class"], bound=d["bound"],
                   refinement_trace=[(int(n), num(v)) for n, v in d["refinement_trace"]],
                   converged=d["converged"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "IntegralResult":
        return cls.from_dict(json.loads(s))


def scaling_integral(t: float, p, q, mu: float = 1.0, gamma=None, alpha=None,
                     tol: float = QUAD_TOL, refinements: int = 20) -> IntegralResult:
    """Evaluate I(t) with its refinement trace.

    Integrable endpoint singularities are removed by the power substitutions
    tau = sigma^{1/(1-2 beta)} and 1 - tau = rho^{1/(1-delta)}, and the
    substituted integrals are refined until successive values agree to
    ``tol``. A non-integrable endpoint (beta >= 1/2 or delta >= 1) is cut off
    at depth 2^k log 2 in log-variables for k = 1..``refinements``; the trace
    then grows without bound and ``value`` is inf.
    """
    t = float(t)
    if not t > 0:
        raise ParameterError("scaling integral needs t > 0")
    if not mu > 0:
        raise ParameterError("mu must be positive")
    ex = exponents(p, q)
    gamma = float(default_gamma(ex.q) if gamma is None else gamma)
    alpha = mu * gamma if alpha is None else float(alpha)
    beta, delta = float(ex.beta), float(ex.delta)
    f = _Integrand(beta, delta, t, mu, gamma, alpha)
    prefactor = t ** float(ex.scaling_exponent)

    # left half: x = tau, weight tau^{-2beta}; right half: x = 1 - tau, weight x^{-delta}
    def left_smooth(x):
        return (1.0 - x) ** (-delta) * f.exp_factor(x, 1.0 - x)

    def right_smooth(x):
        return (1.0 - x) ** (-2.0 * beta) * f.exp_factor(1.0 - x, x)

    pieces = [(2.0 * beta, left_smooth), (delta, right_smooth)]
    bound = None
    if ex.finite_for_positive_t:
        bound = beta_function(*(float(a) for a in ex.beta_arguments())) * prefactor

    if ex.finite_for_positive_t:
        trace = []
        for level in range(_MAX_LEVELS):
            val = prefactor * sum(_regular_piece(e, g, level) for e, g in pieces)
            n = 2 * (9 + 6 * level) * (6 + 2 * level)
            trace.append((n, val))
            if _settled([v for _, v in trace], tol):
                return IntegralResult(t, float(ex.p), float(ex.q), gamma, alpha, mu, val,
                                      False, ex.klass, bound, trace, True)
        raise NumericalError(f"scaling integral did not converge at t={t} "
                             f"(last values {trace[-2][1]!r}, {trace[-1][1]!r})")

    # at least one endpoint is non-integrable
    regular = 0.0
    for e, g in pieces:
        if e < 1:
            regular += _converged_regular(e, g, tol / max(prefactor, 1e-300))
    trace = []
    for k in range(1, refinements + 1):
        depth = (2.0 ** k) * math.log(2.0)
        val = regular + sum(_truncated_piece(e, g, depth) for e, g in pieces if e >= 1)
        val *= prefactor
        trace.append((k, val))
        if not math.isfinite(val):
            trace[-1] = (k, math.inf)
            break
    return IntegralResult(t, float(ex.p), float(ex.q), gamma, alpha, mu, math.inf, True,
                          ex.klass, None, trace, True)


def _settled(values, tol) -> bool:
    # two consecutive agreements: a single small step can undershoot the error
    return len(values) >= 3 and all(abs(a - b) <= tol for a, b in
                                    zip(values[-3:], values[-2:]))


def _converged_regular(e, g, tol):
    values = []
    for level in range(_MAX_LEVELS):
        values.append(_regular_piece(e, g, level))
        if _settled(values, tol):
            return values[-1]
    raise NumericalError("regular endpoint piece did not converge")


def _loglog_slope(ts, values) -> float:
    slope, _ = np.polyfit(np.log(ts), np.log(values), 1)
    return float(slope)


def short_time_slope(p, q, t_grid: Sequence[float] = DEFAULT_SLOPE_TIMES, mu: float = 1.0,
                     gamma=None) -> float:
    """Fitted d log I / d log t on ``t_grid``."""
    values = [scaling_integral(t, p, q, mu=mu, gamma=gamma).value for t in t_grid]
    if any(math.isinf(v) for v in values):
        raise ParameterError("slope is undefined for a strictly divergent integral")
    return _loglog_slope(np.asarray(t_grid, dtype=float), values)


@dataclass
class SlopeReport:
    p: float
    expected: float
    slopes: dict
    spread: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {"p": self.p, "expected": self.expected,
                "slopes": {str(k): v for k, v in self.slopes.items()},
                "spread": self.spread, "pass": self.passed, "tol": self.tol}


def q_independence_check(p, q_list: Sequence, t_grid: Sequence[float] = DEFAULT_SLOPE_TIMES,
                         mu: float = 1.0, tol: float = SLOPE_TOL) -> SlopeReport:
    """Short-time slopes of I(t) for several q; all should equal 1/2 - 3/(2p)."""
    for q in q_list:
        if not gaps.as_exponent(q) > 3:
            raise ParameterError(f"q must exceed 3, got {q}")
    expected = float(exponents(p, q_list[0]).scaling_exponent)
    slopes = {q: short_time_slope(p, q, t_grid, mu) for q in q_list}
    vals = list(slopes.values())
    spread = max(vals) - min(vals)
    ok = all(abs(s - expected) <= tol for s in vals) and spread <= tol
    return SlopeReport(float(gaps.as_exponent(p)), expected, slopes, spread, ok, tol)


def gap_independence_check(p, q, gammas: Sequence[float],
                           t_grid: Sequence[float] = DEFAULT_SLOPE_TIMES, mu: float = 1.0,
                           tol: float = 1e-3) -> SlopeReport:
    """Short-time slopes of I(t) across spectral gaps (alpha = mu gamma each time)."""
    expected = float(exponents(p, q).scaling_exponent)
    slopes = {g: short_time_slope(p, q, t_grid, mu, gamma=g) for g in gammas}
    vals = list(slopes.values())
    spread = max(vals) - min(vals)
    return SlopeReport(float(gaps.as_exponent(p)), expected, slopes, spread,
                       spread <= tol, tol)


def fitted_prefactor(p, q, t_grid: Sequence[float] = DEFAULT_SLOPE_TIMES,
                     mu: float = 1.0, gamma=None) -> float:
    """C0 in I(t) ~ C0 t^{1/2 - 3/(2p)}, fitted with the slope pinned to its exact value."""
    ex = exponents(p, q)
    ts = np.asarray(t_grid, dtype=float)
    vals = np.array([scaling_integral(t, p, q, mu=mu, gamma=gamma).value for t in ts])
    return float(np.exp(np.mean(np.log(vals) - float(ex.scaling_exponent) * np.log(ts))))


CSV_HEADER = ("t", "p", "q", "gamma", "I", "bound", "class")


def _g17(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return format(float(x), ".17g")


def results_to_csv(results: Sequence[IntegralResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow([_g17(r.t), _g17(r.p), _g17(r.q), _g17(r.gamma), _g17(r.value),
                    _g17(r.bound), r.klass])
    return buf.getvalue()
