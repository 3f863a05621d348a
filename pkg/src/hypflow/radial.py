"""Radial functions on hyperbolic 3-space.

A radial function is sampled on geodesic radii with quadrature weights for
the volume measure 4*pi*sinh(r)^2 dr. The spherical transform against

    phi_lam(r) = sin(lam r) / (lam sinh r)

diagonalises the Laplace-Beltrami operator: -Delta phi_lam = (1 + lam^2) phi_lam.
Its inverse is

    f(r) = c * int_0^inf F(lam) phi_lam(r) lam^2 dlam,   c = 1 / (2 pi^2).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

FOUR_PI = 4.0 * math.pi
# Inverse transform normalisation; re-derived numerically by
# calibrate_plancherel_constant() in the test suite.
PLANCHEREL_CONSTANT = 1.0 / (2.0 * math.pi**2)

# Below this argument the removable singularities are evaluated by series.
_SERIES_CUTOFF = 1e-4

DEFAULT_R_MAX = 60.0
DEFAULT_PANELS = 32
DEFAULT_ORDER = 64
DEFAULT_LAM_MAX = 40.0
DEFAULT_N_FREQ = 2048


def r_over_sinh(r):
    """r / sinh(r), overflow-free, exact limit 1 at r = 0."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF
    r2 = r[small] ** 2
    out[small] = 1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0
    big = ~small
    rb = r[big]
    # sinh r = e^r (1 - e^{-2r}) / 2, and direct division while sinh is tame
    with np.errstate(over="ignore"):
        direct = rb / np.sinh(np.minimum(rb, 700.0))
    out[big] = np.where(rb < 20.0, direct,
                        np.exp(np.log(2.0 * rb) - rb - np.log(-np.expm1(-2.0 * rb))))
    return out


def log_r_over_sinh(r):
    r = np.abs(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF
    out[small] = -r[small] ** 2 / 6.0
    rb = r[~small]
    out[~small] = np.log(2.0 * rb) - rb - np.log(-np.expm1(-2.0 * rb))
    return out


def _sinc(x):
    """sin(x)/x with a series near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def spherical_function(lam, r):
    """phi_lam(r) = sin(lam r)/(lam sinh r), broadcast over lam and r.

    phi_0(r) = r/sinh r and phi_lam(0) = 1.
    """
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    return _sinc(lam * r) * r_over_sinh(r)


def volume_weight(r):
    """Radial density 4*pi*sinh(r)^2 of the hyperbolic volume element."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ParameterError("radius must be nonnegative")
    out = FOUR_PI * np.sinh(arr) ** 2
    return float(out) if out.ndim == 0 else out


def ball_volume(radius: float) -> float:
    """Volume of the geodesic ball, 2*pi*(sinh R cosh R - R)."""
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    return 2.0 * math.pi * (math.sinh(radius) * math.cosh(radius) - radius)


def log_heat_kernel_value(t, r):
    """log p_t(r); finite wherever p_t(r) itself underflows."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ParameterError("heat kernel needs t > 0")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("radius must be nonnegative")
    out = (-1.5 * np.log(4.0 * math.pi * t_arr) + log_r_over_sinh(r_arr)
           - t_arr - r_arr**2 / (4.0 * t_arr))
    return float(out) if out.ndim == 0 else out


def heat_kernel_value(t, r):
    """Scalar heat kernel of hyperbolic 3-space,

        p_t(r) = (4 pi t)^{-3/2} (r / sinh r) exp(-t - r^2 / (4 t)).

    Evaluated in log space, so huge radii never produce inf/inf. Values
    below the double range (e.g. t = 0.5, r = 50, about 1e-564) underflow
    to 0.0; use :func:`log_heat_kernel_value` there.
    """
    out = np.exp(log_heat_kernel_value(t, r))
    return float(out) if np.ndim(out) == 0 else out


def heat_multiplier(t: float, freqs, shift: float = 0.0):
    """Spectral symbol exp(-t (1 + lam^2 + shift)) of the shifted heat semigroup."""
    freqs = np.asarray(freqs, dtype=float)
    return np.exp(-t * (1.0 + shift + freqs**2))


# --------------------------------------------------------------------------
# grids


def gauss_legendre_grid(r_max: float = DEFAULT_R_MAX, panels: int = DEFAULT_PANELS,
                        order: int = DEFAULT_ORDER, r_min: float = 0.0):
    """Composite Gauss-Legendre nodes and dr-weights on [r_min, r_max]."""
    if not r_max > r_min >= 0:
        raise ParameterError("need 0 <= r_min < r_max")
    if panels < 1 or order < 1:
        raise ParameterError("panels and order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(r_min, r_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def frequency_grid(lam_max: float = DEFAULT_LAM_MAX, n: int = DEFAULT_N_FREQ):
    """Uniform frequencies on [0, lam_max] with trapezoid weights."""
    if n < 2:
        raise ParameterError("frequency grid needs at least 2 points")
    if not lam_max > 0:
        raise ParameterError("lam_max must be positive")
    freqs = np.linspace(0.0, lam_max, n)
    w = np.full(n, freqs[1] - freqs[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return freqs, w


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function with volume quadrature weights.

    ``weights`` integrate against 4*pi*sinh(r)^2 dr, i.e.
    ``sum(weights * values)`` approximates the integral over H^3.
    """

    grid: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    rule: str = "gauss-legendre"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ParameterError("grid must be a nonempty 1-d array")
        if values.shape != grid.shape or weights.shape != grid.shape:
            raise ParameterError("grid, values and weights must have equal length")
        if grid[0] < 0 or np.any(np.diff(grid) <= 0):
            raise ParameterError("grid must be nonnegative and strictly increasing")
        if np.any(weights < 0):
            raise ParameterError("quadrature weights must be nonnegative")
        for name, arr in (("grid", grid), ("values", values), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def on_grid(cls, values_or_func, nodes=None, dr_weights=None) -> "RadialField":
        """Build a field from a callable or sample array on a Gauss-Legendre grid."""
        if nodes is None:
            nodes, dr_weights = gauss_legendre_grid()
        nodes = np.asarray(nodes, dtype=float)
        if callable(values_or_func):
            values = np.asarray(values_or_func(nodes), dtype=float)
        else:
            values = np.asarray(values_or_func, dtype=float)
        return cls(nodes, values, np.asarray(dr_weights) * volume_weight(nodes))

    @property
    def dr_weights(self) -> np.ndarray:
        """Weights for plain dr integration (volume density divided out)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            dr = self.weights / volume_weight(self.grid)
        # the volume density vanishes only at r = 0, where the value is irrelevant
        return np.where(np.isfinite(dr), dr, 0.0)

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, np.asarray(values, dtype=float), self.weights, self.rule)

    def same_grid(self, other: "RadialField") -> bool:
        return (self.grid.shape == other.grid.shape and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.weights, other.weights))

    def integral(self) -> float:
        return float(np.dot(self.weights, self.values))

    def __add__(self, other):
        if isinstance(other, RadialField):
            if not self.same_grid(other):
                raise ParameterError("fields live on different grids")
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(self.grid, self.values):
            writer.writerow([format(r, ".17g"), format(v, ".17g")])
        return buf.getvalue()


def field_from_csv(text: str, dr_weights=None) -> RadialField:
    """Read a two-column (r, value) CSV.

    Without explicit dr-weights, trapezoid weights on the given radii are used.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["r", "value"]:
        raise ParameterError("expected header 'r,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    r, v = data[:, 0], data[:, 1]
    if dr_weights is None:
        dr_weights = np.zeros_like(r)
        dr = np.diff(r)
        dr_weights[:-1] += 0.5 * dr
        dr_weights[1:] += 0.5 * dr
        rule = "trapezoid"
    else:
        rule = "gauss-legendre"
    return RadialField(r, v, np.asarray(dr_weights) * volume_weight(r), rule)


def heat_kernel(t: float, nodes=None, dr_weights=None) -> RadialField:
    """p_t sampled as a RadialField."""
    return RadialField.on_grid(lambda r: heat_kernel_value(t, r), nodes, dr_weights)


def lp_norm(f: RadialField, p) -> float:
    """L^p norm over H^3 via the field's quadrature; p = inf gives max |f|."""
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ParameterError(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(np.dot(f.weights, a))
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * np.dot(f.weights, (a / scale) ** p) ** (1.0 / p))


# --------------------------------------------------------------------------
# spherical transform


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Spherical-transform coefficients on a frequency grid.

    ``plancherel_weights`` already include c * lam^2 * d(lam), so the inverse
    is ``sum(coeffs * plancherel_weights * phi_lam(r))``.
    """

    freqs: np.ndarray
    coeffs: np.ndarray
    plancherel_weights: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        pw = np.asarray(self.plancherel_weights, dtype=float)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ParameterError("frequency grid is empty")
        if coeffs.shape != freqs.shape or pw.shape != freqs.shape:
            raise ParameterError("freqs, coeffs and weights must have equal length")
        if freqs[0] < 0 or np.any(np.diff(freqs) <= 0):
            raise ParameterError("frequencies must be nonnegative and strictly increasing")
        for name, arr in (("freqs", freqs), ("coeffs", coeffs), ("plancherel_weights", pw)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.freqs, coeffs, self.plancherel_weights, dict(self.metadata))

    def multiply(self, multiplier) -> "SpectralField":
        return self.with_coeffs(self.coeffs * np.asarray(multiplier, dtype=float))

    def plancherel_sum(self) -> float:
        """sum |F|^2 dmu, equal to ||f||_2^2."""
        return float(np.dot(self.plancherel_weights, self.coeffs**2))


def plancherel_weights(freqs, dlam, constant: float = PLANCHEREL_CONSTANT):
    return constant * np.asarray(freqs) ** 2 * np.asarray(dlam)


def delta_spectrum(freqs=None, dlam=None) -> SpectralField:
    """Transform of the unit point mass at the origin: all coefficients 1."""
    if freqs is None:
        freqs, dlam = frequency_grid()
    return SpectralField(freqs, np.ones_like(freqs), plancherel_weights(freqs, dlam))


def _forward_matvec(lam, r, vec, chunk=512):
    """sum_i phi_lam(r_i) vec_i for each lam, without a huge temporary."""
    out = np.empty(lam.size)
    for s in range(0, lam.size, chunk):
        out[s:s + chunk] = spherical_function(lam[s:s + chunk, None], r[None, :]) @ vec
    return out


def _inverse_matvec(r, lam, vec, chunk=512, absolute=False):
    """sum_j phi_{lam_j}(r) vec_j for each r (|phi| when ``absolute``)."""
    out = np.empty(r.size)
    for s in range(0, r.size, chunk):
        phi = spherical_function(lam[None, :], r[s:s + chunk, None])
        out[s:s + chunk] = (np.abs(phi) if absolute else phi) @ vec
    return out


def spherical_transform(f: RadialField, freqs=None, dlam=None,
                        tail_tol: float = 1e-10) -> SpectralField:
    """F(lam) = int f(r) phi_lam(r) dV on a frequency grid.

    If the integrand has not decayed over the outermost nodes the result
    carries ``metadata['tail_warning'] = True`` and a RuntimeWarning is issued.
    """
    if freqs is None:
        freqs, dlam = frequency_grid()
    freqs = np.asarray(freqs, dtype=float)
    wv = f.weights * f.values
    coeffs = _forward_matvec(freqs, f.grid, wv)

    tail = max(1, f.grid.size // 32)
    scale = np.abs(wv).max()
    tail_ratio = float(np.abs(wv[-tail:]).max() / scale) if scale > 0 else 0.0
    meta = {"tail_ratio": tail_ratio, "tail_warning": tail_ratio > tail_tol,
            "r_max": float(f.grid[-1])}
    if meta["tail_warning"]:
        warnings.warn(f"radial field not decayed at r_max={f.grid[-1]:.3g} "
                      f"(tail ratio {tail_ratio:.2e})", RuntimeWarning, stacklevel=2)
    return SpectralField(freqs, coeffs, plancherel_weights(freqs, dlam), meta)


def inverse_spherical_transform(F: SpectralField, nodes=None, dr_weights=None,
                                clip_noise: bool = False) -> RadialField:
    """Reconstruct f on a radial grid (default grid when none is given).

    With ``clip_noise`` samples below the rounding floor of the sum are set
    to zero. The floor decays only like 1/sinh(r) while the volume element
    grows like sinh(r)^2, so unclipped far-field noise ruins L^q norms for
    q < 2 on large grids.
    """
    if nodes is None:
        nodes, dr_weights = gauss_legendre_grid()
    if F.freqs.size == 0:
        raise ParameterError("empty frequency grid")
    nodes = np.asarray(nodes, dtype=float)
    terms = F.coeffs * F.plancherel_weights
    values = _inverse_matvec(nodes, F.freqs, terms)
    if clip_noise:
        floor = 64 * np.finfo(float).eps * _inverse_matvec(nodes, F.freqs, np.abs(terms),
                                                           absolute=True)
        values = np.where(np.abs(values) > floor, values, 0.0)
    return RadialField.on_grid(values, nodes, dr_weights)


def calibrate_plancherel_constant(f: RadialField, freqs=None, dlam=None) -> float:
    """Least-squares c such that c * inverse_1(forward(f)) = f.

    Used to pin the inverse normalisation from a reference bump.
    """
    if freqs is None:
        freqs, dlam = frequency_grid()
    F = spherical_transform(f, freqs, dlam)
    raw = SpectralField(freqs, F.coeffs, plancherel_weights(freqs, dlam, constant=1.0))
    g = _inverse_matvec(f.grid, raw.freqs, raw.coeffs * raw.plancherel_weights)
    w = f.weights
    return float(np.dot(w * g, f.values) / np.dot(w * g, g))


def convolve_radial(f: RadialField, g: RadialField, freqs=None, dlam=None) -> RadialField:
    """Radial convolution by transform-multiply-inverse.

    Each factor is transformed on its own grid, so mismatched grids are
    handled by resampling; the result lives on ``f``'s grid.
    """
    if freqs is None:
        freqs, dlam = frequency_grid()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        F = spherical_transform(f, freqs, dlam)
        G = spherical_transform(g, freqs, dlam)
    H = F.with_coeffs(F.coeffs * G.coeffs)
    return inverse_spherical_transform(H, f.grid, f.dr_weights)


def relative_l2_error(approx: RadialField, exact: RadialField) -> float:
    if not approx.same_grid(exact):
        raise ParameterError("fields live on different grids")
    denom = lp_norm(exact, 2)
    return lp_norm(approx - exact, 2) / denom if denom > 0 else lp_norm(approx, 2)
