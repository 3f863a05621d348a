"""Fujita-Kato contraction: the scalar majorant and a Galerkin surrogate.

The majorant recursion a_{n+1} = C1 |u0| + C2 a_n^2 dominates the norms of
the Picard iterates of the mild equation. It converges exactly when
4 C1 C2 |u0| < 1, to the smaller root of C2 a^2 - a + C1 |u0| = 0.

The Galerkin surrogate is a finite system of divergence-free modes

    du_k/dt = -mu (xi_k + g) u_k + N_k(u, u),

with xi_k >= 0 standing in for the Hodge spectrum, g the additive gap of the
chosen vector Laplacian (0 flat, 2 Bochner, 4 deformation) and N a sparse
quadratic coupling with sum_k u_k N_k(u, u) = 0. It reproduces the decay
mechanism (gap => exponential rate) and nothing more; it is not a solver for
the PDE.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._parallel import pmap
from .errors import IntegratorError, ParameterError
from .semigroup import decay_rate_fit

FIXED_POINT_TOL = 1e-12
VALID_GAPS = (0, 2, 4)
DEFAULT_BOX = 20.0
DEFAULT_XI_MAX = 16.0


# --------------------------------------------------------------------------
# majorant


def epsilon0(c1: float, c2: float) -> float:
    """Smallness threshold (4 C1 C2)^{-1}; geometry enters only through C1, C2."""
    if not (c1 > 0 and c2 > 0):
        raise ParameterError("c1 and c2 must be positive")
    return 1.0 / (4.0 * c1 * c2)


@dataclass
class MajorantTrace:
    c1: float
    c2: float
    u0_norm: float
    iterates: list
    converged: bool
    steps: int
    limit: Optional[float]
    epsilon0: float

    @property
    def verdict(self) -> str:
        if self.converged:
            return f"converged to {self.limit!r}"
        return f"diverged at step {self.steps}"

    def to_dict(self, include_iterates: bool = True) -> dict:
        d = {"c1": self.c1, "c2": self.c2, "u0_norm": self.u0_norm,
             "converged": self.converged, "steps": self.steps, "limit": self.limit,
             "epsilon0": self.epsilon0, "verdict": self.verdict}
        if include_iterates:
            d["iterates"] = list(self.iterates)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MajorantTrace":
        return cls(d["c1"], d["c2"], d["u0_norm"], list(d.get("iterates", [])),
                   d["converged"], d["steps"], d["limit"], d["epsilon0"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "MajorantTrace":
        return cls.from_dict(json.loads(s))


def majorant_iterate(c1: float, c2: float, u0_norm: float, max_steps: int = 1_000_000,
                     tol: float = FIXED_POINT_TOL, keep: int = 1000) -> MajorantTrace:
    """Run a_{n+1} = c1 u0 + c2 a_n^2 from a_0 = c1 u0.

    Stops when successive iterates differ by at most ``tol`` (converged), or
    when a_n exceeds ten times the ball radius 2 c1 u0, or after ``max_steps``
    (diverged). Only the first ``keep`` iterates are stored.
    """
    eps = epsilon0(c1, c2)
    if u0_norm < 0 or math.isnan(u0_norm):
        raise ParameterError("u0_norm must be nonnegative")
    if max_steps < 1:
        raise ParameterError("max_steps must be positive")
    lin = c1 * u0_norm
    ceiling = 10.0 * 2.0 * lin
    a = lin
    iterates = [a]
    for n in range(1, max_steps + 1):
        nxt = lin + c2 * a * a
        if len(iterates) < keep:
            iterates.append(nxt)
        if abs(nxt - a) <= tol:
            return MajorantTrace(c1, c2, u0_norm, iterates, True, n, nxt, eps)
        if nxt > ceiling:
            return MajorantTrace(c1, c2, u0_norm, iterates, False, n, None, eps)
        a = nxt
    return MajorantTrace(c1, c2, u0_norm, iterates, False, max_steps, None, eps)


def majorant_fixed_point(c1: float, c2: float, u0_norm: float) -> Optional[float]:
    """Smaller root of c2 a^2 - a + c1 u0 = 0, or None past the threshold."""
    disc = 1.0 - 4.0 * c1 * c2 * u0_norm
    if disc < 0:
        return None
    # 2 c u / (1 + sqrt(disc)) avoids cancellation for small data
    return 2.0 * c1 * u0_norm / (1.0 + math.sqrt(disc))


# --------------------------------------------------------------------------
# Galerkin surrogate


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Truncated mode system; ``triads`` rows are (k, l, m) and ``coeffs`` rows (a, b, c).

    Each triad contributes a u_l u_m to N_k, b u_k u_m to N_l and c u_k u_l to
    N_m with a + b + c = 0, so it exchanges energy among the three modes
    without creating any.
    """

    modes: np.ndarray
    gap: float
    mu: float
    triads: np.ndarray
    coeffs: np.ndarray
    seed: int
    box: Optional[float] = None

    def __post_init__(self):
        for name in ("modes", "triads", "coeffs"):
            getattr(self, name).setflags(write=False)

    @property
    def n_modes(self) -> int:
        return int(self.modes.size)

    @property
    def xi_min(self) -> float:
        return float(self.modes.min())

    @property
    def dissipation(self) -> np.ndarray:
        return self.mu * (self.modes + self.gap)

    @property
    def slowest_rate(self) -> float:
        return float(self.dissipation.min())

    def nonlinearity(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        k, l, m = self.triads.T
        a, b, c = self.coeffs.T
        out = np.zeros(self.n_modes)
        np.add.at(out, k, a * u[l] * u[m])
        np.add.at(out, l, b * u[k] * u[m])
        np.add.at(out, m, c * u[k] * u[l])
        return out

    def rhs(self, u) -> np.ndarray:
        return -self.dissipation * u + self.nonlinearity(u)

    def energy_residual(self, u) -> float:
        """|sum_k u_k N_k(u, u)|."""
        return abs(float(np.dot(u, self.nonlinearity(u))))

    def without_nonlinearity(self) -> "GalerkinSystem":
        return GalerkinSystem(self.modes.copy(), self.gap, self.mu,
                              np.zeros((0, 3), dtype=int), np.zeros((0, 3)), self.seed,
                              self.box)


def _all_triads(n: int) -> np.ndarray:
    idx = [(k, l, m) for k in range(n) for l in range(k, n) for m in range(l, n)
           if not (k == l == m)]
    return np.array(idx, dtype=int).reshape(-1, 3)


def build_galerkin(n_modes: int, gap: float, mu: float, coupling_density: float = 0.1,
                   seed: int = 0, box: float = DEFAULT_BOX,
                   xi_max: float = DEFAULT_XI_MAX) -> GalerkinSystem:
    """Deterministic surrogate system.

    Modes sit on a jittered ladder over [xi_min, xi_max]: xi_min = 0 (bottom
    of the continuous Hodge spectrum) when ``gap`` > 0, and (pi / box)^2 for
    the flat comparator, whose gapless continuum cannot be truncated without
    a finite-size floor. Neighbouring modes stay at least half a ladder step
    apart so the slowest mode separates cleanly at late times.

    Mode positions and couplings come from independent streams of ``seed``:
    the coupling is identical across gaps for a given seed.
    """
    if n_modes < 2:
        raise ParameterError("need at least 2 modes")
    if gap not in VALID_GAPS:
        raise ParameterError(f"gap must be one of {VALID_GAPS}, got {gap}")
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if not 0 < coupling_density <= 1:
        raise ParameterError("coupling_density must lie in (0, 1]")
    if not box > 0:
        raise ParameterError("box size must be positive")

    mode_ss, coupling_ss = np.random.SeedSequence(seed).spawn(2)
    mode_rng = np.random.default_rng(mode_ss)
    coupling_rng = np.random.default_rng(coupling_ss)

    xi_min = 0.0 if gap > 0 else (math.pi / box) ** 2
    if not xi_max > xi_min:
        raise ParameterError("xi_max must exceed the spectral floor")
    step = (xi_max - xi_min) / (n_modes - 1)
    jitter = np.concatenate([[0.0], mode_rng.uniform(0.0, 0.5, n_modes - 1)])
    modes = xi_min + step * (np.arange(n_modes) + jitter)
    modes[-1] = min(modes[-1], xi_max)

    candidates = _all_triads(n_modes)
    count = max(1, int(round(coupling_density * len(candidates))))
    chosen = np.sort(coupling_rng.choice(len(candidates), size=count, replace=False))
    raw = coupling_rng.uniform(-1.0, 1.0, size=(count, 3))
    coeffs = raw - raw.mean(axis=1, keepdims=True)
    return GalerkinSystem(modes, float(gap), float(mu), candidates[chosen], coeffs,
                          int(seed), float(box) if gap == 0 else None)


@dataclass
class Trajectory:
    times: np.ndarray
    l2_norms: np.ndarray
    snapshot_times: list
    snapshots: list
    dt: float
    order: int = 4
    method: str = "rk4"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "l2_norm"])
        for t, n in zip(self.times, self.l2_norms):
            w.writerow([format(float(t), ".17g"), format(float(n), ".17g")])
        return buf.getvalue()

    def tail_fit(self, fraction: float = 0.5, fit_power: bool = False):
        """Exponential rate over the last ``fraction`` of the run."""
        t_end = self.times[-1]
        keep = self.times >= (1.0 - fraction) * t_end
        return decay_rate_fit(self.times[keep], self.l2_norms[keep], fit_power=fit_power)


def stability_limit(system: GalerkinSystem) -> float:
    return 0.5 / float(system.dissipation.max())


def simulate(system: GalerkinSystem, u0, t_end: float, dt: float,
             checkpoint_every: int = 100, growth_limit: float = 10.0) -> Trajectory:
    """Classical RK4 with fixed step; the L2 norm is recorded every step."""
    u = np.array(u0, dtype=float)
    if u.shape != (system.n_modes,):
        raise ParameterError(f"initial state must have {system.n_modes} entries")
    if not dt > 0 or not t_end > 0:
        raise ParameterError("dt and t_end must be positive")
    limit = stability_limit(system)
    if dt > limit * (1 + 1e-12):
        raise ParameterError(f"dt={dt} exceeds the stability bound {limit:.6g}")
    steps = int(round(t_end / dt))
    if steps < 1:
        raise ParameterError("t_end shorter than one step")

    norm0 = float(np.linalg.norm(u))
    times = np.arange(steps + 1) * dt
    norms = np.empty(steps + 1)
    norms[0] = norm0
    snap_t, snaps = [0.0], [u.copy()]
    f = system.rhs
    for n in range(1, steps + 1):
        k1 = f(u)
        k2 = f(u + 0.5 * dt * k1)
        k3 = f(u + 0.5 * dt * k2)
        k4 = f(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norms[n] = float(np.linalg.norm(u))
        if not math.isfinite(norms[n]) or (norm0 > 0 and norms[n] > growth_limit * norm0):
            raise IntegratorError(f"norm blew up at t={times[n]:.6g} "
                                  f"({norms[n]:.3g} vs initial {norm0:.3g})")
        if n % checkpoint_every == 0 or n == steps:
            snap_t.append(float(times[n]))
            snaps.append(u.copy())
    return Trajectory(times, norms, snap_t, snaps, dt)


def small_initial_state(n_modes: int, amplitude: float, seed: int = 0) -> np.ndarray:
    """Random direction scaled to L2 norm ``amplitude``; deterministic in ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    v = rng.standard_normal(n_modes)
    return amplitude * v / np.linalg.norm(v)


@dataclass
class CompareConfig:
    n_modes: int = 32
    mu: float = 0.1
    gaps: Sequence[int] = (0, 2, 4)
    t_end: float = 300.0
    dt: float = 0.05
    amplitude: Optional[float] = None
    coupling_density: float = 0.1
    seed: int = 0
    box: float = DEFAULT_BOX
    xi_max: float = DEFAULT_XI_MAX
    tail_fraction: float = 0.5
    rate_rel_tol: float = 0.05
    diff_rel_tol: float = 0.10


@dataclass
class ComparisonReport:
    gaps: list
    rates: dict
    predicted: dict
    finite_size_floor: float
    short_time_constant: float
    short_time_bound: float
    checks: dict
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"gaps": self.gaps,
                "rates": {str(k): v for k, v in self.rates.items()},
                "predicted": {str(k): v for k, v in self.predicted.items()},
                "finite_size_floor": self.finite_size_floor,
                "short_time_constant": self.short_time_constant,
                "short_time_bound": self.short_time_bound,
                "checks": self.checks, "pass": self.passed, "config": self.config}

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        return cls(list(d["gaps"]), {int(k): v for k, v in d["rates"].items()},
                   {int(k): v for k, v in d["predicted"].items()}, d["finite_size_floor"],
                   d["short_time_constant"], d["short_time_bound"], dict(d["checks"]),
                   dict(d.get("config", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ComparisonReport":
        return cls.from_dict(json.loads(s))


def compare_geometries(config: CompareConfig = CompareConfig()) -> ComparisonReport:
    """Run the same small data under each gap and compare late-time rates.

    Checks: strict rate ordering in the gap, the largest gap's rate within
    ``rate_rel_tol`` of mu (xi_min + g), the 4-vs-2 difference within
    ``diff_rel_tol`` of 2 mu, and agreement of the norm curves to O(t) at
    early times.
    """
    gap_list = sorted(int(g) for g in config.gaps)
    if len(set(gap_list)) < 2:
        raise ParameterError("need at least two distinct gaps to compare")
    amplitude = config.amplitude
    if amplitude is None:
        amplitude = 1e-2 * config.mu * max(max(gap_list), 1)
    u0 = small_initial_state(config.n_modes, amplitude, config.seed)
    systems = {g: build_galerkin(config.n_modes, g, config.mu, config.coupling_density,
                                 config.seed, config.box, config.xi_max) for g in gap_list}
    dt = min(config.dt, min(stability_limit(s) for s in systems.values()))
    runs = dict(zip(gap_list, pmap(lambda g: simulate(systems[g], u0, config.t_end, dt),
                                   gap_list)))

    rates = {g: runs[g].tail_fit(config.tail_fraction).rate for g in gap_list}
    predicted = {g: systems[g].slowest_rate for g in gap_list}
    checks = {"ordered": all(rates[a] < rates[b] for a, b in zip(gap_list, gap_list[1:]))}
    top = gap_list[-1]
    checks["top_rate_matches"] = abs(rates[top] - predicted[top]) <= (
        config.rate_rel_tol * predicted[top])
    if 2 in rates and 4 in rates:
        diff = rates[4] - rates[2]
        checks["gap_difference_2mu"] = abs(diff - 2 * config.mu) <= (
            config.diff_rel_tol * 2 * config.mu)

    # early times: states differ by at most C t, C set by the dissipation mismatch
    lo = gap_list[0]
    t_short = 20 * dt
    short = {g: simulate(systems[g], u0, t_short, dt, checkpoint_every=1) for g in (lo, top)}
    diffs = np.array([np.linalg.norm(a - b) for a, b in
                      zip(short[top].snapshots[1:], short[lo].snapshots[1:])])
    t_axis = np.asarray(short[top].snapshot_times[1:])
    u0_norm = float(np.linalg.norm(u0))
    short_c = float(np.max(diffs / (u0_norm * t_axis))) if u0_norm > 0 else 0.0
    mismatch = float(np.abs(systems[top].dissipation - systems[lo].dissipation).max())
    checks["short_time_o_t"] = short_c <= 1.5 * mismatch

    floor = systems[lo].slowest_rate if lo == 0 else 0.0
    cfg = {k: (list(v) if isinstance(v, (list, tuple)) else v)
           for k, v in vars(config).items()}
    cfg["dt_used"] = dt
    cfg["amplitude_used"] = amplitude
    return ComparisonReport(gap_list, rates, predicted, floor, short_c, 1.5 * mismatch,
                            checks, cfg)
