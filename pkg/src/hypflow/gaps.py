"""Closed-form spectral gaps on hyperbolic 3-space.

All quantities are exact rationals whenever the inputs are rational, so
``deformation_gap(3).deformation_lower == Fraction(26, 9)`` holds exactly.
Floats are accepted and converted through their shortest decimal repr
(``1.2 -> 6/5``). ``math.inf`` stands for the exponent infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .errors import ParameterError

Exponent = Union[int, float, str, Fraction]

INF = math.inf

# Deformation Laplacian = Bochner Laplacian + Ric, and Ric = -2 on H^3.
RICCI_SHIFT = Fraction(2)
# Stokes operator on divergence-free fields = Hodge Laplacian + 4; the Hodge
# spectrum on co-exact 1-forms starts at 0 (Donnelly, n=3, k=2).
HODGE_COEXACT_BOTTOM = Fraction(0)
STOKES_L2_GAP = HODGE_COEXACT_BOTTOM + 4


def as_exponent(p: Exponent) -> Union[Fraction, float]:
    """Return ``p`` as a Fraction, or ``math.inf`` for infinity."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, bool):
        raise ParameterError(f"exponent must be numeric, got {p!r}")
    if isinstance(p, int):
        return Fraction(p)
    if isinstance(p, float):
        if math.isnan(p):
            raise ParameterError("exponent is NaN")
        if math.isinf(p):
            if p < 0:
                raise ParameterError("exponent must be >= 1")
            return INF
        return Fraction(repr(p))
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo", "+inf"):
            return INF
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse exponent {p!r}") from exc
    raise ParameterError(f"unsupported exponent type {type(p).__name__}")


def _check_ge_one(p: Union[Fraction, float]) -> None:
    if p < 1:
        raise ParameterError(f"exponent must be >= 1, got {p}")


def conjugate(p: Exponent) -> Union[Fraction, float]:
    """Hoelder conjugate p/(p-1); 1 <-> inf."""
    p = as_exponent(p)
    _check_ge_one(p)
    if p == INF:
        return Fraction(1)
    if p == 1:
        return INF
    return p / (p - 1)


def scalar_gap(p: Exponent) -> Fraction:
    """Bottom of the scalar L^p spectrum, 4(p-1)/p^2 (0 at p = inf)."""
    p = as_exponent(p)
    _check_ge_one(p)
    if p == INF:
        return Fraction(0)
    return 4 * (p - 1) / (p * p)


def bilinear_gamma(r: Exponent) -> Fraction:
    """Effective gap of ``exp(-tau A) P div`` from L^r: 2 + (lam0(r') + lam0(r))/2."""
    r = as_exponent(r)
    if r == INF or r <= 1:
        raise ParameterError(f"bilinear_gamma needs 1 < r < inf, got {r}")
    return RICCI_SHIFT + scalar_gap(conjugate(r)) / 2 + scalar_gap(r) / 2


def laplacian_comparison() -> dict[str, Fraction]:
    """L^2 gaps on divergence-free fields for the three vector Laplacians."""
    return {
        "Hodge": HODGE_COEXACT_BOTTOM,
        "Bochner": HODGE_COEXACT_BOTTOM + RICCI_SHIFT,
        "Deformation": STOKES_L2_GAP,
    }


def _fmt(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(x)


@dataclass(frozen=True)
class GapReport:
    p: Union[Fraction, float]
    scalar_bottom: Fraction
    deformation_lower: Fraction
    exact_l2: Optional[Fraction] = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.scalar_bottom <= 1:
            raise ParameterError("scalar bottom outside [0, 1]")
        if self.deformation_lower != self.scalar_bottom + RICCI_SHIFT:
            raise ParameterError("deformation lower bound must equal scalar bottom + 2")

    def to_dict(self) -> dict:
        return {
            "p": _fmt(self.p),
            "scalar_bottom": _fmt(self.scalar_bottom),
            "deformation_lower": _fmt(self.deformation_lower),
            "exact_l2": None if self.exact_l2 is None else _fmt(self.exact_l2),
            "scalar_bottom_float": float(self.scalar_bottom),
            "deformation_lower_float": float(self.deformation_lower),
            "source": dict(self.source),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GapReport":
        exact = d.get("exact_l2")
        return cls(
            p=as_exponent(d["p"]),
            scalar_bottom=Fraction(d["scalar_bottom"]),
            deformation_lower=Fraction(d["deformation_lower"]),
            exact_l2=None if exact is None else Fraction(exact),
            source=dict(d.get("source", {})),
        )

    @classmethod
    def from_json(cls, s: str) -> "GapReport":
        return cls.from_dict(json.loads(s))

    def to_table(self) -> str:
        rows = [
            ("p", _fmt(self.p), ""),
            ("scalar_bottom", _fmt(self.scalar_bottom), self.source.get("scalar_bottom", "")),
            ("deformation_lower", _fmt(self.deformation_lower),
             self.source.get("deformation_lower", "")),
            ("exact_l2", _fmt(self.exact_l2), self.source.get("exact_l2", "")),
        ]
        return _table(("quantity", "value", "source"), rows)


def deformation_gap(p: Exponent) -> GapReport:
    """All gap data at integrability ``p``.

    The lower bound lam0(p) + 2 holds for every p; the exact divergence-free
    value is known only on L^2, where it is 4. Elsewhere ``exact_l2`` is None.
    """
    p = as_exponent(p)
    lam0 = scalar_gap(p)
    source = {
        "scalar_bottom": "4(p-1)/p^2",
        "deformation_lower": "scalar bottom + 2 (diamagnetic bound + Ricci shift)",
    }
    exact = None
    if p == 2:
        exact = STOKES_L2_GAP
        source["exact_l2"] = "Donnelly + Weitzenboeck"
    return GapReport(p, lam0, lam0 + RICCI_SHIFT, exact, source)


def comparison_table() -> str:
    rows = [(name, str(g), float(g)) for name, g in laplacian_comparison().items()]
    return _table(("laplacian", "l2_gap", "float"), [(a, b, f"{c:.6g}") for a, b, c in rows])


def _table(header, rows) -> str:
    cells = [tuple(str(c) for c in header)] + [tuple(str(c) for c in r) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
