"""hypflow command line.

Exit codes: 0 success (divergence verdicts included), 1 bad parameters,
2 numerical failure. Data goes to stdout or --output, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import contraction, gaps, kato, radial, semigroup
from .errors import NumericalError, ParameterError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _g17(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return format(float(x), ".17g")


def _table(header, rows) -> str:
    return gaps._table(header, rows)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _sweep(spec: str):
    try:
        a, b, n = spec.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise ParameterError(f"--sweep-t expects a:b:n, got {spec!r}") from exc
    if not (0 < a < b) or n < 2:
        raise ParameterError("--sweep-t needs 0 < a < b and n >= 2")
    return [float(x) for x in np.geomspace(a, b, n)]


# --------------------------------------------------------------------------
# subcommands


def cmd_gaps(args) -> str:
    if args.compare_laplacians:
        comp = gaps.laplacian_comparison()
        if args.format == "json":
            return _dump({k: str(v) for k, v in comp.items()})
        if args.format == "csv":
            return "laplacian,l2_gap\n" + "".join(f"{k},{v}\n" for k, v in comp.items())
        return gaps.comparison_table()
    report = gaps.deformation_gap(args.p)
    if args.format == "json":
        return _dump(report.to_dict())
    if args.format == "csv":
        d = report.to_dict()
        keys = ["p", "scalar_bottom", "deformation_lower", "exact_l2"]
        return ",".join(keys) + "\n" + ",".join(str(d[k]) for k in keys) + "\n"
    return report.to_table()


def cmd_exponents(args) -> str:
    ex = kato.exponents(args.p, args.q)
    d = ex.to_dict()
    if args.format == "json":
        return _dump(d)
    keys = ["p", "q", "beta", "delta", "scaling_exponent", "class", "admissible"]
    if args.format == "csv":
        return ",".join(keys) + "\n" + ",".join(str(d[k]) for k in keys) + "\n"
    return _table(("quantity", "value"), [(k, d[k]) for k in keys])


def cmd_kernel(args) -> str:
    t = args.t
    radii = args.r if args.r else [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]
    values = [radial.heat_kernel_value(t, r) for r in radii]
    out = {"t": t, "r": radii, "value": values}
    if args.check_mass:
        mass = radial.heat_kernel(t).integral()
        out["mass"] = mass
        out["mass_pass"] = abs(mass - 1.0) <= 1e-6
    if args.check_semigroup:
        defects = {}
        for s in (0.25, 0.5, 1.0):
            conv = radial.convolve_radial(radial.heat_kernel(t), radial.heat_kernel(s))
            defects[str(s)] = radial.relative_l2_error(conv, radial.heat_kernel(t + s))
        out["semigroup_defect"] = defects
        out["semigroup_pass"] = max(defects.values()) <= 1e-5
    if args.format == "json":
        return _dump(out)
    if args.format == "csv":
        return "r,value\n" + "".join(f"{_g17(r)},{_g17(v)}\n" for r, v in zip(radii, values))
    text = _table(("r", "p_t(r)"), [(f"{r:g}", f"{v:.10e}") for r, v in zip(radii, values)])
    if args.check_mass:
        text += f"\nmass = {out['mass']:.12f}  ({'pass' if out['mass_pass'] else 'FAIL'})"
    if args.check_semigroup:
        text += "\nChapman-Kolmogorov relative L2 defect:"
        for s, d in out["semigroup_defect"].items():
            text += f"\n  s = {s}: {d:.3e}"
        text += f"\n  ({'pass' if out['semigroup_pass'] else 'FAIL'})"
    return text


def cmd_semigroup(args) -> str:
    spec = semigroup.SemigroupSpec(args.kind, args.mu)
    report = semigroup.verify_lp_lq(spec, args.p, args.q)
    d = report.to_dict()
    if args.format == "json":
        return _dump(d)
    keys = ["kind", "p", "q", "fitted_rate", "fitted_power", "expected_gap",
            "expected_power", "pass"]
    if args.format == "csv":
        return ",".join(keys) + "\n" + ",".join(str(d[k]) for k in keys) + "\n"
    return _table(("quantity", "value"), [(k, d[k]) for k in keys])


def cmd_integral(args) -> str:
    ts = _sweep(args.sweep_t) if args.sweep_t else [args.t]
    results = [kato.scaling_integral(t, args.p, args.q, mu=args.mu, gamma=args.gamma)
               for t in ts]
    for r in results:
        if r.divergent:
            last = r.refinement_trace[-1][1]
            print(f"t={r.t:g}: divergent ({r.klass}); refinement trace reached {last:.6g}",
                  file=sys.stderr)
    if args.format == "json":
        return _dump([r.to_dict() for r in results])
    if args.format == "table":
        rows = [(f"{r.t:g}", "inf" if r.divergent else f"{r.value:.12g}",
                 "" if r.bound is None else f"{r.bound:.12g}", r.klass) for r in results]
        return _table(("t", "I", "bound", "class"), rows)
    return kato.results_to_csv(results).rstrip("\n")


def cmd_contraction(args) -> str:
    trace = contraction.majorant_iterate(args.c1, args.c2, args.u0, args.max_steps)
    d = trace.to_dict(include_iterates=args.format == "json")
    d["fixed_point"] = contraction.majorant_fixed_point(args.c1, args.c2, args.u0)
    d["ball_radius"] = 2.0 * args.c1 * args.u0
    if args.format == "json":
        return _dump(d)
    keys = ["c1", "c2", "u0_norm", "epsilon0", "verdict", "steps", "limit", "fixed_point",
            "ball_radius"]
    if args.format == "csv":
        return ",".join(keys) + "\n" + ",".join(str(d[k]) for k in keys) + "\n"
    return _table(("quantity", "value"), [(k, d[k]) for k in keys])


def cmd_simulate(args) -> str:
    system = contraction.build_galerkin(args.modes, args.gap, args.mu, args.density,
                                        args.seed, args.box)
    amplitude = args.amplitude
    if amplitude is None:
        amplitude = 1e-2 * args.mu * max(args.gap, 1)
    u0 = contraction.small_initial_state(args.modes, amplitude, args.seed)
    dt = args.dt if args.dt else min(0.05, contraction.stability_limit(system))
    traj = contraction.simulate(system, u0, args.t_end, dt)
    fit = traj.tail_fit()
    summary = {"fitted_rate": fit.rate, "predicted_rate": system.slowest_rate,
               "gap": args.gap, "mu": args.mu, "xi_min": system.xi_min, "dt": dt}
    if args.format == "json":
        summary["t"] = [float(x) for x in traj.times]
        summary["l2_norm"] = [float(x) for x in traj.l2_norms]
        return _dump(summary)
    print(f"fitted tail rate {fit.rate:.10g} (predicted {system.slowest_rate:.10g})",
          file=sys.stderr)
    if args.format == "table":
        stride = max(1, len(traj.times) // 20)
        rows = [(f"{t:g}", f"{n:.10e}") for t, n in
                zip(traj.times[::stride], traj.l2_norms[::stride])]
        return (_table(("t", "l2_norm"), rows)
                + f"\nfitted_rate = {fit.rate:.10g}\npredicted_rate = {system.slowest_rate:.10g}")
    return traj.to_csv().rstrip("\n")


def cmd_compare(args) -> str:
    try:
        gap_list = [int(g) for g in args.gaps.split(",")]
    except ValueError as exc:
        raise ParameterError(f"--gaps expects comma separated integers, got {args.gaps!r}") from exc
    cfg = contraction.CompareConfig(n_modes=args.modes, mu=args.mu, gaps=tuple(gap_list),
                                    t_end=args.t_end, dt=args.dt, seed=args.seed,
                                    amplitude=args.amplitude, box=args.box)
    report = contraction.compare_geometries(cfg)
    d = report.to_dict()
    if args.format == "json":
        return _dump(d)
    rows = [(g, f"{report.rates[g]:.10g}", f"{report.predicted[g]:.10g}") for g in report.gaps]
    if args.format == "csv":
        return "gap,fitted_rate,predicted_rate\n" + "".join(
            f"{g},{_g17(report.rates[g])},{_g17(report.predicted[g])}\n" for g in report.gaps)
    text = _table(("gap", "fitted_rate", "predicted_rate"), rows)
    text += f"\nflat finite-size floor mu*(pi/L)^2 = {report.finite_size_floor:.6g}"
    for k, v in report.checks.items():
        text += f"\n{k}: {'pass' if v else 'FAIL'}"
    return text


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, default_format="table"):
        p.add_argument("--format", choices=("table", "json", "csv"), default=default_format,
                       help=f"output format (default {default_format})")
        p.add_argument("--output", "-o", help="write data here instead of stdout")
        p.add_argument("--seed", type=int, default=0, help="determinism seed (default 0)")
        return p

    p = common(sub.add_parser("gaps", help="spectral gaps at integrability p"))
    p.add_argument("--p", default="2", help="exponent, e.g. 3, 3/2 or inf (default 2)")
    p.add_argument("--compare-laplacians", action="store_true",
                   help="L2 gaps of the Hodge, Bochner and deformation Laplacians")
    p.set_defaults(func=cmd_gaps)

    p = common(sub.add_parser("exponents", help="Fujita-Kato exponents for (p, q)"))
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.set_defaults(func=cmd_exponents)

    p = common(sub.add_parser("kernel", help="heat kernel values and invariant checks"))
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--r", type=float, nargs="*", help="radii (default 0 0.5 1 2 5 10)")
    p.add_argument("--check-mass", action="store_true")
    p.add_argument("--check-semigroup", action="store_true")
    p.set_defaults(func=cmd_kernel)

    p = common(sub.add_parser("semigroup", help="measure L^p -> L^q decay on Gaussian bumps"))
    p.add_argument("--kind", choices=sorted(semigroup.SHIFTS), default="scalar")
    p.add_argument("--p", default="2")
    p.add_argument("--q", default="2")
    p.add_argument("--mu", type=float, default=1.0)
    p.set_defaults(func=cmd_semigroup)

    p = common(sub.add_parser("integral", help="scaling integral I(t)"), "csv")
    p.add_argument("--p", required=True)
    p.add_argument("--q", default="6")
    p.add_argument("--gamma", type=float, help="spectral gap (default: bilinear gap at q/2)")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--sweep-t", help="a:b:n, n geometrically spaced times in [a, b]")
    p.set_defaults(func=cmd_integral)

    p = common(sub.add_parser("contraction", help="majorant recursion and threshold"))
    p.add_argument("--c1", type=float, default=1.0, help="conventional default 1")
    p.add_argument("--c2", type=float, default=1.0, help="conventional default 1")
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.set_defaults(func=cmd_contraction)

    def galerkin_flags(p):
        p.add_argument("--modes", type=int, default=32)
        p.add_argument("--mu", type=float, default=0.1)
        p.add_argument("--t-end", type=float, default=300.0)
        p.add_argument("--dt", type=float, default=0.05)
        p.add_argument("--amplitude", type=float, help="initial L2 norm (default 1e-2 mu max(g,1))")
        p.add_argument("--box", type=float, default=contraction.DEFAULT_BOX,
                       help="flat comparator box size L")

    p = common(sub.add_parser("simulate", help="integrate the Galerkin surrogate"), "csv")
    galerkin_flags(p)
    p.add_argument("--gap", type=int, choices=contraction.VALID_GAPS, default=4)
    p.add_argument("--density", type=float, default=0.1, help="fraction of triads coupled")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("compare", help="decay rates across gaps"))
    galerkin_flags(p)
    p.add_argument("--gaps", default="0,2,4")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        text = args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ParameterError as exc:
        parser.print_usage(sys.stderr)
        print(f"hypflow: parameter error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"hypflow: numerical failure: {exc}", file=sys.stderr)
        return 2
    if not text.endswith("\n"):
        text += "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
