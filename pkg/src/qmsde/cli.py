"""Command-line entry point: ``qmsde {catalog,simulate,transform-eval,study,selfcheck}``."""

import argparse
import csv
import sys

import numpy as np

from . import catalog
from .brownian import coarsen, generate_path
from .schemes import invert_transformed, resolve_scheme, simulate
from .serialization import ProblemFileError, resolve_problem
from .study import StudyConfig, run_study
from .transform import _g, _ginv, _gp, _gpp, compute_alpha, rho_max, transformed_problem

# options whose values may start with '-' (e.g. "--grid -1:1:0.01")
_NEGATIVE_OK = ("--grid", "--nu")


def _join_negative_values(argv):
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _NEGATIVE_OK and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def _parse_grid(text):
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like start:stop:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    count = int(round((b - a) / step)) + 1
    return a + step * np.arange(count)


def _parse_p(text):
    return tuple(float(v) for v in text.split(","))


def _problem(args):
    try:
        return resolve_problem(args.problem)
    except (KeyError, ProblemFileError) as exc:
        raise SystemExit(f"error: {exc.args[0] if isinstance(exc, KeyError) else exc}")


def _transformed(problem, nu, tol):
    try:
        return transformed_problem(problem, nu, tol)
    except ValueError as exc:
        z = problem.mu.breakpoints
        rho = rho_max(z, compute_alpha(problem)) if problem.assumption_class == "A" else float("nan")
        raise SystemExit(f"error: {exc} (rho = {rho})")


def cmd_catalog(args, out):
    for name in catalog.list_problems():
        out.write(f"{name:6s}  {catalog.describe(name)}\n")
    return 0


def cmd_simulate(args, out):
    problem = _problem(args)
    scheme = resolve_scheme(args.scheme)
    n_ref = args.nref if args.nref is not None else args.n
    try:
        lattice = generate_path(args.seed, args.path_index, n_ref)
        inc = coarsen(lattice, args.n)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    target = _transformed(problem, args.nu, args.tol) if scheme == "transformed_qm" else problem
    path = simulate(target, scheme, args.n, inc)
    if scheme == "transformed_qm" and not args.raw:
        path = invert_transformed(path, target, args.tol)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "value"])
    for t, v in zip(path.times, path.values):
        w.writerow([repr(float(t)), repr(float(v))])
    return 0


def cmd_transform_eval(args, out):
    problem = _problem(args)
    tsde = _transformed(problem, args.nu, args.tol)
    T = tsde.params
    x = args.grid
    left = _gpp(T, x, [-2.0 * a for a in T.alpha])
    right = _gpp(T, x, [2.0 * a for a in T.alpha])
    mt, st, _ = tsde.coefficients(x, with_delta=False)
    cols = {
        "x": x,
        "G": _g(T, x),
        "G1": _gp(T, x),
        "G2_left": left,
        "G2_right": right,
        "Ginv": _ginv(T, x, args.tol),
        "mu_tilde": mt,
        "sigma_tilde": st,
    }
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(cols))
    for row in zip(*cols.values()):
        w.writerow([repr(float(v)) for v in row])
    return 0


def cmd_study(args, out):
    problem = _problem(args)
    try:
        config = StudyConfig(
            problem=args.problem if isinstance(args.problem, str) else problem,
            scheme=args.scheme,
            levels=args.levels,
            n_ref=args.nref,
            M=args.M,
            p_list=args.p,
            seed=args.seed,
            nu=args.nu,
            error_mode=args.error_mode,
            tol=args.tol,
        )
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    if config.scheme == "transformed_qm" or problem.assumption_class == "A":
        if problem.exact_solution is None or config.scheme == "transformed_qm":
            _transformed(problem, args.nu, args.tol)
    report = run_study(config, workers=args.workers)
    out.write(report.summary() + "\n")
    if args.out:
        paths = report.write(args.out)
        out.write(f"wrote {paths['json']}, {paths['csv']}, {paths['command']}\n")
    return 0


def cmd_selfcheck(args, out):
    from .selfcheck import run_selfcheck

    return 0 if run_selfcheck(out) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="qmsde", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", help="list built-in problems").set_defaults(func=cmd_catalog)

    def common(p, tol=True):
        p.add_argument("--problem", required=True, help="catalog id or JSON problem file")
        p.add_argument("--nu", type=float, default=None, help="bump half-width (default rho/2)")
        if tol:
            p.add_argument("--tol", type=float, default=1e-12, help="G^-1 residual tolerance")

    p = sub.add_parser("simulate", help="one path as CSV (t, value)")
    common(p)
    p.add_argument("--scheme", default="qm", choices=["euler", "qm", "tqm"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nref", type=int, default=None, help="fine lattice level (default n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="emit transformed states for tqm")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transform-eval", help="tabulate G, G', G'' sides, G^-1, mu~, sigma~")
    common(p)
    p.add_argument("--grid", type=_parse_grid, required=True, help="start:stop:step")
    p.set_defaults(func=cmd_transform_eval)

    p = sub.add_parser("study", help="strong-error convergence study")
    common(p)
    p.add_argument("--scheme", default="qm", choices=["euler", "qm", "tqm"])
    p.add_argument("--levels", default="16..512", help="a..b (powers of two) or comma list")
    p.add_argument("--nref", type=int, default=None, help="reference level (default 16*max level)")
    p.add_argument("--M", type=int, default=2000, help="number of paths")
    p.add_argument("--p", type=_parse_p, default=(1.0, 2.0), help="comma-separated L_p exponents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--error-mode", default="final_time", choices=["final_time", "grid_sup"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="directory for report.json, report.csv, command.txt")
    p.set_defaults(func=cmd_study)

    sub.add_parser("selfcheck", help="fast invariant suite").set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None, out=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(_join_negative_values(argv))
    return args.func(args, out)


if __name__ == "__main__":
    sys.exit(main())
