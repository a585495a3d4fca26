"""Command line entry point ``lqreg``.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace

import numpy as np

from ..basis import Grid, make_fourier_basis
from ..core import error_measures
from ..operators import (
    apply,
    apply_adjoint,
    build_operator,
    default_grid_and_basis,
    evaluate_at,
    make_abel,
    make_nth_integral,
    make_symm,
    to_coefficients,
)
from ..rates import DecayProfile, certificates_csv, fit_empirical_rate, predict_exponent, range_certificates
from ..regparam import sdp_choose, strong_dp_check
from ..solver import TikhonovProblem, solve
from .config import ConfigError, load_config, load_schema
from .experiment import build_setup, run_experiment
from .noise import gen_noise

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1 rather than argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_op_args(p):
    p.add_argument("--op", required=True, choices=["diagonal", "hegland", "abel", "nth-integral", "symm"])
    p.add_argument("--n-basis", type=int, default=None)
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--decay", type=float, default=1.0, help="diagonal decay exponent a")
    p.add_argument("--nu", type=float, default=0.5, help="Abel exponent")
    p.add_argument("--n", type=int, default=2, help="antiderivative order")
    p.add_argument("--order", type=int, default=None, help="product-integration order (0 or 1)")
    p.add_argument("--radius", type=float, default=0.5, help="Symm circle radius")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lqreg", description="l^q_w Tikhonov regularization toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="one Tikhonov solve at a fixed alpha")
    p.add_argument("config")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, default=None, help="noise level (default: first of delta_grid)")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("sdp", help="one discrepancy-principle run")
    p.add_argument("config")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", default=None, help="write the SDP trace CSV here")

    p = sub.add_parser("range-cert", help="range certificates u_k = A* f_k")
    _add_op_args(p)
    p.add_argument("--k", default="1", help="index or inclusive range like 1:10")
    p.add_argument("--svd-cutoff", type=float, default=4e-3)
    p.add_argument("--out", default=None)

    p = sub.add_parser("rates", help="predicted and fitted rate exponents")
    rsub = p.add_subparsers(dest="rates_command", parser_class=_Parser)
    rsub.required = True
    rp = rsub.add_parser("predict")
    rp.add_argument("--mu", type=float, required=True)
    rp.add_argument("--nu", type=float, required=True)
    rp.add_argument("--q", type=float, required=True)
    rp.add_argument("--measure", choices=["E_q", "E_1"], default="E_q")
    rp.add_argument("--kind", choices=["monomial", "exponential"], default="monomial")
    rp.add_argument("--gamma", type=float, default=None)
    rf = rsub.add_parser("fit")
    rf.add_argument("csv", help="rate report CSV")
    rf.add_argument("--measure", choices=["E_q", "E_1", "E_2"], default="E_1")
    rf.add_argument("--range", type=float, nargs=2, default=None, metavar=("LO", "HI"))

    p = sub.add_parser("operator", help="operator diagnostics")
    osub = p.add_subparsers(dest="operator_command", parser_class=_Parser)
    osub.required = True
    oc = osub.add_parser("check")
    _add_op_args(oc)
    oc.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("experiment", help="noise-level sweeps")
    esub = p.add_subparsers(dest="experiment_command", parser_class=_Parser)
    esub.required = True
    er = esub.add_parser("run")
    er.add_argument("config")
    er.add_argument("--csv", default=None, help="override output.csv")
    er.add_argument("--summary", default=None, help="override output.summary")
    esub.add_parser("schema", help="print the config schema")
    return parser


# {{{ subcommands


def _pick(cfg, delta, seed):
    """Noise level, seed and noise stream; grid levels reuse the sweep's stream."""
    d = cfg.delta_grid[0] if delta is None else delta
    s = cfg.seeds[0] if seed is None else seed
    stream = cfg.delta_grid.index(d) if d in cfg.delta_grid else 0
    return d, s, stream


def _cmd_solve(args):
    cfg = load_config(args.config)
    setup = build_setup(cfg)
    delta, seed, stream = _pick(cfg, args.delta, args.seed)
    y_delta = gen_noise(setup.y, delta, seed, stream)
    problem = TikhonovProblem(setup.op, y_delta, delta, cfg.penalty, args.alpha)
    res = solve(problem, cfg.solver, seed=seed, op_norm=setup.op_norm)
    em = error_measures(res.x, setup.xdag, cfg.penalty)
    _print_json(
        {
            "alpha": args.alpha,
            "delta": delta,
            "seed": seed,
            "objective": res.objective,
            "discrepancy": res.discrepancy,
            "iterations": res.iterations,
            "converged": res.converged,
            "support_size": len(res.support),
            **em._asdict(),
        }
    )
    return EXIT_OK if res.converged else EXIT_NUMERIC


def _cmd_sdp(args):
    cfg = load_config(args.config)
    setup = build_setup(cfg)
    delta, seed, stream = _pick(cfg, args.delta, args.seed)
    y_delta = gen_noise(setup.y, delta, seed, stream)
    alpha, res, trace = sdp_choose(setup.op, y_delta, delta, cfg.penalty, cfg.sdp, _opts(cfg, seed, setup))
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            fh.write(trace.to_csv())
    out = {"delta": delta, "seed": seed, "status": trace.status, "alpha_star": alpha, "steps": len(trace.steps)}
    if res is not None:
        out.update(discrepancy=res.discrepancy, **error_measures(res.x, setup.xdag, cfg.penalty)._asdict())
    if cfg.sdp.tau1 is not None:
        out["strong_dp"] = strong_dp_check(trace, delta, cfg.sdp.tau1, cfg.sdp.tau2)
    _print_json(out)
    return EXIT_OK if res is not None else EXIT_NUMERIC


def _opts(cfg, seed, setup):
    return replace(cfg.solver, seed=seed, op_norm=setup.op_norm)


def _coefficient_operator(args):
    label = args.op
    if label in ("diagonal", "hegland"):
        n = args.n_basis or 50
        return build_operator({"label": label, "decay": args.decay, "n_basis": n})
    n_basis = args.n_basis or 32
    n_points = args.n_points or 4 * n_basis
    grid, basis = default_grid_and_basis(label, n_points, n_basis)
    spec = {"label": label, "nu": args.nu, "n": args.n, "radius": args.radius}
    if args.order is not None:
        spec["order"] = args.order
    return to_coefficients(build_operator(spec, grid), basis)


def _parse_k(text, n):
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigError(f"bad --k value {text!r}") from None
    if not 1 <= lo <= hi <= n:
        raise ConfigError(f"--k range {text} outside 1..{n}")
    return range(lo, hi + 1)


def _cmd_range_cert(args):
    op = _coefficient_operator(args)
    ks = _parse_k(args.k, op.shape[1])
    text = certificates_csv(range_certificates(op, ks, args.svd_cutoff))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_rates_predict(args):
    try:
        profile = DecayProfile(args.mu, args.nu, kind=args.kind, gamma=args.gamma)
        value = predict_exponent(profile, args.q, args.measure)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(value if isinstance(value, float) else str(value))
    return EXIT_OK


def _cmd_rates_fit(args):
    per_delta = {}
    try:
        with open(args.csv, encoding="utf-8", newline="") as fh:
            rows = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in rows:
                if row.get("sdp_status") != "found":
                    continue
                per_delta.setdefault(float(row["delta"]), []).append(float(row[args.measure]))
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror or exc}") from None
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{args.csv}: not a rate report ({exc})") from None
    records = [(d, float(np.median(v))) for d, v in sorted(per_delta.items(), reverse=True)]
    fit = fit_empirical_rate(records, tuple(args.range) if args.range else None)
    _print_json(fit._asdict())
    return EXIT_OK


def _cmd_operator_check(args):
    rows = []
    if args.op == "symm":
        n_points = args.n_points or 256
        grid = Grid.periodic(n_points)
        op = make_symm(args.radius, grid)
        basis = make_fourier_basis(grid, min(17, n_points // 4))
        t = grid.nodes
        print(f"# Symm radius={args.radius:g} n_points={n_points}: mode, expected, computed, abs_error")
        expected = -2.0 * math.log(args.radius)
        got = apply(op, np.ones(n_points))
        rows.append(("const", expected, float(np.mean(got)), float(np.max(np.abs(got - expected)))))
        for k in range(1, 9):
            mode = np.cos(k * t)
            got = apply(op, mode)
            val = float(got @ mode) * 2.0 / n_points
            rows.append((f"cos{k}", 1.0 / k, val, float(np.max(np.abs(got - mode / k)))))
        for name, exp, val, err in rows:
            print(f"{name:>6} {exp:.9f} {val:.9f} {err:.3e}")
        worst = max(r[3] for r in rows)
        coef = to_coefficients(op, basis)
    elif args.op in ("abel", "nth-integral"):
        n_points = args.n_points or 512
        print(f"# {args.op}: n_points, [A 1](1), exact, abs_error")
        errs = []
        for n in (n_points // 2, n_points, 2 * n_points):
            grid = Grid.midpoint(n)
            if args.op == "abel":
                op = make_abel(args.nu, grid, order=args.order or 0)
                exact = 1.0 / math.gamma(args.nu + 1.0)
            else:
                op = make_nth_integral(args.n, grid, order=1 if args.order is None else args.order)
                exact = 1.0 / math.factorial(args.n)
            val = float(evaluate_at(op, np.ones(n), [1.0])[0])
            errs.append(abs(val - exact))
            print(f"{n:>6} {val:.12f} {exact:.12f} {errs[-1]:.3e}")
        worst = errs[1]
        coef = None
        grid = Grid.midpoint(n_points)
        op = make_abel(args.nu, grid) if args.op == "abel" else make_nth_integral(args.n, grid)
    else:
        coef = _coefficient_operator(args)
        op = coef
        worst = 0.0
    # adjoint identity on seeded random vectors
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    x = rng.standard_normal(op.shape[1])
    y = rng.standard_normal(op.shape[0])
    lhs = _inner(op.codomain_weights, apply(op, x), y)
    rhs = _inner(op.domain_weights, x, apply_adjoint(op, y))
    adj_err = abs(lhs - rhs) / max(1.0, abs(lhs))
    print(f"adjoint_identity_rel_error {adj_err:.3e}")
    if coef is not None:
        sv = np.linalg.svd(coef.matrix, compute_uv=False)
        print(f"singular_values max={sv[0]:.6e} min={sv[-1]:.6e}")
    if not math.isfinite(worst) or adj_err > 1e-10:
        return EXIT_NUMERIC
    return EXIT_OK


def _inner(w, a, b):
    return float(np.dot(w * a, b)) if w is not None else float(np.dot(a, b))


def _cmd_experiment_run(args):
    cfg = load_config(args.config)
    report = run_experiment(cfg, write=False)
    csv_path = args.csv or cfg.csv_path
    summary_path = args.summary or cfg.summary_path
    report.write(csv_path, summary_path)
    if csv_path is None:
        sys.stdout.write(report.to_csv())
    fit = report.summary["fit"]
    msg = report.summary.get("fit_note") if fit is None else (
        f"exponent {fit['exponent']:.4f} +- {fit['stderr']:.4f} (r^2 {fit['r_squared']:.4f}),"
        f" predicted {report.summary['predicted_exponent']}"
    )
    print(msg, file=sys.stderr)
    return EXIT_OK


def _cmd_experiment_schema(args):
    _print_json(load_schema())
    return EXIT_OK


# }}}


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_plain))


def _plain(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(type(x).__name__)


_DISPATCH = {
    ("solve", None): _cmd_solve,
    ("sdp", None): _cmd_sdp,
    ("range-cert", None): _cmd_range_cert,
    ("rates", "predict"): _cmd_rates_predict,
    ("rates", "fit"): _cmd_rates_fit,
    ("operator", "check"): _cmd_operator_check,
    ("experiment", "run"): _cmd_experiment_run,
    ("experiment", "schema"): _cmd_experiment_schema,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    sub = getattr(args, f"{args.command.replace('-', '_')}_command", None)
    handler = _DISPATCH[(args.command, sub)]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"lqreg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"lqreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
