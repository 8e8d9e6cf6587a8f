"""Command-line interface: ``otsr <command> [options]``.

Commands
--------
demo1d          sparse approximation of a 1-D histogram, trace written as CSV
classify        star-cluster classification of a manifest of image patches
classify-naive  the same without sparse approximation
noise-bench     Monte Carlo check of the Gaussian-noise transport bound
oracle-check    Sinkhorn distance against exact 1-D transport

Exit codes are 0 on success, 1 when a solver fails or a check is violated,
and 2 on I/O or configuration errors.
"""

import argparse
import contextlib
import math
import sys

import numpy as np

from .core import cost_lattice1d, make_probvec
from .exceptions import OTSRError, TooLarge
from .sinkhorn import SinkhornConfig, sinkhorn
from .solver import SIMULATION_DEFAULTS, STAR_DEFAULTS, SolverConfig, sparse_approx
from . import pipeline, simulate

__all__ = ["main", "build_parser", "DEMO_NU"]

#: Measurement of the two-cluster 1-D demo, before normalization.
DEMO_NU = (0.2, 0.15, 0, 0, 0, 0.1, 0.15, 0.2, 0.15, 0.1)

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class _ConfigError(Exception):
    pass


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def _nonnegative(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return value


def _add_solver_flags(p, d):
    p.add_argument("--lambda", dest="lam", type=_nonnegative, default=d.lam,
                   help="entropy penalty weight")
    p.add_argument("--epsilon", type=_positive(float), default=d.epsilon,
                   help="Sinkhorn regularization")
    p.add_argument("--initial-step", type=_positive(float), default=d.initial_step,
                   help="first trial step size")
    p.add_argument("--step-cap", type=_positive(float), default=d.step_cap,
                   help="largest trial step size")
    p.add_argument("--max-steps", type=int, default=d.max_steps,
                   help="gradient steps")
    p.add_argument("--sinkhorn-iters", type=_positive(int), default=d.sinkhorn.max_iter,
                   help="Sinkhorn iteration cap per solve")
    p.add_argument("--sinkhorn-tol", type=_positive(float), default=d.sinkhorn.tol,
                   help="Sinkhorn marginal tolerance")


def _solver_config(args):
    return SolverConfig(
        lam=args.lam,
        initial_step=args.initial_step,
        step_cap=args.step_cap,
        max_steps=args.max_steps,
        sinkhorn=SinkhornConfig(
            epsilon=args.epsilon, max_iter=args.sinkhorn_iters, tol=args.sinkhorn_tol
        ),
    )


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults only for options that have a meaningful one."""

    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


def build_parser():
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(prog="otsr", description="Sparse transport solvers and checks.",
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo1d", formatter_class=fmt,
                       help="sparse approximation of a 1-D histogram")
    _add_solver_flags(p, SIMULATION_DEFAULTS)
    p.add_argument("--cost-power", type=_positive(float), default=2.0,
                   help="ground cost |i - j| ** power on the index lattice")
    p.add_argument("--input", help="CSV file with the histogram (built-in demo if omitted)")
    p.add_argument("--output", help="trace CSV path (standard output if omitted)")

    for name, method in (("classify", "sparse"), ("classify-naive", "naive")):
        p = sub.add_parser(name, formatter_class=fmt, help=f"{method} star-cluster classification")
        _add_solver_flags(p, STAR_DEFAULTS)
        p.add_argument("--threshold", type=_positive(float), default=0.75,
                       help="superlevel fraction of the maximum")
        p.add_argument("--connectivity", type=int, choices=(4, 8), default=8,
                       help="pixel neighbourhood for component counting")
        p.add_argument("--method", choices=("sparse", "naive"), default=method,
                       help="threshold the sparse approximation or the raw band")
        p.add_argument("--cost", choices=("l1", "l2"), default="l2",
                       help="pixel ground metric")
        p.add_argument("--input", required=True, help="manifest JSON path")
        p.add_argument("--output", help="JSON-lines output path")

    p = sub.add_parser("noise-bench", formatter_class=fmt,
                       help="Monte Carlo check of the Gaussian-noise bound")
    p.add_argument("--d", type=_positive(int), default=2, help="dimension")
    p.add_argument("--sigma", type=_nonnegative, default=0.5, help="noise standard deviation")
    p.add_argument("--n", type=_positive(int), default=10, help="samples per source")
    p.add_argument("--k", type=_positive(int), default=3, help="number of sources")
    p.add_argument("--trials", type=_positive(int), default=1000, help="Monte Carlo trials")
    p.add_argument("--seed", type=int, default=7, help="seed for sources and trials")
    p.add_argument("--no-exact", action="store_true",
                   help="skip the exact transport distance column")
    p.add_argument("--output", help="CSV path (standard output if omitted)")

    p = sub.add_parser("oracle-check", formatter_class=fmt,
                       help="Sinkhorn distance against exact 1-D transport")
    p.add_argument("--n", type=_positive(int), default=8,
                   help="largest histogram length; sizes are drawn from 2..n")
    p.add_argument("--instances", type=_positive(int), default=200,
                   help="number of random histogram pairs")
    p.add_argument("--epsilon", type=_positive(float), default=0.01,
                   help="Sinkhorn regularization")
    p.add_argument("--sinkhorn-iters", type=_positive(int), default=200000,
                   help="Sinkhorn iteration cap per solve")
    p.add_argument("--seed", type=int, default=0, help="instance t uses seed + t")
    p.add_argument("--output", help="CSV path (standard output if omitted)")
    return parser


@contextlib.contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as f:
            yield f


def _read_vector(path):
    with open(path) as f:
        text = f.read().replace("\n", ",")
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise _ConfigError(f"{path}: no values")
    return values


def cmd_demo1d(args):
    raw = _read_vector(args.input) if args.input else DEMO_NU
    nu = make_probvec(raw)
    cost = cost_lattice1d(nu.size, args.cost_power)
    trace = sparse_approx(nu, cost, _solver_config(args))
    header = ["step"] + [f"v{i}" for i in range(nu.size)] + ["objective"]
    rows = [[t, *v, j] for t, (v, j) in enumerate(zip(trace.iterates, trace.objectives))]
    with _open_out(args.output) as f:
        simulate.write_rows_csv(f, header, rows)
    final = " ".join(f"{x:.4f}" for x in trace.final)
    print(f"final: {final}", file=sys.stdout if args.output else sys.stderr)
    print(f"steps: {trace.steps} ({trace.stop_reason})", file=sys.stderr)
    return EXIT_OK


def cmd_classify(args):
    cfg = _solver_config(args)
    if not 0 < args.threshold <= 1:
        raise _ConfigError("--threshold must lie in (0, 1]")
    try:
        summary = pipeline.run_batch(args.input, cfg, args.output, args.method,
                                     args.threshold, args.connectivity,
                                     args.cost.upper())
    except (ValueError, KeyError, TypeError) as exc:
        raise _ConfigError(f"cannot read manifest: {exc}") from exc
    print(f"cluster: {summary['cluster']}, not-cluster: {summary['notCluster']}"
          f", errors: {summary['errors']}")
    return EXIT_OK


def cmd_noise_bench(args):
    exact = not args.no_exact
    n_total = args.k * args.n
    if exact and args.k * n_total > simulate.LP_MAX_VARIABLES:
        raise _ConfigError(
            f"exact distance needs k*N = {args.k * n_total} <= {simulate.LP_MAX_VARIABLES}"
            " LP variables; pass --no-exact"
        )
    rows = simulate.noise_bench(args.d, args.sigma, args.n, args.k, args.trials,
                                args.seed, exact=exact)
    with _open_out(args.output) as f:
        simulate.write_rows_csv(f, simulate.NOISE_BENCH_COLUMNS, rows)
    bounds = np.array([r[1] for r in rows])
    target = args.d * args.sigma**2
    var_target = 2 * args.d * args.sigma**4 / n_total
    se = math.sqrt(var_target / args.trials)
    failures = []
    if abs(bounds.mean() - target) > 3 * se:
        failures.append(f"mean {bounds.mean():.6g} not within 3 SE ({se:.3g}) of {target:.6g}")
    if n_total >= 30 and args.sigma > 0 and args.trials > 1:
        var = bounds.var(ddof=1)
        if abs(var - var_target) > 0.2 * var_target:
            failures.append(f"variance {var:.6g} not within 20% of {var_target:.6g}")
    if exact:
        below = sum(1 for _, b, e in rows if b < e - 1e-9)
        if below:
            failures.append(f"bound below exact distance in {below} trials")
    print(f"mean bound {bounds.mean():.6g} (expected {target:.6g})", file=sys.stderr)
    for msg in failures:
        print(f"FAIL: {msg}", file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


ORACLE_COLUMNS = ("instance", "n", "sinkhorn", "exact_1d", "exact_lp", "gap", "bound")


def oracle_rows(n_max, instances, epsilon, seed, sinkhorn_iters=200000):
    """Random strictly positive 1-D instances with Sinkhorn and exact distances."""
    cfg = SinkhornConfig(epsilon=epsilon, max_iter=sinkhorn_iters)
    rows = []
    for t in range(instances):
        rng = np.random.default_rng(seed + t)
        n = int(rng.integers(2, n_max + 1)) if n_max > 2 else n_max
        mu = make_probvec(rng.uniform(0.05, 1.0, n))
        nu = make_probvec(rng.uniform(0.05, 1.0, n))
        cost = cost_lattice1d(n)
        d = sinkhorn(mu, nu, cost, cfg).distance
        e1 = float(simulate.exact_ot_1d(mu, nu))
        elp = simulate.exact_ot_lp(mu, nu, cost)
        rows.append((t, n, d, e1, elp, abs(d - e1), 2 * epsilon * math.log(n) + 1e-6))
    return rows


def cmd_oracle_check(args):
    if args.n < 1 or args.n * args.n > simulate.LP_MAX_VARIABLES:
        raise _ConfigError(f"--n must satisfy n*n <= {simulate.LP_MAX_VARIABLES}")
    rows = oracle_rows(args.n, args.instances, args.epsilon, args.seed, args.sinkhorn_iters)
    with _open_out(args.output) as f:
        simulate.write_rows_csv(f, ORACLE_COLUMNS, rows)
    gap_fail = sum(1 for r in rows if r[5] > r[6])
    lp_fail = sum(1 for r in rows if abs(r[3] - r[4]) > 1e-9)
    worst = max((r[5] for r in rows), default=0.0)
    print(f"max gap {worst:.3g}; bound violations {gap_fail}; oracle disagreements {lp_fail}",
          file=sys.stderr)
    return EXIT_FAIL if gap_fail or lp_fail else EXIT_OK


COMMANDS = {
    "demo1d": cmd_demo1d,
    "classify": cmd_classify,
    "classify-naive": cmd_classify,
    "noise-bench": cmd_noise_bench,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "max_steps", 0) < 0:
            raise _ConfigError("--max-steps must be nonnegative")
        return COMMANDS[args.command](args)
    except (_ConfigError, OSError, TooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OTSRError, ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
