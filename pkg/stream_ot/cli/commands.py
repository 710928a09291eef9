"""
Command Line
============

Subcommands of `python -m stream_ot`:

    run         run online or compressed online Sinkhorn and write a trace
    rates       theoretical convergence rates for (a, b)
    complexity  complexity exponents for (a, b, zeta)
    reference   discrete Sinkhorn reference value
    plot        log-log SVG of one or more traces

Every StreamOTError is logged and turned into exit code 2.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

from stream_ot import __version__
from stream_ot.analysis.fitting import fit_loglog_slope
from stream_ot.analysis.rates import complexity_exponents, theoretical_rates
from stream_ot.cli.experiment import read_trace_csv, run_experiment
from stream_ot.cli.plotting import emit_plot
from stream_ot.config import settings
from stream_ot.config.run_config import RunConfig, dump_config, parse_config
from stream_ot.core.discrete_sinkhorn import reference_dual_value
from stream_ot.errors import ConfigurationError, StreamOTError
from stream_ot.utils.helpers import colored, format_terminal_header, setup_logging

EXIT_OK = 0
EXIT_ERROR = 2

DEFAULT_REFERENCE_N = 1024

# flags of `run` that map one-to-one onto RunConfig keys
_RUN_KEYS = ("experiment", "distribution", "epsilon", "a", "b", "zeta", "algo", "compress",
             "trigger", "every", "n_max", "iterations", "seed", "output", "reference_n", "compare")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stream_ot",
        description="Online and compressed online Sinkhorn on streaming samples.",
    )
    parser.add_argument("--version", action="version", version=f"stream_ot {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    parser.add_argument("--quiet", action="store_true", help="no banner, warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write its trace")
    run.add_argument("configs", nargs="*", metavar="CONFIG", help="flat JSON config files")
    run.add_argument("--experiment", help="named experiment preset")
    run.add_argument("--distribution", help="distribution preset name")
    run.add_argument("--epsilon", type=float)
    run.add_argument("--a", type=float, help="batch growth exponent")
    run.add_argument("--b", type=float, help="learning-rate exponent")
    run.add_argument("--zeta", type=float, help="compression regularity")
    run.add_argument("--algo", choices=("os", "cos"))
    run.add_argument("--compress", choices=("none", "fourier", "gq"))
    run.add_argument("--trigger", type=int, help="samples before compression starts")
    run.add_argument("--every", type=int, help="compression cadence in iterations")
    run.add_argument("--n-max", dest="n_max", type=int, help="sample budget per side")
    run.add_argument("--iterations", type=int, help="iteration count (instead of --n-max)")
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help="trace CSV path")
    run.add_argument("--reference-n", dest="reference_n", type=int,
                     help="samples per side of the discrete reference value")
    run.add_argument("--reference", dest="reference_n", action="store_const", const=DEFAULT_REFERENCE_N,
                     help=f"add the relative objective error against a {DEFAULT_REFERENCE_N}-sample reference")
    run.add_argument("--compare", action="store_const", const=True, default=None,
                     help="also run uncompressed on the same seed and compare")
    run.add_argument("--jobs", type=int, default=1, help="config files run concurrently")
    run.add_argument("--dump-config", action="store_true", help="print the effective config and exit")

    rates = sub.add_parser("rates", help="theoretical convergence rates")
    rates.add_argument("--a", type=float, required=True)
    rates.add_argument("--b", type=float, required=True)
    rates.add_argument("--trace", help="trace CSV whose err_succ_var slope is fitted alongside")

    complexity = sub.add_parser("complexity", help="complexity exponents of OS and COS")
    complexity.add_argument("--a", type=float, required=True)
    complexity.add_argument("--b", type=float, required=True)
    complexity.add_argument("--zeta", type=float, required=True)

    reference = sub.add_parser("reference", help="discrete Sinkhorn reference value")
    reference.add_argument("--experiment", help="take distribution and epsilon from a preset")
    reference.add_argument("--distribution")
    reference.add_argument("--epsilon", type=float)
    reference.add_argument("--n-ref", dest="n_ref", type=int, default=DEFAULT_REFERENCE_N)
    reference.add_argument("--seed", type=int)
    reference.add_argument("--tol", type=float, default=1e-9)

    plot = sub.add_parser("plot", help="log-log SVG of trace files")
    plot.add_argument("traces", nargs="+", metavar="TRACE")
    plot.add_argument("--out", required=True, help="SVG path")
    plot.add_argument("--a", type=float, default=RunConfig.a)
    plot.add_argument("--b", type=float, default=RunConfig.b)
    plot.add_argument("--labels", nargs="+")
    plot.add_argument("--column", default="err_succ_var")
    return parser


# ----------------------------------------
#  SUBCOMMANDS
# ----------------------------------------
def _run_one(cfg: RunConfig) -> str:
    return run_experiment(cfg).summary


def _run_in_worker(cfg: RunConfig, level: Optional[str]) -> str:
    setup_logging(level)
    return _run_one(cfg)


def cmd_run(args: argparse.Namespace, level: str) -> int:
    overrides = {key: getattr(args, key) for key in _RUN_KEYS}
    paths: Sequence[Optional[str]] = args.configs or [None]
    configs = [parse_config(path, overrides) for path in paths]

    if args.dump_config:
        for cfg in configs:
            print(dump_config(cfg))
        return EXIT_OK

    outputs = [cfg.trace_path() for cfg in configs]
    if len(set(outputs)) != len(outputs):
        raise ConfigurationError(f"configs write to the same trace path: {outputs}")
    if args.jobs < 1:
        raise ConfigurationError(f"--jobs must be at least 1, got {args.jobs}")

    if not args.quiet:
        format_terminal_header("run", ", ".join(cfg.label for cfg in configs))
        config = settings.get_config()
        print(f"\n{colored('Configuration:', 'blue', attrs=['bold'])}")
        print(f"  {'Output directory:':<25} {config['output_dir']}")
        print(f"  {'Compression trigger:':<25} {config['trigger_n']} (default)")
        print(f"  {'Grid / probe points:':<25} {config['grid_size']} / {config['probe_size']}")
        print(f"  {'Processes:':<25} {min(args.jobs, len(configs))}")
        print(colored("=" * 69, "blue"))

    if args.jobs == 1 or len(configs) == 1:
        summaries = [_run_one(cfg) for cfg in configs]
    else:
        logging.info(f"Running {len(configs)} configs on {args.jobs} processes")
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_run_in_worker, configs, [level] * len(configs)))
    for line in summaries:
        print(line)
    return EXIT_OK


def cmd_rates(args: argparse.Namespace) -> int:
    report = theoretical_rates(args.a, args.b)
    if args.trace:
        fit = fit_loglog_slope(read_trace_csv(args.trace))
        report = report.with_fit(fit.slope, fit.window)
    print(report.line())
    return EXIT_OK


def cmd_complexity(args: argparse.Namespace) -> int:
    print(complexity_exponents(args.a, args.b, args.zeta).line())
    return EXIT_OK


def cmd_reference(args: argparse.Namespace) -> int:
    cfg = parse_config(None, {"experiment": args.experiment, "distribution": args.distribution,
                              "epsilon": args.epsilon, "seed": args.seed})
    alpha, beta = cfg.distributions()
    ref = reference_dual_value(alpha, beta, cfg.epsilon, args.n_ref, cfg.seed, tol=args.tol)
    print(
        f"reference={ref.value:.10f} converged={str(ref.converged).lower()} n_ref={ref.n_ref} "
        f"seed={ref.seed} iterations={ref.iterations} distribution={cfg.label} epsilon={cfg.epsilon}"
    )
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    path = emit_plot(args.traces, args.out, args.a, args.b, labels=args.labels, column=args.column)
    print(f"plot={path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the command line.

    Args:
        argv: Arguments without the program name; sys.argv by default

    Returns:
        Exit code
    """
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else ("WARNING" if args.quiet else None)
    setup_logging(level)

    try:
        if args.command == "run":
            return cmd_run(args, level)
        if args.command == "rates":
            return cmd_rates(args)
        if args.command == "complexity":
            return cmd_complexity(args)
        if args.command == "reference":
            return cmd_reference(args)
        return cmd_plot(args)
    except StreamOTError as e:
        logging.error(f"{type(e).__name__}: {e}")
        if not args.quiet:
            print(colored(f"error: {e}", "red"), file=sys.stderr)
        return EXIT_ERROR
