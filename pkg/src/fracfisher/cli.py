"""Command line entry point.

Subcommands:
  run <config>      single trajectory with the configured model
  compare <config>  both models on identical grids, side-by-side mass report
  sweep <config>    one run per requested fractional order
  verify            oracle suite for the temporal/spatial kernels

Exit status: 0 success, 1 configuration error (including unknown flags or
subcommands), 2 solver failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import models, observe_io, scenarios

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the contract here is exit 1
    def error(self, message):
        raise _CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fracfisher",
                     description="Time-fractional Fisher-KPP solver")
    sub = parser.add_subparsers(dest="command")

    def add_overrides(p, with_model=True):
        p.add_argument("--alpha", type=float, help="fractional order in (0, 1]")
        if with_model:
            p.add_argument("--model", choices=models.MODELS)
        p.add_argument("--N", type=int, help="number of time steps")
        p.add_argument("--nx", type=int, help="cells per axis (sets ny too)")
        p.add_argument("--gamma", type=float, help="temporal grading exponent")
        p.add_argument("--ic", help="initial condition type")
        p.add_argument("--bc", choices=models.BOUNDARY_CONDITIONS)
        p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run a single trajectory")
    p_run.add_argument("config", help="path to a configuration file")
    add_overrides(p_run)

    p_cmp = sub.add_parser("compare", help="run both models and compare mass curves")
    p_cmp.add_argument("config")
    add_overrides(p_cmp, with_model=False)

    p_sweep = sub.add_parser("sweep", help="one run per fractional order")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--alpha", required=True,
                         help="comma-separated fractional orders, e.g. 0.25,0.5,1.0")
    for name, kwargs in (("--model", {"choices": models.MODELS}),
                         ("--N", {"type": int}), ("--nx", {"type": int}),
                         ("--gamma", {"type": float}), ("--ic", {}),
                         ("--bc", {"choices": models.BOUNDARY_CONDITIONS}),
                         ("--out", {})):
        p_sweep.add_argument(name, **kwargs)

    sub.add_parser("verify", help="run the oracle checks and print a table")
    return parser


def _apply_overrides(config: scenarios.RunConfig, args,
                     alpha=None) -> scenarios.RunConfig:
    physics = config.physics
    kwargs = {}
    if alpha is not None:
        kwargs["alpha"] = float(alpha)
    elif getattr(args, "alpha", None) is not None and not isinstance(args.alpha, str):
        kwargs["alpha"] = args.alpha
    if getattr(args, "model", None):
        kwargs["model"] = args.model
    if getattr(args, "bc", None):
        kwargs["bc"] = args.bc
    if kwargs:
        try:
            physics = replace(physics, **kwargs)
        except ValueError as exc:
            raise scenarios.ConfigError(str(exc)) from None

    mesh = config.mesh
    if getattr(args, "nx", None) is not None:
        if args.nx < 1:
            raise scenarios.ConfigError(f"--nx {args.nx}: cell count must be >= 1")
        mesh = replace(mesh, nx=args.nx, ny=args.nx)

    time = config.time
    if getattr(args, "N", None) is not None:
        if args.N < 1:
            raise scenarios.ConfigError(f"--N {args.N}: step count must be >= 1")
        time = replace(time, N=args.N)
    if getattr(args, "gamma", None) is not None:
        if args.gamma < 1.0:
            raise scenarios.ConfigError(f"--gamma {args.gamma}: grading must be >= 1")
        time = replace(time, gamma=args.gamma)

    ic = config.ic
    if getattr(args, "ic", None):
        ic = replace(ic, type=args.ic)
        if ic.type not in ("circle", "four_circles", "blob", "from_file"):
            raise scenarios.ConfigError(f"--ic {ic.type}: unknown initial condition")

    output = config.output
    if getattr(args, "out", None):
        output = replace(output, directory=args.out)

    return replace(config, physics=physics, mesh=mesh, time=time, ic=ic, output=output)


def _load(args) -> scenarios.RunConfig:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise scenarios.ConfigError(f"cannot read {args.config}: {exc}") from None
    return scenarios.load_config(text)


def _cmd_run(args) -> int:
    config = _apply_overrides(_load(args), args)
    result = models.run(config)
    last = result.rows[-1]
    print(f"completed {config.physics.model} run: alpha={config.physics.alpha:g}, "
          f"{config.time.N} steps, final mass {last.mass:.6g}")
    print(f"outputs in {result.out_dir}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    config = _apply_overrides(_load(args), args)
    report = observe_io.compare_models(config)
    for model in models.MODELS:
        t_half = report.t_half[model]
        shown = f"{t_half:.6g}" if t_half is not None else "not reached"
        print(f"{model:>11}: half-capacity time {shown}")
    if report.csv_path:
        print(f"mass comparison written to {report.csv_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = _load(args)
    try:
        alphas = [float(a) for a in args.alpha.split(",") if a.strip()]
    except ValueError:
        raise scenarios.ConfigError(f"--alpha {args.alpha}: expected numbers") from None
    if not alphas:
        raise scenarios.ConfigError("--alpha: no values given")
    for a in alphas:
        config = _apply_overrides(base, args, alpha=a)
        result = models.run(config)
        print(f"alpha={a:g}: final mass {result.rows[-1].mass:.6g} "
              f"-> {result.out_dir}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    checks = observe_io.run_verification()
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  {status}  {c.detail}")
        failed += 0 if c.passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    handler = {"run": _cmd_run, "compare": _cmd_compare,
               "sweep": _cmd_sweep, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except scenarios.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except models.StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
