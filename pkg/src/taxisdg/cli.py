"""Command line front end.

    taxisdg run             march one configuration and dump snapshots
    taxisdg eoc             convergence table over mesh refinements
    taxisdg compare-fluxes  accuracy/cost sweep over the flux schemes
    taxisdg scale           strong-scaling timings over thread counts

Every subcommand reads an INI file via --config (flags override it) and
writes its tables, snapshots, summary.json, and log into --out, the
[output] dir key, or $TAXISDG_OUT, in that order of preference.

Exit status: 0 on success, 1 for configuration or usage errors, 2 when
the nonlinear or linear solver fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import RunConfig, ConfigError, load_config
from .timeint import SolverError
from . import scenarios


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route that through the
    # config-error path instead so 2 stays reserved for solver failures
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="taxisdg",
                description="Discontinuous Galerkin solver for coupled "
                            "reaction-diffusion-taxis systems")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    specs = [
        ("run", scenarios.cmd_run,
         "time-march one configuration, writing field snapshots and a "
         "mass balance trace"),
        ("eoc", scenarios.cmd_eoc,
         "convergence study across uniform refinements and polynomial "
         "orders"),
        ("compare-fluxes", scenarios.cmd_compare_fluxes,
         "run every flux scheme on the same problem and tabulate cost "
         "versus error"),
        ("scale", scenarios.cmd_scale,
         "time a fixed number of steps across thread counts"),
    ]
    for name, fn, help_ in specs:
        q = sub.add_parser(name, help=help_, description=help_)
        q.set_defaults(func=fn)
        q.add_argument("--config", metavar="PATH",
                       help="INI configuration file")
        q.add_argument("--out", metavar="DIR",
                       help="output directory (default: [output] dir, "
                            "then $TAXISDG_OUT, then ./out)")
        q.add_argument("--threads", type=int, metavar="N",
                       help="worker thread count")
        q.add_argument("--level", type=int, metavar="N",
                       help="uniform refinements of the base mesh")
        q.add_argument("--order", type=int, metavar="K",
                       help="polynomial order")
        q.add_argument("--flux", metavar="NAME",
                       help="flux scheme: cdg2, cdg, br2, ip, or bo")
        q.add_argument("--verbose", action="store_true",
                       help="chatty logging on stderr")
    return p


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    over = {}
    if args.threads is not None:
        over["threads"] = args.threads
    if args.level is not None:
        over["mesh_level"] = args.level
    if args.order is not None:
        over["order"] = args.order
        over["orders"] = (args.order,)
    if args.flux is not None:
        over["flux"] = args.flux
    if over:
        cfg = dataclasses.replace(cfg, **over)
    return cfg.validate()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as err:
        print(f"taxisdg: error: {err}", file=sys.stderr)
        return 1

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s")

    try:
        cfg = load_config(args.config) if args.config else \
            RunConfig().validate()
        cfg = _apply_flags(cfg, args)
        args.func(cfg, out_dir=args.out)
    except ConfigError as err:
        print(f"taxisdg: error: {err}", file=sys.stderr)
        return 1
    except SolverError as err:
        print(f"taxisdg: solver failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
