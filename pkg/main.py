import os
import sys
import logging
import argparse
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from lz_decoherence.ensemble import (
    curve_points,
    curve_rows,
    lindblad_curve,
    run_ensemble,
    success_curve,
)
from lz_decoherence.errors import ConfigError, DomainError, IntegrationError
from lz_decoherence.model import predict
from lz_decoherence.noise import generate_noise, write_trace_csv
from lz_decoherence.optimizer import apply_thermal_floor, find_optimal_sweep, landscape_rows
from lz_decoherence.propagator import evolve_lindblad, evolve_pure, evolution_rows, time_grid
from lz_decoherence.scaling import scaling_rows, scaling_table
from run_support.helpers import RunConfig, import_run_config
from run_support.outputs import render_csv, render_json, summary_lines, write_output

logger = logging.getLogger("lz_decoherence.cli")

Table = Tuple[List[str], List[Sequence[Any]]]


class CommandOutput:
    """
    What a subcommand produced: a JSON payload and, when the result is tabular,
    a CSV table. default_format is used when --format is not given.
    """

    def __init__(
        self, payload: Dict[str, Any], table: Optional[Table] = None, default_format: str = "json"
    ) -> None:
        self.payload = payload
        self.table = table
        self.default_format = default_format


def cmd_predict(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    report = predict(
        config.noise_or_silent,
        config.require_delta(),
        config.v,
        config.thermal,
        config.negligible_threshold,
    )
    payload = report.to_dict()
    # the summary goes to stdout even when the report is written to a file
    if args.out is not None:
        print("\n".join(summary_lines(payload)))
    table = (["field", "value"], [(key, value) for key, value in payload.items()])
    return CommandOutput(payload, table)


def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    system = config.system()
    if config.lindblad is not None:
        result = evolve_lindblad(
            system, config.lindblad.gamma, config.grid, record_every=args.record_every
        )
    else:
        noise = config.noise_or_silent
        trace = None
        if not noise.is_silent:
            trace = generate_noise(noise, time_grid(system, noise, config.grid))
            if args.trace_out is not None:
                print(f"Writing to {os.path.abspath(args.trace_out)}")
                write_trace_csv(trace, args.trace_out)
        result = evolve_pure(system, trace, config.grid, record_every=args.record_every)
    return CommandOutput(result.to_dict(), evolution_rows(result))


def cmd_ensemble(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    if config.lindblad is not None:
        raise ConfigError("lindblad", "the ensemble command needs classical noise")
    system = config.system()
    result = run_ensemble(
        system, config.noise_or_silent, config.ensemble, config.grid, args.threads
    )
    points = curve_points(system.delta, [(system.v, result)])
    return CommandOutput(result.to_dict(), curve_rows(points))


def cmd_curve(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    if config.curve_v is None:
        raise ConfigError("curve", "missing required section")
    system = config.system(need_v=False)
    if config.lindblad is not None:
        results = lindblad_curve(system, config.lindblad.gamma, config.curve_v, config.grid)
    else:
        results = success_curve(
            system,
            config.noise_or_silent,
            config.curve_v,
            config.ensemble,
            config.grid,
            args.threads,
        )
    points = curve_points(system.delta, results)
    header, rows = curve_rows(points)
    payload = {"points": [dict(zip(header, row)) for row in rows]}
    return CommandOutput(payload, (header, rows), default_format="csv")


def cmd_optimize(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    if config.optimize is None:
        raise ConfigError("optimize", "missing required section")
    system = config.system(need_v=False)
    report = find_optimal_sweep(
        system, config.decoherence(), config.optimize, config.grid, args.threads
    )
    if config.thermal is not None:
        report = apply_thermal_floor(report, system.delta, config.thermal)
    return CommandOutput(report.to_dict(), landscape_rows(report))


def cmd_scaling(config: RunConfig, args: argparse.Namespace) -> CommandOutput:
    if config.scaling is None:
        raise ConfigError("scaling", "missing required section")
    header, rows = scaling_rows(scaling_table(config.scaling, config.scaling_m_values))
    payload = {"rows": [dict(zip(header, row)) for row in rows]}
    return CommandOutput(payload, (header, rows), default_format="csv")


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], CommandOutput]] = {
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "curve": cmd_curve,
    "optimize": cmd_optimize,
    "scaling": cmd_scaling,
}


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def build_parser(default_config: str) -> argparse.ArgumentParser:
    # flags shared by every subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c", default=default_config, type=str, help="Run configuration JSON"
    )
    common.add_argument(
        "--out", "-o", default=None, type=str, help="Output file (default: stdout)"
    )
    common.add_argument(
        "--format", "-f", default=None, choices=["csv", "json"], help="Output format"
    )
    common.add_argument(
        "--seed", default=None, type=int, help="Master seed, overrides the config"
    )
    common.add_argument(
        "--threads", default=1, type=positive_int, help="Worker threads (speed only)"
    )
    common.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
        help="Logging verbosity",
    )

    parser = argparse.ArgumentParser(description="lz_decoherence")
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    subparsers.add_parser("predict", parents=[common], help="Analytic regime report")
    simulate = subparsers.add_parser("simulate", parents=[common], help="Single evolution")
    simulate.add_argument(
        "--record-every",
        default=None,
        type=positive_int,
        help="Record the populations every this many steps",
    )
    simulate.add_argument(
        "--trace-out", default=None, type=str, help="Also write the noise trace as CSV"
    )
    subparsers.add_parser("ensemble", parents=[common], help="Monte Carlo ensemble")
    subparsers.add_parser("curve", parents=[common], help="Success probability versus v")
    subparsers.add_parser("optimize", parents=[common], help="Optimal sweep rate")
    subparsers.add_parser("scaling", parents=[common], help="M-qubit crossing table")
    return parser


def run(args: argparse.Namespace) -> None:
    config = import_run_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    logger.info("running %s with %s", args.command, args.config)

    output = COMMANDS[args.command](config, args)
    output_format = args.format or output.default_format
    if output_format == "csv":
        if output.table is None:
            raise ConfigError("format", f"{args.command} has no CSV output")
        text = render_csv(*output.table)
    else:
        text = render_json(output.payload, config.document)
    write_output(text, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    # Get the base directory of the script
    base_dir = os.path.dirname(os.path.abspath(__file__))
    default_config = f"{base_dir}/run_config.json"

    parser = build_parser(default_config)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )

    try:
        run(args)
    except (ConfigError, DomainError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    except IntegrationError as error:
        print(f"integration failed: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
