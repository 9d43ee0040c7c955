#!/usr/bin/env python3
"""
IFD Simulator - command-line entry point
Writes each artifact family as CSV or JSON,
with golden-file regression (--check / --update-goldens)

Exit codes: 0 success, 1 invalid input or failed run, 2 golden mismatch
"""
import argparse
import math
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

from config.settings import Settings, get_settings
from src import __version__
from src.goldens import check_artifacts, update_goldens
from src.modules import figures
from src.modules.open_system import NoiseModel
from utils.errors import GoldenMismatchError, IFDError, ValidationError
from utils.formatters import build_header, format_error_response, format_json_response, write_artifact
from utils.logger import RunLogger, get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_GOLDEN_MISMATCH = 2

COMMANDS = (
    "tables",
    "large-n",
    "threshold",
    "successive",
    "qfi",
    "phi-scan",
    "phase-scan",
    "random-placement",
    "thermal",
    "decoherence",
    "detuning",
)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit 1"""

    def error(self, message: str):
        raise ValidationError(f"Invalid command line: {message}", details={"usage": self.format_usage().strip()})


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("global options")
    group.add_argument("--config", help="YAML configuration file (root key 'ifd')")
    group.add_argument("--out", help="Output directory (default: output.out_dir)")
    group.add_argument("--format", choices=["csv", "json"], help="Artifact format (default: output.format)")
    group.add_argument("--seed", type=int, help="Seed for Monte Carlo commands (unsigned 64-bit)")
    group.add_argument("--workers", type=int, help="Worker processes (default: output.workers)")
    group.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Log level")
    mode = group.add_mutually_exclusive_group()
    mode.add_argument("--check", action="store_true", help="Compare artifacts against committed goldens")
    mode.add_argument("--update-goldens", action="store_true", help="Store artifacts as the new goldens")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per artifact family"""
    common = _common_options()
    parser = _Parser(prog="ifd-sim", description="Interaction-free detection simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, parents=[common])

    p = add("tables", "Final probabilities and efficiencies for N = 1..4")
    p.add_argument("--n-max", type=int, default=4)
    p.add_argument("--theta", type=float, help="Pulse area (default: sequence.theta_rad)")

    p = add("large-n", "Exact and approximate probabilities against theta/phi_N")
    p.add_argument("--n", type=int, help="Ramsey steps (default: sequence.n)")
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--variant", choices=["trigonometric", "expanded"], default="trigonometric")

    p = add("threshold", "Success surfaces, threshold pulse areas and a/N fits")
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--theta-points", type=int, default=201)
    p.add_argument("--fit-n-min", type=int, default=25)
    p.add_argument("--fit-n-max", type=int, default=100)
    p.add_argument("--fit-stride", type=int, default=5)

    p = add("successive", "Per-step probabilities for every N")
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--theta", type=float, help="Pulse area (default: sequence.theta_rad)")

    p = add("qfi", "Fisher-information curves and scaling fits")
    p.add_argument("--panel-n", type=int, nargs="+", default=[2, 5, 25])
    p.add_argument("--theta-points", type=int, default=401)
    p.add_argument("--fit-n-min", type=int, default=25)
    p.add_argument("--fit-n-max", type=int, default=100)
    p.add_argument("--fit-stride", type=int, default=5)
    p.add_argument("--pi-n", type=int, nargs="*", default=[200, 400, 600, 800, 1000])

    p = add("phi-scan", "Dark counts and efficiencies over the beam-splitter angle")
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--phi-points", type=int, default=200)
    p.add_argument("--delta-points", type=int, default=51)

    p = add("phase-scan", "Phase-difference surfaces and random-pulse mean efficiencies")
    p.add_argument("--panel-n", type=int, nargs="+", default=[2, 5, 25])
    p.add_argument("--theta-points", type=int, default=101)
    p.add_argument("--delta-points", type=int, default=101)
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--reps", type=int, help="Reps per ensemble (default: ensemble.reps_random_pulses)")

    p = add("random-placement", "PR and NR for randomly placed pulses")
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--probs", type=float, nargs="+", help="Occupancy probabilities")
    p.add_argument("--reps", type=int, help="Reps per point (default: ensemble.reps_random_placement)")
    p.add_argument("--theta", type=float, help="Pulse area (default: sequence.theta_rad)")

    p = add("thermal", "Efficiencies and dark counts for thermal initial states")
    p.add_argument("--n", type=int, nargs="+", default=[25, 250])
    p.add_argument("--t-max-mk", type=float, default=100.0)
    p.add_argument("--points", type=int, default=101)

    p = add("decoherence", "Relaxation-rate grids, the transmon line and per-N traces")
    p.add_argument("--n", type=int, help="Ramsey steps of the rate grids (default: sequence.n)")
    p.add_argument("--gamma-max", type=float, default=0.2, help="Grid edge in MHz")
    p.add_argument("--grid", type=int, default=21, help="Grid points per rate axis")
    p.add_argument("--trace-n-max", type=int, default=50)
    p.add_argument("--gamma10", type=float, help="Trace rate |1>->|0> in MHz (default: noise.gamma10_mhz)")
    p.add_argument("--gamma21", type=float, help="Trace rate |2>->|1> in MHz (default: noise.gamma21_mhz)")
    p.add_argument("--steps-per-pulse", type=int, help="RK4 steps per pulse (default: noise.steps_per_pulse)")
    p.add_argument(
        "--temperature-mk", type=float, help="Initial thermal state temperature (default: thermal.temperature_mk)"
    )

    p = add("detuning", "Detuned B-pulses: success maps and bandwidths")
    p.add_argument("--n-max", type=int, default=25)
    p.add_argument("--theta", type=float, default=math.pi / 2)
    p.add_argument("--chi-max", type=float, default=10.0)
    p.add_argument("--chi-points", type=int, default=401)

    return parser


def _seed(args: argparse.Namespace, settings: Settings) -> int:
    seed = settings.output.seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise ValidationError("Seed must be an unsigned 64-bit integer", details={"seed": seed})
    return seed


def _workers(args: argparse.Namespace, settings: Settings) -> int:
    workers = settings.output.workers if args.workers is None else args.workers
    if workers < 1:
        raise ValidationError("Worker count must be positive", details={"workers": workers})
    return workers


def _or_default(value: Any, default: Any) -> Any:
    return default if value is None else value


def run_command(
    name: str,
    args: argparse.Namespace,
    settings: Settings,
) -> tuple[dict[str, Any], dict[str, Any]]:
    """
    Route a subcommand to its figure builder

    Returns:
        (artifacts, resolved parameters)
    """
    seed = _seed(args, settings)
    workers = _workers(args, settings)
    metrology = settings.metrology
    sequence = settings.sequence

    if name == "tables":
        params = {
            "n_max": args.n_max,
            "theta": _or_default(args.theta, sequence.theta_rad),
            "phase": sequence.phase_rad,
            "phi": sequence.phi_rad,
        }
        artifacts = figures.build_tables(**params)

    elif name == "large-n":
        params = {"n": _or_default(args.n, sequence.n), "points": args.points, "variant": args.variant}
        artifacts = figures.build_large_n(**params)

    elif name == "threshold":
        params = {
            "n_max": args.n_max,
            "theta_points": args.theta_points,
            "fit_n_min": args.fit_n_min,
            "fit_n_max": args.fit_n_max,
            "fit_stride": args.fit_stride,
            "step": metrology.threshold_step_rad,
        }
        artifacts = figures.build_threshold(**params, workers=workers)

    elif name == "successive":
        params = {"n_max": args.n_max, "theta": _or_default(args.theta, sequence.theta_rad), "phi": sequence.phi_rad}
        artifacts = figures.build_successive(**params, workers=workers)

    elif name == "qfi":
        params = {
            "panel_n": args.panel_n,
            "theta_points": args.theta_points,
            "fit_n_min": args.fit_n_min,
            "fit_n_max": args.fit_n_max,
            "fit_stride": args.fit_stride,
            "pi_n_values": args.pi_n,
            "step": metrology.derivative_step_rad,
            "epsilon": metrology.limit_epsilon_rad,
        }
        artifacts = figures.build_qfi(**params)

    elif name == "phi-scan":
        params = {"n_max": args.n_max, "phi_points": args.phi_points, "delta_points": args.delta_points}
        artifacts = figures.build_phi_scan(**params)

    elif name == "phase-scan":
        params = {
            "panel_n": args.panel_n,
            "theta_points": args.theta_points,
            "delta_points": args.delta_points,
            "n_max": args.n_max,
            "reps": args.reps or settings.ensemble.reps_random_pulses,
            "seed": seed,
        }
        artifacts = figures.build_phase_scan(**params, workers=workers)

    elif name == "random-placement":
        params = {
            "n_max": args.n_max,
            "occupancy_probs": args.probs or settings.ensemble.occupancy_probs,
            "reps": args.reps or settings.ensemble.reps_random_placement,
            "theta": _or_default(args.theta, sequence.theta_rad),
            "seed": seed,
        }
        artifacts = figures.build_random_placement(**params, workers=workers)

    elif name == "thermal":
        params = {
            "n_values": args.n,
            "t_max_mk": args.t_max_mk,
            "points": args.points,
            "omega01_ghz": settings.thermal.omega01_ghz,
            "omega12_ghz": settings.thermal.omega12_ghz,
        }
        artifacts = figures.build_thermal(**params)

    elif name == "decoherence":
        noise = NoiseModel.from_settings(
            settings.noise,
            gamma10_mhz=args.gamma10,
            gamma21_mhz=args.gamma21,
            steps_per_pulse=args.steps_per_pulse,
        )
        params = {
            "n": _or_default(args.n, sequence.n),
            "gamma_max_mhz": args.gamma_max,
            "grid_points": args.grid,
            "trace_n_max": args.trace_n_max,
            "temperature_mk": _or_default(args.temperature_mk, settings.thermal.temperature_mk),
            "omega01_ghz": settings.thermal.omega01_ghz,
            "omega12_ghz": settings.thermal.omega12_ghz,
        }
        artifacts = figures.build_decoherence(noise, **params)
        params["noise"] = noise.model_dump()

    elif name == "detuning":
        params = {"n_max": args.n_max, "theta": args.theta, "chi_max": args.chi_max, "chi_points": args.chi_points}
        artifacts = figures.build_detuning(**params)

    else:
        raise ValidationError(f"Unknown command: {name}", details={"valid_commands": list(COMMANDS)})

    return artifacts, params


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one command and write its artifacts

    Args:
        argv: Argument list (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    start_time = time.time()
    command = "ifd-sim"

    try:
        args = build_parser().parse_args(argv)
        command = args.command

        settings = get_settings(args.config, force_reload=True)
        setup_logging(
            log_level=args.log_level or settings.logging.level,
            log_file=settings.logging.file,
            max_size_mb=settings.logging.max_size_mb,
            backup_count=settings.logging.backup_count,
            console=settings.logging.console,
        )
        run_logger = RunLogger(logger)
        logger.info(f"ifd-sim {__version__}")
        if settings.config_file:
            logger.info(f"Configuration loaded from {settings.config_file}")

        fmt = args.format or settings.output.format
        out_dir = Path(args.out or settings.output.out_dir)

        run_logger.log_start(command, {k: v for k, v in vars(args).items() if k != "command"})
        artifacts, params = run_command(command, args, settings)
        header = build_header(command, settings.to_dict(), _seed(args, settings), __version__, params)

        written = [
            str(write_artifact(frame, out_dir / f"{name}.{fmt}", header, fmt)) for name, frame in artifacts.items()
        ]

        result: dict[str, Any] = {"success": True, "command": command, "artifacts": written}
        goldens_dir = Path(settings.output.goldens_dir)
        if args.update_goldens:
            result["goldens"] = [str(p) for p in update_goldens(command, artifacts, goldens_dir, header)]
        elif args.check:
            result["check"] = check_artifacts(command, artifacts, goldens_dir, params)

        run_logger.log_complete(command, len(written), time.time() - start_time)
        print(format_json_response(result))
        return EXIT_OK

    except GoldenMismatchError as e:
        logger.error(f"Golden check failed for '{command}': {e.message}")
        print(format_json_response(format_error_response(e)))
        return EXIT_GOLDEN_MISMATCH

    except IFDError as e:
        RunLogger(logger).log_error(command, e)
        print(format_json_response(format_error_response(e, include_traceback=True)))
        return EXIT_FAILURE

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_FAILURE

    except Exception as e:
        RunLogger(logger).log_error(command, e)
        print(format_json_response(format_error_response(e)))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
