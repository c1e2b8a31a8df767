"""
Command-line frontend.

    py-diracmix solve   (--input FILE | --preset NAME) [--L L] [--method M] ...
    py-diracmix moments --input DENSITY --order M
    py-diracmix eval    --solution FILE [--solution FILE ...] [--reference DENSITY]

Exit status: 0 on success, 2 on invalid input, 3 when a solver did not converge
(its output files are still written, with "converged": false).
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dma import DmaProblem, solve
from .evalkit import (
    PRESET_NAMES,
    Reference,
    ecdf_1d,
    evaluate_solution,
    plot_grid,
    preset,
    reference_cdf,
)
from .exceptions import (
    NonFiniteObjectiveError,
    UnboundedProblemError,
    UnknownPresetError,
    ValidationError,
)
from .momentlib import (
    DiracMixture,
    ScalarGaussian,
    dirac_moments,
    gaussian_table,
    mixture_table,
)
from .pwcdensity import PwcDensity
from .serialization import (
    density_from_json,
    digest,
    problem_from_json,
    problem_to_json,
    read_json,
    report_to_json,
    solution_from_json,
    table_to_json,
    write_curve_csv,
    write_json,
    write_points_csv,
    write_pwc_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NOT_CONVERGED = 3

OPTION_FLAGS = ("seed", "restarts", "tol_eq", "eps_slack", "max_outer", "d_max")


@dataclass
class RunConfig:
    """Parsed command line; `input` and `preset` are exclusive for `solve`."""

    command: str
    output_dir: Path
    input: Path | None = None
    preset: str | None = None
    L: int | None = None
    method: str | None = None
    order: int | None = None
    reference: Path | None = None
    solutions: list[Path] = field(default_factory=list)
    overrides: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command == "solve" and (self.input is None) == (self.preset is None):
            raise ValidationError("solve needs exactly one of --input and --preset.")


def _write_manifest(config: RunConfig, extra: dict[str, Any]) -> None:
    manifest = {"command": config.command, "version": __version__, **extra}
    write_json(config.output_dir / "manifest.json", manifest)


# --- solve ---


def _load_problem(config: RunConfig) -> tuple[DmaProblem, str | None]:
    """The problem to solve and the method recorded in a manifest, if any."""
    if config.preset is not None:
        experiment = preset(config.preset)
        return experiment.problem(config.L), None

    obj = read_json(config.input)
    method = None
    if isinstance(obj, dict) and "problem" in obj:
        logger.info("Re-running from manifest %s", config.input)
        method = obj.get("method")
        obj = obj["problem"]
    problem = problem_from_json(obj)
    if config.L is not None and config.L != problem.L:
        problem = DmaProblem(
            dim=problem.dim,
            L=config.L,
            target=problem.target,
            symmetric=problem.symmetric,
            prescribed_mean=problem.prescribed_mean,
            opts=problem.opts,
            weighting=problem.weighting,
        )
    return problem, method


def cmd_solve(config: RunConfig) -> int:
    problem, manifest_method = _load_problem(config)
    problem = problem.with_options(**config.overrides)
    method = config.method or manifest_method or "auto"

    report = solve(problem, method)

    out = config.output_dir
    write_json(out / "solution.json", report_to_json(report, problem))
    write_points_csv(out / "points.csv", report.mixture, report.diameters)
    if report.diameters is not None:
        write_pwc_csv(out / "pwc.csv", PwcDensity(report.mixture, report.diameters))
    else:
        logger.warning("No diameters for this solution; pwc.csv not written")

    problem_json = problem_to_json(problem)
    _write_manifest(
        config,
        {
            "method": method,
            "seed": problem.opts.seed,
            "options": problem.opts.to_dict(),
            "input_sha256": digest(problem_json),
            "problem": problem_json,
        },
    )

    if not report.converged:
        logger.warning("Solver did not converge: %s", report.trace.message)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# --- moments ---


def cmd_moments(config: RunConfig) -> int:
    obj = read_json(config.input)
    density = density_from_json(obj)
    M = config.order
    if isinstance(density, ScalarGaussian):
        table = gaussian_table(density, M)
    elif isinstance(density, DiracMixture):
        table = dirac_moments(density, M)
    else:
        table = mixture_table(density, M)

    write_json(config.output_dir / "moments.json", table_to_json(table))
    _write_manifest(config, {"order": M, "input_sha256": digest(obj)})
    return EXIT_OK


# --- eval ---


def _load_reference(config: RunConfig) -> Reference | None:
    if config.reference is not None:
        reference = density_from_json(read_json(config.reference))
        if isinstance(reference, DiracMixture):
            raise ValidationError(
                "The reference must be a Gaussian or Gaussian mixture."
            )
        return reference
    if config.preset is not None:
        return preset(config.preset).reference
    return None


def cmd_eval(config: RunConfig) -> int:
    reference = _load_reference(config)
    runs = []
    digests = []
    for k, path in enumerate(config.solutions):
        obj = read_json(path)
        digests.append(digest(obj))
        mixture, diameters, target, eps_slack = solution_from_json(obj)
        if target is None:
            raise ValidationError(f"Solution {path} carries no target moments.")
        if reference is not None and mixture.dim != 1:
            raise ValidationError(
                f"Solution {path} has dimension {mixture.dim}; the reference is 1-D."
            )

        result = evaluate_solution(mixture, diameters, target, eps_slack, reference)
        runs.append({"solution": str(path), **result})

        if mixture.dim == 1:
            steps = np.array(ecdf_1d(mixture))
            write_curve_csv(config.output_dir / f"ecdf_{k}.csv", ["x", "F"], steps)
        if reference is not None:
            points = int(obj.get("options", {}).get("grid_points", 1000))
            grid = plot_grid(mixture, reference_cdf(reference), points)
            path = config.output_dir / f"reference_cdf_{k}.csv"
            write_curve_csv(path, ["x", "F"], grid)

    write_json(config.output_dir / "eval.json", {"runs": runs})
    _write_manifest(config, {"input_sha256": digests})
    return EXIT_OK


# --- Entry point ---


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug"
    )
    common.add_argument("--output-dir", type=Path, default=Path("."))

    parser = argparse.ArgumentParser(
        prog="py-diracmix",
        description="Dirac mixture approximation with prescribed moments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    solve_parser = commands.add_parser(
        "solve", parents=[common], help="Solve a problem."
    )
    source = solve_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="Problem JSON or manifest.json")
    source.add_argument("--preset", choices=PRESET_NAMES)
    solve_parser.add_argument("--L", type=int, help="Number of Dirac components")
    solve_parser.add_argument("--method", choices=("auto", "maxent", "lm"))
    solve_parser.add_argument("--seed", type=int)
    solve_parser.add_argument("--restarts", type=int)
    solve_parser.add_argument("--tol-eq", type=float)
    solve_parser.add_argument("--eps-slack", type=float)
    solve_parser.add_argument("--max-outer", type=int)
    solve_parser.add_argument("--d-max", type=float)

    moments_parser = commands.add_parser(
        "moments", parents=[common], help="Moments of a density spec."
    )
    moments_parser.add_argument("--input", type=Path, required=True)
    moments_parser.add_argument("--order", type=int, required=True)

    eval_parser = commands.add_parser(
        "eval", parents=[common], help="Evaluate solutions."
    )
    eval_parser.add_argument(
        "--solution", type=Path, action="append", required=True, dest="solutions"
    )
    reference = eval_parser.add_mutually_exclusive_group()
    reference.add_argument("--reference", type=Path, help="Density spec JSON")
    reference.add_argument("--preset", choices=PRESET_NAMES)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    logging.getLogger("py_diracmix").setLevel(level)


def _to_config(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name in OPTION_FLAGS}
    return RunConfig(
        command=args.command,
        output_dir=args.output_dir,
        input=getattr(args, "input", None),
        preset=getattr(args, "preset", None),
        L=getattr(args, "L", None),
        method=getattr(args, "method", None),
        order=getattr(args, "order", None),
        reference=getattr(args, "reference", None),
        solutions=getattr(args, "solutions", None) or [],
        overrides={k: v for k, v in overrides.items() if v is not None},
    )


COMMANDS = {"solve": cmd_solve, "moments": cmd_moments, "eval": cmd_eval}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        config = _to_config(args)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[config.command](config)
    except NonFiniteObjectiveError as exc:
        logger.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except (
        ValidationError,
        UnboundedProblemError,
        UnknownPresetError,
        json.JSONDecodeError,
        OSError,
    ) as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
