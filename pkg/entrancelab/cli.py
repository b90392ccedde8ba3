"""
Command-line runner for lab experiments.

Subcommands: simulate, entrance, contract, density, quasi and
``examples list`` / ``examples run <name>``. Flags are merged over the
JSON configuration file; every run writes CSV artifacts and a structured
text report under the output directory.

Exit status: 0 when every assertion passes, 1 when one fails, 2 for a
configuration error, 3 for any other lab error.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .catalog import build_example, coefficients_from_config, get_example, list_examples
from .coefficients import AssumptionReport, CoefficientSet, QuasiPeriodicParent, SamplingGrid, verify_assumptions
from .config import ExperimentConfig, load_experiment_config
from .contraction import analyze_partition, check_theorem_conditions, read_schedule_csv, select_beta
from .density import FPGrid, fp_solve, minorization
from .entrance import EntranceEstimator, geometric_starts, m_t_integral
from .errors import ConfigurationError, LabError
from .measures import total_variation, write_measure_csv
from .quasiperiodic import cylinder_invariant, mu_tilde, screen_torus_dissipation, write_cylinder_csv
from .reporting import (ExperimentReport, write_curve_csv, write_ensemble_csv, write_mapping_csv, write_rows,
                        write_trajectory_csv)
from .simulator import PointMass, check_moment_bound, push_ensemble, second_moment_bound, simulate_path
from .suites import run_suite

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_ERROR = 3


# -------------------------------
# Shared helpers
# -------------------------------

def _coefficients(config: ExperimentConfig) -> Union[CoefficientSet, QuasiPeriodicParent]:
    if config.coefficients is not None:
        return coefficients_from_config(config.coefficients)
    return build_example(config.example, **config.parameters.get("example_parameters", {}))


def _scalar_coefficients(config: ExperimentConfig) -> CoefficientSet:
    c = _coefficients(config)
    if isinstance(c, QuasiPeriodicParent):
        raise ConfigurationError(f"example '{config.example}' is quasi-periodic; use the quasi command",
                                 field="example")
    return c


def _new_report(config: ExperimentConfig) -> ExperimentReport:
    return ExperimentReport(title=config.command,
                            inputs={"example": config.example or "inline",
                                    "parameters": config.parameters, "seed": config.seed},
                            defaults=config.defaults())


def _record_assumptions(report: ExperimentReport, assumptions: AssumptionReport):
    for name, check in assumptions.checks.items():
        report.check(f"assumption.{name}", check.max_violation, 0.0, check.passed, "DERIVED")
    report.constant("dissipation_average", assumptions.dissipation_average)


def _output(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / config.command


# -------------------------------
# Commands
# -------------------------------

def simulate_command(config: ExperimentConfig, report: ExperimentReport):
    """One path plus an ensemble at time t with the second-moment check."""
    c = _scalar_coefficients(config)
    p = config.parameters
    s, t = float(p.get("s", -1.0)), float(p.get("t", 0.0))
    x = [float(v) for v in np.atleast_1d(p.get("x", [0.0] * c.dimension))]
    cfg = config.simulation.to_sim_config()
    out = _output(config)

    screen = SamplingGrid(min(s, t), max(s, t), -5.0, 5.0)
    _record_assumptions(report, verify_assumptions(c, screen))

    report.artifact(write_trajectory_csv(simulate_path(c, s, x, t, cfg), out / "trajectory.csv"))
    ensemble = push_ensemble(c, s, PointMass(tuple(x)), t, cfg, stream=1)
    report.artifact(write_ensemble_csv(ensemble, out / "ensemble.csv"))

    bound = second_moment_bound(c.envelope, s, t, x, c.gamma1, c.dimension)
    check = check_moment_bound(ensemble, bound)
    report.constant("second_moment", check.mean)
    report.check("moment_bound", check.mean, f"<= {bound!r} + 3SE", check.passed, "PAPER",
                 3 * check.standard_error)


def entrance_command(config: ExperimentConfig, report: ExperimentReport):
    """Entrance estimate at t from a geometric start schedule."""
    c = _scalar_coefficients(config)
    p = config.parameters
    t = float(p.get("t", 0.0))
    starts = geometric_starts(t, int(p.get("levels", 6)), float(p.get("delta0", 1.0)))
    x0 = [float(v) for v in np.atleast_1d(p.get("x0", [0.0] * c.dimension))]
    out = _output(config)

    report.constant("m_t", m_t_integral(c.envelope, t, c.gamma1, c.dimension))
    estimator = EntranceEstimator(config.simulation.to_sim_config(), config.measure)
    estimate = estimator.estimate(c, t, starts, x0)
    for s, measure in zip(estimate.starts, estimate.measures):
        report.artifact(write_measure_csv(measure, out / f"entrance_s{s:g}.csv"))
    report.artifact(write_curve_csv(estimate.curve(), out / "entrance_curve.csv"))
    report.constant("second_moments", estimate.second_moments)
    report.check("entrance_converged", estimate.consecutive()[-2:], f"< {estimate.tolerance}",
                 estimate.converged, "DERIVED", estimate.tolerance)


def contract_command(config: ExperimentConfig, report: ExperimentReport):
    """Partition analysis, condition checks and β selection for a schedule file."""
    p = config.parameters
    if "schedule" not in p:
        raise ConfigurationError("parameters.schedule: the contract command needs a schedule CSV",
                                 field="parameters.schedule")
    for key in ("delta", "R"):
        if key not in p:
            raise ConfigurationError(f"parameters.{key}: required for the contract command",
                                     field=f"parameters.{key}")
    schedule = read_schedule_csv(p["schedule"])
    delta, R, varpi = float(p["delta"]), float(p["R"]), float(p.get("varpi", 0.5))

    analysis = analyze_partition(schedule, delta, p.get("subsequence"))
    gamma_star = float(p["gamma_star"]) if p.get("gamma_star") is not None else analysis.limsup_average
    report.constant("gamma", analysis.gamma)
    report.constant("K", analysis.K)
    report.constant("gamma_star", gamma_star)
    conditions = check_theorem_conditions(analysis, R, varpi, gamma_star)
    for name, check in conditions.checks.items():
        report.check(f"condition.{name}", check.max_violation, 0.0, check.passed, "PAPER")
    if not conditions.passed:
        return

    selection = select_beta(analysis.gamma, analysis.K, R, delta, varpi, gamma_star)
    report.constant("beta", selection.beta)
    report.constant("r", selection.r)
    report.constant("zeta_max", max(e.zeta(R, selection.beta) for e in schedule))
    mapping = {"beta": selection.beta, "r": selection.r, "c1": selection.c1, "c2": selection.c2,
               "beta1": selection.beta1, "beta2": selection.beta2, "R": R, "delta": delta,
               "varpi": varpi, "gamma_star": gamma_star, "gamma": analysis.gamma, "K": analysis.K}
    report.artifact(write_mapping_csv(mapping, _output(config) / "certificate.csv"))
    report.check("contraction_rate", selection.r, "< 1", selection.r < 1.0, "DERIVED")


def density_command(config: ExperimentConfig, report: ExperimentReport):
    """Fokker-Planck density from (s, x0) to t, with an optional minorization sweep."""
    c = _scalar_coefficients(config)
    p = config.parameters
    s, t, x0 = float(p.get("s", 0.0)), float(p.get("t", 1.0)), float(p.get("x0", 0.0))
    fp = config.fp
    grid = FPGrid.with_spacing(x0 - fp.margin, x0 + fp.margin, fp.spacing, dt=fp.dt, boundary=fp.boundary)
    solution = fp_solve(c, s, x0, t, grid)
    report.artifact(write_measure_csv(solution.measure, _output(config) / "density.csv"))
    report.constant("cfl", solution.cfl)
    report.constant("peclet", solution.peclet)
    report.check("mass_deficit", solution.mass_deficit, 0.0, abs(solution.mass_deficit) <= 1e-3,
                 "TRIVIAL", 1e-3)

    if "R" in p:
        R = float(p["R"])
        doeblin = minorization(c, s, t, R, radius=float(p.get("radius", 1.0)),
                               max_workers=config.simulation.max_workers)
        report.constant("eta", doeblin.eta)
        report.constant("nu", doeblin.describe_nu())
        report.artifact(write_rows(_output(config) / "minorization.csv", ["x", "min_density"],
                                   zip(doeblin.starts, doeblin.minima)))
        report.check("minorization", doeblin.eta, "> 0", doeblin.certified, "DERIVED")


def quasi_command(config: ExperimentConfig, report: ExperimentReport):
    """Cylinder invariant measure and diagonal consistency for a quasi-periodic parent."""
    name = config.example or "quasi_double_well"
    if not get_example(name).quasi:
        raise ConfigurationError(f"example '{name}' is not quasi-periodic", field="example")
    parent = build_example(name, **config.parameters.get("example_parameters", {}))
    p = config.parameters
    periods = tuple(float(v) for v in p["periods"])
    if any(not math.isclose(a, b, rel_tol=1e-9) for a, b in zip(periods, parent.periods)):
        raise ConfigurationError(f"parameters.periods: {list(periods)} do not match the parent periods "
                                 f"{list(parent.periods)} of '{name}'", field="parameters.periods")
    report.constant("torus_average", screen_torus_dissipation(parent))

    cfg = config.simulation.to_sim_config()
    burn = float(p.get("burn", 8.0))
    shape = tuple(int(n) for n in p.get("torus", (8, 8)))
    cylinder = cylinder_invariant(parent, shape, cfg, config.measure, burn=burn)
    report.artifact(write_cylinder_csv(cylinder, _output(config) / "cylinder.csv"))

    estimator = EntranceEstimator(cfg, config.measure)
    diagonal = parent.diagonal()
    tolerance = float(p.get("diagonal_tolerance", 0.05))
    for k, r in enumerate(p.get("diagonal_times", [0.0])):
        r = float(r)
        lifted = mu_tilde(parent, r, r, burn, cfg, config.measure, stream=1000 + k)
        direct, _ = estimator.push(diagonal, r - 2 * burn, PointMass((0.0,) * parent.dimension), r,
                                   stream=2000 + k)
        distance = total_variation(lifted, direct)
        report.check(f"diagonal_consistency[t={r:g}]", distance, 0.0, distance <= tolerance, "PAPER", tolerance)


def examples_command(config: ExperimentConfig) -> Optional[ExperimentReport]:
    """List the catalog, or run one oracle suite and return its report."""
    if config.parameters.get("action", "list") == "list":
        for spec in list_examples():
            kind = "quasi" if spec.quasi else "sde"
            print(f"{spec.name:24s} [{kind}] {spec.description}")
        return None
    if not config.example:
        raise ConfigurationError("example: 'examples run' needs an example name", field="example")
    return run_suite(config.example, config)


COMMANDS = {
    "simulate": simulate_command,
    "entrance": entrance_command,
    "contract": contract_command,
    "density": density_command,
    "quasi": quasi_command,
}


def _error_module(error: LabError) -> str:
    if error.module:
        return error.module
    tb, name = error.__traceback__, None
    while tb is not None:
        frame_module = tb.tb_frame.f_globals.get("__name__", "")
        if frame_module.startswith(__package__ or "entrancelab"):
            name = frame_module.rsplit(".", 1)[-1]
        tb = tb.tb_next
    return name or "lab"


def _config_failure(error: ConfigurationError) -> int:
    where = f" (line {error.line})" if error.line else ""
    print(f"config: {error.field or 'config'}{where}: {error}", file=sys.stderr)
    return EXIT_CONFIG


def execute(config: ExperimentConfig) -> ExperimentReport:
    """
    Run the configured command and write its report.

    Returns:
        The report; ``examples list`` returns an empty report

    Raises:
        LabError: from the module that failed
    """
    report = _new_report(config)
    if config.command == "examples":
        suite_report = examples_command(config)
        return suite_report if suite_report is not None else report
    out = _output(config)
    logger.info(f"running {config.command} into {out}")
    COMMANDS[config.command](config, report)
    report.write(report.artifact(out / "report.txt"))
    return report


def run(config: ExperimentConfig) -> int:
    """
    Run an experiment and map the outcome to an exit status.

    Returns:
        0 if every assertion passes, 1 if one fails, 2 for configuration
        errors and 3 for other lab errors
    """
    try:
        report = execute(config)
    except ConfigurationError as e:
        return _config_failure(e)
    except LabError as e:
        print(f"{_error_module(e)}: {e}", file=sys.stderr)
        return EXIT_ERROR
    if report.failures():
        print(f"failed assertions: {', '.join(report.failures())}", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_PASS


# -------------------------------
# Argument parsing
# -------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entrancelab", description="Entrance-measure numerical lab")
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--output-dir", help="artifact directory (overrides ENTRANCE_LAB_OUTPUT_DIR)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--paths", type=int, help="Monte Carlo paths per ensemble")
    parser.add_argument("--workers", type=int, help="worker pool size")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="simulate a path and an ensemble")
    simulate.add_argument("--example")
    simulate.add_argument("--s", type=float)
    simulate.add_argument("--t", type=float)
    simulate.add_argument("--x", type=float, nargs="+")

    entrance = sub.add_parser("entrance", help="estimate an entrance measure")
    entrance.add_argument("--example")
    entrance.add_argument("--t", type=float)
    entrance.add_argument("--levels", type=int)
    entrance.add_argument("--delta0", type=float)
    entrance.add_argument("--x0", type=float, nargs="+")

    contract = sub.add_parser("contract", help="certify contraction on a partition schedule")
    contract.add_argument("--schedule")
    contract.add_argument("--delta", type=float)
    contract.add_argument("--R", type=float)
    contract.add_argument("--varpi", type=float)
    contract.add_argument("--gamma-star", type=float)

    density = sub.add_parser("density", help="Fokker-Planck density and minorization")
    density.add_argument("--example")
    density.add_argument("--s", type=float)
    density.add_argument("--t", type=float)
    density.add_argument("--x0", type=float)
    density.add_argument("--R", type=float)
    density.add_argument("--radius", type=float)

    quasi = sub.add_parser("quasi", help="cylinder invariant measure of a quasi-periodic parent")
    quasi.add_argument("--example")
    quasi.add_argument("--periods", type=float, nargs=2)
    quasi.add_argument("--torus", type=int, nargs=2)
    quasi.add_argument("--burn", type=float)

    examples = sub.add_parser("examples", help="catalog oracle suites")
    actions = examples.add_subparsers(dest="action", required=True)
    actions.add_parser("list", help="list catalog examples")
    run_parser = actions.add_parser("run", help="run the oracle suite of an example")
    run_parser.add_argument("name")
    return parser


GLOBAL_FLAGS = ("config", "output_dir", "seed", "paths", "workers", "verbose", "command")


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate parsed flags into a configuration tree; unset flags are left out."""
    tree: Dict[str, Any] = {"command": args.command}
    simulation = {key: value for key, value in (("seed", args.seed), ("paths", args.paths),
                                                ("max_workers", args.workers)) if value is not None}
    if simulation:
        tree["simulation"] = simulation
    if args.output_dir:
        tree["output_dir"] = args.output_dir

    parameters = {}
    for key, value in vars(args).items():
        if key in GLOBAL_FLAGS or value is None:
            continue
        if key == "example":
            tree["example"] = value
        elif key == "name":
            tree["example"] = value
        else:
            parameters[key] = value
    if parameters:
        tree["parameters"] = parameters
    return tree


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = load_experiment_config(args.config, overrides_from_args(args))
    except ConfigurationError as e:
        return _config_failure(e)
    return run(config)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    sys.exit(main())
