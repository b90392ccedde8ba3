"""
Oracle suites behind ``examples run <name>``.

Each suite builds its catalog example, runs the desk-scale checks that
have a known answer for it, and records every value in the report with
the provenance of the expectation.
"""

import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict

import numpy as np

from .catalog import (build_example, degenerate_noise_partition, expanding_interval_times, f_eps, f_eps_kinks,
                      get_example, sin_double_well)
from .coefficients import torus_average_dissipation
from .config import ExperimentConfig
from .contraction import (certify, ct_constant, expanding_partition_schedule, expanding_threshold_R,
                          fit_rate, window_constants, write_schedule_csv)
from .density import FPGrid, calibrate_lower_bound, fp_solve, lower_bound_eval
from .entrance import (EntranceEstimator, LinearSDE, OUTimeChangeModel, alpha_delta, convergence_curve,
                       geometric_starts, linear_entrance_exact, lower_bound_curve, m_t_integral)
from .measures import GaussianMeasure, count_modes, gaussian_cell_masses, rho_beta, write_measure_csv
from .quasiperiodic import (TorusPoint, birkhoff_average, cylinder_invariant, orbit_cell_counts,
                            screen_torus_dissipation, write_cylinder_csv)
from .reporting import ExperimentReport, write_curve_csv, write_mapping_csv
from .simulator import PointMass, check_moment_bound, push_ensemble, second_moment_bound

logger = logging.getLogger(__name__)

Suite = Callable[[ExperimentConfig, ExperimentReport, Path], None]


def _example_parameters(config: ExperimentConfig) -> Dict:
    return dict(config.parameters.get("example_parameters", {}))


def _entrance_block(config: ExperimentConfig, report: ExperimentReport, out: Path, c, t: float = 0.0):
    levels = int(config.parameters.get("levels", 6))
    starts = geometric_starts(t, levels, float(config.parameters.get("delta0", 1.0)))
    estimator = EntranceEstimator(config.simulation.to_sim_config(), config.measure)
    estimate = estimator.estimate(c, t, starts, PointMass((0.0,)))
    for s, measure in zip(estimate.starts, estimate.measures):
        report.artifact(write_measure_csv(measure, out / f"entrance_s{s:g}.csv"))
    report.artifact(write_curve_csv(estimate.curve(), out / "entrance_curve.csv"))
    report.check("entrance_converged", estimate.consecutive()[-2:], f"< {estimate.tolerance}",
                 estimate.converged, "DERIVED", estimate.tolerance)
    if len(estimate.curve()) >= 5:
        fit = fit_rate(estimate.curve())
        report.constant("rate_fit", {"alpha": fit.alpha, "lambda": fit.rate, "prefactor": fit.prefactor,
                                     "residual": fit.residual})
    return estimate


def bpsv_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    params = _example_parameters(config)
    c = build_example("bpsv", **params)
    lam = float(c.envelope.lam(0.0))
    m_t = m_t_integral(c.envelope, 0.0, c.gamma1, 1)
    report.constant("m_t", m_t)
    expected = (2.0 * lam + 1.0) / 4.0
    report.check("m_t_closed_form", m_t, expected, abs(m_t - expected) <= 1e-6 * expected, "DERIVED", 1e-6)
    report.constant("alpha_delta", alpha_delta(c.envelope, 1.0, 100.0))

    cfg = config.simulation.to_sim_config()
    for k, (s, t, x) in enumerate([(-2.0, 0.0, 0.0), (-1.0, 0.0, 1.0), (-0.5, 0.0, 2.0)]):
        ensemble = push_ensemble(c, s, PointMass((x,)), t, cfg, stream=100 + k)
        bound = second_moment_bound(c.envelope, s, t, [x], c.gamma1, 1)
        check = check_moment_bound(ensemble, bound)
        report.check(f"moment_bound[s={s:g},x={x:g}]", check.mean, f"<= {bound!r} + 3SE",
                     check.passed, "PAPER", 3 * check.standard_error)
    _entrance_block(config, report, out, c)


def ou_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    params = _example_parameters(config)
    spec = get_example("ou")
    merged = {**spec.defaults, **params}
    theta, sigma = float(merged["theta"]), float(merged["sigma"])
    c = spec.build(**params)
    variance = sigma ** 2 / (2 * theta)

    x0 = 1.0
    grid = FPGrid.with_spacing(-6.0, 6.0, config.fp.spacing, dt=config.fp.dt, boundary=config.fp.boundary)
    solution = fp_solve(c, 0.0, x0, 1.0, grid)
    exact_variance = sigma ** 2 * (1 - math.exp(-2 * theta)) / (2 * theta)
    exact = gaussian_cell_masses(GaussianMeasure.scalar(x0 * math.exp(-theta), exact_variance),
                                 -6.0, 6.0, grid.resolution)
    l1 = float(np.abs(solution.measure.masses - exact.masses).sum())
    report.artifact(write_measure_csv(solution.measure, out / "fp_density.csv"))
    report.check("fp_l1_vs_exact", l1, 0.0, l1 <= 1e-2, "DERIVED", 1e-2)
    half = fp_solve(c, 0.0, x0, 0.5, grid)
    chained = fp_solve(c, 0.5, 0.0, 1.0, grid, initial=half.measure)
    ck = float(np.abs(chained.measure.masses - solution.measure.masses).sum())
    report.check("chapman_kolmogorov", ck, 0.0, ck <= 2e-2, "DERIVED", 2e-2)

    def exact_density(x, ys):
        m, v = x * math.exp(-theta), exact_variance
        return np.exp(-0.5 * (ys - m) ** 2 / v) / math.sqrt(2 * math.pi * v)

    params_lb = calibrate_lower_bound(c, 1.0, (-2.0, 2.0), (-1.0, 1.0), density=exact_density)
    report.constant("lower_bound", {"eta1": params_lb.eta1, "eta2": params_lb.eta2, "eta3": params_lb.eta3})
    for label, scale in (("calibration", 1.0), ("expanded", 1.2)):
        xs = np.linspace(-2.0 * scale, 2.0 * scale, 31)
        ys = np.linspace(-1.0 * scale, 1.0 * scale, 31)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        margin = float(np.min(exact_density(X, Y) - lower_bound_eval(params_lb, 1.0, X, Y)))
        report.check(f"lower_bound_{label}_range", margin, ">= 0", margin >= 0, "PAPER")

    estimator = EntranceEstimator(config.simulation.to_sim_config(), config.measure)
    measure, _ = estimator.push(c, -10.0, PointMass((0.0,)), 0.0)
    truth = gaussian_cell_masses(GaussianMeasure.scalar(0.0, variance), config.measure.lower,
                                 config.measure.upper, config.measure.resolution)
    distance = rho_beta(measure, truth, estimator.spec)
    report.check("invariant_measure", distance, 0.0, distance <= config.measure.tolerance, "DERIVED",
                 config.measure.tolerance)


def ou_t_eps_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    params = _example_parameters(config)
    eps = float(params.get("eps", 1.0))
    model = OUTimeChangeModel(eps)
    c = build_example("ou_t_eps", **params)
    cfg = config.simulation.to_sim_config()
    ensemble = push_ensemble(c, -50.0, PointMass((0.0,)), 0.0, cfg)
    variance = float(np.var(ensemble.samples))
    report.check("invariant_variance", variance, 0.5, 0.47 <= variance <= 0.53, "PAPER", 0.03)

    gaps = np.linspace(2.0, 5.0, 13)
    curve = convergence_curve(model, 0.0, 1.0, [-g for g in gaps])
    report.artifact(write_curve_csv(curve.points(), out / "exact_curve.csv"))
    fit = curve.fit()
    low, high = 0.9 * (1 + eps), 1.1 * (1 + eps)
    report.check("supergeometric_exponent", fit.alpha, 1 + eps, low <= fit.alpha <= high, "PAPER", 0.1 * (1 + eps))


def linear_f_eps_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    eps = float(_example_parameters(config).get("eps", 0.5))
    model = LinearSDE(f=f_eps(eps), sigma=lambda t: np.ones_like(np.asarray(t, dtype=float)),
                      kinks=f_eps_kinks(eps), name=f"linear_f_eps[{eps:g}]")
    entrance = linear_entrance_exact(model.f, model.sigma, 0.0, model.kinks)
    report.constant("entrance_variance_t0", entrance.variance)

    blocks = range(100, 1001, 50)
    points = [(float(i * i), model.growth(-float(i * i), 0.0)) for i in blocks]
    fit = fit_rate(points, log_values=True)
    expected = (1 + eps) / 2
    report.check("subgeometric_exponent", fit.alpha, expected, abs(fit.alpha - expected) <= 0.1, "PAPER", 0.1)

    beta = config.measure.beta
    starts = [-float(i * i) for i in range(3, 21)]
    curve = convergence_curve(model, 0.0, 1.0, starts, entrance=entrance,
                              spec=config.measure.lyapunov())
    floor = lower_bound_curve(model, 0.0, 1.0, starts, beta)
    report.artifact(write_curve_csv(curve.points(), out / "exact_curve.csv"))
    gap = float(np.min(curve.distances - floor))
    report.check("lower_bound_sharpness", gap, ">= 0", gap >= -1e-9, "PAPER", 1e-9)


def sin_sqrt_double_well_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    k_max = int(config.parameters.get("k_max", 6))
    schedule = expanding_partition_schedule(k_max=k_max, eta=float(config.parameters.get("eta", 0.01)))
    report.artifact(write_schedule_csv(schedule, out / "schedule.csv"))
    threshold = expanding_threshold_R()
    R = float(config.parameters.get("R", 41.0))
    report.check("R_threshold", R, f"> {threshold!r}", R > threshold, "PAPER")
    cert = certify(schedule, float(config.parameters.get("delta", 0.005)), R, varpi=0.5)
    report.artifact(write_mapping_csv(cert.to_dict(), out / "certificate.csv"))
    report.check("contraction_rate", cert.r, "< 1", cert.r < 1.0, "PAPER")
    c = build_example("sin_sqrt_double_well")
    _, T_1 = expanding_interval_times(1)
    C_t = ct_constant(cert, schedule, 0.0, partial=window_constants(c, 0.0, T_1))
    report.constant("C_t", C_t)
    report.constant("beta", cert.beta)
    report.constant("r", cert.r)


def sin_double_well_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    c = build_example("sin_double_well", **_example_parameters(config))
    period = c.envelope.integral(0.0, 2 * math.pi)
    report.check("period_integral", period, -2 * math.pi, abs(period + 2 * math.pi) <= 1e-6, "PAPER", 1e-6)
    values = [m_t_integral(c.envelope, t, c.gamma1, 1) for t in np.linspace(0.0, 2 * math.pi, 5)]
    report.constant("m_t", values)
    report.check("m_t_finite", max(values), "finite", bool(np.all(np.isfinite(values))), "PAPER")
    report.constant("alpha_delta", alpha_delta(c.envelope, 2 * math.pi, 200.0))
    degenerate = sin_double_well(degenerate=True)
    origin = np.zeros((1, 1))
    floor = min(float(degenerate.diffusion(u, origin)[0, 0, 0])
                for t in degenerate_noise_partition(3) for u in np.linspace(t - 2 * math.pi, t, 41))
    report.check("nondegenerate_partition", floor, ">= sqrt(2)/2", floor >= math.sqrt(2) / 2 - 1e-12, "PAPER", 1e-12)


def quasi_double_well_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    parent = build_example("quasi_double_well", **_example_parameters(config))
    counts = orbit_cell_counts(TorusPoint(0.0, 0.0, parent.periods), 1.0, 10_000, (20, 20))
    report.check("orbit_visits_every_cell", int(counts.min()), ">= 1", counts.min() >= 1, "DERIVED")

    n1 = 10
    cell = lambda r1, r2, x: ((r1 * n1 // parent.periods[0]) == 3).astype(float)
    fraction = birkhoff_average(parent, cell, (0.0, 0.0, 0.0), 10_000.0,
                                config.simulation.to_sim_config(), torus_only=True)
    report.check("rotation_equidistribution", fraction, 1.0 / n1, abs(fraction - 1.0 / n1) <= 0.02,
                 "DERIVED", 0.02)

    shape = tuple(config.parameters.get("torus", (4, 4)))
    grid = replace(config.measure, resolution=int(config.parameters.get("resolution", 32)),
                   tolerance=float(config.parameters.get("tolerance", 0.1)))
    cylinder = cylinder_invariant(parent, shape, config.simulation.to_sim_config(), grid,
                                  burn=float(config.parameters.get("burn", 8.0)))
    report.artifact(write_cylinder_csv(cylinder, out / "cylinder.csv"))
    modes = count_modes(cylinder.spatial_marginal(), smoothing=3)
    report.check("spatial_modes", modes, 2, modes == 2, "DERIVED")


def quasi_nondissipative_suite(config: ExperimentConfig, report: ExperimentReport, out: Path):
    params = _example_parameters(config)
    spec = get_example("quasi_nondissipative")
    merged = {**spec.defaults, **params}
    parent = spec.build(**params)
    integral = torus_average_dissipation(parent)
    expected = -4 * math.pi ** 2 / (merged["w1"] * merged["w2"])
    report.check("torus_integral", integral, expected, abs(integral - expected) <= 1e-6 * abs(expected),
                 "PAPER", 1e-6)
    report.constant("torus_average", screen_torus_dissipation(parent))


SUITES: Dict[str, Suite] = {
    "bpsv": bpsv_suite,
    "ou": ou_suite,
    "ou_t_eps": ou_t_eps_suite,
    "linear_f_eps": linear_f_eps_suite,
    "sin_sqrt_double_well": sin_sqrt_double_well_suite,
    "sin_double_well": sin_double_well_suite,
    "quasi_double_well": quasi_double_well_suite,
    "quasi_nondissipative": quasi_nondissipative_suite,
}


def run_suite(name: str, config: ExperimentConfig) -> ExperimentReport:
    """Run the oracle suite of a catalog example and write its report."""
    example = get_example(name)
    out = Path(config.output_dir) / name
    report = ExperimentReport(title=f"examples run {name}",
                              inputs={"example": name, "description": example.description,
                                      "parameters": config.parameters, "seed": config.seed},
                              defaults=config.defaults())
    for truth in example.truths:
        report.constant(f"truth.{truth.name}", f"{truth.value} [{truth.provenance}]")
    logger.info(f"running oracle suite '{name}' into {out}")
    SUITES[name](config, report, out)
    report.write(report.artifact(out / "report.txt"))
    return report
