# Entrance-measure lab for time-inhomogeneous SDEs

from .errors import (LabError, ConfigurationError, ArgumentError, PreconditionError, NumericError,
                     SimulationBlowUp, DivergenceError, ConvergenceError, DegeneracyError, UnsupportedError)
from .config import ExperimentConfig, load_experiment_config
from .coefficients import (CoefficientSet, DissipationEnvelope, QuasiPeriodicParent, SamplingGrid, TimeChange,
                           truncate_drift, mollify, reparameterize, verify_assumptions)
from .catalog import build_example, get_example, list_examples, coefficients_from_config
from .simulator import Scheme, SimConfig, PointMass, simulate_path, push_ensemble, second_moment_bound
from .measures import (GridMeasure, GaussianMeasure, LyapunovSpec, density_estimate, total_variation,
                       wasserstein1, rho_beta, gaussian_rho_beta)
from .contraction import (one_step_zeta, verify_lemma_finite_chain, analyze_partition, check_theorem_conditions,
                          select_beta, certify, ct_constant, fit_rate)
from .density import (flow_solve, frozen_density, parametrix_iterate, fp_solve, FPGrid, LowerBoundParams,
                      lower_bound_eval, calibrate_lower_bound, minorization, two_point_check)
from .entrance import (m_t_integral, alpha_delta, linear_entrance_exact, estimate_entrance, convergence_curve,
                       check_semigroup_consistency)
from .quasiperiodic import (TorusPoint, torus_rotate, k_simulate, mu_tilde, cylinder_invariant, push_cylinder,
                            birkhoff_average)
from .cli import run

__all__ = [
    'LabError',
    'ConfigurationError',
    'ArgumentError',
    'PreconditionError',
    'NumericError',
    'SimulationBlowUp',
    'DivergenceError',
    'ConvergenceError',
    'DegeneracyError',
    'UnsupportedError',
    'ExperimentConfig',
    'load_experiment_config',
    'CoefficientSet',
    'DissipationEnvelope',
    'QuasiPeriodicParent',
    'SamplingGrid',
    'TimeChange',
    'truncate_drift',
    'mollify',
    'reparameterize',
    'verify_assumptions',
    'build_example',
    'get_example',
    'list_examples',
    'coefficients_from_config',
    'Scheme',
    'SimConfig',
    'PointMass',
    'simulate_path',
    'push_ensemble',
    'second_moment_bound',
    'GridMeasure',
    'GaussianMeasure',
    'LyapunovSpec',
    'density_estimate',
    'total_variation',
    'wasserstein1',
    'rho_beta',
    'gaussian_rho_beta',
    'one_step_zeta',
    'verify_lemma_finite_chain',
    'analyze_partition',
    'check_theorem_conditions',
    'select_beta',
    'certify',
    'ct_constant',
    'fit_rate',
    'flow_solve',
    'frozen_density',
    'parametrix_iterate',
    'fp_solve',
    'FPGrid',
    'LowerBoundParams',
    'lower_bound_eval',
    'calibrate_lower_bound',
    'minorization',
    'two_point_check',
    'm_t_integral',
    'alpha_delta',
    'linear_entrance_exact',
    'estimate_entrance',
    'convergence_curve',
    'check_semigroup_consistency',
    'TorusPoint',
    'torus_rotate',
    'k_simulate',
    'mu_tilde',
    'cylinder_invariant',
    'push_cylinder',
    'birkhoff_average',
    'run',
]
