"""
Entrance measures: estimation from the far past and exact Gaussian oracles.

An entrance measure μ_t is approached by pushing an initial law from start
times s_n ↓ −∞ to t. The Monte Carlo estimator declares convergence when
consecutive estimates are ρ_β-Cauchy. Linear SDEs and the time-changed OU
family have explicit Gaussian transitions, which give noise-free curves.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .catalog import ou_t_eps, ou_t_eps_transition
from .coefficients import CoefficientSet, DissipationEnvelope, no_kinks
from .config import MeasureSettings
from .contraction import RateFit, fit_rate, DEFAULT_EXPONENTS
from .errors import ArgumentError, DivergenceError
from .measures import (GaussianMeasure, GridMeasure, LyapunovSpec, density_estimate,
                       gaussian_rho_beta, rho_beta, sampling_noise)
from .quadrature import cumulative_integral, discounted_integral, integrate
from .simulator import EnsembleRunner, PointMass, SimConfig, resample

logger = logging.getLogger(__name__)

TAIL_TOL = 1e-8
TAIL_START = 8.0
MAX_DOUBLINGS = 14

RateFunction = Callable[[np.ndarray], np.ndarray]


# -------------------------------
# Tail-truncated integrals over (−∞, t]
# -------------------------------

def _integral_to_minus_infinity(rate: RateFunction, weight: RateFunction, t: float,
                                kinks: Callable[[float, float], Sequence[float]], what: str) -> float:
    """
    ∫_{−∞}^t exp(2∫_u^t rate) weight(u) du, doubling the truncation length
    from 8 until the added tail is below 1e-8.
    """
    length = TAIL_START
    total = discounted_integral(rate, weight, t - length, t, breakpoints=kinks(t - length, t))
    for _ in range(MAX_DOUBLINGS):
        lo, hi = t - 2 * length, t - length
        decay = 2.0 * integrate(lambda r: float(rate(r)), hi, t, kinks(hi, t))
        if decay > 700:
            raise DivergenceError(f"{what} diverges: ∫rate over [{hi:g}, {t:g}] is {decay / 2:.3g} > 0")
        increment = math.exp(decay) * discounted_integral(rate, weight, lo, hi, breakpoints=kinks(lo, hi))
        if not np.isfinite(increment):
            raise DivergenceError(f"{what} diverges beyond {lo:g}")
        total += increment
        length *= 2
        if abs(increment) < TAIL_TOL:
            logger.debug(f"{what} at t={t:g} truncated at length {length:g}")
            return total
    raise DivergenceError(f"{what} at t={t:g} did not settle within a truncation length of {length:g}; "
                          f"the average drift rate is not negative")


def m_t_integral(env: DissipationEnvelope, t: float, gamma1: float, dimension: int) -> float:
    """
    m_t = ∫_{−∞}^t e^{2∫_u^t α}(2Λ_u + dΓ₁) du.

    Raises:
        DivergenceError: if the average dissipation is not negative
    """
    weight = lambda u: 2.0 * np.asarray(env.lam(u), dtype=float) + dimension * gamma1
    return _integral_to_minus_infinity(env.alpha, weight, t, env.breakpoints, "m_t")


def alpha_delta(env: DissipationEnvelope, delta: float, horizon: float, t_end: float = 0.0,
                cells_per_window: int = 200) -> float:
    """
    Sampled α(Δ): the largest ∫_s^t α over windows of length at most Δ inside
    [t_end − H, t_end − H/2 + Δ], floored at 0.

    The lim sup as s → −∞ is approximated by the far half of the horizon.
    """
    if delta <= 0 or horizon <= 0:
        raise ArgumentError(f"alpha_delta needs positive delta and horizon, got {delta}, {horizon}")
    lags = max(1, min(cells_per_window, int(math.ceil(delta / 0.005))))
    h = delta / lags
    lo = t_end - horizon
    n = int(math.ceil((horizon / 2 + delta) / h))
    edges = lo + h * np.arange(n + 1)
    running = cumulative_integral(env.alpha, edges)
    best = -math.inf
    for k in range(1, min(lags, n) + 1):
        best = max(best, float(np.max(running[k:] - running[:-k])))
    return max(best, 0.0)


# -------------------------------
# Exact Gaussian models
# -------------------------------

@dataclass(frozen=True)
class LinearSDE:
    """dX = f(t)X dt + σ(t) dW with P(t, s, x, ·) = N(e^{∫f}x, ∫e^{2∫f}σ²)"""
    f: RateFunction
    sigma: RateFunction
    kinks: Callable[[float, float], Sequence[float]] = no_kinks
    name: str = "linear"

    def growth(self, s: float, t: float) -> float:
        """∫_s^t f."""
        return integrate(lambda r: float(self.f(r)), s, t, self.kinks(min(s, t), max(s, t)))

    def variance(self, s: float, t: float) -> float:
        weight = lambda u: np.asarray(self.sigma(u), dtype=float) ** 2
        return discounted_integral(self.f, weight, s, t, breakpoints=self.kinks(s, t))

    def transition(self, s: float, t: float, x: float) -> GaussianMeasure:
        if s > t:
            raise ArgumentError(f"transition needs s <= t, got s={s}, t={t}")
        return GaussianMeasure.scalar(math.exp(self.growth(s, t)) * x, self.variance(s, t))

    def entrance(self, t: float) -> GaussianMeasure:
        return linear_entrance_exact(self.f, self.sigma, t, self.kinks)


def linear_entrance_exact(f: RateFunction, sigma: RateFunction, t: float,
                          kinks: Callable[[float, float], Sequence[float]] = no_kinks) -> GaussianMeasure:
    """
    Entrance measure N(0, ∫_{−∞}^t e^{2∫_u^t f}σ²(u) du) of a linear SDE.

    Raises:
        DivergenceError: if the variance integral does not converge
    """
    weight = lambda u: np.asarray(sigma(u), dtype=float) ** 2
    variance = _integral_to_minus_infinity(f, weight, t, kinks, "entrance variance")
    return GaussianMeasure.scalar(0.0, variance)


@dataclass(frozen=True)
class OUTimeChangeModel:
    """dX = −|t|^ε X dt + |t|^{ε/2} dW with entrance measure N(0, ½) at every t"""
    eps: float

    def transition(self, s: float, t: float, x: float) -> GaussianMeasure:
        if s > t:
            raise ArgumentError(f"transition needs s <= t, got s={s}, t={t}")
        factor, variance = ou_t_eps_transition(self.eps, s, t)
        return GaussianMeasure.scalar(factor * x, variance)

    def entrance(self, t: float) -> GaussianMeasure:
        return GaussianMeasure.scalar(0.0, 0.5)

    def coefficients(self) -> CoefficientSet:
        return ou_t_eps(self.eps)


ExactModel = Union[LinearSDE, OUTimeChangeModel]


def lower_bound_curve(model: LinearSDE, t: float, x: float, starts: Sequence[float],
                      beta: float) -> np.ndarray:
    """2√β·|x|·e^{∫_s^t f} for each start s, a pointwise lower bound of the exact ρ_β curve."""
    return np.array([2.0 * math.sqrt(beta) * abs(x) * math.exp(model.growth(s, t)) for s in starts])


# -------------------------------
# Start schedules
# -------------------------------

def geometric_starts(t: float, levels: int, delta0: float = 1.0) -> List[float]:
    """s_n = t − 2^n·Δ₀ for n = 0, …, levels − 1."""
    if levels < 1 or delta0 <= 0:
        raise ArgumentError(f"geometric starts need levels >= 1 and delta0 > 0, got {levels}, {delta0}")
    return [t - (2.0 ** n) * delta0 for n in range(levels)]


def snapped_starts(t: float, times: Sequence[float]) -> List[float]:
    """Distinct times strictly before t in decreasing order."""
    starts = sorted({float(s) for s in times if s < t}, reverse=True)
    if not starts:
        raise ArgumentError(f"no start time lies before t={t}")
    return starts


def _check_starts(t: float, starts: Sequence[float]):
    if not starts:
        raise ArgumentError("at least one start time is required")
    if any(s > t for s in starts):
        raise ArgumentError(f"start times must not exceed t={t}")
    if any(b >= a for a, b in zip(starts[:-1], starts[1:])):
        raise ArgumentError("start times must be strictly decreasing")


# -------------------------------
# Monte Carlo estimation
# -------------------------------

@dataclass
class EntranceEstimate:
    """Histograms of P*(t, s_n)·init with their pairwise ρ_β distances"""
    t: float
    starts: List[float]
    measures: List[GridMeasure]
    distances: np.ndarray
    tolerance: float
    converged: bool
    second_moments: List[float] = field(default_factory=list)
    law_id: str = ""

    @property
    def final(self) -> GridMeasure:
        return self.measures[-1]

    def consecutive(self) -> List[float]:
        return [float(self.distances[i, i + 1]) for i in range(len(self.starts) - 1)]

    def curve(self) -> List[Tuple[float, float]]:
        """(t − s_n, ρ_β to the earliest-start estimate), excluding the earliest start."""
        last = len(self.starts) - 1
        return [(self.t - s, float(self.distances[i, last])) for i, s in enumerate(self.starts[:-1])]


def _as_law(init):
    if hasattr(init, "sample"):
        return init
    return PointMass(tuple(np.atleast_1d(np.asarray(init, dtype=float))))


class EntranceEstimator:
    """
    Monte Carlo entrance estimation on a fixed histogram grid.

    Pushes from different start times are independent jobs on separate
    random streams; distances are computed after all pushes finish.
    """

    def __init__(self, cfg: SimConfig, grid: Optional[MeasureSettings] = None,
                 spec: Optional[LyapunovSpec] = None):
        self.cfg = cfg
        self.grid = grid or MeasureSettings()
        self.spec = spec or self.grid.lyapunov()
        self.runner = EnsembleRunner(replace(cfg, max_workers=1))
        self._setup_logging()

    def _setup_logging(self):
        """Setup logging for entrance estimation"""
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def histogram(self, samples: np.ndarray) -> GridMeasure:
        grid = self.grid
        return density_estimate(samples, grid.lower, grid.upper, grid.resolution)

    def push(self, c: CoefficientSet, s: float, init, t: float, stream: int = 0) -> Tuple[GridMeasure, float]:
        """Histogram and mean V of P*(t, s)·init."""
        ensemble = self.runner.push(c, s, _as_law(init), t, stream)
        mean_v = float(np.mean(self.spec.V(ensemble.samples)))
        return self.histogram(ensemble.samples), mean_v

    def push_many(self, c: CoefficientSet, starts: Sequence[float], init, t: float,
                  stream_offset: int = 0) -> List[Tuple[GridMeasure, float]]:
        jobs = [(s, stream_offset + n) for n, s in enumerate(starts)]
        run = lambda job: self.push(c, job[0], init, t, job[1])
        if self.cfg.max_workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.max_workers) as pool:
                return list(pool.map(run, jobs))
        return [run(job) for job in jobs]

    def estimate(self, c: CoefficientSet, t: float, starts: Sequence[float], init,
                 tolerance: Optional[float] = None) -> EntranceEstimate:
        """
        Estimate μ_t from the start schedule.

        Converged when the last two consecutive distances are both below
        the tolerance.
        """
        starts = [float(s) for s in starts]
        _check_starts(t, starts)
        tolerance = self.grid.tolerance if tolerance is None else tolerance
        law = _as_law(init)
        self.logger.info(f"estimating entrance measure of {c.name} at t={t:g} from {len(starts)} starts "
                         f"({self.cfg.paths} paths each)")
        results = self.push_many(c, starts, law, t)
        measures = [m for m, _ in results]
        n = len(measures)
        distances = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                distances[i, j] = distances[j, i] = rho_beta(measures[i], measures[j], self.spec)
        consecutive = [distances[i, i + 1] for i in range(n - 1)]
        converged = len(consecutive) >= 2 and all(d < tolerance for d in consecutive[-2:])
        estimate = EntranceEstimate(t=t, starts=starts, measures=measures, distances=distances,
                                    tolerance=tolerance, converged=converged,
                                    second_moments=[v for _, v in results], law_id=law.law_id)
        self.logger.info(f"entrance estimate at t={t:g}: consecutive rho_beta "
                         f"{[round(d, 4) for d in consecutive]}, converged={converged}")
        return estimate


def estimate_entrance(c: CoefficientSet, t: float, starts: Sequence[float], x0, cfg: SimConfig,
                      grid: Optional[MeasureSettings] = None, spec: Optional[LyapunovSpec] = None,
                      tolerance: Optional[float] = None) -> EntranceEstimate:
    """
    Push δ_{x₀} (or any initial law) from each start to t and test Cauchy
    convergence in ρ_β.

    Raises:
        ArgumentError: if the starts are not strictly decreasing or exceed t
        SimulationBlowUp: propagated from the simulator
    """
    return EntranceEstimator(cfg, grid, spec).estimate(c, t, starts, x0, tolerance)


# -------------------------------
# Convergence curves
# -------------------------------

@dataclass
class ConvergenceCurve:
    """ρ_β(P(t, s, x, ·), μ_t) against t − s"""
    gaps: np.ndarray
    distances: np.ndarray
    exact: bool

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.gaps.tolist(), self.distances.tolist()))

    def fit(self, exponents: np.ndarray = DEFAULT_EXPONENTS) -> RateFit:
        return fit_rate(self.points(), exponents)

    def eventually_decreasing(self, band: float = 0.0) -> bool:
        """The final third is nonincreasing up to ``band``."""
        order = np.argsort(self.gaps)
        tail = self.distances[order][2 * len(order) // 3:]
        return bool(np.all(np.diff(tail) <= band))


def convergence_curve(model: Union[ExactModel, CoefficientSet], t: float, x: float,
                      starts: Sequence[float], entrance: Optional[Union[GaussianMeasure, GridMeasure]] = None,
                      spec: Optional[LyapunovSpec] = None, cfg: Optional[SimConfig] = None,
                      grid: Optional[MeasureSettings] = None) -> ConvergenceCurve:
    """
    Distance of P(t, s, x, ·) to the entrance measure for each start.

    Exact models use gaussian_rho_beta against their Gaussian entrance
    measure; coefficient sets need a GridMeasure entrance estimate and a
    simulation config, and are compared through histograms.
    """
    spec = spec or LyapunovSpec(beta=0.1)
    starts = [float(s) for s in starts]
    gaps = np.array([t - s for s in starts])
    if hasattr(model, "transition"):
        target = entrance if entrance is not None else model.entrance(t)
        distances = [gaussian_rho_beta(model.transition(s, t, x), target, spec) for s in starts]
        return ConvergenceCurve(gaps=gaps, distances=np.array(distances), exact=True)
    if not isinstance(entrance, GridMeasure) or cfg is None:
        raise ArgumentError("Monte Carlo curves need a GridMeasure entrance estimate and a SimConfig")
    estimator = EntranceEstimator(cfg, grid, spec)
    results = estimator.push_many(model, starts, x, t, stream_offset=1000)
    distances = [rho_beta(measure, entrance, spec) for measure, _ in results]
    return ConvergenceCurve(gaps=gaps, distances=np.array(distances), exact=False)


# -------------------------------
# Diagnostics
# -------------------------------

def estimate_lyapunov_offset(c: CoefficientSet, x0, times: Sequence[float], cfg: SimConfig,
                             spec: Optional[LyapunovSpec] = None) -> float:
    """
    Finite-horizon lower estimate of ℓ_{x₀}: the largest Monte Carlo mean of
    V(X_r^{s,x₀}) over pairs s < r of the given times.
    """
    spec = spec or LyapunovSpec(beta=0.1)
    times = sorted(float(v) for v in times)
    if len(times) < 2:
        raise ArgumentError("at least two times are needed")
    runner = EnsembleRunner(cfg)
    law = _as_law(x0)
    best = 0.0
    stream = 0
    for i, s in enumerate(times[:-1]):
        for r in times[i + 1:]:
            ensemble = runner.push(c, s, law, r, stream)
            best = max(best, float(np.mean(spec.V(ensemble.samples))))
            stream += 1
    logger.warning(f"Lyapunov offset for {c.name} sampled on {len(times)} times only: {best:.4g} "
                   f"is a lower estimate")
    return best


@dataclass
class SemigroupCheck:
    """Direct push s → t against the two-stage push s → r → t"""
    direct: GridMeasure
    two_stage: GridMeasure
    distance: float
    noise: float
    passed: bool


def check_semigroup_consistency(c: CoefficientSet, s: float, r: float, t: float, init, cfg: SimConfig,
                                grid: Optional[MeasureSettings] = None,
                                spec: Optional[LyapunovSpec] = None) -> SemigroupCheck:
    """
    Pass iff ρ_β(direct, two-stage) is within twice the sampling noise of
    two independent histograms.
    """
    if not s <= r <= t:
        raise ArgumentError(f"semigroup check needs s <= r <= t, got {s}, {r}, {t}")
    estimator = EntranceEstimator(cfg, grid, spec)
    law = _as_law(init)
    direct, _ = estimator.push(c, s, law, t, stream=0)
    middle = estimator.runner.push(c, s, law, r, stream=1)
    two_stage, _ = estimator.push(c, r, resample(middle), t, stream=2)
    distance = rho_beta(direct, two_stage, estimator.spec)
    noise = sampling_noise(direct, cfg.paths, estimator.spec)
    return SemigroupCheck(direct=direct, two_stage=two_stage, distance=distance, noise=noise,
                          passed=distance <= 2.0 * noise)
