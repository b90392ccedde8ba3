"""
Contraction analysis in the weighted total-variation distance ρ_β.

The one-step factor ζ combines a Lyapunov drift PV ≤ γV + K with a
minorization inf_{V ≤ R} P(x, ·) ≥ ην on each interval of a decreasing
partition. Products of ζ over a partition bound the contraction of the
time-inhomogeneous semigroup; this module evaluates those factors, checks
them exactly on finite Markov chains, analyzes partitions and selects the
constants (β, r, C_t) of the resulting convergence certificate.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import optimize

from .catalog import expanding_interval_times, sin_sqrt_double_well
from .coefficients import CheckResult, CoefficientSet
from .errors import ArgumentError, ConfigurationError, NumericError, PreconditionError
from .quadrature import discounted_integral

logger = logging.getLogger(__name__)

LEMMA_TOL = 1e-12
TELESCOPING_TOL = 1e-10
DEFAULT_EXPONENTS = np.arange(0.25, 3.0001, 0.005)


def one_step_zeta(gamma: float, K: float, eta: float, R: float, beta: float) -> float:
    """
    max{1 − η + βK, (2 + β(γR + 2K))/(2 + βR)}; values above 1 mean expansion.

    Raises:
        ArgumentError: for β < 0, R ≤ 0 or η outside [0, 1)
    """
    if beta < 0 or R <= 0 or not 0 <= eta < 1:
        raise ArgumentError(f"one_step_zeta needs beta >= 0, R > 0, eta in [0, 1): beta={beta}, R={R}, eta={eta}")
    return max(1.0 - eta + beta * K, (2.0 + beta * (gamma * R + 2.0 * K)) / (2.0 + beta * R))


# -------------------------------
# Finite-state oracle
# -------------------------------

@dataclass(frozen=True)
class ChainConstants:
    """Drift and minorization constants of one kernel"""
    gamma: float
    K: float
    eta: float
    R: float
    nu: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class FiniteChain:
    """Row-stochastic kernel P with Lyapunov vector V"""
    P: np.ndarray = field(compare=False)
    V: np.ndarray = field(compare=False)

    def __post_init__(self):
        P, V = np.asarray(self.P, dtype=float), np.asarray(self.V, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != len(V):
            raise ArgumentError(f"kernel shape {P.shape} does not match V of length {len(V)}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ArgumentError("kernel rows must be probability vectors")
        if np.any(V < 0):
            raise ArgumentError("Lyapunov vector must be nonnegative")

    @property
    def states(self) -> int:
        return len(self.V)

    def communicating_classes(self) -> List[List[int]]:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.states))
        graph.add_edges_from(zip(*np.nonzero(np.asarray(self.P) > 0)))
        return sorted(sorted(c) for c in nx.strongly_connected_components(graph))

    def derived_constants(self, R: float, gamma: float) -> ChainConstants:
        """
        Exact K = max(PV − γV)⁺ and the largest minorization η·ν on {V ≤ R}.

        ν is the normalized columnwise minimum of the rows in {V ≤ R};
        η is capped below 1.
        """
        P, V = np.asarray(self.P), np.asarray(self.V)
        K = max(0.0, float(np.max(P @ V - gamma * V)))
        small = V <= R
        if not np.any(small):
            return ChainConstants(gamma, K, 0.0, R, np.full(self.states, 1.0 / self.states))
        floor = P[small].min(axis=0)
        eta = float(floor.sum())
        if eta == 0.0:
            return ChainConstants(gamma, K, 0.0, R, np.full(self.states, 1.0 / self.states))
        return ChainConstants(gamma, K, min(eta, 1.0 - 1e-9), R, floor / eta)


def random_chain(states: int, rng: np.random.Generator, V: Optional[np.ndarray] = None,
                 concentration: float = 1.0) -> FiniteChain:
    """Kernel with Dirichlet rows; V uniform on [0, 10] unless given."""
    P = rng.dirichlet(np.full(states, concentration), size=states)
    if V is None:
        V = rng.uniform(0.0, 10.0, size=states)
    return FiniteChain(P=P, V=np.asarray(V, dtype=float))


def _check_hypotheses(chain: FiniteChain, k: ChainConstants, beta: float):
    P, V = np.asarray(chain.P), np.asarray(chain.V)
    if not 0 <= k.eta < 1:
        raise PreconditionError("0 <= eta < 1", f"eta={k.eta}")
    drift_gap = float(np.max(P @ V - k.gamma * V - k.K))
    if drift_gap > LEMMA_TOL:
        raise PreconditionError("PV <= gamma V + K", f"exceeded by {drift_gap:.3g}")
    small = V <= k.R
    if np.any(small):
        gap = float(np.max(k.eta * np.asarray(k.nu)[None, :] - P[small]))
        if gap > LEMMA_TOL:
            raise PreconditionError("inf_{V<=R} P(x,.) >= eta nu", f"exceeded by {gap:.3g}")
    # the displayed factor can fail for strongly expanding kernels
    if k.gamma > 1.0 + beta * k.K + LEMMA_TOL:
        raise PreconditionError("gamma <= 1 + beta K", f"gamma={k.gamma:g}, beta K={beta * k.K:g}")


def weighted_distance(a: np.ndarray, b: np.ndarray, V: np.ndarray, beta: float) -> np.ndarray:
    """ρ_β between rows of a and b on a finite state space."""
    return np.abs(np.asarray(a) - np.asarray(b)) @ (1.0 + beta * np.asarray(V))


@dataclass
class LemmaReport:
    """Outcome of the exact finite-chain contraction check"""
    zeta: float
    branches: Dict[str, float]
    max_ratio: float
    violations: int
    trials: int
    classes: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_lemma_finite_chain(chain: FiniteChain, constants: ChainConstants, beta: float,
                              trials: int = 1000, rng: Optional[np.random.Generator] = None) -> LemmaReport:
    """
    Check ρ_β(μ₁P, μ₂P) ≤ ζ·ρ_β(μ₁, μ₂) on random probability-vector pairs.

    Raises:
        PreconditionError: naming the hypothesis the chain violates
    """
    _check_hypotheses(chain, constants, beta)
    rng = rng if rng is not None else np.random.default_rng(0)
    zeta = one_step_zeta(constants.gamma, constants.K, constants.eta, constants.R, beta)
    n = chain.states
    mu1 = rng.dirichlet(np.ones(n), size=trials)
    mu2 = rng.dirichlet(np.ones(n), size=trials)
    before = weighted_distance(mu1, mu2, chain.V, beta)
    after = weighted_distance(mu1 @ chain.P, mu2 @ chain.P, chain.V, beta)
    violations = int(np.sum(after > zeta * before + LEMMA_TOL))
    positive = before > 0
    max_ratio = float(np.max(after[positive] / before[positive])) if np.any(positive) else 0.0
    branches = {
        "minorization": 1.0 - constants.eta + beta * constants.K,
        "lyapunov": (2.0 + beta * (constants.gamma * constants.R + 2.0 * constants.K)) / (2.0 + beta * constants.R),
    }
    if violations:
        logger.warning(f"finite-chain check: {violations}/{trials} pairs exceed zeta={zeta:.6g}")
    return LemmaReport(zeta=zeta, branches=branches, max_ratio=max_ratio, violations=violations,
                       trials=trials, classes=len(chain.communicating_classes()))


@dataclass
class TelescopingReport:
    """Measured multi-step ratio against the product of per-step factors"""
    product: float
    max_ratio: float
    steps: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.product + TELESCOPING_TOL


def telescoping_check(steps: Sequence[Tuple[FiniteChain, ChainConstants]], beta: float,
                      trials: int = 1000, rng: Optional[np.random.Generator] = None) -> TelescopingReport:
    """Push random pairs through a sequence of kernels sharing one V."""
    if not steps:
        raise ArgumentError("telescoping check needs at least one kernel")
    V = np.asarray(steps[0][0].V)
    product = 1.0
    for chain, constants in steps:
        if not np.array_equal(np.asarray(chain.V), V):
            raise ArgumentError("all kernels of a telescoping sequence must share the Lyapunov vector")
        _check_hypotheses(chain, constants, beta)
        product *= one_step_zeta(constants.gamma, constants.K, constants.eta, constants.R, beta)

    rng = rng if rng is not None else np.random.default_rng(0)
    mu1 = rng.dirichlet(np.ones(len(V)), size=trials)
    mu2 = rng.dirichlet(np.ones(len(V)), size=trials)
    before = weighted_distance(mu1, mu2, V, beta)
    for chain, _ in steps:
        mu1, mu2 = mu1 @ chain.P, mu2 @ chain.P
    after = weighted_distance(mu1, mu2, V, beta)
    positive = before > 0
    return TelescopingReport(product=product, max_ratio=float(np.max(after[positive] / before[positive])),
                             steps=len(steps))


# -------------------------------
# Partitions
# -------------------------------

@dataclass(frozen=True)
class ScheduleEntry:
    """Constants of one partition interval [t_lower, t_upper]"""
    t_upper: float
    t_lower: float
    gamma: float
    K: float
    eta: float

    def __post_init__(self):
        if self.t_lower > self.t_upper:
            raise ArgumentError(f"interval endpoints out of order: [{self.t_lower}, {self.t_upper}]")
        if self.gamma < 0 or self.K < 0:
            raise ArgumentError(f"gamma and K must be nonnegative on [{self.t_lower}, {self.t_upper}]")
        if not 0 <= self.eta < 1:
            raise ArgumentError(f"eta must lie in [0, 1), got {self.eta}")

    def zeta(self, R: float, beta: float) -> float:
        return one_step_zeta(self.gamma, self.K, self.eta, R, beta)


@dataclass
class PartitionAnalysis:
    """Counts and averages of a well-controlled partition sampled over a finite horizon"""
    gamma: float
    K: float
    delta: float
    times: np.ndarray
    members: np.ndarray
    counts: np.ndarray
    averages: np.ndarray
    subsequence: List[int]
    liminf_fraction: float
    infimum_fraction: float
    limsup_average: float

    @property
    def length(self) -> int:
        return len(self.members)

    def indices(self, n: int) -> List[int]:
        """A_n^δ as 1-based interval indices."""
        return [i + 1 for i in np.nonzero(self.members[:n])[0]]


def _tail(values: Sequence[float]) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[len(values) // 2:]


def analyze_partition(schedule: Sequence[ScheduleEntry], delta: float,
                      subsequence: Optional[Sequence[int]] = None) -> PartitionAnalysis:
    """
    Maxima γ, K, the sets A_n^δ and their running counts and γ-averages.

    Limits are sampled over the second half of the subsequence (default: all
    n = 1..N), which is only an estimate of the asymptotic values.

    Raises:
        ArgumentError: for an empty or non-contiguous schedule
    """
    if not schedule:
        raise ArgumentError("partition schedule is empty")
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    for prev, entry in zip(schedule[:-1], schedule[1:]):
        if abs(entry.t_upper - prev.t_lower) > 1e-9 * max(1.0, abs(prev.t_lower)):
            raise ArgumentError(f"schedule is not a decreasing partition at t={prev.t_lower:g}")

    gammas = np.array([e.gamma for e in schedule])
    members = np.array([e.eta >= delta for e in schedule])
    counts = np.cumsum(members)
    sums = np.cumsum(np.where(members, gammas, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        averages = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    N = len(schedule)
    subsequence = list(range(1, N + 1)) if subsequence is None else sorted(int(n) for n in subsequence)
    if not subsequence or subsequence[0] < 1 or subsequence[-1] > N:
        raise ArgumentError(f"subsequence must be indices in 1..{N}")
    n_k = np.asarray(subsequence)
    fractions = counts[n_k - 1] / n_k
    sampled_averages = averages[n_k - 1]
    tail_averages = _tail(sampled_averages)
    limsup = float(np.nanmax(tail_averages)) if np.any(np.isfinite(tail_averages)) else math.inf

    times = np.array([schedule[0].t_upper] + [e.t_lower for e in schedule])
    logger.warning(f"partition limits sampled over {N} intervals down to t={times[-1]:g}; "
                   f"asymptotic conditions are not verified")
    return PartitionAnalysis(gamma=float(gammas.max()), K=float(max(e.K for e in schedule)), delta=delta,
                             times=times, members=members, counts=counts, averages=averages,
                             subsequence=subsequence, liminf_fraction=float(np.min(_tail(fractions))),
                             infimum_fraction=float(np.min(counts / np.arange(1, N + 1))),
                             limsup_average=limsup)


@dataclass
class ConditionReport:
    """The four contraction conditions evaluated on a sampled partition"""
    checks: Dict[str, CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> List[str]:
        return [name for name, c in self.checks.items() if not c.passed]


def varpi_threshold(gamma: float, K: float, R: float, gamma_star: float) -> float:
    excess = max(gamma - 1.0, 0.0) * R
    return (excess + 2.0 * K) / (excess + (1.0 - gamma_star) * R)


def check_theorem_conditions(a: PartitionAnalysis, R: float, varpi: float,
                             gamma_star: float) -> ConditionReport:
    """
    γ* < 1 − 2K/R, ϖ above its threshold, the sampled lim inf of n^δ/n
    above ϖ and the sampled lim sup of γ̄ at most γ*.
    """
    bound = 1.0 - 2.0 * a.K / R
    threshold = varpi_threshold(a.gamma, a.K, R, gamma_star)
    checks = {
        "gamma_star": CheckResult("gamma_star", gamma_star < bound, max(gamma_star - bound, 0.0),
                                  f"γ*={gamma_star:.6g} < 1−2K/R={bound:.6g}"),
        "varpi": CheckResult("varpi", varpi > threshold, max(threshold - varpi, 0.0),
                             f"ϖ={varpi:.6g} > {threshold:.6g}"),
        "fraction": CheckResult("fraction", a.liminf_fraction > varpi, max(varpi - a.liminf_fraction, 0.0),
                                f"sampled lim inf n^δ/n = {a.liminf_fraction:.6g} > ϖ"),
        "average": CheckResult("average", a.limsup_average <= gamma_star, max(a.limsup_average - gamma_star, 0.0),
                               f"sampled lim sup γ̄ = {a.limsup_average:.6g} ≤ γ*"),
    }
    report = ConditionReport(checks)
    if not report.passed:
        logger.info(f"contraction conditions fail: {', '.join(report.failures())}")
    return report


# -------------------------------
# Constant selection
# -------------------------------

@dataclass
class BetaSelection:
    """β minimizing φ(x) = (1+c₁x)^{1−ϖ}(1−c₂x)^ϖ on (0, β₂]"""
    beta: float
    r: float
    c1: float
    c2: float
    beta1: float
    beta2: float
    slope: float


def select_beta(gamma: float, K: float, R: float, delta: float, varpi: float,
                gamma_star: float) -> BetaSelection:
    """
    Select β, r and the constants c₁, c₂.

    Raises:
        PreconditionError: if ϖ ∉ (0, 1), γ* ≥ 1 − 2K/R or ϖ is below its threshold
        NumericError: if φ does not drop below 1
    """
    if not 0.0 < varpi < 1.0:
        raise PreconditionError("0 < varpi < 1", f"varpi={varpi:g}")
    if not gamma_star < 1.0 - 2.0 * K / R:
        raise PreconditionError("gamma* < 1 - 2K/R", f"gamma*={gamma_star:g}, K={K:g}, R={R:g}")
    threshold = varpi_threshold(gamma, K, R, gamma_star)
    if not varpi > threshold:
        raise PreconditionError("varpi > ((gamma-1)^+ R + 2K)/((gamma-1)^+ R + (1-gamma*) R)",
                                f"varpi={varpi:g}, threshold={threshold:g}")

    beta1 = min(delta / (2.0 * K) if K > 0 else math.inf, 2.0 * delta / (R * (2.0 - delta)))
    c1 = (max(gamma - 1.0, 0.0) * R + 2.0 * K) / 2.0
    margin = (1.0 - gamma_star) * R - 2.0 * K
    if c1 == 0:
        beta2 = beta1
    else:
        critical = (varpi * margin / (c1 * (1.0 - varpi)) - 2.0) / R
        beta2 = min(beta1, critical * (1.0 - 1e-9))
    c2 = margin / (2.0 + beta2 * R)

    def phi(x: float) -> float:
        return (1.0 + c1 * x) ** (1.0 - varpi) * (1.0 - c2 * x) ** varpi

    result = optimize.minimize_scalar(phi, bounds=(0.0, beta2), method="bounded",
                                      options={"xatol": beta2 * 1e-10})
    beta, r = float(result.x), float(result.fun)
    if phi(beta2) <= r:
        beta, r = beta2, phi(beta2)
    if not r < 1.0:
        raise NumericError(f"no contraction found on (0, {beta2:g}]: min φ = {r!r}", module="contraction")
    return BetaSelection(beta=beta, r=r, c1=c1, c2=c2, beta1=beta1, beta2=beta2,
                         slope=(1.0 - varpi) * c1 - varpi * c2)


@dataclass
class ContractionCertificate:
    """Constants certifying ρ_β contraction along a partition"""
    selection: BetaSelection
    analysis: PartitionAnalysis
    conditions: ConditionReport
    R: float
    varpi: float
    gamma_star: float

    @property
    def beta(self) -> float:
        return self.selection.beta

    @property
    def r(self) -> float:
        return self.selection.r

    def to_dict(self) -> Dict[str, float]:
        s = self.selection
        return {"beta": s.beta, "r": s.r, "c1": s.c1, "c2": s.c2, "beta1": s.beta1, "beta2": s.beta2,
                "phi_slope": s.slope, "R": self.R, "varpi": self.varpi, "gamma_star": self.gamma_star,
                "delta": self.analysis.delta, "gamma": self.analysis.gamma, "K": self.analysis.K,
                "liminf_fraction": self.analysis.liminf_fraction,
                "limsup_average": self.analysis.limsup_average}


def certify(schedule: Sequence[ScheduleEntry], delta: float, R: float, varpi: float = 0.5,
            gamma_star: Optional[float] = None,
            subsequence: Optional[Sequence[int]] = None) -> ContractionCertificate:
    """
    Analyze a schedule, check the conditions and select β.

    ``gamma_star`` defaults to the sampled lim sup of γ̄.

    Raises:
        PreconditionError: if any condition fails
    """
    analysis = analyze_partition(schedule, delta, subsequence)
    if gamma_star is None:
        gamma_star = analysis.limsup_average
    conditions = check_theorem_conditions(analysis, R, varpi, gamma_star)
    if not conditions.passed:
        raise PreconditionError(", ".join(conditions.failures()),
                                "; ".join(conditions.checks[n].detail for n in conditions.failures()))
    selection = select_beta(analysis.gamma, analysis.K, R, delta, varpi, gamma_star)
    logger.info(f"certificate: beta={selection.beta:.6g}, r={selection.r:.9g} over {analysis.length} intervals")
    return ContractionCertificate(selection, analysis, conditions, R, varpi, gamma_star)


def _start_index(times: np.ndarray, t: float) -> int:
    hits = np.nonzero(t >= times - 1e-12)[0]
    return int(hits[0])


def ct_constant(cert: ContractionCertificate, schedule: Sequence[ScheduleEntry], t: float,
                partial: Optional[ScheduleEntry] = None) -> float:
    """
    ζ_β(t, t_{i₀})·(1 + c₁β)^{n_{k₀} − i₀}·r^{−n_{k₀}}.

    i₀ is the smallest index with t ≥ t_{i₀}; k₀ the first subsequence
    index from which on the fraction and average conditions hold for the
    intervals after i₀. ``partial`` carries the constants of [t_{i₀}, t];
    without it the containing interval's constants are used, and t above
    the partition needs it.

    Raises:
        ArgumentError: if t lies below the partition or above it without ``partial``
        PreconditionError: if the conditions are not reached within the horizon
    """
    a = cert.analysis
    times = a.times
    if t < times[-1] - 1e-12:
        raise ArgumentError(f"t={t:g} lies below the schedule horizon {times[-1]:g}")
    i0 = _start_index(times, t)
    beta, r, c1 = cert.selection.beta, cert.selection.r, cert.selection.c1

    if partial is not None:
        zeta = partial.zeta(cert.R, beta)
    elif abs(t - times[i0]) <= 1e-12:
        zeta = 1.0
    elif i0 == 0:
        raise ArgumentError(f"t={t:g} lies above the partition start {times[0]:g}; pass the partial interval")
    else:
        zeta = schedule[i0 - 1].zeta(cert.R, beta)

    members = a.members.copy()
    members[:i0] = False
    counts = np.cumsum(members)
    gammas = np.array([e.gamma for e in schedule])
    sums = np.cumsum(np.where(members, gammas, 0.0))
    candidates = [n for n in a.subsequence if n > i0]
    ok = [counts[n - 1] >= cert.varpi * n and counts[n - 1] > 0
          and sums[n - 1] / counts[n - 1] <= cert.gamma_star + 1e-15 for n in candidates]
    if not candidates or not ok[-1]:
        raise PreconditionError("n^delta(t) >= varpi n and mean gamma <= gamma*",
                                f"not reached within {a.length} intervals for t={t:g}")
    k0 = len(ok) - 1
    while k0 > 0 and ok[k0 - 1]:
        k0 -= 1
    n_k0 = candidates[k0]
    return zeta * (1.0 + c1 * beta) ** (n_k0 - i0) * r ** (-n_k0)


def entrance_error_bound(cert: ContractionCertificate, schedule: Sequence[ScheduleEntry], t: float,
                         V_x: float, V_x0: float, ell: float, n_k: int,
                         partial: Optional[ScheduleEntry] = None) -> float:
    """C_t(1 + V(x) + V(x₀) + ℓ)·r^{n_k}."""
    return ct_constant(cert, schedule, t, partial) * (1.0 + V_x + V_x0 + ell) * cert.r ** n_k


# -------------------------------
# Uniform-window certificate
# -------------------------------

@dataclass
class UniformCertificate:
    """Geometric rate from constants uniform over windows of length Δ"""
    beta: float
    zeta: float
    zeta0: float
    rate: float
    C: float


def uniform_certificate(delta_t: float, gamma: float, h: float, eta: float, R: float) -> UniformCertificate:
    """
    β = η/(2h), ζ for one window, λ = −ln ζ/Δ and C = ζ₀/ζ.

    Raises:
        PreconditionError: naming the failed window inequality
    """
    if not gamma < 1:
        raise PreconditionError("gamma_Delta < 1", f"gamma={gamma:g}")
    if not h > 0:
        raise PreconditionError("h(Delta) > 0", f"h={h:g}")
    if not R > 2.0 * h / (1.0 - gamma):
        raise PreconditionError("R > 2 h(Delta)/(1 - gamma_Delta)", f"R={R:g}, bound={2 * h / (1 - gamma):g}")
    if not 0 < eta < 1:
        raise PreconditionError("0 < eta_Delta < 1", f"eta={eta:g}")
    beta = eta / (2.0 * h)
    zeta = one_step_zeta(gamma, h, eta, R, beta)
    if not zeta < 1:
        raise NumericError(f"window factor {zeta!r} is not a contraction", module="contraction")
    zeta0 = max(1.0 + beta * h, (2.0 + beta * h * (2.0 + R)) / (2.0 + beta * R))
    return UniformCertificate(beta=beta, zeta=zeta, zeta0=zeta0, rate=-math.log(zeta) / delta_t, C=zeta0 / zeta)


# -------------------------------
# Rate fitting
# -------------------------------

@dataclass
class RateFit:
    """Stretched-exponential fit ρ ≈ A·exp(−λ·Δt^α)"""
    alpha: float
    rate: float
    prefactor: float
    residual: float
    points: int


def fit_rate(points: Sequence[Tuple[float, float]], exponents: np.ndarray = DEFAULT_EXPONENTS,
             log_values: bool = False) -> RateFit:
    """
    Least-squares fit of log ρ = c − λ·Δt^α for every α of the grid.

    Args:
        points: pairs (Δt, ρ), or (Δt, log ρ) when ``log_values`` is set
        exponents: candidate α values
        log_values: the second coordinate is already a logarithm

    Returns:
        RateFit for the α with the smallest residual

    Raises:
        ArgumentError: with fewer than 5 usable points
    """
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    dt, values = data[:, 0], data[:, 1]
    if log_values:
        keep = np.isfinite(values) & (dt > 0)
        logs = values[keep]
    else:
        keep = (values > 0) & (dt > 0)
        dropped = int(np.sum(values <= 0))
        if dropped:
            logger.warning(f"fit_rate: dropping {dropped} point(s) with nonpositive distance")
        logs = np.log(values[keep])
    dt = dt[keep]
    if len(dt) < 5:
        raise ArgumentError(f"fit_rate needs at least 5 usable points, got {len(dt)}")

    best = None
    for alpha in np.asarray(exponents, dtype=float):
        design = np.column_stack([np.ones_like(dt), -dt ** alpha])
        coef, _, _, _ = np.linalg.lstsq(design, logs, rcond=None)
        residual = float(np.sum((design @ coef - logs) ** 2))
        if best is None or residual < best.residual:
            best = RateFit(alpha=float(alpha), rate=float(coef[1]), prefactor=float(np.exp(coef[0])),
                           residual=residual, points=len(dt))
    return best


# -------------------------------
# Schedules
# -------------------------------

def window_constants(c: CoefficientSet, t_upper: float, t_lower: float, eta: float = 0.0) -> ScheduleEntry:
    """γ = e^{2∫α} and K = ∫e^{2∫α}(2Λ + dΓ₁) of the moment bound on [t_lower, t_upper]."""
    env = c.envelope
    kinks = env.breakpoints(t_lower, t_upper)
    gamma = math.exp(2.0 * env.integral(t_lower, t_upper))
    K = discounted_integral(env.alpha, lambda u: 2.0 * env.lam(u) + c.dimension * c.gamma1,
                            t_lower, t_upper, breakpoints=kinks)
    return ScheduleEntry(t_upper=t_upper, t_lower=t_lower, gamma=gamma, K=K, eta=eta)


EXPANDING_DELTA = math.pi ** 2 / 3.0
EXPANDING_K = 10.0


def expanding_partition_schedule(k_max: int = 6, eta: float = 0.01,
                                 computed: bool = False) -> List[ScheduleEntry]:
    """
    Partition of [T_{k_max+1}, T_1] for the sin⁺(√|t|) double well.

    Block k consists of 4k + 1 intervals of length Δ = π²/3 starting at T_k,
    each with minorization η, followed by one long interval down to T_{k+1}
    with η = 0. With ``computed`` the constants come from the moment bound;
    otherwise the uniform bounds γ = e^{−14Δ} and K = 10 are used.
    """
    if k_max < 1:
        raise ArgumentError(f"k_max must be at least 1, got {k_max}")
    c = sin_sqrt_double_well() if computed else None
    bound_gamma = math.exp(-14.0 * EXPANDING_DELTA)
    entries: List[ScheduleEntry] = []

    def add(upper: float, lower: float, eta_value: float):
        if computed:
            entries.append(window_constants(c, upper, lower, eta_value))
        else:
            entries.append(ScheduleEntry(upper, lower, bound_gamma, EXPANDING_K, eta_value))

    for k in range(1, k_max + 1):
        _, T_k = expanding_interval_times(k)
        _, T_next = expanding_interval_times(k + 1)
        for j in range(4 * k + 1):
            add(T_k - j * EXPANDING_DELTA, T_k - (j + 1) * EXPANDING_DELTA, eta)
        add(T_k - (4 * k + 1) * EXPANDING_DELTA, T_next, 0.0)
    return entries


def expanding_threshold_R() -> float:
    """R must exceed 40/(1 − e^{−14Δ})."""
    return 40.0 / (1.0 - math.exp(-14.0 * EXPANDING_DELTA))


SCHEDULE_COLUMNS = ("t_upper", "t_lower", "gamma", "K", "eta")


def write_schedule_csv(schedule: Sequence[ScheduleEntry], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SCHEDULE_COLUMNS)
        for e in schedule:
            writer.writerow([repr(float(getattr(e, col))) for col in SCHEDULE_COLUMNS])
    return path


def read_schedule_csv(path: Union[str, Path]) -> List[ScheduleEntry]:
    """
    Read a schedule written by write_schedule_csv.

    Raises:
        ConfigurationError: on missing columns or unparsable rows, with the line number
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [col for col in SCHEDULE_COLUMNS if col not in (reader.fieldnames or [])]
        if missing:
            raise ConfigurationError(f"schedule {path} is missing columns {missing}", field="schedule", line=1)
        entries = []
        for line, row in enumerate(reader, start=2):
            try:
                entries.append(ScheduleEntry(*(float(row[col]) for col in SCHEDULE_COLUMNS)))
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"schedule {path}: bad row: {e}", field="schedule", line=line)
    return entries
