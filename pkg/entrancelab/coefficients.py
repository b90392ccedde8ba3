"""
Time-inhomogeneous SDE coefficients.

This module holds the coefficient model used throughout the lab:

- CoefficientSet: drift b(t, x), diffusion σ(t, x) and the growth and
  dissipation metadata (Γ₁, Γ₂, κ and the envelope α_t, Λ_t, g)
- DissipationEnvelope with a cached integral of α
- QuasiPeriodicParent: the two-time parent functions of a quasi-periodic SDE
- truncation, mollification and time-change reparameterization
- numerical screening of the standing assumptions on a sampling grid

Evaluator conventions: ``drift(t, x)`` takes a scalar time and states of
shape (..., d) and returns (..., d); ``diffusion(t, x)`` returns (..., d, d).
Envelope functions are vectorized over time arrays.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, ConfigurationError, UnsupportedError
from .quadrature import cell_grid, cumulative_integral, gauss_legendre, integrate

logger = logging.getLogger(__name__)

Drift = Callable[[float, np.ndarray], np.ndarray]
Diffusion = Callable[[float, np.ndarray], np.ndarray]
TimeFunction = Callable[[np.ndarray], np.ndarray]
Kinks = Callable[[float, float], Sequence[float]]

ENVELOPE_TOL = 1e-9
CHECK_TOL = 1e-7


def positive_part(v):
    return np.maximum(v, 0.0)


def no_kinks(s: float, t: float) -> List[float]:
    return []


def periodic_kinks(period: float, offset: float = 0.0) -> Kinks:
    """Breakpoints offset + k·period falling inside (s, t)."""
    def kinks(s: float, t: float) -> List[float]:
        first = int(np.ceil((s - offset) / period))
        last = int(np.floor((t - offset) / period))
        return [offset + k * period for k in range(first, last + 1) if s < offset + k * period < t]
    return kinks


def merge_kinks(*sources: Kinks) -> Kinks:
    def kinks(s: float, t: float) -> List[float]:
        return sorted({p for source in sources for p in source(s, t)})
    return kinks


@dataclass(frozen=True)
class DissipationEnvelope:
    """Dissipation rate α_t, offset Λ_t ≥ 0 and dominating function g"""
    alpha: TimeFunction
    lam: TimeFunction
    g: Callable[[float], float]
    kinks: Kinks = no_kinks

    def breakpoints(self, s: float, t: float) -> List[float]:
        return list(self.kinks(s, t))

    def integral(self, s: float, t: float) -> float:
        """∫_s^t α_r dr by adaptive quadrature (cached)."""
        return _alpha_integral(self, float(s), float(t))

    def excess(self, s: float, t: float) -> float:
        """∫_s^t (α_r⁺ + Λ_r) dr, the quantity dominated by g(t − s)."""
        return integrate(lambda r: float(positive_part(self.alpha(r)) + self.lam(r)),
                         s, t, self.breakpoints(s, t), tol=ENVELOPE_TOL)


@lru_cache(maxsize=4096)
def _alpha_integral(env: DissipationEnvelope, s: float, t: float) -> float:
    return integrate(lambda r: float(env.alpha(r)), s, t, env.breakpoints(min(s, t), max(s, t)),
                     tol=ENVELOPE_TOL)


@dataclass(frozen=True)
class CoefficientSet:
    """Drift and diffusion of an SDE with growth and dissipation metadata"""
    dimension: int
    drift: Drift
    diffusion: Diffusion
    gamma1: float
    gamma2: float
    kappa: float
    envelope: DissipationEnvelope
    name: str = "custom"
    lipschitz: Optional[float] = None
    truncation: Optional[float] = None

    def __post_init__(self):
        errors = []
        if self.dimension not in (1, 2):
            errors.append(f"dimension must be 1 or 2, got {self.dimension}")
        if self.gamma1 < 1:
            errors.append(f"gamma1 must be >= 1, got {self.gamma1}")
        if self.gamma2 <= 0:
            errors.append(f"gamma2 must be > 0, got {self.gamma2}")
        if self.kappa < 1:
            errors.append(f"kappa must be >= 1, got {self.kappa}")
        if errors:
            raise ConfigurationError(f"Invalid coefficients '{self.name}': {', '.join(errors)}")

    def covariance(self, t: float, x: np.ndarray) -> np.ndarray:
        sigma = self.diffusion(t, x)
        return sigma @ np.swapaxes(sigma, -1, -2)


def scalar_coefficients(drift: Callable[[float, np.ndarray], np.ndarray],
                        diffusion: Callable[[float, np.ndarray], np.ndarray],
                        alpha: TimeFunction, lam: TimeFunction, g: Callable[[float], float],
                        gamma1: float = 1.0, gamma2: float = 1.0, kappa: float = 1.0,
                        name: str = "custom", kinks: Kinks = no_kinks,
                        lipschitz: Optional[float] = None) -> CoefficientSet:
    """
    Build a one-dimensional coefficient set from scalar evaluators.

    ``drift(t, x)`` and ``diffusion(t, x)`` receive x with the trailing
    coordinate axis removed and may return scalars for constant coefficients.
    """
    def drift_d(t: float, x: np.ndarray) -> np.ndarray:
        value = drift(t, x[..., 0])
        return np.broadcast_to(value, x.shape[:-1])[..., None].astype(float)

    def diffusion_d(t: float, x: np.ndarray) -> np.ndarray:
        value = diffusion(t, x[..., 0])
        return np.broadcast_to(value, x.shape[:-1])[..., None, None].astype(float)

    envelope = DissipationEnvelope(alpha=alpha, lam=lam, g=g, kinks=kinks)
    return CoefficientSet(dimension=1, drift=drift_d, diffusion=diffusion_d, gamma1=gamma1,
                          gamma2=gamma2, kappa=kappa, envelope=envelope, name=name,
                          lipschitz=lipschitz)


# -------------------------------
# Truncation and mollification
# -------------------------------

def truncate_drift(c: CoefficientSet, N: float) -> CoefficientSet:
    """
    Replace b by b_N(t, x) = b(t, (N/|x|)x) outside the ball of radius N.

    The envelope becomes α′ = α⁺ + Λ, Λ′ = Λ and g′ = 2g.
    """
    if N <= 0:
        raise ArgumentError(f"truncation radius must be positive, got {N}")
    base = c.drift
    env = c.envelope

    def drift(t: float, x: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        factor = np.where(norm > N, N / np.maximum(norm, 1e-300), 1.0)
        return base(t, x * factor)

    envelope = DissipationEnvelope(
        alpha=lambda t: positive_part(env.alpha(t)) + env.lam(t),
        lam=env.lam,
        g=lambda delta: 2.0 * env.g(delta),
        kinks=env.kinks,
    )
    return replace(c, drift=drift, envelope=envelope, truncation=N, name=f"{c.name}|N={N:g}")


@lru_cache(maxsize=8)
def bump_rule(dimension: int, nodes: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature points on the unit ball and normalized bump-kernel weights."""
    z, w = gauss_legendre(nodes)
    if dimension == 1:
        points = z[:, None]
        weights = w.copy()
    else:
        z1, z2 = np.meshgrid(z, z, indexing="ij")
        points = np.stack([z1.ravel(), z2.ravel()], axis=-1)
        weights = np.outer(w, w).ravel()
    r2 = (points ** 2).sum(axis=-1)
    inside = r2 < 1.0
    kernel = np.zeros_like(r2)
    kernel[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    weights = weights * kernel
    keep = weights > 0
    return points[keep], weights[keep] / weights[keep].sum()


def mollify(c: CoefficientSet, eps: float, nodes: int = 32) -> CoefficientSet:
    """
    Convolve drift and diffusion in x with the bump kernel ρ_ε.

    The convolution is a fixed tensor Gauss-Legendre rule on the unit ball
    (``nodes`` per axis) with weights normalized to one, so constants and
    linear maps are reproduced exactly.

    Raises:
        ArgumentError: if eps is outside (0, 1]
        UnsupportedError: for dimension > 2
    """
    if not 0 < eps <= 1:
        raise ArgumentError(f"mollification parameter must lie in (0, 1], got {eps}")
    if c.dimension > 2:
        raise UnsupportedError("mollification is implemented for d <= 2 only")
    if c.truncation is None and c.lipschitz is None:
        logger.warning(f"mollifying '{c.name}' without a declared global Lipschitz constant")

    points, weights = bump_rule(c.dimension, nodes)
    shifts = eps * points
    base_drift, base_diffusion = c.drift, c.diffusion
    env = c.envelope

    def drift(t: float, x: np.ndarray) -> np.ndarray:
        shifted = x[..., None, :] - shifts
        return np.einsum("...kd,k->...d", base_drift(t, shifted), weights)

    def diffusion(t: float, x: np.ndarray) -> np.ndarray:
        shifted = x[..., None, :] - shifts
        return np.einsum("...kij,k->...ij", base_diffusion(t, shifted), weights)

    envelope = DissipationEnvelope(
        alpha=lambda t: positive_part(env.alpha(t)) + env.lam(t) + 1.0,
        lam=lambda t: env.lam(t) + 1.0,
        g=lambda delta: 2.0 * env.g(delta) + 2.0 * delta,
        kinks=env.kinks,
    )
    return replace(c, drift=drift, diffusion=diffusion, envelope=envelope,
                   gamma2=c.gamma2 * 2.0 ** c.kappa, name=f"{c.name}|eps={eps:g}")


@dataclass
class MollificationReport:
    """Sampled distance between a coefficient set and its mollification"""
    eps: float
    drift_error: float
    drift_bound: Optional[float]
    diffusion_error: float
    diffusion_bound: float

    @property
    def passed(self) -> bool:
        drift_ok = self.drift_bound is None or self.drift_error <= self.drift_bound + CHECK_TOL
        return drift_ok and self.diffusion_error <= self.diffusion_bound + CHECK_TOL


def mollification_error(original: CoefficientSet, mollified: CoefficientSet, eps: float,
                        times: Sequence[float], states: np.ndarray) -> MollificationReport:
    """Compare |b^ε − b| with ℓ_N ε and ‖σ^ε − σ‖ with Γ₁ε on sampled points."""
    states = np.asarray(states, dtype=float).reshape(-1, original.dimension)
    drift_error = diffusion_error = 0.0
    for t in times:
        drift_error = max(drift_error, float(np.max(np.linalg.norm(
            mollified.drift(t, states) - original.drift(t, states), axis=-1))))
        diffusion_error = max(diffusion_error, float(np.max(np.linalg.norm(
            mollified.diffusion(t, states) - original.diffusion(t, states), ord=2, axis=(-2, -1)))))
    bound = None if original.lipschitz is None else original.lipschitz * eps
    return MollificationReport(eps=eps, drift_error=drift_error, drift_bound=bound,
                               diffusion_error=diffusion_error,
                               diffusion_bound=original.gamma1 * eps)


# -------------------------------
# Time change
# -------------------------------

@dataclass(frozen=True)
class TimeChange:
    """Strictly increasing time change φ with inverse and inverse derivative"""
    phi: TimeFunction
    inverse: TimeFunction
    inverse_derivative: TimeFunction
    name: str = "custom"

    def validate(self, times: np.ndarray) -> None:
        """
        Check monotonicity and the round trip φ(φ⁻¹(t)) = t on sampled times.

        Raises:
            ConfigurationError: naming the first failed property
        """
        times = np.sort(np.asarray(times, dtype=float))
        forward = self.phi(times)
        backward = self.inverse(times)
        if np.any(np.diff(forward) <= 0):
            raise ConfigurationError(f"time change '{self.name}' is not strictly increasing", field="time_change")
        if np.any(np.diff(backward) <= 0):
            raise ConfigurationError(f"inverse of time change '{self.name}' is not monotone", field="time_change")
        roundtrip = np.abs(self.phi(backward) - times)
        if np.any(roundtrip > 1e-8 * (1.0 + np.abs(times))):
            raise ConfigurationError(f"time change '{self.name}' does not invert on the sampled grid",
                                     field="time_change")


def identity_time_change() -> TimeChange:
    return TimeChange(phi=lambda t: np.asarray(t, dtype=float),
                      inverse=lambda t: np.asarray(t, dtype=float),
                      inverse_derivative=lambda t: np.ones_like(np.asarray(t, dtype=float)),
                      name="identity")


def power_time_change(p: float) -> TimeChange:
    """Odd power map φ(t) = sign(t)|t|^p for p > 0."""
    if p <= 0:
        raise ConfigurationError(f"power time change needs p > 0, got {p}", field="time_change")

    def derivative(t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            return (1.0 / p) * t ** (1.0 / p - 1.0)

    return TimeChange(phi=lambda t: np.sign(t) * np.abs(t) ** p,
                      inverse=lambda t: np.sign(t) * np.abs(t) ** (1.0 / p),
                      inverse_derivative=derivative,
                      name=f"power({p:g})")


def reparameterize(c: CoefficientSet, tc: TimeChange,
                   window: Tuple[float, float] = (-100.0, 100.0)) -> CoefficientSet:
    """
    Coefficients of Y_t = X_{φ⁻¹(t)}.

    Drift (φ⁻¹)′(t)·b(φ⁻¹(t), x), diffusion √((φ⁻¹)′(t))·σ(φ⁻¹(t), x) and
    α′_t = (φ⁻¹)′(t)·α_{φ⁻¹(t)}. Constants Γ₁, Γ₂ and the function g are
    re-derived on ``window``.
    """
    samples = np.linspace(window[0], window[1], 4001)
    tc.validate(samples)
    inv, dinv = tc.inverse, tc.inverse_derivative
    env = c.envelope
    base_drift, base_diffusion = c.drift, c.diffusion

    def drift(t: float, x: np.ndarray) -> np.ndarray:
        return float(dinv(t)) * base_drift(float(inv(t)), x)

    def diffusion(t: float, x: np.ndarray) -> np.ndarray:
        return np.sqrt(float(dinv(t))) * base_diffusion(float(inv(t)), x)

    inverse_samples = inv(samples)
    spacing = samples[1] - samples[0]

    def g(delta: float) -> float:
        lag = max(1, int(np.ceil(delta / spacing)))
        if lag >= len(samples):
            increment = inverse_samples[-1] - inverse_samples[0]
        else:
            increment = float(np.max(inverse_samples[lag:] - inverse_samples[:-lag]))
        return env.g(increment)

    def kinks(s: float, t: float) -> List[float]:
        return [float(tc.phi(p)) for p in env.kinks(float(inv(s)), float(inv(t)))]

    finite = np.isfinite(dinv(samples))
    scale = float(np.max(dinv(samples)[finite]))
    envelope = DissipationEnvelope(alpha=lambda t: dinv(t) * env.alpha(inv(t)),
                                   lam=lambda t: dinv(t) * env.lam(inv(t)),
                                   g=g, kinks=kinks)
    return replace(c, drift=drift, diffusion=diffusion, envelope=envelope,
                   gamma1=max(1.0, c.gamma1 * scale), gamma2=c.gamma2 * max(1.0, scale),
                   name=f"{c.name}|{tc.name}")


def dissipation_integral(env: DissipationEnvelope, s: float, t: float) -> float:
    """∫_s^t α_r dr with absolute tolerance 1e-9."""
    if s > t:
        raise ArgumentError(f"dissipation integral needs s <= t, got s={s}, t={t}")
    return env.integral(s, t)


# -------------------------------
# Assumption screening
# -------------------------------

@dataclass
class SamplingGrid:
    """Finite grid of times and states for assumption screening"""
    t_min: float
    t_max: float
    x_min: float
    x_max: float
    t_points: int = 201
    x_points: int = 101
    windows: Tuple[float, ...] = (0.5, 1.0, 2.0, 5.0)

    def times(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.t_points)

    def axis(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.x_points)

    def states(self, dimension: int) -> np.ndarray:
        if dimension == 1:
            return self.axis()[:, None]
        axis = np.linspace(self.x_min, self.x_max, min(self.x_points, 41))
        x1, x2 = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([x1.ravel(), x2.ravel()], axis=-1)


@dataclass
class CheckResult:
    """Outcome of one sampled inequality"""
    name: str
    passed: bool
    max_violation: float
    detail: str = ""
    intervals: List[Tuple[float, float]] = field(default_factory=list)


@dataclass
class AssumptionReport:
    """Screening results for the growth, nondegeneracy and dissipation assumptions"""
    coefficients: str
    checks: Dict[str, CheckResult]
    dissipation_average: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def failures(self) -> List[str]:
        return [name for name, check in self.checks.items() if not check.passed]


def _failing_intervals(times: np.ndarray, failing: np.ndarray) -> List[Tuple[float, float]]:
    intervals = []
    start = None
    for t, bad in zip(times, failing):
        if bad and start is None:
            start = t
        if not bad and start is not None:
            intervals.append((float(start), float(previous)))
            start = None
        previous = t
    if start is not None:
        intervals.append((float(start), float(times[-1])))
    return intervals


def verify_assumptions(c: CoefficientSet, grid: SamplingGrid) -> AssumptionReport:
    """
    Screen the standing assumptions of ``c`` on a finite grid.

    Violations are reported, never raised. The dissipation average is the
    largest (1/T)∫_{t_max−T}^{t_max} α over T in [H/2, H] with H the grid span.
    """
    times = grid.times()
    states = grid.states(c.dimension)
    env = c.envelope
    norms = np.linalg.norm(states, axis=-1)

    upper = growth = coercive = lipschitz = -np.inf
    lower_fail = np.zeros(len(times), dtype=bool)
    lower_gap = -np.inf
    axis = grid.axis()
    for i, t in enumerate(times):
        a = c.covariance(t, states)
        eig = np.linalg.eigvalsh(a)
        upper = max(upper, float(np.max(eig[..., -1] - c.gamma1)))
        gap = 1.0 / c.gamma1 - eig[..., 0]
        lower_gap = max(lower_gap, float(np.max(gap)))
        lower_fail[i] = np.any(gap > CHECK_TOL)

        b = c.drift(t, states)
        growth = max(growth, float(np.max(np.linalg.norm(b, axis=-1) - c.gamma2 * (1 + norms ** c.kappa))))
        inner = np.sum(states * b, axis=-1)
        coercive = max(coercive, float(np.max(inner - (env.alpha(t) * norms ** 2 + env.lam(t)))))

        for k in range(c.dimension):
            probe = np.zeros((len(axis), c.dimension))
            probe[:, k] = axis
            sigma = c.diffusion(t, probe)
            jumps = np.linalg.norm(np.diff(sigma, axis=0), ord=2, axis=(-2, -1))
            lipschitz = max(lipschitz, float(np.max(jumps / np.diff(axis) - c.gamma1)))

    checks = {
        "upper_nondegeneracy": CheckResult("upper_nondegeneracy", upper <= CHECK_TOL, max(upper, 0.0),
                                           f"max eigenvalue of σσᵀ minus Γ₁={c.gamma1:g}"),
        "sigma_lipschitz": CheckResult("sigma_lipschitz", lipschitz <= CHECK_TOL, max(lipschitz, 0.0)),
        "polynomial_growth": CheckResult("polynomial_growth", growth <= CHECK_TOL, max(growth, 0.0),
                                         f"|b| ≤ {c.gamma2:g}(1+|x|^{c.kappa:g})"),
        "coercivity": CheckResult("coercivity", coercive <= CHECK_TOL, max(coercive, 0.0),
                                  "⟨x,b⟩ ≤ α|x|²+Λ"),
    }
    intervals = _failing_intervals(times, lower_fail)
    checks["lower_nondegeneracy"] = CheckResult(
        "lower_nondegeneracy", not intervals, max(lower_gap, 0.0),
        f"min eigenvalue of σσᵀ ≥ 1/Γ₁ fails on {len(intervals)} interval(s)", intervals)

    worst = -np.inf
    for width in grid.windows:
        if width > grid.t_max - grid.t_min:
            continue
        for s in np.linspace(grid.t_min, grid.t_max - width, 20):
            worst = max(worst, env.excess(s, s + width) - env.g(width))
    checks["envelope_domination"] = CheckResult(
        "envelope_domination", worst <= CHECK_TOL * 10, max(worst, 0.0), "∫(α⁺+Λ) ≤ g(t−s)")

    span = grid.t_max - grid.t_min
    edges = cell_grid(grid.t_min, grid.t_max, min(0.01, span / 1000), env.breakpoints(grid.t_min, grid.t_max))
    running = cumulative_integral(env.alpha, edges)
    averages = []
    for T in np.linspace(span / 2, span, 11):
        start = int(np.searchsorted(edges, grid.t_max - T))
        averages.append((running[-1] - running[start]) / (edges[-1] - edges[start]))
    average = float(max(averages))
    checks["dissipation_average"] = CheckResult(
        "dissipation_average", average < 0, max(average, 0.0),
        f"sampled lim sup of the α average is {average:.6g}")
    if average < 0:
        logger.info(f"{c.name}: dissipation average {average:.4g} over horizon {span:g} (sampled, not asymptotic)")

    return AssumptionReport(coefficients=c.name, checks=checks, dissipation_average=average)


# -------------------------------
# Quasi-periodic parents
# -------------------------------

@dataclass(frozen=True)
class QuasiPeriodicParent:
    """Two-time parent coefficients b̃(t₁, t₂, x), σ̃(t₁, t₂, x), periodic in each time slot"""
    periods: Tuple[float, float]
    drift: Callable[[float, float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, float, np.ndarray], np.ndarray]
    alpha: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lam: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[float], float]
    dimension: int = 1
    gamma1: float = 1.0
    gamma2: float = 1.0
    kappa: float = 1.0
    name: str = "parent"
    kinks: Callable[[float, float, float, float], Sequence[float]] = lambda s, t, r1, r2: []

    def at(self, r1: float, r2: float) -> CoefficientSet:
        """Coefficients of K^{r₁,r₂}: v ↦ b̃(v + r₁, v + r₂, ·)."""
        parent = self
        envelope = DissipationEnvelope(alpha=lambda v: parent.alpha(v + r1, v + r2),
                                       lam=lambda v: parent.lam(v + r1, v + r2),
                                       g=parent.g,
                                       kinks=lambda s, t: parent.kinks(s, t, r1, r2))
        return CoefficientSet(dimension=self.dimension,
                              drift=lambda v, x: parent.drift(v + r1, v + r2, x),
                              diffusion=lambda v, x: parent.diffusion(v + r1, v + r2, x),
                              gamma1=self.gamma1, gamma2=self.gamma2, kappa=self.kappa,
                              envelope=envelope, name=f"{self.name}@({r1:.4g},{r2:.4g})")

    def diagonal(self) -> CoefficientSet:
        return self.at(0.0, 0.0)

    def check_periodicity(self, grid: SamplingGrid) -> CheckResult:
        """Sampled check of b̃, σ̃, α̃, Λ̃ under a shift by one period in either slot."""
        states = grid.states(self.dimension)
        tau1, tau2 = self.periods
        worst = 0.0
        for t1 in np.linspace(0.0, tau1, 13):
            for t2 in np.linspace(0.0, tau2, 13):
                for s1, s2 in ((tau1, 0.0), (0.0, tau2)):
                    worst = max(worst,
                                float(np.max(np.abs(self.drift(t1 + s1, t2 + s2, states) - self.drift(t1, t2, states)))),
                                float(np.max(np.abs(self.diffusion(t1 + s1, t2 + s2, states) - self.diffusion(t1, t2, states)))),
                                abs(float(self.alpha(t1 + s1, t2 + s2) - self.alpha(t1, t2))),
                                abs(float(self.lam(t1 + s1, t2 + s2) - self.lam(t1, t2))))
        return CheckResult("parent_periodicity", worst <= 1e-9, worst)

    def check_diagonal(self, base: CoefficientSet, grid: SamplingGrid) -> CheckResult:
        """Sampled check of b̃(t, t, x) = b(t, x) and σ̃(t, t, x) = σ(t, x)."""
        states = grid.states(self.dimension)
        worst = 0.0
        for t in grid.times():
            worst = max(worst,
                        float(np.max(np.abs(self.drift(t, t, states) - base.drift(t, states)))),
                        float(np.max(np.abs(self.diffusion(t, t, states) - base.diffusion(t, states)))))
        return CheckResult("parent_diagonal", worst <= 1e-9, worst)


def torus_average_dissipation(parent: QuasiPeriodicParent) -> float:
    """∫₀^{τ₁}∫₀^{τ₂} α̃ dt₁ dt₂ by an 8-node Gauss-Legendre product rule on 64 cells per axis."""
    tau1, tau2 = parent.periods
    nodes, weights = gauss_legendre(8)
    cells = 64
    u1 = ((np.arange(cells)[:, None] + 0.5 + 0.5 * nodes[None, :]) * tau1 / cells).ravel()
    u2 = ((np.arange(cells)[:, None] + 0.5 + 0.5 * nodes[None, :]) * tau2 / cells).ravel()
    w1 = np.tile(weights, cells) * tau1 / (2 * cells)
    w2 = np.tile(weights, cells) * tau2 / (2 * cells)
    t1, t2 = np.meshgrid(u1, u2, indexing="ij")
    values = np.broadcast_to(parent.alpha(t1, t2), t1.shape)
    return float(w1 @ values @ w2)
