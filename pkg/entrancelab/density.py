"""
Transition densities of one-dimensional SDEs.

Tools in this module:
- Flow: the deterministic flow θ_{t,τ}(ξ) of dθ = b(t, θ)dt by fixed-step RK4
- FrozenGaussianProxy: the Gaussian with mean x + ∫b along the flow and
  covariance ∫σσᵀ along the flow
- parametrix_iterate: proxy plus one or two Duhamel corrections
- FokkerPlanckSolver: implicit finite-volume solver of the forward equation
- lower-bound formula, its calibration, numerical minorization constants and
  the two-point density comparison
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special

from .coefficients import CoefficientSet
from .errors import (ArgumentError, DegeneracyError, NumericError, SimulationBlowUp,
                     UnsupportedError)
from .measures import GridMeasure
from .quadrature import cell_grid, gauss_legendre

logger = logging.getLogger(__name__)

FLOW_SUBSTEP = 1e-3
FLOW_BLOWUP = 1e8
PROXY_CELL = 0.01
JACOBI_NODES = 16
NEGATIVE_CLIP = -1e-10
LEAK_WARNING = 1e-3


# -------------------------------
# Deterministic flow
# -------------------------------

class Flow:
    """θ_{t,τ}(ξ), integrated forward or backward in time from (τ, ξ)"""

    def __init__(self, c: CoefficientSet, tau: float, xi: Sequence[float], substep: float = FLOW_SUBSTEP):
        if substep <= 0:
            raise ArgumentError(f"flow substep must be positive, got {substep}")
        self.c = c
        self.tau = float(tau)
        self.xi = np.broadcast_to(np.asarray(xi, dtype=float), (c.dimension,)).copy()
        self.substep = substep

    def _rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.c.drift(t, x[None, :])[0]

    def _integrate(self, t0: float, x: np.ndarray, t1: float) -> np.ndarray:
        if t1 == t0:
            return x
        n = int(math.ceil(abs(t1 - t0) / self.substep - 1e-12))
        h = (t1 - t0) / n
        for k in range(n):
            t = t0 + k * h
            k1 = self._rhs(t, x)
            k2 = self._rhs(t + h / 2, x + h / 2 * k1)
            k3 = self._rhs(t + h / 2, x + h / 2 * k2)
            k4 = self._rhs(t + h, x + h * k3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.abs(x) <= FLOW_BLOWUP):
                raise SimulationBlowUp(time=t + h, block=0, threshold=FLOW_BLOWUP)
        return x

    def at(self, t: float) -> np.ndarray:
        return self._integrate(self.tau, self.xi, float(t))

    def at_times(self, times: Sequence[float]) -> np.ndarray:
        """Flow at many times, integrating outward from τ once in each direction."""
        times = np.asarray(times, dtype=float)
        out = np.empty((len(times), self.c.dimension))
        order = np.argsort(times)
        forward = [i for i in order if times[i] >= self.tau]
        backward = [i for i in order[::-1] if times[i] < self.tau]
        for chain in (forward, backward):
            t, x = self.tau, self.xi
            for i in chain:
                x = self._integrate(t, x, times[i])
                t = times[i]
                out[i] = x
        return out

    def integrals(self, times: Sequence[float], step: float = PROXY_CELL) -> Tuple[np.ndarray, np.ndarray]:
        """
        ∫_τ^u b(r, θ_r) dr and ∫_τ^u σσᵀ(r, θ_r) dr for every u in ``times``.

        Gauss-Legendre cells are aligned with all requested times, so
        differences between two requested times are additive.
        """
        times = np.asarray(times, dtype=float)
        lo, hi = min(times.min(), self.tau), max(times.max(), self.tau)
        d = self.c.dimension
        if hi == lo:
            return np.zeros((len(times), d)), np.zeros((len(times), d, d))
        kinks = self.c.envelope.breakpoints(lo, hi)
        edges = cell_grid(lo, hi, step, list(times) + [self.tau] + kinks)
        nodes, weights = gauss_legendre(8)
        half = 0.5 * np.diff(edges)
        points = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * nodes
        states = self.at_times(points.ravel())
        drift = np.empty((points.size, d))
        cov = np.empty((points.size, d, d))
        for i, (r, x) in enumerate(zip(points.ravel(), states)):
            drift[i] = self.c.drift(r, x[None, :])[0]
            cov[i] = self.c.covariance(r, x[None, :])[0]
        w = (weights[None, :] * half[:, None]).ravel()
        cell_drift = np.add.reduceat(drift * w[:, None], np.arange(0, points.size, 8), axis=0)
        cell_cov = np.add.reduceat(cov * w[:, None, None], np.arange(0, points.size, 8), axis=0)
        running_b = np.concatenate([np.zeros((1, d)), np.cumsum(cell_drift, axis=0)])
        running_a = np.concatenate([np.zeros((1, d, d)), np.cumsum(cell_cov, axis=0)])
        index = np.searchsorted(edges, times)
        origin = np.searchsorted(edges, self.tau)
        return running_b[index] - running_b[origin], running_a[index] - running_a[origin]


def flow_solve(c: CoefficientSet, tau: float, xi: Sequence[float], t: float,
               substep: float = FLOW_SUBSTEP) -> np.ndarray:
    """
    θ_{t,τ}(ξ) by classical RK4 with a fixed substep; t < τ runs backward.

    Raises:
        SimulationBlowUp: if |θ| exceeds 1e8, with the blow-up time
    """
    return Flow(c, tau, xi, substep).at(t)


def flow_bound(c: CoefficientSet, T: float) -> float:
    """√2·e^{g(T)+T}·√(g(T)+T), a bound on |θ_{r,s}(0)| for |r − s| ≤ T."""
    g = float(c.envelope.g(T))
    return math.sqrt(2.0) * math.exp(g + T) * math.sqrt(g + T)


# -------------------------------
# Frozen Gaussian proxy
# -------------------------------

def _gaussian(y: np.ndarray, mean: np.ndarray, var: float) -> np.ndarray:
    return np.exp(-0.5 * (y - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


@dataclass
class FrozenGaussianProxy:
    """N(x + ϑ, Σ) with ϑ and Σ integrated along the flow through (τ, ξ)"""
    tau: float
    xi: np.ndarray
    s: float
    t: float
    shift: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        eig = np.linalg.eigvalsh(self.covariance)
        if eig[0] <= 1e-14:
            raise DegeneracyError(f"frozen covariance is singular on [{self.s:g}, {self.t:g}] "
                                  f"(smallest eigenvalue {eig[0]:.3g}): diffusion degenerates on this interval")

    def density(self, x: Sequence[float], y: np.ndarray) -> np.ndarray:
        """Proxy density at states y of shape (..., d)."""
        y = np.asarray(y, dtype=float)
        d = len(self.shift)
        if d == 1 and y.ndim <= 1:
            return _gaussian(y, float(np.ravel(x)[0]) + self.shift[0], self.covariance[0, 0])
        mean = np.asarray(x, dtype=float) + self.shift
        inv = np.linalg.inv(self.covariance)
        delta = y - mean
        quad = np.einsum("...i,ij,...j->...", delta, inv, delta)
        norm = math.sqrt((2 * math.pi) ** d * np.linalg.det(self.covariance))
        return np.exp(-0.5 * quad) / norm


def frozen_proxy(c: CoefficientSet, s: float, t: float, tau: Optional[float] = None,
                 xi: Optional[Sequence[float]] = None) -> FrozenGaussianProxy:
    """Proxy on [s, t] frozen along the flow through (τ, ξ), default (s, 0)."""
    if not s < t:
        raise ArgumentError(f"frozen proxy needs s < t, got s={s}, t={t}")
    tau = s if tau is None else tau
    xi = np.zeros(c.dimension) if xi is None else xi
    flow = Flow(c, tau, xi)
    B, A = flow.integrals([s, t])
    return FrozenGaussianProxy(tau=tau, xi=flow.xi, s=s, t=t, shift=B[1] - B[0], covariance=A[1] - A[0])


def frozen_density(c: CoefficientSet, tau: float, xi: Sequence[float], s: float, t: float,
                   x: Sequence[float], y: np.ndarray) -> np.ndarray:
    """Value of the frozen Gaussian proxy p̃(t, s, x, y)."""
    return frozen_proxy(c, s, t, tau, xi).density(x, y)


# -------------------------------
# Parametrix
# -------------------------------

def jacobi_rule(a: float, b: float, order: int = JACOBI_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ∫_a^b f(r) dr with f ~ (b − r)^{−1/2} near b."""
    u, w = special.roots_jacobi(order, -0.5, 0.0)
    nodes = a + (b - a) * (1.0 + u) / 2.0
    weights = (b - a) / 2.0 * w * np.sqrt(1.0 - u)
    return nodes, weights


class _ParametrixKernel:
    def __init__(self, c: CoefficientSet, s: float, times: Sequence[float], tau: float, xi):
        self.c = c
        flow = Flow(c, tau, xi)
        self.times = np.asarray(sorted(set(float(v) for v in times)))
        B, A = flow.integrals(self.times)
        self.B = dict(zip(self.times, B[:, 0]))
        self.A = dict(zip(self.times, A[:, 0, 0]))
        self.theta = dict(zip(self.times, flow.at_times(self.times)[:, 0]))

    def moments(self, lo: float, hi: float) -> Tuple[float, float]:
        var = self.A[hi] - self.A[lo]
        if var <= 1e-14:
            raise DegeneracyError(f"frozen variance vanishes on [{lo:g}, {hi:g}]")
        return self.B[hi] - self.B[lo], var

    def proxy(self, lo: float, hi: float, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        shift, var = self.moments(lo, hi)
        return _gaussian(y, z + shift, var)

    def proxy_gradient(self, lo: float, hi: float, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        """∂_z p̃(hi, lo, z, y) for z of shape (n, 1) and y of shape (1, m)."""
        shift, var = self.moments(lo, hi)
        return _gaussian(y, z + shift, var) * (y - z - shift) / var

    def drift_gap(self, r: float, z: np.ndarray) -> np.ndarray:
        """b(r, z) − b(r, θ_r)."""
        b = self.c.drift(r, z[:, None])[:, 0]
        return b - self.c.drift(r, np.array([[self.theta[r]]]))[0, 0]


def parametrix_iterate(c: CoefficientSet, s: float, t: float, x: float, y, order: int = 1,
                       tau: Optional[float] = None, xi: Optional[float] = None,
                       dz: float = 0.005) -> np.ndarray:
    """
    Proxy density plus ``order`` Duhamel corrections.

    The corrections are the time-space convolutions ∫∫ G_j(r, z)H(t, r, z, y)
    with G_0 = p̃(·, s, x, ·) and H = (b(r, z) − b(r, θ_r))·∂_z p̃(t, r, z, y),
    computed with 16-node Gauss-Jacobi rules in time and the trapezoid rule
    on a uniform z grid of spacing ``dz``.

    Raises:
        UnsupportedError: for d ≠ 1 or order > 2
    """
    if c.dimension != 1:
        raise UnsupportedError("parametrix iteration is implemented for d = 1 only")
    if not 0 <= order <= 2:
        raise UnsupportedError(f"parametrix order must be 0, 1 or 2, got {order}")
    if not s < t:
        raise ArgumentError(f"parametrix needs s < t, got s={s}, t={t}")
    tau = s if tau is None else tau
    xi = 0.0 if xi is None else xi
    y = np.atleast_1d(np.asarray(y, dtype=float))

    outer, outer_w = jacobi_rule(s, t)
    inner = [jacobi_rule(s, r) for r in outer] if order == 2 else []
    times = [s, t, *outer] + [v for nodes, _ in inner for v in nodes]
    kernel = _ParametrixKernel(c, s, times, tau, xi)

    shift, var = kernel.moments(s, t)
    half_width = 6.0 * math.sqrt(var) + 0.5
    z = np.arange(min(x, x + shift) - half_width, max(x, x + shift) + half_width + dz / 2, dz)
    zw = np.full(len(z), dz)
    zw[[0, -1]] = dz / 2

    def correction(upper: float, targets: np.ndarray, rule, previous) -> np.ndarray:
        nodes, weights = rule
        total = np.zeros(len(targets))
        for k, (r, w) in enumerate(zip(nodes, weights)):
            g = previous(k, r)
            source = zw * g * kernel.drift_gap(r, z)
            total += w * (source @ kernel.proxy_gradient(r, upper, z[:, None], targets[None, :]))
        return total

    base = kernel.proxy(s, t, np.array([x]), y)
    result = base.copy()
    if order >= 1:
        first = lambda k, r: kernel.proxy(s, r, np.array([x]), z)
        result += correction(t, y, (outer, outer_w), first)
    if order == 2:
        def second_source(k, r):
            return correction(r, z, inner[k], lambda j, q: kernel.proxy(s, q, np.array([x]), z))
        result += correction(t, y, (outer, outer_w), second_source)
    return result


# -------------------------------
# Fokker-Planck solver
# -------------------------------

@dataclass
class FPGrid:
    """Cells, time step and boundary condition of the forward-equation solver"""
    lower: float
    upper: float
    resolution: int
    dt: float = 1e-3
    boundary: str = "reflecting"

    def validate(self) -> List[str]:
        errors = []
        if not self.upper > self.lower:
            errors.append(f"box [{self.lower}, {self.upper}] is empty")
        if self.resolution < 3:
            errors.append(f"resolution must be at least 3, got {self.resolution}")
        if self.dt <= 0:
            errors.append(f"dt must be positive, got {self.dt}")
        if self.boundary not in ("reflecting", "absorbing"):
            errors.append(f"boundary must be reflecting or absorbing, got {self.boundary}")
        return errors

    @property
    def h(self) -> float:
        return (self.upper - self.lower) / self.resolution

    def centers(self) -> np.ndarray:
        return self.lower + (np.arange(self.resolution) + 0.5) * self.h

    def interfaces(self) -> np.ndarray:
        return self.lower + np.arange(self.resolution + 1) * self.h

    @classmethod
    def with_spacing(cls, lower: float, upper: float, spacing: float = 0.01, **kwargs) -> "FPGrid":
        return cls(lower=lower, upper=upper, resolution=int(round((upper - lower) / spacing)), **kwargs)


@dataclass
class FPSolution:
    """Density of p(t, s, x₀, ·) with solver diagnostics"""
    measure: GridMeasure
    mass_deficit: float
    max_step_drift: float
    cfl: float
    peclet: float

    @property
    def densities(self) -> np.ndarray:
        return self.measure.densities


class FokkerPlanckSolver:
    """
    Implicit-Euler finite-volume solver of ∂_t p = −∂_y(b*p − ½a∂_y p)
    with b* = b − ½∂_y a and central interface fluxes.
    """

    def __init__(self, grid: FPGrid):
        errors = grid.validate()
        if errors:
            raise ArgumentError(f"Invalid FP grid: {', '.join(errors)}")
        self.grid = grid
        self._setup_logging()

    def _setup_logging(self):
        """Setup logging for forward-equation solves"""
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def initial_density(self, x0: float) -> np.ndarray:
        """Point mass at x0 as a hat on the two nearest cell centers."""
        grid = self.grid
        centers = grid.centers()
        p = np.zeros(grid.resolution)
        position = (x0 - centers[0]) / grid.h
        if position <= 0:
            p[0] = 1.0
        elif position >= grid.resolution - 1:
            p[-1] = 1.0
        else:
            j = int(math.floor(position))
            frac = position - j
            p[j], p[j + 1] = 1.0 - frac, frac
        return p / grid.h

    def _operator(self, c: CoefficientSet, t: float) -> Tuple[np.ndarray, float, float]:
        grid = self.grid
        h = grid.h
        faces = grid.interfaces()[:, None]
        centers = grid.centers()[:, None]
        a_faces = c.covariance(t, faces)[:, 0, 0]
        a_centers = c.covariance(t, centers)[:, 0, 0]
        if np.min(a_faces) < 1e-12:
            raise DegeneracyError(f"diffusion vanishes at t={t:g} on the FP grid")
        grad_a = np.empty(len(a_faces))
        grad_a[1:-1] = np.diff(a_centers) / h
        grad_a[0], grad_a[-1] = grad_a[1], grad_a[-2]
        b_star = c.drift(t, faces)[:, 0] - 0.5 * grad_a
        # flux through face k: alpha_k·p_left + beta_k·p_right
        alpha = 0.5 * b_star + 0.5 * a_faces / h
        beta = 0.5 * b_star - 0.5 * a_faces / h
        if grid.boundary == "reflecting":
            alpha[0] = beta[0] = alpha[-1] = beta[-1] = 0.0
        n = grid.resolution
        main = (-alpha[1:] + beta[:-1]) / h
        upper = -beta[1:n] / h
        lower = alpha[1:n] / h
        peclet = float(np.max(np.abs(b_star) * h / a_faces))
        banded = np.zeros((3, n))
        banded[0, 1:] = upper
        banded[1, :] = main
        banded[2, :-1] = lower
        return banded, peclet, float(np.max(np.abs(b_star)))

    def solve(self, c: CoefficientSet, s: float, x0: float, t: float,
              initial: Optional[GridMeasure] = None) -> FPSolution:
        """
        Density of X_t given X_s = x0, or given X_s ~ ``initial``.

        Raises:
            UnsupportedError: for d ≠ 1
            DegeneracyError: if the diffusion vanishes on the grid
            NumericError: if a cell mass drops below −1e-10
        """
        if c.dimension != 1:
            raise UnsupportedError("the Fokker-Planck solver is one-dimensional")
        if not t > s:
            raise ArgumentError(f"FP solve needs s < t, got s={s}, t={t}")
        grid = self.grid
        h = grid.h
        if initial is not None:
            if initial.shape != (grid.resolution,) or not np.isclose(initial.lower[0], grid.lower):
                raise ArgumentError("initial measure must live on the solver grid")
            p = initial.masses.ravel() / h
        else:
            p = self.initial_density(x0)

        n = int(math.ceil((t - s) / grid.dt - 1e-12))
        dt = (t - s) / n
        max_drift = peclet = speed = 0.0
        mass = p.sum() * h
        for k in range(1, n + 1):
            banded, pe, sp = self._operator(c, s + k * dt)
            peclet, speed = max(peclet, pe), max(speed, sp)
            system = -dt * banded
            system[1] += 1.0
            p = linalg.solve_banded((1, 1), system, p)
            if p.min() < NEGATIVE_CLIP / h:
                raise NumericError(f"negative density {p.min() * h:.3g} at t={s + k * dt:g}; "
                                   f"reduce the time step or refine the grid", module="density")
            p = np.maximum(p, 0.0)
            new_mass = p.sum() * h
            max_drift = max(max_drift, abs(new_mass - mass))
            mass = new_mass

        masses = p * h
        total = masses.sum()
        base_leak = 0.0 if initial is None else initial.leak
        deficit = 1.0 - base_leak - total
        if total > 1.0 - base_leak:
            masses = masses * (1.0 - base_leak) / total
            deficit = 0.0
        if deficit > LEAK_WARNING:
            self.logger.warning(f"FP box [{grid.lower:g}, {grid.upper:g}] lost mass {deficit:.3g}")
        if peclet > 1.0:
            self.logger.debug(f"cell Péclet number {peclet:.3g} exceeds 1")
        measure = GridMeasure(lower=(grid.lower,), upper=(grid.upper,), shape=(grid.resolution,),
                              masses=masses, leak=max(deficit, 0.0) + base_leak)
        return FPSolution(measure=measure, mass_deficit=deficit, max_step_drift=max_drift,
                          cfl=speed * dt / h, peclet=peclet)


def fp_solve(c: CoefficientSet, s: float, x0: float, t: float, grid: FPGrid,
             initial: Optional[GridMeasure] = None) -> FPSolution:
    """Solve the forward equation from δ_{x0} (or ``initial``) at s to t."""
    return FokkerPlanckSolver(grid).solve(c, s, x0, t, initial)


# -------------------------------
# Lower bound formula
# -------------------------------

@dataclass(frozen=True)
class LowerBoundParams:
    """Constants η₁, η₂, η₃ of the Gaussian-type lower bound"""
    eta1: float
    eta2: float
    eta3: float
    d: int = 1
    kappa: float = 1.0
    provenance: str = "user-supplied"

    def __post_init__(self):
        if min(self.eta1, self.eta2, self.eta3) <= 0:
            raise ArgumentError(f"lower-bound constants must be positive: {self.eta1}, {self.eta2}, {self.eta3}")
        if self.provenance not in ("calibrated", "user-supplied"):
            raise ArgumentError(f"unknown provenance '{self.provenance}'")


def _log_shape(p: LowerBoundParams, dt: float, x, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    gap = np.abs(x - y)
    return (-0.5 * p.d * math.log(dt)
            - p.eta2 * (1.0 + np.abs(x) ** (2 * (p.d + 1) * p.kappa)) * (1.0 + gap ** (2 * p.kappa))
            - p.eta3 / dt * (1.0 + gap ** 2))


def lower_bound_eval(p: LowerBoundParams, dt: float, x, y) -> np.ndarray:
    """η₁Δt^{−d/2}exp{−η₂(1+|x|^{2(d+1)κ})(1+|x−y|^{2κ}) − η₃Δt^{−1}(1+|x−y|²)}."""
    if dt <= 0:
        raise ArgumentError(f"lower bound needs dt > 0, got {dt}")
    return p.eta1 * np.exp(_log_shape(p, dt, x, y))


ETA2_GRID = tuple(10.0 ** k for k in range(-8, 1))
ETA3_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

DensityFunction = Callable[[float, np.ndarray], np.ndarray]


def _fp_density(c: CoefficientSet, s: float, dt: float, grid: FPGrid) -> DensityFunction:
    solver = FokkerPlanckSolver(grid)

    def density(x: float, ys: np.ndarray) -> np.ndarray:
        solution = solver.solve(c, s, x, s + dt)
        return np.interp(ys, grid.centers(), solution.densities)
    return density


def calibrate_lower_bound(c: CoefficientSet, dt: float, x_range: Tuple[float, float],
                          y_range: Tuple[float, float], density: Optional[DensityFunction] = None,
                          s: float = 0.0, margin: float = 0.1, x_points: int = 13,
                          y_points: int = 21, grid: Optional[FPGrid] = None) -> LowerBoundParams:
    """
    Fit η₁, η₂, η₃ so the formula under-bounds the density on the sampled ranges.

    For each (η₂, η₃) on a coarse grid, η₁ = (1 − margin)·min(p/shape).
    Candidates whose binding sample lies strictly inside the ranges are
    preferred, then the one with the largest mean log bound wins.

    Args:
        density: p(x, ys) for start x at time s; defaults to FP solves

    Raises:
        DegeneracyError: if the density vanishes on the sampled range
    """
    xs = np.linspace(*x_range, x_points)
    ys = np.linspace(*y_range, y_points)
    if density is None:
        if grid is None:
            lo, hi = min(x_range[0], y_range[0]) - 2.0, max(x_range[1], y_range[1]) + 2.0
            grid = FPGrid.with_spacing(lo, hi)
        density = _fp_density(c, s, dt, grid)
    values = np.array([density(x, ys) for x in xs])
    if np.min(values) <= 0:
        raise DegeneracyError(f"density touches zero on x in {x_range}, y in {y_range}")
    log_p = np.log(values)
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    best, best_interior = None, None
    for eta2 in ETA2_GRID:
        for eta3 in ETA3_GRID:
            trial = LowerBoundParams(1.0, eta2, eta3, c.dimension, c.kappa)
            ratio = log_p - _log_shape(trial, dt, X, Y)
            i, j = np.unravel_index(np.argmin(ratio), ratio.shape)
            log_eta1 = float(ratio[i, j]) + math.log(1.0 - margin)
            score = log_eta1 + float(np.mean(_log_shape(trial, dt, X, Y)))
            candidate = (score, eta2, eta3, log_eta1)
            if best is None or score > best[0]:
                best = candidate
            if 0 < i < x_points - 1 and 0 < j < y_points - 1:
                if best_interior is None or score > best_interior[0]:
                    best_interior = candidate
    if best_interior is None:
        logger.warning("lower-bound calibration: every candidate binds on the range boundary")
        best_interior = best
    _, eta2, eta3, log_eta1 = best_interior
    params = LowerBoundParams(math.exp(log_eta1), eta2, eta3, c.dimension, c.kappa, "calibrated")
    logger.info(f"calibrated lower bound for {c.name} at dt={dt:g}: "
                f"eta1={params.eta1:.4g}, eta2={eta2:g}, eta3={eta3:g}")
    return params


# -------------------------------
# Minorization
# -------------------------------

@dataclass
class Minorization:
    """Numerical local Doeblin constant η with ν uniform on [−ρ_B, ρ_B]"""
    eta: float
    radius: float
    min_density: float
    starts: np.ndarray
    minima: np.ndarray

    @property
    def certified(self) -> bool:
        return self.eta > 0

    def describe_nu(self) -> str:
        return f"uniform on [{-self.radius:g}, {self.radius:g}]"


def minorization(c: CoefficientSet, s: float, t: float, R: float, radius: float = 1.0,
                 grid: Optional[FPGrid] = None, x_points: int = 25, spacing: Optional[float] = None,
                 max_workers: int = 1) -> Minorization:
    """
    η = 2ρ_B·min over starts x with |x|² ≤ R of min_{|y| ≤ ρ_B} p(t, s, x, y).

    Starts lie on a grid of at most ``x_points`` points (or multiples of
    ``spacing``) in [−√R, √R]; each FP solve runs as a separate job.

    Raises:
        DegeneracyError: if the diffusion vanishes somewhere on [s, t]
    """
    if c.dimension != 1:
        raise UnsupportedError("minorization sweeps are one-dimensional")
    if R <= 0 or radius <= 0:
        raise ArgumentError(f"minorization needs R > 0 and radius > 0, got R={R}, radius={radius}")
    reach = math.sqrt(R)
    probe = np.linspace(-reach - radius, reach + radius, 41)[:, None]
    for r in np.linspace(s, t, 51):
        if np.min(c.covariance(r, probe)[:, 0, 0]) < 1e-12:
            raise DegeneracyError(f"diffusion of {c.name} degenerates at t={r:g} on [{s:g}, {t:g}]")

    if spacing is None:
        starts = np.linspace(-reach, reach, x_points)
    else:
        count = int(math.floor(reach / spacing + 1e-9))
        starts = spacing * np.arange(-count, count + 1)
        if len(starts) > x_points:
            raise ArgumentError(f"spacing {spacing} gives {len(starts)} starts, more than {x_points}")
    if grid is None:
        grid = FPGrid.with_spacing(-reach - 2.0, reach + 2.0)
    solver = FokkerPlanckSolver(grid)
    window = np.abs(grid.centers()) <= radius

    def run(x: float) -> float:
        return float(np.min(solver.solve(c, s, x, t).densities[window]))

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            minima = np.array(list(pool.map(run, starts)))
    else:
        minima = np.array([run(x) for x in starts])
    lowest = float(minima.min())
    logger.info(f"minorization of {c.name} on [{s:g}, {t:g}], R={R:g}: eta={2 * radius * lowest:.4g}")
    return Minorization(eta=2.0 * radius * lowest, radius=radius, min_density=lowest,
                        starts=starts, minima=minima)


# -------------------------------
# Two-point comparison
# -------------------------------

def _two_point_exponent(s: float, r: float, t: float, y0, y, kappa: float) -> np.ndarray:
    gap = np.abs(np.asarray(y, dtype=float) - np.asarray(y0, dtype=float))
    return 1.0 + (t - r) / (r - s) * (1.0 + gap ** (2 * kappa)) + gap ** 2 / (t - r)


def two_point_check(density_r, density_t, K: float, kappa: float, s: float, r: float, t: float,
                    y0, y) -> bool:
    """
    p(t, s, x, y) ≥ p(r, s, x, y₀)·exp{−𝒦(1 + ((t−r)/(r−s))(1+|y−y₀|^{2κ}) + |y−y₀|²/(t−r))}
    at every supplied pair.
    """
    if not s < r < t:
        raise ArgumentError(f"two-point check needs s < r < t, got {s}, {r}, {t}")
    exponent = _two_point_exponent(s, r, t, y0, y, kappa)
    return bool(np.all(np.asarray(density_t) >= np.asarray(density_r) * np.exp(-K * exponent)))


def calibrate_two_point_constant(pairs: Sequence[Dict[str, float]], kappa: float = 1.0,
                                 margin: float = 0.1) -> float:
    """
    Smallest 𝒦 ≥ 0 satisfying the two-point inequality on training pairs,
    enlarged by ``margin``.

    Each pair carries keys density_r, density_t, s, r, t, y0, y.
    """
    if not pairs:
        raise ArgumentError("two-point calibration needs at least one pair")
    needed = 0.0
    for pair in pairs:
        if pair["density_r"] <= 0 or pair["density_t"] <= 0:
            raise DegeneracyError("two-point calibration needs positive densities")
        exponent = float(_two_point_exponent(pair["s"], pair["r"], pair["t"], pair["y0"], pair["y"], kappa))
        needed = max(needed, (math.log(pair["density_r"]) - math.log(pair["density_t"])) / exponent)
    return needed * (1.0 + margin)
