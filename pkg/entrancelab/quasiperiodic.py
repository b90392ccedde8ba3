"""
Quasi-periodic SDEs lifted to the cylinder torus × ℝ^d.

A quasi-periodic SDE is the diagonal of a two-time parent b̃(t₁, t₂, x),
periodic with period τ_i in slot i. The reparameterized process
K^{r₁,r₂} runs the SDE with coefficients b̃(v + r₁, v + r₂, ·); paired
with the rotation (r₁, r₂) ↦ (r₁ + t, r₂ + t) mod (τ₁, τ₂) it becomes a
time-homogeneous Markov process on the cylinder whose invariant measure
averages δ_{r₁} × δ_{r₂} × μ̃_{r₁,r₂} over the torus.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .coefficients import QuasiPeriodicParent, torus_average_dissipation
from .config import MeasureSettings
from .errors import ArgumentError, ConvergenceError, PreconditionError
from .measures import GridMeasure, LyapunovSpec, density_estimate, rho_beta
from .simulator import Ensemble, EnsembleRunner, PointMass, SimConfig, simulate_path

logger = logging.getLogger(__name__)

MAX_BURN_DOUBLINGS = 4

CylinderFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


# -------------------------------
# Torus
# -------------------------------

@dataclass(frozen=True)
class TorusPoint:
    """(r₁, r₂) reduced modulo the periods"""
    r1: float
    r2: float
    periods: Tuple[float, float]

    def __post_init__(self):
        tau1, tau2 = self.periods
        if tau1 <= 0 or tau2 <= 0:
            raise ArgumentError(f"torus periods must be positive, got {self.periods}")
        object.__setattr__(self, "r1", float(self.r1) % tau1)
        object.__setattr__(self, "r2", float(self.r2) % tau2)


def torus_rotate(p: TorusPoint, t: float) -> TorusPoint:
    """T_t(r₁, r₂) = (r₁ + t mod τ₁, r₂ + t mod τ₂)."""
    return TorusPoint(p.r1 + t, p.r2 + t, p.periods)


def _circle_distance(a: float, b: float, period: float) -> float:
    gap = abs(a - b) % period
    return min(gap, period - gap)


def torus_distance(p: TorusPoint, q: TorusPoint) -> float:
    """d₀(p, q) = Σ_i min(|r_i − r_i′|, τ_i − |r_i − r_i′|)."""
    if p.periods != q.periods:
        raise ArgumentError(f"points live on different tori: {p.periods} vs {q.periods}")
    return _circle_distance(p.r1, q.r1, p.periods[0]) + _circle_distance(p.r2, q.r2, p.periods[1])


def orbit_cell_counts(start: TorusPoint, step: float, count: int, shape: Tuple[int, int]) -> np.ndarray:
    """Visits of the orbit start, T_step(start), … to each cell of a torus grid."""
    tau1, tau2 = start.periods
    t = step * np.arange(count)
    i = np.floor(((start.r1 + t) % tau1) / tau1 * shape[0]).astype(int) % shape[0]
    j = np.floor(((start.r2 + t) % tau2) / tau2 * shape[1]).astype(int) % shape[1]
    counts = np.zeros(shape, dtype=int)
    np.add.at(counts, (i, j), 1)
    return counts


# -------------------------------
# K^{r₁,r₂} and μ̃
# -------------------------------

def k_simulate(parent: QuasiPeriodicParent, r1: float, r2: float, s: float, x, t: float,
               cfg: SimConfig, stream: int = 0) -> Ensemble:
    """Samples of K^{r₁,r₂}(t, s, x) under the coefficients b̃(v + r₁, v + r₂, ·)."""
    init = x if hasattr(x, "sample") else PointMass(tuple(np.atleast_1d(np.asarray(x, dtype=float))))
    return EnsembleRunner(cfg).push(parent.at(r1, r2), s, init, t, stream)


def screen_torus_dissipation(parent: QuasiPeriodicParent) -> float:
    """
    Torus average of α̃; must be negative.

    Raises:
        PreconditionError: if the average is nonnegative
    """
    average = torus_average_dissipation(parent) / (parent.periods[0] * parent.periods[1])
    if average >= 0:
        raise PreconditionError("torus average of alpha < 0", f"average {average:.4g} for {parent.name}")
    return average


def mu_tilde(parent: QuasiPeriodicParent, r1: float, r2: float, burn: float, cfg: SimConfig,
             grid: Optional[MeasureSettings] = None, spec: Optional[LyapunovSpec] = None,
             stream: int = 0, cell: Optional[tuple] = None) -> GridMeasure:
    """
    Law of K^{r₁,r₂}(0, −burn, 0), with the burn-in doubled until two
    consecutive estimates are ρ_β-close.

    Raises:
        PreconditionError: if the torus-average dissipation is not negative
        ConvergenceError: if the burn-in doubling is exhausted
    """
    if burn <= 0:
        raise ArgumentError(f"burn-in must be positive, got {burn}")
    screen_torus_dissipation(parent)
    grid = grid or MeasureSettings()
    spec = spec or grid.lyapunov()
    runner = EnsembleRunner(replace(cfg, max_workers=1))
    c = parent.at(r1, r2)
    origin = PointMass((0.0,) * parent.dimension)

    def estimate(length: float, k: int) -> GridMeasure:
        samples = runner.push(c, -length, origin, 0.0, stream=stream * (MAX_BURN_DOUBLINGS + 2) + k).samples
        return density_estimate(samples, grid.lower, grid.upper, grid.resolution)

    previous = estimate(burn, 0)
    distance = math.inf
    for k in range(1, MAX_BURN_DOUBLINGS + 1):
        burn *= 2
        current = estimate(burn, k)
        distance = rho_beta(previous, current, spec)
        if distance < grid.tolerance:
            return current
        previous = current
    raise ConvergenceError(f"mu_tilde at ({r1:.4g}, {r2:.4g}) not Cauchy after burn-in {burn:g}: "
                           f"rho_beta {distance:.4g} >= {grid.tolerance}", cell=cell)


# -------------------------------
# Cylinder measures
# -------------------------------

@dataclass
class CylinderMeasure:
    """Torus cell weights times one spatial GridMeasure per torus cell"""
    periods: Tuple[float, float]
    weights: np.ndarray
    cells: List[GridMeasure]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.cells) != self.weights.size:
            raise ArgumentError(f"{len(self.cells)} spatial measures for {self.weights.size} torus cells")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ArgumentError(f"torus weights sum to {self.weights.sum()!r}, expected 1")
        if not all(m.same_grid(self.cells[0]) for m in self.cells):
            raise ArgumentError("spatial measures must share one grid")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.weights.shape

    def torus_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.shape
        return ((np.arange(n1) + 0.5) * self.periods[0] / n1,
                (np.arange(n2) + 0.5) * self.periods[1] / n2)

    def cell(self, i: int, j: int) -> GridMeasure:
        return self.cells[i * self.shape[1] + j]

    def spatial_marginal(self) -> GridMeasure:
        w = self.weights.ravel()
        first = self.cells[0]
        masses = sum(wk * m.masses for wk, m in zip(w, self.cells))
        leak = float(sum(wk * m.leak for wk, m in zip(w, self.cells)))
        return GridMeasure(lower=first.lower, upper=first.upper, shape=first.shape, masses=masses, leak=leak)

    def torus_marginal(self) -> np.ndarray:
        return self.weights.copy()

    def expectation(self, f: CylinderFunction) -> float:
        """∫ f(r₁, r₂, x) over the cylinder, with x at spatial cell centers."""
        c1, c2 = self.torus_centers()
        x = self.cells[0].centers()
        total = 0.0
        for i, r1 in enumerate(c1):
            for j, r2 in enumerate(c2):
                values = f(np.full(len(x), r1), np.full(len(x), r2), x[:, 0] if x.shape[1] == 1 else x)
                total += self.weights[i, j] * float(np.dot(values, self.cell(i, j).masses.ravel()))
        return total

    def interpolate(self, r1: float, r2: float) -> GridMeasure:
        """Periodic bilinear mixture of the four cells around (r₁, r₂)."""
        n1, n2 = self.shape
        u = (r1 % self.periods[0]) / self.periods[0] * n1 - 0.5
        v = (r2 % self.periods[1]) / self.periods[1] * n2 - 0.5
        i0, j0 = int(math.floor(u)), int(math.floor(v))
        a, b = u - i0, v - j0
        parts = [((i0, j0), (1 - a) * (1 - b)), ((i0 + 1, j0), a * (1 - b)),
                 ((i0, j0 + 1), (1 - a) * b), ((i0 + 1, j0 + 1), a * b)]
        first = self.cells[0]
        masses = sum(w * self.cell(i % n1, j % n2).masses for (i, j), w in parts)
        leak = sum(w * self.cell(i % n1, j % n2).leak for (i, j), w in parts)
        return GridMeasure(lower=first.lower, upper=first.upper, shape=first.shape,
                           masses=masses, leak=float(leak))


@dataclass(frozen=True)
class CellLaw:
    """Initial law uniform inside the cells of a GridMeasure; leaked mass is dropped"""
    measure: GridMeasure

    @property
    def law_id(self) -> str:
        return f"cells{list(self.measure.shape)}"

    def sample(self, rng: np.random.Generator, n: int, dimension: int) -> np.ndarray:
        m = self.measure
        p = m.masses.ravel() / m.masses.sum()
        index = rng.choice(p.size, size=n, p=p)
        corner = np.asarray(m.lower) + np.stack(np.unravel_index(index, m.shape), axis=-1) * m.widths
        return corner + rng.random((n, dimension)) * m.widths

    def scale(self) -> float:
        return float(max(np.max(np.abs(self.measure.lower)), np.max(np.abs(self.measure.upper))))


class CylinderBuilder:
    """Estimates μ̃ at every torus cell center; each cell is an independent job."""

    def __init__(self, parent: QuasiPeriodicParent, cfg: SimConfig,
                 grid: Optional[MeasureSettings] = None, spec: Optional[LyapunovSpec] = None):
        if parent.dimension != 1:
            raise ArgumentError("cylinder measures are built for one-dimensional parents")
        self.parent = parent
        self.cfg = cfg
        self.grid = grid or MeasureSettings()
        self.spec = spec or self.grid.lyapunov()
        self._setup_logging()

    def _setup_logging(self):
        """Setup logging for cylinder assembly"""
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def build(self, shape: Tuple[int, int] = (16, 16), burn: float = 8.0) -> CylinderMeasure:
        screen_torus_dissipation(self.parent)
        n1, n2 = shape
        tau1, tau2 = self.parent.periods
        jobs = [(i, j) for i in range(n1) for j in range(n2)]
        self.logger.info(f"building cylinder measure for {self.parent.name} on a {n1}x{n2} torus grid")

        def run(job):
            i, j = job
            return mu_tilde(self.parent, (i + 0.5) * tau1 / n1, (j + 0.5) * tau2 / n2, burn, self.cfg,
                            self.grid, self.spec, stream=i * n2 + j, cell=(i, j))

        if self.cfg.max_workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.max_workers) as pool:
                cells = list(pool.map(run, jobs))
        else:
            cells = [run(job) for job in jobs]
        return CylinderMeasure(periods=self.parent.periods, weights=np.full(shape, 1.0 / (n1 * n2)),
                               cells=cells)


def cylinder_invariant(parent: QuasiPeriodicParent, shape: Tuple[int, int], cfg: SimConfig,
                       grid: Optional[MeasureSettings] = None, spec: Optional[LyapunovSpec] = None,
                       burn: float = 8.0) -> CylinderMeasure:
    """
    Invariant measure of the cylinder lift with uniform torus weights
    (midpoint rule for the torus average of δ × δ × μ̃).

    Raises:
        ConvergenceError: carrying the cell id of the first cell whose μ̃ fails
    """
    return CylinderBuilder(parent, cfg, grid, spec).build(shape, burn)


def push_cylinder(parent: QuasiPeriodicParent, cylinder: CylinderMeasure, t: float,
                  cfg: SimConfig, grid: Optional[MeasureSettings] = None) -> CylinderMeasure:
    """
    Push a cylinder measure by the lift for time t.

    The spatial measure arriving at cell center c comes from the rotated
    source point c − t, interpolated between cells and pushed by
    K^{c−t}(t, 0, ·).
    """
    if t < 0:
        raise ArgumentError(f"push time must be nonnegative, got {t}")
    grid = grid or MeasureSettings()
    c1, c2 = cylinder.torus_centers()
    n1, n2 = cylinder.shape
    runner = EnsembleRunner(cfg)
    cells = []
    for i, r1 in enumerate(c1):
        for j, r2 in enumerate(c2):
            source = TorusPoint(r1 - t, r2 - t, cylinder.periods)
            law = CellLaw(cylinder.interpolate(source.r1, source.r2))
            samples = runner.push(parent.at(source.r1, source.r2), 0.0, law, t, stream=i * n2 + j).samples
            cells.append(density_estimate(samples, grid.lower, grid.upper, grid.resolution))
    return CylinderMeasure(periods=cylinder.periods, weights=cylinder.weights, cells=cells)


def cylinder_total_variation(a: CylinderMeasure, b: CylinderMeasure) -> float:
    """Half-sum total variation between two cylinder measures on the same grids."""
    if a.shape != b.shape or a.periods != b.periods:
        raise ArgumentError("cylinder measures live on different torus grids")
    total = 0.0
    for wa, wb, ma, mb in zip(a.weights.ravel(), b.weights.ravel(), a.cells, b.cells):
        if not ma.same_grid(mb):
            raise ArgumentError("cylinder measures use different spatial grids")
        total += float(np.abs(wa * ma.masses - wb * mb.masses).sum()) + abs(wa * ma.leak - wb * mb.leak)
    return 0.5 * total


def write_cylinder_csv(cylinder: CylinderMeasure, path: Union[str, Path]) -> Path:
    """Rows (r1_cell, r2_cell, x_cell, mass) with the product mass of each cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n1, n2 = cylinder.shape
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["r1_cell", "r2_cell", "x_cell", "mass"])
        for i in range(n1):
            for j in range(n2):
                w = cylinder.weights[i, j]
                for k, mass in enumerate(cylinder.cell(i, j).masses.ravel()):
                    writer.writerow([i, j, k, repr(float(w * mass))])
    return path


# -------------------------------
# Ergodic averages
# -------------------------------

def birkhoff_average(parent: QuasiPeriodicParent, f: CylinderFunction, start: Sequence[float],
                     T: float, cfg: SimConfig, h_avg: float = 0.1, torus_only: bool = False,
                     stream: int = 0) -> float:
    """
    (1/T)∫₀^T f(Φ̂(t)(s₁, s₂, x)) dt along one lifted trajectory, sampled every ``h_avg``.

    Args:
        start: (s₁, s₂, x)
        torus_only: evaluate the pure rotation with x held at its start value
    """
    if T <= 0 or h_avg <= 0:
        raise ArgumentError(f"birkhoff average needs positive T and h_avg, got {T}, {h_avg}")
    s1, s2, x = float(start[0]), float(start[1]), float(start[2])
    tau1, tau2 = parent.periods
    count = int(round(T / h_avg))
    times = h_avg * np.arange(count)
    if torus_only:
        states = np.full(count, x)
    else:
        path_cfg = replace(cfg, paths=1, step=min(cfg.step, h_avg))
        every = max(1, int(round(h_avg / path_cfg.step)))
        path_cfg = replace(path_cfg, step=h_avg / every)
        trajectory = simulate_path(parent.at(s1, s2), 0.0, [x], count * h_avg, path_cfg, stream)
        states = trajectory.states[:-1:every, 0][:count]
    values = f((s1 + times) % tau1, (s2 + times) % tau2, states)
    return float(np.mean(values))
