"""
Probability measures on ℝ^d and the distances between them.

GridMeasure is the common currency: histograms of ensembles, Fokker-Planck
densities and exact Gaussian cell masses all become GridMeasures on a box
with a single leaked-mass scalar for whatever falls outside.

Conventions:
- total_variation returns the half-sum ½Σ|Δ| (at most 1); the Jordan-mass
  norm used in the ρ_β comparisons is twice this value.
- rho_beta and wasserstein1 place the leaked mass at the point of the box
  boundary nearest the origin.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import ot
from scipy import signal, special

from .errors import ArgumentError
from .quadrature import integrate

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9
SINKHORN_REG = 1e-2
SINKHORN_ITERATIONS = 500


def _per_axis(value, dimension: int, kind=float) -> Tuple:
    values = np.atleast_1d(np.asarray(value))
    if values.size == 1:
        values = np.repeat(values, dimension)
    if values.size != dimension:
        raise ArgumentError(f"expected {dimension} values per axis, got {values.size}")
    return tuple(kind(v) for v in values)


@dataclass(eq=False)
class GridMeasure:
    """Cell masses on an axis-aligned box plus the mass leaked outside it"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    shape: Tuple[int, ...]
    masses: np.ndarray
    leak: float = 0.0

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float).reshape(self.shape)
        if np.any(self.masses < -1e-12) or self.leak < -1e-12:
            raise ArgumentError("grid measure masses must be nonnegative")
        total = float(self.masses.sum()) + self.leak
        if abs(total - 1.0) > MASS_TOL:
            raise ArgumentError(f"grid measure has total mass {total!r}, expected 1")

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def widths(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    def axes(self) -> List[np.ndarray]:
        return [lo + (np.arange(n) + 0.5) * w for lo, n, w in zip(self.lower, self.shape, self.widths)]

    def centers(self) -> np.ndarray:
        """Cell centers, shape (cells, d), in C order of ``masses``."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def densities(self) -> np.ndarray:
        return self.masses / self.cell_volume

    def same_grid(self, other: "GridMeasure") -> bool:
        return (self.shape == other.shape
                and np.allclose(self.lower, other.lower, rtol=0, atol=1e-12)
                and np.allclose(self.upper, other.upper, rtol=0, atol=1e-12))

    def expectation(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """∫ f over the in-box mass, f evaluated at cell centers."""
        return float(np.dot(f(self.centers()), self.masses.ravel()))

    def mean(self) -> np.ndarray:
        inside = self.masses.sum()
        return (self.centers() * self.masses.ravel()[:, None]).sum(axis=0) / inside

    def second_moment(self) -> float:
        return self.expectation(lambda x: np.sum(x ** 2, axis=-1))

    def cdf(self) -> np.ndarray:
        """Cumulative in-box mass at the right edge of each cell (d = 1)."""
        if self.dimension != 1:
            raise ArgumentError("cdf is defined for one-dimensional grids")
        return np.cumsum(self.masses)


def density_estimate(samples: np.ndarray, lower, upper, resolution) -> GridMeasure:
    """
    Histogram of samples on [lower, upper) with left-closed cells.

    Raises:
        ArgumentError: for empty samples or a degenerate box
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if len(samples) == 0:
        raise ArgumentError("density estimate needs at least one sample")
    d = samples.shape[1]
    lower = _per_axis(lower, d)
    upper = _per_axis(upper, d)
    shape = _per_axis(resolution, d, int)
    if any(u <= l for l, u in zip(lower, upper)) or any(n < 1 for n in shape):
        raise ArgumentError(f"degenerate box {lower}..{upper} with resolution {shape}")

    widths = (np.asarray(upper) - np.asarray(lower)) / np.asarray(shape)
    index = np.floor((samples - np.asarray(lower)) / widths).astype(np.int64)
    inside = np.all((index >= 0) & (index < np.asarray(shape)), axis=1)
    flat = np.ravel_multi_index(tuple(index[inside].T), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    n = len(samples)
    return GridMeasure(lower=lower, upper=upper, shape=shape,
                       masses=counts.reshape(shape) / n, leak=float((~inside).sum()) / n)


def _require_same_grid(a: GridMeasure, b: GridMeasure):
    if not a.same_grid(b):
        raise ArgumentError(f"grid mismatch: {a.lower}-{a.upper}x{a.shape} vs {b.lower}-{b.upper}x{b.shape}")


def total_variation(a: GridMeasure, b: GridMeasure) -> float:
    """Half-sum ½(Σ|Δmass| + |Δleak|) in [0, 1]."""
    _require_same_grid(a, b)
    return 0.5 * (float(np.abs(a.masses - b.masses).sum()) + abs(a.leak - b.leak))


def wasserstein1(a: GridMeasure, b: GridMeasure) -> float:
    """
    W₁ between two grid measures, cell masses at the cell centers and the
    leaked mass as one atom at the boundary proxy, the same points rho_beta
    weights. With V = |x|² this keeps ρ_β ≥ 2√β·W₁.

    Exact in one dimension (POT's 1D solver); entropic Sinkhorn
    (regularization 1e-2, 500 iterations) in two dimensions, diagnostic only.
    """
    _require_same_grid(a, b)
    if a.dimension > 2:
        raise ArgumentError(f"wasserstein1 supports d <= 2, got d={a.dimension}")
    points = np.vstack([a.centers(), boundary_proxy(a)[None, :]])
    pa = np.append(a.masses.ravel(), a.leak)
    pb = np.append(b.masses.ravel(), b.leak)
    pa, pb = pa / pa.sum(), pb / pb.sum()
    if a.dimension == 1:
        return float(ot.emd2_1d(points[:, 0], points[:, 0], pa, pb, metric="euclidean"))
    support = (pa > 0) | (pb > 0)
    centers = points[support]
    cost = ot.dist(centers, centers, metric="euclidean")
    value = ot.sinkhorn2(pa[support], pb[support], cost, SINKHORN_REG,
                         numItermax=SINKHORN_ITERATIONS, method="sinkhorn_log")
    return float(value)


def sample_wasserstein1(x: np.ndarray, y: np.ndarray) -> float:
    """Exact W₁ between two one-dimensional empirical measures."""
    return float(ot.emd2_1d(np.ravel(x), np.ravel(y), metric="euclidean"))


@dataclass(frozen=True)
class LyapunovSpec:
    """Lyapunov function V with weight β for the distance ρ_β"""
    beta: float
    V: Callable[[np.ndarray], np.ndarray] = field(default=lambda x: np.sum(np.asarray(x) ** 2, axis=-1))
    identifier: str = "|x|^2"

    def __post_init__(self):
        if self.beta <= 0:
            raise ArgumentError(f"beta must be positive, got {self.beta}")

    def weight(self, x: np.ndarray) -> np.ndarray:
        return 1.0 + self.beta * self.V(x)


def boundary_proxy(measure: GridMeasure) -> np.ndarray:
    """Point of the box boundary closest to the origin."""
    lower, upper = np.asarray(measure.lower), np.asarray(measure.upper)
    point = np.clip(np.zeros_like(lower), lower, upper)
    if np.all((lower < 0) & (upper > 0)):
        distances = np.concatenate([-lower, upper])
        k = int(np.argmin(distances))
        axis = k % len(lower)
        point[axis] = lower[axis] if k < len(lower) else upper[axis]
    return point


def rho_beta(a: GridMeasure, b: GridMeasure, spec: LyapunovSpec) -> float:
    """Σ (1 + βV(center))|Δmass| + (1 + βV(boundary proxy))|Δleak|."""
    _require_same_grid(a, b)
    weights = spec.weight(a.centers())
    leak_weight = float(spec.weight(boundary_proxy(a)[None, :])[0])
    return float(np.dot(weights, np.abs(a.masses - b.masses).ravel())) + leak_weight * abs(a.leak - b.leak)


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian law N(mean, covariance)"""
    mean: Tuple[float, ...]
    covariance: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (len(self.mean), len(self.mean)):
            raise ArgumentError(f"covariance shape {cov.shape} does not match mean of length {len(self.mean)}")
        if not np.allclose(cov, cov.T, atol=1e-12) or np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise ArgumentError("covariance must be symmetric positive semi-definite")

    @classmethod
    def scalar(cls, mean: float, variance: float) -> "GaussianMeasure":
        return cls(mean=(float(mean),), covariance=((float(variance),),))

    @property
    def dimension(self) -> int:
        return len(self.mean)

    @property
    def variance(self) -> float:
        return float(self.covariance[0][0])

    def log_density(self, x: np.ndarray) -> np.ndarray:
        m, v = self.mean[0], self.variance
        return -0.5 * (np.asarray(x) - m) ** 2 / v - 0.5 * math.log(2 * math.pi * v)


def _crossings(g1: GaussianMeasure, g2: GaussianMeasure) -> List[float]:
    m1, v1, m2, v2 = g1.mean[0], g1.variance, g2.mean[0], g2.variance
    A = 0.5 / v2 - 0.5 / v1
    B = m1 / v1 - m2 / v2
    C = 0.5 * m2 ** 2 / v2 - 0.5 * m1 ** 2 / v1 - 0.5 * math.log(v1 / v2)
    if abs(A) < 1e-14:
        return [] if abs(B) < 1e-14 else [-C / B]
    disc = B * B - 4 * A * C
    if disc < 0:
        return []
    root = math.sqrt(disc)
    return sorted([(-B - root) / (2 * A), (-B + root) / (2 * A)])


def gaussian_rho_beta(g1: GaussianMeasure, g2: GaussianMeasure, spec: LyapunovSpec) -> float:
    """
    ∫(1 + βV)|φ₁ − φ₂| for one-dimensional Gaussians by adaptive quadrature.

    The integrand is split at the points where the densities cross.
    """
    if g1.dimension != 1 or g2.dimension != 1:
        raise ArgumentError("gaussian_rho_beta supports one-dimensional Gaussians only")
    if g1 == g2:
        return 0.0
    if g1.variance <= 0 or g2.variance <= 0:
        raise ArgumentError("gaussian_rho_beta needs positive variances")

    sd = math.sqrt(max(g1.variance, g2.variance))
    lo = min(g1.mean[0], g2.mean[0]) - 12 * sd
    hi = max(g1.mean[0], g2.mean[0]) + 12 * sd

    def integrand(x: float) -> float:
        l1, l2 = float(g1.log_density(x)), float(g2.log_density(x))
        top, bottom = max(l1, l2), min(l1, l2)
        difference = -math.exp(top) * math.expm1(bottom - top)
        return float(spec.weight(np.array([[x]]))[0]) * difference

    return integrate(integrand, lo, hi, _crossings(g1, g2), tol=1e-12)


def gaussian_cell_masses(g: GaussianMeasure, lower: float, upper: float, resolution: int) -> GridMeasure:
    """Exact cell masses of a one-dimensional Gaussian from the normal CDF."""
    if g.dimension != 1:
        raise ArgumentError("gaussian_cell_masses supports one-dimensional Gaussians only")
    edges = np.linspace(lower, upper, resolution + 1)
    cdf = special.ndtr((edges - g.mean[0]) / math.sqrt(g.variance))
    masses = np.diff(cdf)
    return GridMeasure(lower=(float(lower),), upper=(float(upper),), shape=(resolution,),
                       masses=masses, leak=max(0.0, 1.0 - float(masses.sum())))


def count_modes(measure: GridMeasure, prominence: float = 0.1, smoothing: int = 5) -> int:
    """Number of peaks of a smoothed one-dimensional density."""
    if measure.dimension != 1:
        raise ArgumentError("count_modes supports one-dimensional grids")
    kernel = np.ones(smoothing) / smoothing
    smooth = np.convolve(measure.densities, kernel, mode="same")
    peaks, _ = signal.find_peaks(np.concatenate([[0.0], smooth, [0.0]]),
                                 prominence=prominence * float(smooth.max()))
    return len(peaks)


def sampling_noise(measure: GridMeasure, paths: int, spec: Optional[LyapunovSpec] = None) -> float:
    """
    Expected distance between two independent ``paths``-sample histograms
    of ``measure``: ρ_β under ``spec``, the half-sum total variation otherwise.

    Uses the normal approximation E|Δp| ≈ √(4p(1−p)/(πn)) per cell.
    """
    if paths < 1:
        raise ArgumentError(f"paths must be positive, got {paths}")
    p = np.append(measure.masses.ravel(), measure.leak)
    per_cell = np.sqrt(4.0 * p * (1.0 - p) / (math.pi * paths))
    if spec is None:
        return 0.5 * float(per_cell.sum())
    weights = np.append(spec.weight(measure.centers()),
                        spec.weight(boundary_proxy(measure)[None, :])[0])
    return float(np.dot(weights, per_cell))


# -------------------------------
# CSV serialization
# -------------------------------

def write_measure_csv(measure: GridMeasure, path: Union[str, Path]) -> Path:
    """Write cell centers and masses to CSV and the grid header to a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    centers = measure.centers()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{i + 1}" for i in range(measure.dimension)] + ["mass"])
        for center, mass in zip(centers, measure.masses.ravel()):
            writer.writerow([repr(float(c)) for c in center] + [repr(float(mass))])
    header = {"lower": list(measure.lower), "upper": list(measure.upper),
              "shape": list(measure.shape), "leak": measure.leak}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2))
    return path


def read_measure_csv(path: Union[str, Path]) -> GridMeasure:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    masses = np.array([float(row[-1]) for row in rows])
    return GridMeasure(lower=tuple(header["lower"]), upper=tuple(header["upper"]),
                       shape=tuple(header["shape"]), masses=masses, leak=float(header["leak"]))
