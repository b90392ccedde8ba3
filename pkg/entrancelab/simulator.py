"""
Euler-Maruyama simulation of time-inhomogeneous SDEs.

Superlinear drifts such as x − x³ make the plain scheme unstable, so every
step stabilizes the drift: the truncated scheme evaluates b at the radial
projection of the state onto the ball of radius N, the tamed scheme scales
the drift increment by 1/(1 + h|b|).

Paths are simulated in blocks. Each block draws its Brownian increments
from a Philox counter-based generator keyed by (seed, stream, block), so an
ensemble is bit-identical regardless of how blocks are scheduled across
worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .coefficients import CoefficientSet, DissipationEnvelope
from .errors import ArgumentError, ConfigurationError, NumericError, SimulationBlowUp
from .quadrature import discounted_integral

logger = logging.getLogger(__name__)

KEY_MASK = (1 << 64) - 1


class Scheme(Enum):
    """Drift stabilization used by the Euler-Maruyama step"""
    TRUNCATED = "truncated"
    TAMED = "tamed"


@dataclass
class SimConfig:
    """Settings for path and ensemble simulation"""
    step: float = 1e-3
    scheme: Scheme = Scheme.TRUNCATED
    radius: Optional[float] = None  # None: 10·(1 + |x₀|)
    seed: int = 0
    paths: int = 1000
    block_size: int = 1000
    max_workers: int = 1
    blowup_threshold: float = 1e8

    def validate(self) -> List[str]:
        errors = []
        if self.step <= 0:
            errors.append(f"step must be positive, got {self.step}")
        if self.radius is not None and self.radius <= 0:
            errors.append(f"radius must be positive, got {self.radius}")
        if self.paths < 1:
            errors.append(f"paths must be positive, got {self.paths}")
        if self.block_size < 1:
            errors.append(f"block_size must be positive, got {self.block_size}")
        if self.max_workers < 1:
            errors.append(f"max_workers must be positive, got {self.max_workers}")
        return errors


def generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """Philox generator for one path block of one stream."""
    key = np.array([seed & KEY_MASK, ((stream & 0xFFFFFFFF) << 32) | (block & 0xFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# -------------------------------
# Initial laws
# -------------------------------

@dataclass(frozen=True)
class PointMass:
    """Dirac mass δ_x"""
    x: Sequence[float]

    @property
    def law_id(self) -> str:
        return "delta(" + ",".join(f"{v:g}" for v in np.atleast_1d(self.x)) + ")"

    def sample(self, rng: np.random.Generator, n: int, dimension: int) -> np.ndarray:
        point = np.broadcast_to(np.asarray(self.x, dtype=float), (dimension,))
        return np.tile(point, (n, 1))

    def scale(self) -> float:
        return float(np.max(np.abs(self.x)))


@dataclass(frozen=True)
class UniformBox:
    """Uniform law on an axis-aligned box"""
    lower: Sequence[float]
    upper: Sequence[float]

    @property
    def law_id(self) -> str:
        return f"uniform({list(np.atleast_1d(self.lower))},{list(np.atleast_1d(self.upper))})"

    def sample(self, rng: np.random.Generator, n: int, dimension: int) -> np.ndarray:
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (dimension,))
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (dimension,))
        return lower + (upper - lower) * rng.random((n, dimension))

    def scale(self) -> float:
        return float(max(np.max(np.abs(self.lower)), np.max(np.abs(self.upper))))


@dataclass(frozen=True)
class GaussianLaw:
    """Gaussian law with mean and covariance"""
    mean: Sequence[float]
    covariance: Sequence[Sequence[float]]

    @property
    def law_id(self) -> str:
        return f"gaussian({list(np.atleast_1d(self.mean))})"

    def sample(self, rng: np.random.Generator, n: int, dimension: int) -> np.ndarray:
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (dimension,))
        cov = np.asarray(self.covariance, dtype=float).reshape(dimension, dimension)
        return rng.multivariate_normal(mean, cov, size=n, method="cholesky")

    def scale(self) -> float:
        cov = np.asarray(self.covariance, dtype=float)
        return float(np.max(np.abs(self.mean)) + 4 * math.sqrt(np.max(np.diag(np.atleast_2d(cov)))))


@dataclass(frozen=True)
class EmpiricalLaw:
    """Resampling from a fixed set of points"""
    points: np.ndarray = field(compare=False)
    label: str = "empirical"

    @property
    def law_id(self) -> str:
        return f"{self.label}[{len(self.points)}]"

    def sample(self, rng: np.random.Generator, n: int, dimension: int) -> np.ndarray:
        points = np.asarray(self.points, dtype=float).reshape(-1, dimension)
        return points[rng.integers(0, len(points), size=n)]

    def scale(self) -> float:
        return float(np.max(np.abs(self.points)))


InitialLaw = (PointMass, UniformBox, GaussianLaw, EmpiricalLaw)


# -------------------------------
# Results
# -------------------------------

@dataclass
class Trajectory:
    """A single sample path"""
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ArgumentError("trajectory times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ArgumentError("trajectory times must be strictly increasing")


@dataclass
class Ensemble:
    """Terminal samples of many independent paths with their provenance"""
    t: float
    samples: np.ndarray
    s: float
    law_id: str
    config: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ArgumentError("ensemble must contain at least one sample")

    @property
    def size(self) -> int:
        return len(self.samples)

    def second_moments(self) -> np.ndarray:
        return np.sum(self.samples ** 2, axis=-1)


# -------------------------------
# Stepping
# -------------------------------

def _steps(s: float, t: float, h: float) -> int:
    if t < s:
        raise ArgumentError(f"simulation needs s <= t, got s={s}, t={t}")
    return int(math.ceil((t - s) / h - 1e-12)) if t > s else 0


def _radius(cfg: SimConfig, scale: float) -> float:
    return cfg.radius if cfg.radius is not None else 10.0 * (1.0 + scale)


def _advance(c: CoefficientSet, X: np.ndarray, s: float, t: float, cfg: SimConfig,
             rng: np.random.Generator, radius: float, block: int,
             record: Optional[List[np.ndarray]] = None) -> np.ndarray:
    n = _steps(s, t, cfg.step)
    if n == 0:
        return X
    dt = (t - s) / n
    sqrt_dt = math.sqrt(dt)
    d = c.dimension
    for k in range(n):
        r = s + k * dt
        if cfg.scheme is Scheme.TRUNCATED:
            norm = np.linalg.norm(X, axis=-1, keepdims=True)
            factor = np.where(norm > radius, radius / np.maximum(norm, 1e-300), 1.0)
            drift_step = c.drift(r, X * factor) * dt
        else:
            b = c.drift(r, X)
            drift_step = b * dt / (1.0 + dt * np.linalg.norm(b, axis=-1, keepdims=True))
        dW = rng.standard_normal(X.shape) * sqrt_dt
        X = X + drift_step + np.einsum("...ij,...j->...i", c.diffusion(r, X), dW)
        if not np.all(np.abs(X) <= cfg.blowup_threshold):
            raise SimulationBlowUp(time=r + dt, block=block, threshold=cfg.blowup_threshold)
        if record is not None:
            record.append(X.copy())
    return X


def simulate_path(c: CoefficientSet, s: float, x: Sequence[float], t: float, cfg: SimConfig,
                  stream: int = 0) -> Trajectory:
    """
    Simulate one path from (s, x) to t.

    Args:
        c: coefficients
        s: start time
        x: start state
        t: end time (t >= s)
        cfg: step, scheme, radius and seed
        stream: RNG stream id, distinct streams give independent noise

    Returns:
        Trajectory on the uniform grid of ceil((t − s)/h) steps

    Raises:
        SimulationBlowUp: if the state exceeds the blow-up threshold
    """
    n = _steps(s, t, cfg.step)
    start = np.broadcast_to(np.asarray(x, dtype=float), (c.dimension,)).reshape(1, c.dimension)
    radius = _radius(cfg, float(np.max(np.abs(start))))
    record: List[np.ndarray] = [start.copy()]
    _advance(c, start, s, t, cfg, generator(cfg.seed, stream, 0), radius, 0, record)
    times = np.linspace(s, t, n + 1) if n else np.array([s])
    return Trajectory(times=times, states=np.concatenate(record, axis=0))


class EnsembleRunner:
    """
    Pushes initial laws through the SDE with a pool of worker threads.

    Blocks of ``cfg.block_size`` paths are independent jobs; results are
    merged in block order.
    """

    def __init__(self, cfg: SimConfig):
        errors = cfg.validate()
        if errors:
            raise ConfigurationError(f"Invalid simulation configuration: {', '.join(errors)}", field="simulation")
        self.cfg = cfg
        self._setup_logging()

    def _setup_logging(self):
        """Setup logging for ensemble runs"""
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    def push(self, c: CoefficientSet, s: float, init, t: float, stream: int = 0) -> Ensemble:
        cfg = self.cfg
        _steps(s, t, cfg.step)
        radius = _radius(cfg, init.scale())
        blocks = [(b, min(cfg.block_size, cfg.paths - b * cfg.block_size))
                  for b in range(math.ceil(cfg.paths / cfg.block_size))]

        def run_block(job):
            block, size = job
            rng = generator(cfg.seed, stream, block)
            X = init.sample(rng, size, c.dimension)
            return _advance(c, X, s, t, cfg, rng, radius, block)

        self.logger.debug(f"pushing {init.law_id} through {c.name} on [{s:g}, {t:g}] "
                          f"({cfg.paths} paths, {len(blocks)} blocks)")
        if cfg.max_workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
                parts = list(pool.map(run_block, blocks))
        else:
            parts = [run_block(job) for job in blocks]

        return Ensemble(t=t, samples=np.concatenate(parts, axis=0), s=s, law_id=init.law_id,
                        config={"step": cfg.step, "scheme": cfg.scheme.value, "radius": radius,
                                "seed": cfg.seed, "stream": stream, "paths": cfg.paths})


def push_ensemble(c: CoefficientSet, s: float, init, t: float, cfg: SimConfig,
                  stream: int = 0) -> Ensemble:
    """Monte Carlo surrogate of P*(t, s)·init with ``cfg.paths`` samples."""
    return EnsembleRunner(cfg).push(c, s, init, t, stream)


def resample(ensemble: Ensemble) -> EmpiricalLaw:
    """Initial law that restarts a push from the samples of ``ensemble``."""
    return EmpiricalLaw(points=ensemble.samples, label=f"resample@{ensemble.t:g}")


# -------------------------------
# Moment bounds
# -------------------------------

def second_moment_bound(env: DissipationEnvelope, s: float, t: float, x: Sequence[float],
                        gamma1: float, dimension: int) -> float:
    """
    e^{2∫_s^t α}|x|² + ∫_s^t e^{2∫_u^t α}(2Λ_u + dΓ₁) du.

    Raises:
        NumericError: if refining the quadrature cells changes the value
    """
    if s > t:
        raise ArgumentError(f"moment bound needs s <= t, got s={s}, t={t}")
    norm2 = float(np.sum(np.asarray(x, dtype=float) ** 2))
    if s == t:
        return norm2
    weight = lambda u: 2.0 * env.lam(u) + dimension * gamma1
    kinks = env.breakpoints(s, t)
    coarse = discounted_integral(env.alpha, weight, s, t, step=0.02, breakpoints=kinks)
    fine = discounted_integral(env.alpha, weight, s, t, step=0.01, breakpoints=kinks)
    if not np.isfinite(fine) or abs(fine - coarse) > 1e-8 * max(1.0, abs(fine)):
        raise NumericError(f"moment bound quadrature unstable on [{s:g}, {t:g}]: {coarse!r} vs {fine!r}")
    return math.exp(2.0 * env.integral(s, t)) * norm2 + fine


@dataclass
class MomentCheck:
    """Sample second moment against a bound"""
    mean: float
    standard_error: float
    bound: float
    passed: bool


def check_moment_bound(ensemble: Ensemble, bound: float) -> MomentCheck:
    """Pass iff the sample mean of |X|² is at most bound + 3·SE."""
    moments = ensemble.second_moments()
    mean = float(np.mean(moments))
    se = float(np.std(moments, ddof=1) / math.sqrt(len(moments))) if len(moments) > 1 else 0.0
    return MomentCheck(mean=mean, standard_error=se, bound=bound, passed=mean <= bound + 3.0 * se)
