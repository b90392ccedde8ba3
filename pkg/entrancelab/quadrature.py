"""
Quadrature helpers shared by the envelope, moment and entrance computations.

Two tools live here: breakpoint-aware adaptive quadrature (scipy's QUADPACK
wrapper applied piece by piece) for short windows, and fixed-order
Gauss-Legendre cell integration for long windows where an integrand is
evaluated on many cells at once.
"""

import logging
from functools import lru_cache
from typing import Callable, Iterable, Tuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy import special

from .errors import ArgumentError, NumericError

logger = logging.getLogger(__name__)

ABS_TOL = 1e-9
GL_ORDER = 8
MAX_PIECE = 50.0
MAX_CELLS = 200_000
CHUNK_CELLS = 16_384


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _pieces(a: float, b: float, breakpoints: Iterable[float]) -> np.ndarray:
    inner = [p for p in breakpoints if a < p < b]
    edges = np.unique(np.concatenate([[a, b], np.asarray(inner, dtype=float)]))
    # long pieces are split so QUADPACK's subdivision limit is not exhausted
    refined = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        n = int(np.ceil((hi - lo) / MAX_PIECE))
        refined.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.asarray(refined)


def integrate(func: Callable[[float], float], a: float, b: float,
              breakpoints: Iterable[float] = (), tol: float = ABS_TOL,
              limit: int = 200) -> float:
    """
    Adaptive quadrature of a scalar function over [a, b].

    The interval is cut at the given breakpoints (kinks of piecewise
    definitions such as sin⁺) and each piece is integrated separately.

    Raises:
        NumericError: if a piece does not reach the requested tolerance
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(func, b, a, breakpoints, tol, limit)

    edges = _pieces(a, b, breakpoints)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        result = sp_integrate.quad(func, lo, hi, epsabs=tol, epsrel=1e-10,
                                   limit=limit, full_output=1)
        value, error = result[0], result[1]
        if len(result) > 3 and error > 10 * max(tol, 1e-10 * abs(value)):
            raise NumericError(f"quadrature did not converge on [{lo:.6g}, {hi:.6g}]: {result[3]}")
        total += value
    return float(total)


def cell_grid(a: float, b: float, step: float, breakpoints: Iterable[float] = ()) -> np.ndarray:
    """Cell edges of width at most ``step`` on [a, b], refined at breakpoints."""
    if not b > a:
        raise ArgumentError(f"empty integration window [{a}, {b}]")
    step = max(step, (b - a) / MAX_CELLS)
    n = max(1, int(np.ceil((b - a) / step)))
    edges = np.linspace(a, b, n + 1)
    inner = np.asarray([p for p in breakpoints if a < p < b], dtype=float)
    if inner.size:
        edges = np.union1d(edges, inner)
    return edges


def cell_integrals(func: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                   order: int = GL_ORDER) -> np.ndarray:
    """Integral of a vectorized function over every cell of ``edges``."""
    nodes, weights = gauss_legendre(order)
    out = np.empty(len(edges) - 1)
    for start in range(0, len(edges) - 1, CHUNK_CELLS):
        lo = edges[start:start + CHUNK_CELLS]
        hi = edges[start + 1:start + 1 + CHUNK_CELLS]
        lo = lo[:len(hi)]
        half = 0.5 * (hi - lo)
        points = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
        values = np.broadcast_to(func(points), points.shape)
        out[start:start + len(hi)] = (values * weights).sum(axis=1) * half
    return out


def cumulative_integral(func: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> np.ndarray:
    """Running integral from edges[0] to each edge (first entry 0)."""
    return np.concatenate([[0.0], np.cumsum(cell_integrals(func, edges))])


def discounted_integral(rate: Callable[[np.ndarray], np.ndarray],
                        weight: Callable[[np.ndarray], np.ndarray],
                        lower: float, upper: float, scale: float = 2.0,
                        step: float = 0.01, breakpoints: Iterable[float] = ()) -> float:
    """
    Evaluate ∫_lower^upper exp(scale·∫_u^upper rate) weight(u) du.

    The inner integral is split into a tail sum over whole cells plus a
    nested Gauss-Legendre rule inside the cell holding u, so the result is
    exact for piecewise-polynomial rates aligned with the breakpoints.
    Returns inf when the exponent overflows.
    """
    if upper == lower:
        return 0.0
    if upper < lower:
        raise ArgumentError(f"discounted integral needs lower <= upper, got [{lower}, {upper}]")

    edges = cell_grid(lower, upper, step, breakpoints)
    cell_rates = cell_integrals(rate, edges)
    # tail[i] = ∫ rate from the right edge of cell i up to ``upper``
    suffix = np.concatenate([np.cumsum(cell_rates[::-1])[::-1], [0.0]])
    tail = suffix[1:]

    nodes, weights = gauss_legendre(GL_ORDER)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, len(edges) - 1, CHUNK_CELLS // GL_ORDER):
            stop = min(start + CHUNK_CELLS // GL_ORDER, len(edges) - 1)
            lo, hi = edges[start:stop], edges[start + 1:stop + 1]
            half = 0.5 * (hi - lo)
            u = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
            inner_half = 0.5 * (hi[:, None] - u)
            inner_points = (0.5 * (hi[:, None] + u))[..., None] + inner_half[..., None] * nodes
            inner_values = np.broadcast_to(rate(inner_points), inner_points.shape)
            inner = (inner_values * weights).sum(axis=-1) * inner_half
            exponent = scale * (inner + tail[start:stop, None])
            values = np.broadcast_to(weight(u), u.shape) * np.exp(exponent)
            total += float(((values * weights).sum(axis=1) * half).sum())
    return total if np.isfinite(total) else float("inf")
