"""
Built-in example families.

Each family is registered as an ExampleSpec: a factory returning a
CoefficientSet (or a QuasiPeriodicParent for two-time examples) together
with the known truths the lab checks against, each tagged with where the
expected value comes from (PAPER, DERIVED or TRIVIAL).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np

from .coefficients import (CoefficientSet, DissipationEnvelope, QuasiPeriodicParent,
                           merge_kinks, no_kinks, periodic_kinks, positive_part,
                           scalar_coefficients)
from .errors import ConfigurationError
from .expressions import compile_many, parse_expression

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class KnownTruth:
    """An expected value with its provenance tag"""
    name: str
    value: Any
    provenance: str
    note: str = ""


@dataclass(frozen=True)
class ExampleSpec:
    """Catalog entry: a coefficient factory plus its known truths"""
    name: str
    description: str
    factory: Callable[..., Union[CoefficientSet, QuasiPeriodicParent]]
    defaults: Dict[str, Any] = field(default_factory=dict)
    truths: Tuple[KnownTruth, ...] = ()
    quasi: bool = False

    def build(self, **params) -> Union[CoefficientSet, QuasiPeriodicParent]:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ConfigurationError(f"example '{self.name}' has no parameters {sorted(unknown)}",
                                     field="parameters")
        merged = {**self.defaults, **params}
        return self.factory(**merged)

    def truth(self, name: str) -> KnownTruth:
        for truth in self.truths:
            if truth.name == name:
                return truth
        raise KeyError(name)


# -------------------------------
# Forcing terms
# -------------------------------

def forcing(kind: str, amplitude: float) -> Tuple[Callable[[np.ndarray], np.ndarray], float]:
    """Forcing f(t) and its sup norm for the stochastic resonance drift."""
    if kind == "zero":
        return (lambda t: np.zeros_like(np.asarray(t, dtype=float))), 0.0
    if kind == "cos":
        return (lambda t: amplitude * np.cos(t)), abs(amplitude)
    if kind == "quasi":
        return (lambda t: amplitude * (np.cos(t) + np.cos(SQRT2 * t))), 2 * abs(amplitude)
    if kind == "almost_periodic":
        return (lambda t: amplitude * np.sin(1.0 / (2.0 + np.cos(t) + np.cos(SQRT2 * t)))), abs(amplitude)
    raise ConfigurationError(f"unknown forcing '{kind}' (zero, cos, quasi, almost_periodic)", field="forcing")


# -------------------------------
# Families
# -------------------------------

def bpsv(forcing_kind: str = "cos", amplitude: float = 1.0) -> CoefficientSet:
    """dX = (X − X³ + f(t))dt + dW with α = −2, Λ = |f|∞² + 4."""
    f, sup = forcing(forcing_kind, amplitude)
    lam = sup ** 2 + 4.0
    return scalar_coefficients(
        drift=lambda t, x: x - x ** 3 + f(t),
        diffusion=lambda t, x: 1.0,
        alpha=lambda t: np.full_like(np.asarray(t, dtype=float), -2.0),
        lam=lambda t: np.full_like(np.asarray(t, dtype=float), lam),
        g=lambda delta: lam * delta,
        gamma1=1.0, gamma2=2.0 + sup, kappa=3.0,
        name=f"bpsv[{forcing_kind}]")


def _sqrt_kinks(s: float, t: float) -> List[float]:
    top = int(math.sqrt(max(abs(s), abs(t))) / math.pi) + 1
    points = [0.0] + [sign * (k * math.pi) ** 2 for k in range(1, top + 1) for sign in (-1, 1)]
    return sorted(p for p in points if s < p < t)


def sin_sqrt_double_well(degenerate: bool = False) -> CoefficientSet:
    """dX = (X − sin⁺(√|t|)X³)dt + σ dW with α = 1 − 16 sin⁺(√|t|), Λ = 64."""
    def switch(t):
        return positive_part(np.sin(np.sqrt(np.abs(t))))

    if degenerate:
        diffusion = lambda t, x: float(switch(t))
    else:
        diffusion = lambda t, x: 1.0
    return scalar_coefficients(
        drift=lambda t, x: x - switch(t) * x ** 3,
        diffusion=diffusion,
        alpha=lambda t: 1.0 - 16.0 * switch(t),
        lam=lambda t: np.full_like(np.asarray(t, dtype=float), 64.0),
        g=lambda delta: 65.0 * delta,
        gamma1=1.0, gamma2=2.0, kappa=3.0, kinks=_sqrt_kinks,
        name="sin_sqrt_double_well" + ("[degenerate]" if degenerate else ""))


def sin_double_well(degenerate: bool = False) -> CoefficientSet:
    """dX = (X − sin⁺(t)X³)dt + σ dW with α = 1 − 2π sin⁺(t), Λ = π²."""
    if degenerate:
        diffusion = lambda t, x: float(positive_part(np.sin(t / 4.0)))
        kinks = merge_kinks(periodic_kinks(math.pi), periodic_kinks(4 * math.pi))
        gamma1 = 2.0
    else:
        diffusion = lambda t, x: 1.0
        kinks = periodic_kinks(math.pi)
        gamma1 = 1.0
    return scalar_coefficients(
        drift=lambda t, x: x - positive_part(np.sin(t)) * x ** 3,
        diffusion=diffusion,
        alpha=lambda t: 1.0 - 2.0 * math.pi * positive_part(np.sin(t)),
        lam=lambda t: np.full_like(np.asarray(t, dtype=float), math.pi ** 2),
        g=lambda delta: (1.0 + math.pi ** 2) * delta,
        gamma1=gamma1, gamma2=2.0, kappa=3.0, kinks=kinks,
        name="sin_double_well" + ("[degenerate]" if degenerate else ""))


def f_eps(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """
    Piecewise-constant rate: −1 for t > −1 and on [−i²−i^ε, −i²], 1/i on
    (−(i+1)², −i²−i^ε).
    """
    def f(t):
        t = np.asarray(t, dtype=float)
        depth = np.sqrt(np.maximum(-t, 1.0))
        i = np.floor(depth)
        # t = −(i+1)² exactly sits in block i+1
        expanding = (t < -i ** 2 - i ** eps) & (t <= -1.0)
        return np.where(expanding, 1.0 / i, -1.0)
    return f


def f_eps_kinks(eps: float) -> Callable[[float, float], List[float]]:
    def kinks(s: float, t: float) -> List[float]:
        top = int(math.sqrt(max(-s, 1.0))) + 1
        points = []
        for i in range(1, top + 1):
            points.extend([-float(i * i), -float(i * i) - i ** eps])
        return sorted(p for p in points if s < p < t)
    return kinks


def linear_f_eps(eps: float = 0.5) -> CoefficientSet:
    """dX = f_ε(t)X dt + dW, the subgeometric linear example."""
    if not 0 < eps < 1:
        raise ConfigurationError(f"linear_f_eps needs eps in (0, 1), got {eps}", field="eps")
    f = f_eps(eps)
    return scalar_coefficients(
        drift=lambda t, x: f(t) * x,
        diffusion=lambda t, x: 1.0,
        alpha=f,
        lam=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        g=lambda delta: delta,
        gamma1=1.0, gamma2=1.0, kappa=1.0, kinks=f_eps_kinks(eps),
        name=f"linear_f_eps[{eps:g}]")


def ou_t_eps(eps: float = 1.0, horizon: float = 100.0) -> CoefficientSet:
    """dX = −|t|^ε X dt + |t|^{ε/2} dW; constants Γ₁, Γ₂ valid for |t| ≤ horizon."""
    if eps <= -1:
        raise ConfigurationError(f"ou_t_eps needs eps > -1, got {eps}", field="eps")
    scale = max(1.0, horizon ** eps)
    return scalar_coefficients(
        drift=lambda t, x: -abs(t) ** eps * x,
        diffusion=lambda t, x: abs(t) ** (eps / 2.0),
        alpha=lambda t: -np.abs(t) ** eps,
        lam=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        g=lambda delta: 0.0,
        gamma1=scale, gamma2=scale, kappa=1.0, kinks=lambda s, t: [0.0] if s < 0.0 < t else [],
        name=f"ou_t_eps[{eps:g}]")


def ou_t_eps_transition(eps: float, s: float, t: float) -> Tuple[float, float]:
    """Mean factor and variance of the exact ou_t_eps transition from s to t."""
    phi = lambda u: math.copysign(abs(u) ** (1.0 + eps), u)
    elapsed = (phi(t) - phi(s)) / (1.0 + eps)
    return math.exp(-elapsed), -math.expm1(-2.0 * elapsed) / 2.0


def ou(theta: float = 1.0, sigma: float = 1.0) -> CoefficientSet:
    """Time-homogeneous Ornstein-Uhlenbeck dX = −θX dt + σ dW."""
    if theta <= 0:
        raise ConfigurationError(f"ou needs theta > 0, got {theta}", field="theta")
    return scalar_coefficients(
        drift=lambda t, x: -theta * x,
        diffusion=lambda t, x: sigma,
        alpha=lambda t: np.full_like(np.asarray(t, dtype=float), -theta),
        lam=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        g=lambda delta: 0.0,
        gamma1=max(1.0, sigma ** 2, abs(sigma)), gamma2=max(theta, 1e-12), kappa=1.0,
        name=f"ou[{theta:g},{sigma:g}]")


def quasi_double_well(c1: float = 1.0, c2: float = 1.0, w1: float = 1.0, w2: float = SQRT2) -> QuasiPeriodicParent:
    """Parent of dX = (X − X³ + C₁cos(ω₁t) + C₂cos(ω₂t))dt + dW."""
    sup = abs(c1) + abs(c2)
    lam = sup ** 2 + 4.0
    return QuasiPeriodicParent(
        periods=(2 * math.pi / w1, 2 * math.pi / w2),
        drift=lambda t1, t2, x: x - x ** 3 + c1 * math.cos(w1 * t1) + c2 * math.cos(w2 * t2),
        diffusion=lambda t1, t2, x: np.ones(x.shape + (1,)),
        alpha=lambda t1, t2: np.full(np.broadcast(np.asarray(t1), np.asarray(t2)).shape, -2.0),
        lam=lambda t1, t2: np.full(np.broadcast(np.asarray(t1), np.asarray(t2)).shape, lam),
        g=lambda delta: lam * delta,
        gamma1=1.0, gamma2=2.0 + sup, kappa=3.0,
        name=f"quasi_double_well[{c1:g},{c2:g}]")


def quasi_nondissipative(c1: float = 1.0, c2: float = 1.0, c3: float = 1.0,
                         w1: float = 1.0, w2: float = SQRT2) -> QuasiPeriodicParent:
    """
    Parent of dX = (C₁|sin ω₁t|X − C₂sin⁺(ω₂t)X³ + C₃)dt + dW, weakly
    dissipative only on average over the torus.
    """
    if min(c1, c2, c3, w1, w2) <= 0:
        raise ConfigurationError("quasi_nondissipative needs positive constants", field="parameters")
    a = c1 + c3
    lam = (a + 1) ** 2 * math.pi ** 2 / c2 + c3

    def kinks(s: float, t: float, r1: float, r2: float) -> List[float]:
        return merge_kinks(periodic_kinks(math.pi / w1, -r1), periodic_kinks(math.pi / w2, -r2))(s, t)

    return QuasiPeriodicParent(
        periods=(2 * math.pi / w1, 2 * math.pi / w2),
        drift=lambda t1, t2, x: c1 * abs(math.sin(w1 * t1)) * x - c2 * max(math.sin(w2 * t2), 0.0) * x ** 3 + c3,
        diffusion=lambda t1, t2, x: np.ones(x.shape + (1,)),
        alpha=lambda t1, t2: a - (a + 1) * math.pi * positive_part(np.sin(w2 * np.asarray(t2)))
        + 0.0 * np.asarray(t1),
        lam=lambda t1, t2: np.full(np.broadcast(np.asarray(t1), np.asarray(t2)).shape, lam),
        g=lambda delta: (a + lam) * delta,
        gamma1=1.0, gamma2=c1 + c2 + c3, kappa=3.0, kinks=kinks,
        name=f"quasi_nondissipative[{c1:g},{c2:g},{c3:g}]")


def degenerate_noise_partition(count: int) -> List[float]:
    """Decreasing times 3π − 8nπ on whose Δ-windows sin⁺(t/4) ≥ √2/2."""
    return [3 * math.pi - 8 * n * math.pi for n in range(count)]


def expanding_interval_times(k: int) -> Tuple[float, float]:
    """(S_k, T_k): the k-th window where sin⁺(√|t|) ≥ 1/2."""
    return -(5 * math.pi / 6 + 2 * k * math.pi) ** 2, -(math.pi / 6 + 2 * k * math.pi) ** 2


# -------------------------------
# Inline coefficient specifications
# -------------------------------

def coefficients_from_config(tree: Dict[str, Any]) -> CoefficientSet:
    """
    Build coefficients from an inline key-value tree.

    Expected keys: ``drift`` (string or list of d strings in t, x / x1, x2),
    ``diffusion`` (string or d×d nested list), ``alpha``, ``lambda`` (strings
    in t), ``g`` (string in delta), ``gamma1``, ``gamma2``, ``kappa`` and an
    optional ``parameters`` mapping of named constants.
    """
    missing = [key for key in ("drift", "diffusion", "alpha", "lambda", "g") if key not in tree]
    if missing:
        raise ConfigurationError(f"inline coefficients missing {missing}", field="coefficients")
    params = {k: float(v) for k, v in tree.get("parameters", {}).items()}
    drift_src = tree["drift"] if isinstance(tree["drift"], list) else [tree["drift"]]
    dimension = len(drift_src)
    if dimension not in (1, 2):
        raise ConfigurationError("inline drift must have 1 or 2 components", field="coefficients.drift")
    state_names = {"x"} if dimension == 1 else {"x1", "x2"}
    allowed = {"t"} | state_names | set(params)

    drift_exprs = compile_many(drift_src, allowed, "coefficients.drift")
    diffusion_src = tree["diffusion"]
    if dimension == 1:
        rows = [[diffusion_src if isinstance(diffusion_src, str) else diffusion_src[0]]]
    else:
        rows = diffusion_src
        if not (isinstance(rows, list) and len(rows) == 2 and all(len(r) == 2 for r in rows)):
            raise ConfigurationError("inline diffusion must be a 2x2 list for d=2", field="coefficients.diffusion")
    diffusion_exprs = [compile_many(list(row), allowed, f"coefficients.diffusion[{i}]") for i, row in enumerate(rows)]
    alpha = parse_expression(str(tree["alpha"]), {"t"} | set(params), "coefficients.alpha")
    lam = parse_expression(str(tree["lambda"]), {"t"} | set(params), "coefficients.lambda")
    g = parse_expression(str(tree["g"]), {"delta"} | set(params), "coefficients.g")

    def values(t, x):
        named = dict(params, t=t)
        if dimension == 1:
            named["x"] = x[..., 0]
        else:
            named["x1"], named["x2"] = x[..., 0], x[..., 1]
        return named

    def drift(t: float, x: np.ndarray) -> np.ndarray:
        named = values(t, x)
        return np.stack([np.broadcast_to(e(**named), x.shape[:-1]) for e in drift_exprs], axis=-1)

    def diffusion(t: float, x: np.ndarray) -> np.ndarray:
        named = values(t, x)
        return np.stack([np.stack([np.broadcast_to(e(**named), x.shape[:-1]) for e in row], axis=-1)
                         for row in diffusion_exprs], axis=-2)

    def time_function(expr):
        return lambda t: np.broadcast_to(expr(**dict(params, t=t)), np.shape(t)) + 0.0

    envelope = DissipationEnvelope(alpha=time_function(alpha), lam=time_function(lam),
                                   g=lambda delta: float(g(**dict(params, delta=delta))),
                                   kinks=no_kinks)
    return CoefficientSet(dimension=dimension, drift=drift, diffusion=diffusion,
                          gamma1=float(tree.get("gamma1", 1.0)), gamma2=float(tree.get("gamma2", 1.0)),
                          kappa=float(tree.get("kappa", 1.0)), envelope=envelope,
                          name=str(tree.get("name", "inline")),
                          lipschitz=tree.get("lipschitz"))


# -------------------------------
# Registry
# -------------------------------

EXAMPLES: Dict[str, ExampleSpec] = {
    spec.name: spec for spec in [
        ExampleSpec(
            "bpsv", "stochastic resonance double well with periodic, quasi-periodic or almost-periodic forcing",
            bpsv, {"forcing_kind": "cos", "amplitude": 1.0},
            (KnownTruth("dissipation_average", -2.0, "TRIVIAL", "α ≡ −2"),
             KnownTruth("m_t", "(2Λ+1)/4", "DERIVED", "constant-envelope closed form"),
             KnownTruth("rate_family", "geometric", "PAPER", "uniform dissipation gives exponent 1"))),
        ExampleSpec(
            "sin_sqrt_double_well", "double well switched by sin⁺(√|t|), expanding intervals between contraction windows",
            sin_sqrt_double_well, {"degenerate": False},
            (KnownTruth("alpha_on_windows", -7.0, "PAPER", "α ≤ −7 on [S_k, T_k]"),
             KnownTruth("gamma_bound", "exp(-14Δ)", "PAPER", "Δ = π²/3"),
             KnownTruth("K_bound", 10.0, "PAPER"),
             KnownTruth("R_threshold", "40/(1-exp(-14Δ))", "PAPER"),
             KnownTruth("delta_fraction", 0.5, "PAPER", "inf n^δ/n > 1/2"))),
        ExampleSpec(
            "sin_double_well", "periodically switched double well, period 2π (degenerate variant period 8π)",
            sin_double_well, {"degenerate": False},
            (KnownTruth("period_integral", -2 * math.pi, "PAPER", "∫ over one period of α"),
             KnownTruth("nondegenerate_partition", "3π − 8nπ", "PAPER"))),
        ExampleSpec(
            "linear_f_eps", "linear SDE with piecewise-constant rate, subgeometric convergence",
            linear_f_eps, {"eps": 0.5},
            (KnownTruth("exponent", "(1+ε)/2", "PAPER"),
             KnownTruth("entrance_family", "Gaussian N(0, ∫e^{2∫f})", "PAPER"))),
        ExampleSpec(
            "ou_t_eps", "OU with |t|^ε rate, time-homogeneous after a power time change",
            ou_t_eps, {"eps": 1.0, "horizon": 100.0},
            (KnownTruth("invariant_variance", 0.5, "PAPER", "N(0, ½)"),
             KnownTruth("exponent", "1+ε", "PAPER"))),
        ExampleSpec(
            "ou", "time-homogeneous Ornstein-Uhlenbeck process",
            ou, {"theta": 1.0, "sigma": 1.0},
            (KnownTruth("invariant_variance", "σ²/(2θ)", "DERIVED"),)),
        ExampleSpec(
            "quasi_double_well", "double well with two incommensurate cosine forcings",
            quasi_double_well, {"c1": 1.0, "c2": 1.0, "w1": 1.0, "w2": SQRT2},
            (KnownTruth("spatial_modes", 2, "DERIVED", "bimodal spatial marginal"),
             KnownTruth("periods", "(2π/ω₁, 2π/ω₂)", "PAPER")),
            quasi=True),
        ExampleSpec(
            "quasi_nondissipative", "quasi-periodic drift dissipative only on torus average",
            quasi_nondissipative, {"c1": 1.0, "c2": 1.0, "c3": 1.0, "w1": 1.0, "w2": SQRT2},
            (KnownTruth("torus_integral", "-4π²/(ω₁ω₂)", "PAPER"),),
            quasi=True),
    ]
}


def list_examples() -> List[ExampleSpec]:
    return [EXAMPLES[name] for name in sorted(EXAMPLES)]


def get_example(name: str) -> ExampleSpec:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ConfigurationError(f"unknown example '{name}' (available: {', '.join(sorted(EXAMPLES))})",
                                 field="example")


def build_example(name: str, **params) -> Union[CoefficientSet, QuasiPeriodicParent]:
    return get_example(name).build(**params)
