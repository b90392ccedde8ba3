#!/usr/bin/env python3
"""
Test the flow, the Gaussian proxy, the Fokker-Planck solver and the lower bounds
"""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.catalog import ou, sin_double_well
from entrancelab.density import (FokkerPlanckSolver, FPGrid, LowerBoundParams, calibrate_lower_bound,
                                 calibrate_two_point_constant, flow_bound, flow_solve, fp_solve, frozen_density,
                                 frozen_proxy, lower_bound_eval, minorization, parametrix_iterate, two_point_check)
from entrancelab.errors import ArgumentError, DegeneracyError


def _ou_density(x, y, dt):
    """Exact OU transition density for θ = σ = 1."""
    mean = np.asarray(x) * math.exp(-dt)
    var = (1.0 - math.exp(-2.0 * dt)) / 2.0
    return np.exp(-0.5 * (np.asarray(y) - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


def test_flow_forward_and_backward():
    print("🧪 Testing RK4 flow...")
    forward = flow_solve(ou(), 0.0, [1.0], 1.0)
    assert abs(forward[0] - math.exp(-1.0)) < 1e-10
    backward = flow_solve(ou(), 1.0, [math.exp(-1.0)], 0.0)
    assert abs(backward[0] - 1.0) < 1e-10
    # g = 0 for OU
    assert abs(flow_bound(ou(), 1.0) - math.sqrt(2.0) * math.e) < 1e-12
    assert abs(flow_solve(ou(), 0.0, [0.0], 1.0)[0]) <= flow_bound(ou(), 1.0)
    print(f"✅ θ₁(1) = {forward[0]:.12f}")


def test_frozen_proxy_moments():
    """Along the zero flow of OU the proxy is N(x, t − s)"""
    proxy = frozen_proxy(ou(), 0.0, 2.0)
    assert abs(proxy.shift[0]) < 1e-12
    assert abs(proxy.covariance[0, 0] - 2.0) < 1e-10
    value = float(proxy.density([0.5], np.array([0.5]))[0])
    assert abs(value - 1.0 / math.sqrt(4 * math.pi)) < 1e-10
    same = float(frozen_density(ou(), 0.0, [0.0], 0.0, 2.0, [0.5], np.array([0.5]))[0])
    assert abs(same - value) < 1e-12
    try:
        frozen_proxy(ou(), 1.0, 1.0)
    except ArgumentError:
        print("✅ Proxy moments integrated along the flow")
        return
    raise AssertionError("empty window accepted")


def test_parametrix_correction_improves_proxy():
    print("🧪 Testing first parametrix correction...")
    ys = np.linspace(-1.0, 2.0, 7)
    exact = _ou_density(0.5, ys, 0.5)
    order0 = parametrix_iterate(ou(), 0.0, 0.5, 0.5, ys, order=0)
    order1 = parametrix_iterate(ou(), 0.0, 0.5, 0.5, ys, order=1)
    err0 = float(np.max(np.abs(order0 - exact)))
    err1 = float(np.max(np.abs(order1 - exact)))
    assert err1 < err0, f"order 1 error {err1} not below order 0 error {err0}"
    print(f"✅ Max error {err0:.4f} → {err1:.4f}")


def test_fp_solver_matches_ou():
    """Reflecting box far from the mass reproduces the OU moments"""
    print("🧪 Testing Fokker-Planck solver on OU...")
    solution = fp_solve(ou(), 0.0, 1.0, 1.0, FPGrid.with_spacing(-5.0, 5.0))
    m = solution.measure
    assert abs(m.masses.sum() + m.leak - 1.0) < 1e-9
    assert solution.mass_deficit < 1e-6
    mean = float(m.mean()[0])
    variance = m.second_moment() - mean ** 2
    assert abs(mean - math.exp(-1.0)) < 5e-3
    assert abs(variance - (1 - math.exp(-2.0)) / 2) < 5e-3
    print(f"✅ mean {mean:.5f}, variance {variance:.5f}")


def test_fp_grid_validation():
    grid = FPGrid(lower=0.0, upper=1.0, resolution=2, boundary="periodic")
    assert len(grid.validate()) == 2
    try:
        FokkerPlanckSolver(grid)
    except ArgumentError:
        print("✅ Bad grid rejected")
        return
    raise AssertionError("bad grid accepted")


def test_lower_bound_formula():
    p = LowerBoundParams(2.0, 0.5, 1.0)
    # at x = y = 0: η₁Δt^{-1/2}e^{-η₂-η₃/Δt}
    value = float(lower_bound_eval(p, 0.25, 0.0, 0.0))
    assert abs(value - 4.0 * math.exp(-0.5 - 4.0)) < 1e-14
    assert p.provenance == "user-supplied"
    for bad in (lambda: LowerBoundParams(0.0, 0.5, 1.0), lambda: lower_bound_eval(p, 0.0, 0.0, 0.0)):
        try:
            bad()
        except ArgumentError:
            continue
        raise AssertionError("bad lower-bound input accepted")
    print("✅ Lower bound formula at the origin")


def test_calibrated_bound_stays_below_density():
    print("🧪 Testing lower-bound calibration...")
    dt = 0.5
    params = calibrate_lower_bound(ou(), dt, (-1.0, 1.0), (-2.0, 2.0),
                                   density=lambda x, ys: _ou_density(x, ys, dt))
    assert params.provenance == "calibrated"
    xs, ys = np.meshgrid(np.linspace(-1.0, 1.0, 13), np.linspace(-2.0, 2.0, 21), indexing="ij")
    bound = lower_bound_eval(params, dt, xs, ys)
    assert np.all(bound <= _ou_density(xs, ys, dt))
    print(f"✅ η₁={params.eta1:.4g}, η₂={params.eta2:g}, η₃={params.eta3:g}")


def test_minorization_against_exact_density():
    """η = 2ρ_B·min p over starts |x| ≤ √R and targets |y| ≤ ρ_B"""
    print("🧪 Testing minorization sweep...")
    grid = FPGrid.with_spacing(-3.0, 3.0, 0.05)
    result = minorization(ou(), 0.0, 1.0, R=1.0, radius=1.0, grid=grid, x_points=5)
    assert result.certified
    window = grid.centers()[np.abs(grid.centers()) <= 1.0]
    exact = 2.0 * min(float(np.min(_ou_density(x, window, 1.0))) for x in result.starts)
    assert abs(result.eta - exact) / exact < 0.05, f"eta {result.eta} vs {exact}"
    assert result.describe_nu() == "uniform on [-1, 1]"
    print(f"✅ η = {result.eta:.4f} (exact {exact:.4f})")


def test_minorization_degenerate_noise():
    try:
        minorization(sin_double_well(degenerate=True), 13.0, 14.0, R=1.0)
    except DegeneracyError:
        print("✅ Vanishing diffusion reported")
        return
    raise AssertionError("degenerate diffusion accepted")


def test_two_point_constant():
    pair = {"density_r": 0.4, "density_t": 0.1, "s": 0.0, "r": 1.0, "t": 2.0, "y0": 0.0, "y": 1.0}
    K = calibrate_two_point_constant([pair])
    # exponent 1 + 1·2 + 1 = 4
    assert abs(K - 1.1 * math.log(4.0) / 4.0) < 1e-12
    assert two_point_check(0.4, 0.1, K, 1.0, 0.0, 1.0, 2.0, 0.0, 1.0)
    assert not two_point_check(0.4, 0.1, 0.3, 1.0, 0.0, 1.0, 2.0, 0.0, 1.0)
    try:
        two_point_check(0.4, 0.1, K, 1.0, 1.0, 1.0, 2.0, 0.0, 1.0)
    except ArgumentError:
        print(f"✅ 𝒦 = {K:.4f}")
        return
    raise AssertionError("r = s accepted")


def main():
    """Run density tests"""
    print("🚀 Density Tests")
    print("=" * 40)
    tests = [test_flow_forward_and_backward, test_frozen_proxy_moments, test_parametrix_correction_improves_proxy,
             test_fp_solver_matches_ou, test_fp_grid_validation, test_lower_bound_formula,
             test_calibrated_bound_stays_below_density, test_minorization_against_exact_density,
             test_minorization_degenerate_noise, test_two_point_constant]
    failed = 0
    for test in tests:
        try:
            test()
        except AssertionError as e:
            failed += 1
            print(f"❌ {test.__name__} failed: {e}")
    print("\n" + "=" * 40)
    if failed:
        print(f"❌ {failed} of {len(tests)} tests failed")
        return 1
    print("🎉 All density tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
