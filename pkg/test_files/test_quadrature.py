#!/usr/bin/env python3
"""
Test breakpoint-aware quadrature and the discounted envelope integral
"""

import math
import sys
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.errors import ArgumentError
from entrancelab.quadrature import cell_grid, cumulative_integral, discounted_integral, integrate


def test_integrate_with_kink():
    print("🧪 Testing adaptive quadrature across a kink...")
    value = integrate(abs, -1.0, 2.0, breakpoints=[0.0])
    assert abs(value - 2.5) < 1e-10
    assert abs(integrate(abs, 2.0, -1.0, breakpoints=[0.0]) + 2.5) < 1e-10
    assert integrate(abs, 1.0, 1.0) == 0.0
    print(f"✅ ∫|u| over [-1, 2] = {value}")


def test_integrate_long_window():
    """Windows longer than one piece are split before QUADPACK sees them"""
    value = integrate(lambda u: math.sin(u) ** 2, 0.0, 200 * math.pi)
    assert abs(value - 100 * math.pi) < 1e-6
    print("✅ Long oscillatory window integrated")


def test_cell_grid_refines_at_breakpoints():
    edges = cell_grid(0.0, 1.0, 0.25, breakpoints=[0.3, 5.0])
    assert np.allclose(edges, [0.0, 0.25, 0.3, 0.5, 0.75, 1.0])
    try:
        cell_grid(1.0, 1.0, 0.1)
    except ArgumentError:
        print("✅ Cell grid refined and empty windows rejected")
        return
    raise AssertionError("empty window accepted")


def test_cumulative_integral_exact_for_polynomials():
    edges = np.linspace(0.0, 1.0, 5)
    running = cumulative_integral(lambda u: 3 * u ** 2, edges)
    assert running[0] == 0.0
    assert np.allclose(running, edges ** 3, atol=1e-13)
    print("✅ Running integral of 3u² equals u³")


def test_discounted_integral_constant_rate():
    """∫_0^T e^{-2(T-u)} du = (1 - e^{-2T})/2"""
    print("🧪 Testing discounted integral...")
    T = 3.0
    value = discounted_integral(lambda u: -np.ones_like(u), lambda u: np.ones_like(u), 0.0, T)
    expected = (1 - math.exp(-2 * T)) / 2
    assert abs(value - expected) < 1e-10
    assert discounted_integral(lambda u: -np.ones_like(u), lambda u: np.ones_like(u), 1.0, 1.0) == 0.0
    print(f"✅ Discounted integral {value:.10f} matches {expected:.10f}")


def test_discounted_integral_piecewise_rate():
    """Rate −1 on [0,1], +1 on [1,2]: closed form through the kink"""
    rate = lambda u: np.where(u < 1.0, -1.0, 1.0) * np.ones_like(u)
    weight = lambda u: np.ones_like(u)
    value = discounted_integral(rate, weight, 0.0, 2.0, breakpoints=[1.0])
    # u in [1,2]: e^{2(2-u)}; u in [0,1]: e^{2(1) - 2(1-u)} = e^{2u}
    expected = (math.exp(2) - 1) / 2 + (math.exp(2) - 1) / 2
    assert abs(value - expected) < 1e-9
    print("✅ Piecewise rate handled at the breakpoint")


def test_discounted_integral_rejects_reversed_window():
    try:
        discounted_integral(lambda u: u, lambda u: u, 2.0, 1.0)
    except ArgumentError:
        print("✅ Reversed window rejected")
        return
    raise AssertionError("reversed window accepted")


def main():
    """Run quadrature tests"""
    print("🚀 Quadrature Tests")
    print("=" * 40)
    tests = [test_integrate_with_kink, test_integrate_long_window, test_cell_grid_refines_at_breakpoints,
             test_cumulative_integral_exact_for_polynomials, test_discounted_integral_constant_rate,
             test_discounted_integral_piecewise_rate, test_discounted_integral_rejects_reversed_window]
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
    print("🎉 All quadrature tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
