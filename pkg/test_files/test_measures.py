#!/usr/bin/env python3
"""
Test grid measures, histogram estimates and the TV / W1 / rho_beta distances
"""

import math
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy import special

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.errors import ArgumentError
from entrancelab.measures import (GaussianMeasure, GridMeasure, LyapunovSpec, count_modes, density_estimate,
                                  gaussian_cell_masses, gaussian_rho_beta, read_measure_csv, rho_beta,
                                  sample_wasserstein1, sampling_noise, total_variation, wasserstein1,
                                  write_measure_csv)


def _point(cell: int, cells: int = 4) -> GridMeasure:
    masses = np.zeros(cells)
    masses[cell] = 1.0
    return GridMeasure(lower=(0.0,), upper=(float(cells),), shape=(cells,), masses=masses)


def test_histogram_cells_are_left_closed():
    print("🧪 Testing histogram estimate...")
    m = density_estimate(np.array([-0.5, 0.5, 0.5, 1.0]), -1.0, 1.0, 2)
    assert np.allclose(m.masses, [0.25, 0.5])
    assert abs(m.leak - 0.25) < 1e-15
    assert np.allclose(m.axes()[0], [-0.5, 0.5])
    assert np.allclose(m.densities, [0.25, 0.5])
    try:
        density_estimate(np.array([]), -1.0, 1.0, 2)
    except ArgumentError:
        print("✅ Upper edge leaks, empty samples rejected")
        return
    raise AssertionError("empty samples accepted")


def test_mass_and_grid_checks():
    try:
        GridMeasure(lower=(0.0,), upper=(1.0,), shape=(2,), masses=[0.5, 0.6])
    except ArgumentError:
        pass
    else:
        raise AssertionError("mass 1.1 accepted")
    try:
        total_variation(_point(0, 4), _point(0, 8))
    except ArgumentError:
        print("✅ Bad total mass and grid mismatch rejected")
        return
    raise AssertionError("mismatched grids accepted")


def test_total_variation_and_w1():
    """Dirac masses three cells apart: TV 1, W1 3"""
    print("🧪 Testing TV and W1...")
    a, b = _point(0), _point(3)
    assert total_variation(a, b) == 1.0
    assert total_variation(a, a) == 0.0
    assert abs(wasserstein1(a, b) - 3.0) < 1e-12
    assert abs(sample_wasserstein1(np.array([0.0, 1.0]), np.array([1.0, 2.0])) - 1.0) < 1e-12
    print("✅ TV = 1, W1 = 3")


def test_rho_beta_dominates_tv():
    spec = LyapunovSpec(beta=0.1)
    rng = np.random.default_rng(5)
    a = density_estimate(rng.normal(0.0, 1.0, 5000), -4.0, 4.0, 16)
    b = density_estimate(rng.normal(0.5, 1.0, 5000), -4.0, 4.0, 16)
    tv = total_variation(a, b)
    assert rho_beta(a, b, spec) >= 2 * tv - 1e-12
    almost_tv = rho_beta(a, b, LyapunovSpec(beta=1e-12))
    assert abs(almost_tv - 2 * tv) < 1e-9
    try:
        LyapunovSpec(beta=0.0)
    except ArgumentError:
        print(f"✅ rho_beta ≥ 2·TV = {2 * tv:.4f}")
        return
    raise AssertionError("beta = 0 accepted")


def test_rho_beta_dominates_w1():
    """For V = |x|², ρ_β ≥ 2√β·W₁ on histograms, leaky ones included"""
    print("🧪 Testing rho_beta against W1...")
    rng = np.random.default_rng(11)
    for shift in (0.1, 0.5, 2.0):
        a = density_estimate(rng.normal(0.0, 1.0, 5000), -4.0, 4.0, 16)
        b = density_estimate(rng.normal(shift, 1.5, 5000), -4.0, 4.0, 16)
        w1 = wasserstein1(a, b)
        for beta in (0.01, 0.1, 1.0):
            assert rho_beta(a, b, LyapunovSpec(beta=beta)) >= 2 * math.sqrt(beta) * w1 - 1e-9

    spec = LyapunovSpec(beta=0.1)
    box = dict(lower=(0.0,), upper=(4.0,), shape=(4,))
    near = GridMeasure(masses=[1e-3, 0.0, 0.0, 0.0], leak=0.999, **box)
    far = GridMeasure(masses=[0.0, 0.0, 0.0, 1e-3], leak=0.999, **box)
    # equal leaks cancel: only 1e-3 moves three cells
    assert abs(wasserstein1(near, far) - 3e-3) < 1e-12
    assert rho_beta(near, far, spec) >= 2 * math.sqrt(0.1) * wasserstein1(near, far)

    gone = GridMeasure(masses=np.zeros(4), leak=1.0, **box)
    assert wasserstein1(gone, gone) < 1e-15
    # leak sits at the boundary proxy x = 0, the point mass at 3.5
    w1 = wasserstein1(gone, _point(3))
    assert math.isfinite(w1) and abs(w1 - 3.5) < 1e-12
    assert rho_beta(gone, _point(3), spec) >= 2 * math.sqrt(0.1) * w1
    print(f"✅ 2√β·W₁ below ρ_β, fully leaked W₁ = {w1:.1f}")


def test_leak_weighted_at_boundary():
    """Leaked mass is weighted with V at the box edge nearest the origin"""
    spec = LyapunovSpec(beta=1.0)
    inside = GridMeasure(lower=(-2.0,), upper=(2.0,), shape=(2,), masses=[0.5, 0.5])
    leaky = GridMeasure(lower=(-2.0,), upper=(2.0,), shape=(2,), masses=[0.5, 0.0], leak=0.5)
    # cell centers ±1 have weight 2; boundary proxy ±2 has weight 5
    assert abs(rho_beta(inside, leaky, spec) - (2 * 0.5 + 5 * 0.5)) < 1e-12
    print("✅ Leak weighted at the boundary proxy")


def test_gaussian_rho_beta():
    print("🧪 Testing exact Gaussian rho_beta...")
    spec = LyapunovSpec(beta=1e-12)
    g0, g1 = GaussianMeasure.scalar(0.0, 1.0), GaussianMeasure.scalar(1.0, 1.0)
    assert gaussian_rho_beta(g0, g0, spec) == 0.0
    expected = 2 * (2 * special.ndtr(0.5) - 1)
    value = gaussian_rho_beta(g0, g1, spec)
    assert abs(value - expected) < 1e-8
    weighted = gaussian_rho_beta(g0, g1, LyapunovSpec(beta=0.1))
    assert weighted > value
    print(f"✅ ∫|φ₀ − φ₁| = {value:.10f}")


def test_gaussian_cell_masses():
    m = gaussian_cell_masses(GaussianMeasure.scalar(0.5, 0.25), -4.0, 4.0, 64)
    assert abs(m.masses.sum() + m.leak - 1.0) < 1e-12
    assert m.leak < 1e-12
    assert abs(float(m.mean()[0]) - 0.5) < 1e-3
    print("✅ Cell masses of N(0.5, 0.25)")


def test_count_modes():
    g_left = gaussian_cell_masses(GaussianMeasure.scalar(-2.0, 0.25), -4.0, 4.0, 64)
    g_right = gaussian_cell_masses(GaussianMeasure.scalar(2.0, 0.25), -4.0, 4.0, 64)
    mixture = GridMeasure(lower=(-4.0,), upper=(4.0,), shape=(64,),
                          masses=0.5 * (g_left.masses + g_right.masses),
                          leak=0.5 * (g_left.leak + g_right.leak))
    single = gaussian_cell_masses(GaussianMeasure.scalar(0.0, 1.0), -4.0, 4.0, 64)
    assert count_modes(mixture, smoothing=3) == 2
    assert count_modes(single, smoothing=3) == 1
    print("✅ Bimodal and unimodal densities told apart")


def test_sampling_noise_predicts_histogram_spread():
    """Two independent histograms differ by about the predicted noise"""
    print("🧪 Testing sampling noise estimate...")
    uniform = GridMeasure(lower=(0.0,), upper=(4.0,), shape=(4,), masses=[0.25] * 4)
    n = 1000
    assert abs(sampling_noise(uniform, n) - 2 * math.sqrt(0.75 / (math.pi * n))) < 1e-15

    truth = gaussian_cell_masses(GaussianMeasure.scalar(0.0, 1.0), -4.0, 4.0, 16)
    rng = np.random.default_rng(11)
    a = density_estimate(rng.normal(size=20000), -4.0, 4.0, 16)
    b = density_estimate(rng.normal(size=20000), -4.0, 4.0, 16)
    noise = sampling_noise(truth, 20000)
    assert total_variation(a, b) < 3 * noise
    spec = LyapunovSpec(beta=0.1)
    assert sampling_noise(truth, 20000, spec) > 2 * noise
    print(f"✅ TV {total_variation(a, b):.4f} within 3× predicted noise {noise:.4f}")


def test_measure_csv():
    m = gaussian_cell_masses(GaussianMeasure.scalar(0.0, 2.0), -3.0, 3.0, 12)
    with tempfile.TemporaryDirectory() as tmp:
        path = write_measure_csv(m, Path(tmp) / "m.csv")
        assert path.with_suffix(".json").exists()
        back = read_measure_csv(path)
    assert back.same_grid(m)
    assert np.array_equal(back.masses, m.masses)
    assert back.leak == m.leak
    print("✅ Measure CSV written with repr floats")


def main():
    """Run measure tests"""
    print("🚀 Measure Tests")
    print("=" * 40)
    tests = [test_histogram_cells_are_left_closed, test_mass_and_grid_checks, test_total_variation_and_w1,
             test_rho_beta_dominates_tv, test_rho_beta_dominates_w1, test_leak_weighted_at_boundary,
             test_gaussian_rho_beta, test_gaussian_cell_masses, test_count_modes,
             test_sampling_noise_predicts_histogram_spread, test_measure_csv]
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
    print("🎉 All measure tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
