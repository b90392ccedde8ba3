#!/usr/bin/env python3
"""
Test the torus rotation, the reparameterized process and cylinder measures
"""

import math
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.catalog import quasi_double_well, quasi_nondissipative
from entrancelab.config import MeasureSettings
from entrancelab.errors import ArgumentError, ConvergenceError
from entrancelab.measures import GaussianMeasure, gaussian_cell_masses
from entrancelab.quasiperiodic import (CylinderMeasure, TorusPoint, birkhoff_average, cylinder_invariant,
                                       cylinder_total_variation, k_simulate, mu_tilde, orbit_cell_counts,
                                       push_cylinder, screen_torus_dissipation, torus_distance, torus_rotate,
                                       write_cylinder_csv)
from entrancelab.simulator import EnsembleRunner, PointMass, SimConfig

PERIODS = (2 * math.pi, 2 * math.pi / math.sqrt(2))


def _cells(means):
    return [gaussian_cell_masses(GaussianMeasure.scalar(m, 0.5), -4.0, 4.0, 16) for m in means]


def test_torus_points_and_distance():
    print("🧪 Testing torus geometry...")
    p = TorusPoint(-0.1, PERIODS[1] + 0.3, PERIODS)
    assert abs(p.r1 - (PERIODS[0] - 0.1)) < 1e-12 and abs(p.r2 - 0.3) < 1e-12
    q = torus_rotate(p, 0.2)
    assert abs(q.r1 - 0.1) < 1e-12 and abs(q.r2 - 0.5) < 1e-12
    # wraps around the first circle
    assert abs(torus_distance(p, q) - 0.4) < 1e-12
    try:
        torus_distance(p, TorusPoint(0.0, 0.0, (1.0, 1.0)))
    except ArgumentError:
        print("✅ Reduction, rotation and the wrapped metric")
        return
    raise AssertionError("points on different tori compared")


def test_orbit_visits_every_cell():
    counts = orbit_cell_counts(TorusPoint(0.0, 0.0, PERIODS), 1.0, 10_000, (20, 20))
    assert counts.sum() == 10_000
    assert counts.min() >= 1
    print(f"✅ Orbit visits all 400 cells (min {counts.min()}, max {counts.max()})")


def test_torus_screen():
    """The torus average of α̃ is −1 for the weakly dissipative parent"""
    average = screen_torus_dissipation(quasi_nondissipative())
    assert abs(average + 1.0) < 1e-6
    print(f"✅ Torus average {average:.6f}")


def test_k_simulate_uses_shifted_coefficients():
    parent = quasi_double_well()
    cfg = SimConfig(step=0.01, paths=200, block_size=200, seed=9)
    lifted = k_simulate(parent, 0.5, 1.0, 0.0, 0.3, 1.0, cfg)
    direct = EnsembleRunner(cfg).push(parent.at(0.5, 1.0), 0.0, PointMass((0.3,)), 1.0, 0)
    assert np.array_equal(lifted.samples, direct.samples)
    other = k_simulate(parent, 1.5, 1.0, 0.0, 0.3, 1.0, cfg)
    assert not np.array_equal(lifted.samples, other.samples)
    print("✅ K^{r1,r2} runs b̃(v + r1, v + r2, ·)")


def test_mu_tilde_burn_in():
    print("🧪 Testing μ̃ burn-in doubling...")
    parent = quasi_double_well()
    cfg = SimConfig(step=0.01, paths=20000, block_size=5000, seed=3)
    grid = MeasureSettings(tolerance=0.1)
    measure = mu_tilde(parent, 1.0, 2.0, 4.0, cfg, grid)
    assert abs(measure.masses.sum() + measure.leak - 1.0) < 1e-12
    small = SimConfig(step=0.01, paths=500, block_size=500, seed=3)
    try:
        mu_tilde(parent, 1.0, 2.0, 1.0, small, MeasureSettings(tolerance=1e-9), cell=(2, 5))
    except ConvergenceError as e:
        assert e.cell == (2, 5)
        print(f"✅ Converged at tolerance 0.1, exhausted doubling reported for cell {e.cell}")
        return
    raise AssertionError("impossible tolerance reached")


def test_cylinder_measure_validation():
    cells = _cells([-1.0, 0.0, 1.0, 2.0])
    cylinder = CylinderMeasure(periods=PERIODS, weights=np.full((2, 2), 0.25), cells=cells)
    assert cylinder.shape == (2, 2)
    centers = cylinder.torus_centers()
    at_center = cylinder.interpolate(centers[0][1], centers[1][0])
    assert np.allclose(at_center.masses, cylinder.cell(1, 0).masses)
    marginal = cylinder.spatial_marginal()
    assert np.allclose(marginal.masses, 0.25 * sum(c.masses for c in cells))
    inside = sum(c.masses.sum() for c in cells) / 4
    assert abs(cylinder.expectation(lambda r1, r2, x: np.ones_like(x)) - inside) < 1e-12
    assert cylinder_total_variation(cylinder, cylinder) == 0.0
    for bad in (lambda: CylinderMeasure(PERIODS, np.full((2, 2), 0.3), cells),
                lambda: CylinderMeasure(PERIODS, np.full((1, 2), 0.5), cells)):
        try:
            bad()
        except ArgumentError:
            continue
        raise AssertionError("inconsistent cylinder accepted")
    print("✅ Cylinder marginals, interpolation and validation")


def test_cylinder_short_push_nearly_invariant():
    """A short push of the estimated cylinder measure moves little mass"""
    print("🧪 Testing cylinder invariance over a short push...")
    parent = quasi_double_well()
    cfg = SimConfig(step=0.01, paths=5000, block_size=5000, seed=5)
    grid = MeasureSettings(tolerance=0.1)
    cylinder = cylinder_invariant(parent, (2, 2), cfg, grid, burn=4.0)
    pushed = push_cylinder(parent, cylinder, 0.05, cfg, grid)
    assert np.array_equal(pushed.weights, cylinder.weights)
    tv = cylinder_total_variation(cylinder, pushed)
    assert tv < 0.15, f"TV {tv}"
    with tempfile.TemporaryDirectory() as tmp:
        path = write_cylinder_csv(cylinder, Path(tmp) / "cylinder.csv")
        rows = path.read_text().strip().splitlines()
    assert rows[0] == "r1_cell,r2_cell,x_cell,mass"
    assert len(rows) == 1 + 4 * grid.resolution
    try:
        push_cylinder(parent, cylinder, -1.0, cfg, grid)
    except ArgumentError:
        print(f"✅ TV after pushing for 0.05: {tv:.4f}")
        return
    raise AssertionError("negative push time accepted")


def test_rotation_equidistribution():
    """Time fraction spent in one of ten r₁ slices is 1/10"""
    parent = quasi_double_well()
    slice_of = lambda r1, r2, x: ((r1 * 10 // parent.periods[0]) == 3).astype(float)
    cfg = SimConfig(step=0.01)
    fraction = birkhoff_average(parent, slice_of, (0.0, 0.0, 0.0), 10_000.0, cfg, torus_only=True)
    assert abs(fraction - 0.1) <= 0.02
    try:
        birkhoff_average(parent, slice_of, (0.0, 0.0, 0.0), 0.0, cfg)
    except ArgumentError:
        print(f"✅ Slice fraction {fraction:.4f}")
        return
    raise AssertionError("T = 0 accepted")


def main():
    """Run quasi-periodic tests"""
    print("🚀 Quasi-Periodic Tests")
    print("=" * 40)
    tests = [test_torus_points_and_distance, test_orbit_visits_every_cell, test_torus_screen,
             test_k_simulate_uses_shifted_coefficients, test_mu_tilde_burn_in, test_cylinder_measure_validation,
             test_cylinder_short_push_nearly_invariant, test_rotation_equidistribution]
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
    print("🎉 All quasi-periodic tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
