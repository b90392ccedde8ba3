#!/usr/bin/env python3
"""
Test the one-step factor, the finite-chain oracle and partition certificates
"""

import math
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.contraction import (FiniteChain, ScheduleEntry, analyze_partition, certify, ct_constant,
                                     entrance_error_bound, expanding_partition_schedule, expanding_threshold_R,
                                     fit_rate, one_step_zeta, random_chain, read_schedule_csv, select_beta,
                                     telescoping_check, uniform_certificate, varpi_threshold,
                                     verify_lemma_finite_chain)
from entrancelab.errors import ArgumentError, ConfigurationError, PreconditionError


def test_one_step_zeta_branches():
    print("🧪 Testing one-step factor...")
    # minorization branch 0.75, Lyapunov branch 3.75/4.5
    assert abs(one_step_zeta(0.5, 1.0, 0.5, 10.0, 0.25) - 3.75 / 4.5) < 1e-15
    assert abs(one_step_zeta(0.5, 1.0, 0.9, 10.0, 0.0) - 1.0) < 1e-15
    for args in ((0.5, 1.0, 1.0, 10.0, 0.1), (0.5, 1.0, 0.5, 0.0, 0.1), (0.5, 1.0, 0.5, 10.0, -0.1)):
        try:
            one_step_zeta(*args)
        except ArgumentError:
            continue
        raise AssertionError(f"{args} accepted")
    print("✅ ζ is the larger branch, bad arguments rejected")


def test_communicating_classes():
    P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    chain = FiniteChain(P=P, V=np.array([0.0, 1.0, 2.0]))
    assert chain.communicating_classes() == [[0, 1], [2]]
    try:
        FiniteChain(P=np.array([[0.5, 0.4], [0.5, 0.5]]), V=np.zeros(2))
    except ArgumentError:
        print("✅ Classes found, substochastic rows rejected")
        return
    raise AssertionError("substochastic kernel accepted")


def test_lemma_on_random_chains():
    """No random pair of laws contracts worse than ζ"""
    print("🧪 Testing contraction on random 5-state chains...")
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        chain = random_chain(5, rng)
        constants = chain.derived_constants(R=6.0, gamma=0.5)
        report = verify_lemma_finite_chain(chain, constants, beta=0.1, trials=1000, rng=rng)
        assert report.passed, f"{report.violations} violations at zeta={report.zeta}"
        assert report.max_ratio <= report.zeta + 1e-12
        assert abs(report.zeta - max(report.branches.values())) < 1e-15
        worst = max(worst, report.max_ratio / report.zeta)
    print(f"✅ 100 chains × 1000 pairs, worst ratio/ζ = {worst:.4f}")


def test_lemma_hypotheses_checked():
    rng = np.random.default_rng(3)
    chain = random_chain(4, rng)
    constants = chain.derived_constants(R=10.0, gamma=0.5)
    weak = constants.__class__(constants.gamma, constants.K / 2 - 1.0, constants.eta, constants.R, constants.nu)
    try:
        verify_lemma_finite_chain(chain, weak, beta=0.1)
    except PreconditionError as e:
        assert e.inequality == "PV <= gamma V + K"
        print(f"✅ Violated drift hypothesis named: {e.inequality}")
        return
    raise AssertionError("understated K accepted")


def test_telescoping_product():
    print("🧪 Testing telescoping over several kernels...")
    rng = np.random.default_rng(7)
    for _ in range(20):
        V = rng.uniform(0.0, 10.0, size=5)
        steps = []
        for _ in range(10):
            chain = random_chain(5, rng, V=V)
            steps.append((chain, chain.derived_constants(R=10.0, gamma=0.5)))
        report = telescoping_check(steps, beta=0.1, trials=500, rng=rng)
        assert report.steps == 10
        assert report.passed, f"ratio {report.max_ratio} above product {report.product}"
    other = random_chain(5, rng)
    try:
        telescoping_check(steps + [(other, other.derived_constants(R=10.0, gamma=0.5))], beta=0.1)
    except ArgumentError:
        print(f"✅ Multi-step ratio {report.max_ratio:.4f} ≤ ∏ζ = {report.product:.4f}")
        return
    raise AssertionError("kernels with different V accepted")


def test_partition_validation():
    good = [ScheduleEntry(0.0, -1.0, 0.5, 1.0, 0.1), ScheduleEntry(-1.0, -2.0, 0.5, 1.0, 0.0)]
    a = analyze_partition(good, 0.05)
    assert a.indices(2) == [1]
    assert list(a.counts) == [1, 1]
    gap = [good[0], ScheduleEntry(-1.5, -2.0, 0.5, 1.0, 0.0)]
    for schedule in ([], gap):
        try:
            analyze_partition(schedule, 0.05)
        except ArgumentError:
            continue
        raise AssertionError("bad schedule accepted")
    print("✅ Empty and non-contiguous schedules rejected")


def test_expanding_partition_certificate():
    """The sin⁺(√|t|) partition contracts with R = 41, δ = 0.005, ϖ = 0.5"""
    print("🧪 Testing the expanding-window certificate...")
    schedule = expanding_partition_schedule(k_max=6, eta=0.01)
    assert len(schedule) == sum(4 * k + 2 for k in range(1, 7))
    assert expanding_threshold_R() < 41.0
    cert = certify(schedule, delta=0.005, R=41.0, varpi=0.5)
    assert cert.conditions.passed
    assert 0.0 < cert.r < 1.0
    assert cert.beta <= cert.selection.beta2 + 1e-15
    assert abs(varpi_threshold(cert.analysis.gamma, 10.0, 41.0, cert.gamma_star) - 20.0 / 41.0) < 1e-6
    C = ct_constant(cert, schedule, schedule[0].t_upper)
    assert math.isfinite(C) and C >= 1.0
    bound = entrance_error_bound(cert, schedule, schedule[0].t_upper, 1.0, 2.0, 0.5, 3)
    assert math.isclose(bound, C * 4.5 * cert.r ** 3, rel_tol=1e-12)
    assert entrance_error_bound(cert, schedule, schedule[0].t_upper, 1.0, 2.0, 0.5, 4) < bound
    try:
        ct_constant(cert, schedule, schedule[-1].t_lower - 1.0)
    except ArgumentError:
        pass
    else:
        raise AssertionError("t below the horizon accepted")
    try:
        certify(schedule, delta=0.005, R=41.0, varpi=0.4)
    except PreconditionError as e:
        assert "varpi" in e.inequality
        print(f"✅ r = {cert.r:.9f}, ϖ = 0.4 rejected")
        return
    raise AssertionError("varpi below threshold accepted")


def test_select_beta_precondition():
    for varpi in (0.0, 1.0):
        try:
            select_beta(gamma=0.1, K=10.0, R=41.0, delta=0.005, varpi=varpi, gamma_star=0.3)
        except PreconditionError as e:
            assert e.inequality == "0 < varpi < 1"
            continue
        raise AssertionError(f"varpi={varpi} accepted")
    try:
        select_beta(gamma=0.1, K=10.0, R=41.0, delta=0.005, varpi=0.5, gamma_star=0.6)
    except PreconditionError as e:
        assert e.inequality == "gamma* < 1 - 2K/R"
        print("✅ γ* ≥ 1 − 2K/R rejected")
        return
    raise AssertionError("gamma* too large accepted")


def test_uniform_certificate():
    cert = uniform_certificate(delta_t=2.0, gamma=0.5, h=1.0, eta=0.5, R=10.0)
    assert cert.beta == 0.25
    assert abs(cert.zeta - 3.75 / 4.5) < 1e-15
    assert abs(cert.rate + math.log(3.75 / 4.5) / 2.0) < 1e-15
    assert abs(cert.C - 1.5) < 1e-12
    try:
        uniform_certificate(delta_t=2.0, gamma=0.5, h=1.0, eta=0.5, R=3.0)
    except PreconditionError:
        print(f"✅ Window rate {cert.rate:.6f}, small R rejected")
        return
    raise AssertionError("R below 2h/(1-gamma) accepted")


def test_fit_rate_recovers_stretched_exponential():
    print("🧪 Testing stretched-exponential fit...")
    dt = np.linspace(1.0, 10.0, 19)
    points = list(zip(dt, 2.0 * np.exp(-0.3 * dt ** 1.5)))
    fit = fit_rate(points)
    assert abs(fit.alpha - 1.5) < 1e-6
    assert abs(fit.rate - 0.3) < 1e-6
    assert abs(fit.prefactor - 2.0) < 1e-5
    logged = fit_rate([(t, math.log(2.0) - 0.3 * t ** 1.5) for t in dt], log_values=True)
    assert abs(logged.alpha - 1.5) < 1e-6
    try:
        fit_rate(points[:4])
    except ArgumentError:
        print(f"✅ α = {fit.alpha:.3f}, λ = {fit.rate:.4f}")
        return
    raise AssertionError("four points accepted")


def test_schedule_csv_errors():
    with tempfile.TemporaryDirectory() as tmp:
        missing = Path(tmp) / "missing.csv"
        missing.write_text("t_upper,t_lower,gamma,K\n0,-1,0.5,1\n")
        bad_row = Path(tmp) / "bad.csv"
        bad_row.write_text("t_upper,t_lower,gamma,K,eta\n0,-1,0.5,1,0.1\n-1,-2,oops,1,0.1\n")
        try:
            read_schedule_csv(missing)
        except ConfigurationError as e:
            assert e.line == 1
        else:
            raise AssertionError("missing eta column accepted")
        try:
            read_schedule_csv(bad_row)
        except ConfigurationError as e:
            assert e.line == 3 and e.field == "schedule"
            print("✅ Schedule CSV errors carry line numbers")
            return
    raise AssertionError("unparsable row accepted")


def main():
    """Run contraction tests"""
    print("🚀 Contraction Tests")
    print("=" * 40)
    tests = [test_one_step_zeta_branches, test_communicating_classes, test_lemma_on_random_chains,
             test_lemma_hypotheses_checked, test_telescoping_product, test_partition_validation,
             test_expanding_partition_certificate, test_select_beta_precondition, test_uniform_certificate,
             test_fit_rate_recovers_stretched_exponential, test_schedule_csv_errors]
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
    print("🎉 All contraction tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
