#!/usr/bin/env python3
"""
Test the command-line runner: flag merging, exit codes and artifacts
"""

import io
import sys
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.cli import (EXIT_ASSERTION, EXIT_CONFIG, EXIT_ERROR, EXIT_PASS, build_parser, main,
                             overrides_from_args)
from entrancelab.contraction import ScheduleEntry, expanding_partition_schedule, write_schedule_csv


def _quiet(argv):
    """Run main with captured output; returns (code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def test_flags_become_overrides():
    print("🧪 Testing flag translation...")
    args = build_parser().parse_args(["--seed", "5", "--paths", "100", "entrance", "--example", "ou",
                                      "--t", "0", "--levels", "3"])
    tree = overrides_from_args(args)
    assert tree["command"] == "entrance" and tree["example"] == "ou"
    assert tree["simulation"] == {"seed": 5, "paths": 100}
    assert tree["parameters"] == {"t": 0.0, "levels": 3}
    run_args = build_parser().parse_args(["examples", "run", "ou"])
    run_tree = overrides_from_args(run_args)
    assert run_tree["example"] == "ou" and run_tree["parameters"] == {"action": "run"}
    print("✅ Globals to simulation, the rest to parameters")


def test_examples_list():
    with tempfile.TemporaryDirectory() as tmp:
        code, out, _ = _quiet(["--output-dir", tmp, "examples", "list"])
    assert code == EXIT_PASS
    assert "bpsv" in out and "[quasi]" in out
    print("✅ Catalog listed")


def test_quasi_without_periods_is_config_error():
    with tempfile.TemporaryDirectory() as tmp:
        code, _, err = _quiet(["--output-dir", tmp, "quasi"])
    assert code == EXIT_CONFIG
    assert err.startswith("config: parameters.periods")
    print(f"✅ Exit {code}: {err.strip()[:60]}...")


def test_contract_certificate():
    """The expanding-window schedule certifies from a CSV file"""
    print("🧪 Testing contract command...")
    with tempfile.TemporaryDirectory() as tmp:
        schedule = write_schedule_csv(expanding_partition_schedule(), Path(tmp) / "schedule.csv")
        base = ["--output-dir", tmp, "contract", "--schedule", str(schedule), "--delta", "0.005", "--R", "41"]
        code, _, _ = _quiet(base)
        assert code == EXIT_PASS
        certificate = Path(tmp) / "contract" / "certificate.csv"
        assert certificate.exists()
        report = (Path(tmp) / "contract" / "report.txt").read_text()
        assert "PASS contraction_rate" in report and "result = PASS" in report

        code, _, err = _quiet(base + ["--varpi", "0.4"])
        assert code == EXIT_ASSERTION
        assert "condition.varpi" in err
    print("✅ Certificate written, low ϖ fails with exit 1")


def test_lab_error_names_module():
    with tempfile.TemporaryDirectory() as tmp:
        broken = [ScheduleEntry(0.0, -1.0, 0.5, 1.0, 0.1), ScheduleEntry(-2.0, -3.0, 0.5, 1.0, 0.1)]
        schedule = write_schedule_csv(broken, Path(tmp) / "broken.csv")
        code, _, err = _quiet(["--output-dir", tmp, "contract", "--schedule", str(schedule),
                               "--delta", "0.05", "--R", "10"])
        assert code == EXIT_ERROR
        assert err.startswith("contraction:")
        code, _, err = _quiet(["--output-dir", tmp, "contract", "--delta", "0.05", "--R", "10"])
        assert code == EXIT_CONFIG and "parameters.schedule" in err
    print("✅ Lab errors exit 3 with the failing module")


def test_quasi_example_rejected_by_scalar_command():
    with tempfile.TemporaryDirectory() as tmp:
        code, _, err = _quiet(["--output-dir", tmp, "density", "--example", "quasi_double_well"])
    assert code == EXIT_CONFIG and "quasi" in err
    print("✅ Quasi-periodic parent refused by the density command")


def test_examples_run_suite():
    print("🧪 Testing an oracle suite end to end...")
    with tempfile.TemporaryDirectory() as tmp:
        code, _, _ = _quiet(["--output-dir", tmp, "examples", "run", "quasi_nondissipative"])
        report = (Path(tmp) / "quasi_nondissipative" / "report.txt").read_text()
        bad, _, _ = _quiet(["--output-dir", tmp, "examples", "run", "lorenz"])
    assert code == EXIT_PASS
    assert "PASS torus_integral" in report and "truth." in report
    assert bad == EXIT_CONFIG
    print("✅ Suite report written, unknown example rejected")


def main_tests():
    """Run CLI tests"""
    print("🚀 CLI Tests")
    print("=" * 40)
    tests = [test_flags_become_overrides, test_examples_list, test_quasi_without_periods_is_config_error,
             test_contract_certificate, test_lab_error_names_module,
             test_quasi_example_rejected_by_scalar_command, test_examples_run_suite]
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
    print("🎉 All CLI tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main_tests())
