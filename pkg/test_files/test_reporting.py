#!/usr/bin/env python3
"""
Test experiment reports and CSV artifacts
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.errors import ArgumentError
from entrancelab.reporting import ExperimentReport, read_rows, write_curve_csv, write_mapping_csv


def test_report_sections():
    print("🧪 Testing report rendering...")
    report = ExperimentReport(title="entrance", inputs={"example": "ou", "seed": 0},
                              defaults={"measure": {"beta": 0.1}})
    report.constant("m_t", 0.5)
    assert report.check("variance", np.float64(0.49), 0.5, True, "PAPER", 0.03)
    assert not report.check("converged", [0.2, 0.1], "< 0.05", False, "DERIVED", 0.05)
    text = report.render()
    for section in ("[inputs]", "[defaults]", "[constants]", "[assertions]", "[artifacts]"):
        assert section in text
    assert "PASS variance: value=0.49 expected=0.5 tolerance=0.03 provenance=PAPER" in text
    assert "FAIL converged: value=[0.2, 0.1]" in text
    assert text.endswith("result = FAIL\n")
    assert report.failures() == ["converged"]
    print("✅ Five sections, provenance and result line")


def test_unknown_provenance_rejected():
    report = ExperimentReport(title="x")
    try:
        report.check("value", 1.0, 1.0, True, "GUESS")
    except ArgumentError:
        print("✅ Unknown provenance tag rejected")
        return
    raise AssertionError("provenance GUESS accepted")


def test_csv_floats_use_repr():
    """Floats are written with repr so a replay compares bit for bit"""
    with tempfile.TemporaryDirectory() as tmp:
        curve = write_curve_csv([(1.0, 0.1 + 0.2), (2.0, 1e-300)], Path(tmp) / "curve.csv")
        header, rows = read_rows(curve)
        assert header == ["gap", "rho_beta"]
        assert float(rows[0][1]) == 0.1 + 0.2
        assert rows[1][1] == "1e-300"
        report = ExperimentReport(title="x")
        mapping = write_mapping_csv({"r": 0.5, "beta": 1e-4}, report.artifact(Path(tmp) / "nested" / "c.csv"))
        _, rows = read_rows(mapping)
        assert [row[0] for row in rows] == ["beta", "r"]
        written = report.write(Path(tmp) / "report.txt")
        assert str(mapping) in written.read_text()
        empty = Path(tmp) / "empty.csv"
        empty.write_text("")
        try:
            read_rows(empty)
        except ArgumentError:
            print("✅ repr floats, sorted mappings, empty CSV rejected")
            return
    raise AssertionError("empty CSV accepted")


def main():
    """Run reporting tests"""
    print("🚀 Reporting Tests")
    print("=" * 40)
    tests = [test_report_sections, test_unknown_provenance_rejected, test_csv_floats_use_repr]
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
    print("🎉 All reporting tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
