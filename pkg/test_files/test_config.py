#!/usr/bin/env python3
"""
Test experiment configuration, error types and inline expressions
"""

import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add the project root to path
sys.path.append(str(Path(__file__).parent.parent))

from entrancelab.config import ExperimentConfig, OUTPUT_DIR_VARIABLE, load_experiment_config, read_config_tree
from entrancelab.errors import (ConfigurationError, LabError, NumericError, PreconditionError,
                                SimulationBlowUp)
from entrancelab.expressions import parse_expression


def test_defaults_are_valid():
    """Default configuration validates and records seed 0"""
    print("🧪 Testing configuration defaults...")
    config = ExperimentConfig()
    assert config.validate() == []
    assert config.seed == 0
    defaults = config.defaults()
    assert defaults["simulation"]["seed"] == 0
    assert defaults["measure"]["resolution"] == 16
    assert defaults["fp"]["spacing"] == 0.01
    print("✅ Defaults valid, seed 0 recorded")


def test_quasi_needs_periods():
    """The quasi command without periods is a field diagnostic"""
    print("🧪 Testing missing periods for quasi...")
    try:
        load_experiment_config(overrides={"command": "quasi"})
    except ConfigurationError as e:
        assert e.field == "parameters.periods"
        assert "Invalid experiment configuration" in str(e)
        print(f"✅ Rejected: {e}")
        return
    raise AssertionError("quasi without periods was accepted")


def test_quasi_with_periods():
    config = load_experiment_config(overrides={"command": "quasi",
                                               "parameters": {"periods": [6.283185307179586, 4.442882938158366]}})
    assert config.command == "quasi"
    assert len(config.parameters["periods"]) == 2
    print("✅ Periods accepted")


def test_unknown_setting_rejected():
    print("🧪 Testing unknown settings...")
    for tree, field in (({"simulation": {"nonsense": 1}}, "simulation.nonsense"),
                        ({"colour": "blue"}, "colour")):
        try:
            ExperimentConfig().update(tree)
        except ConfigurationError as e:
            assert e.field == field
            continue
        raise AssertionError(f"{tree} was accepted")
    print("✅ Unknown fields rejected")


def test_bad_scheme_reported():
    config = ExperimentConfig().update({"simulation": {"scheme": "implicit"}})
    errors = config.validate()
    assert any(e.startswith("simulation.scheme") for e in errors)
    print(f"✅ Bad scheme reported: {errors[0]}")


def test_simulate_needs_example():
    config = ExperimentConfig().update({"command": "simulate"})
    errors = config.validate()
    assert any(e.startswith("example:") for e in errors)
    print("✅ simulate without example rejected")


def test_json_syntax_error_has_line():
    """JSON syntax errors carry the line number"""
    print("🧪 Testing JSON syntax diagnostics...")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "broken.json"
        path.write_text('{\n  "command": "entrance",\n  "example": \n}\n')
        try:
            read_config_tree(path)
        except ConfigurationError as e:
            assert e.line == 4
            print(f"✅ Syntax error located: {e}")
            return
    raise AssertionError("broken JSON was accepted")


def test_file_then_overrides():
    """Flags override values from the configuration file"""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "lab.json"
        path.write_text(json.dumps({"command": "entrance", "example": "ou",
                                    "simulation": {"seed": 3, "paths": 500}}))
        config = load_experiment_config(path, {"simulation": {"seed": 7}})
    assert config.example == "ou"
    assert config.seed == 7
    assert config.simulation.paths == 500
    sim = config.simulation.to_sim_config()
    assert sim.seed == 7 and sim.paths == 500
    print("✅ File and overrides merged")


def test_output_dir_from_environment():
    previous = os.environ.get(OUTPUT_DIR_VARIABLE)
    os.environ[OUTPUT_DIR_VARIABLE] = "custom_output"
    try:
        assert ExperimentConfig.from_environment().output_dir == "custom_output"
    finally:
        if previous is None:
            del os.environ[OUTPUT_DIR_VARIABLE]
        else:
            os.environ[OUTPUT_DIR_VARIABLE] = previous
    assert ExperimentConfig().output_dir == "lab_output"
    print("✅ Output directory override read from environment")


def test_error_hierarchy():
    print("🧪 Testing error types...")
    config_error = ConfigurationError("bad", field="measure.beta", line=3)
    assert isinstance(config_error, ValueError) and isinstance(config_error, LabError)
    assert config_error.module == "config"
    blow_up = SimulationBlowUp(time=0.5, block=2, threshold=1e8)
    assert isinstance(blow_up, NumericError)
    assert blow_up.time == 0.5 and blow_up.block == 2
    precondition = PreconditionError("gamma* < 1 - 2K/R", "gamma*=0.99")
    assert precondition.inequality == "gamma* < 1 - 2K/R"
    assert "gamma*=0.99" in str(precondition)
    print("✅ Error hierarchy consistent")


def test_expression_evaluation():
    """Inline drift expressions evaluate element-wise"""
    print("🧪 Testing inline expressions...")
    expr = parse_expression("x - pos(sin(t))*x^3", {"t", "x"})
    value = expr(t=np.pi / 2, x=np.array([2.0, -1.0]))
    assert np.allclose(value, [-6.0, 0.0])
    zero = expr(t=-np.pi / 2, x=np.array([2.0]))
    assert np.allclose(zero, [2.0])
    assert expr.variables == frozenset({"t", "x"})
    print("✅ x - sin⁺(t)x³ evaluated")


def test_expression_whitelist():
    for source in ("y + 1", "__import__('os')", "x if t else 1", "x[0]", "'a' + x"):
        try:
            parse_expression(source, {"t", "x"})
        except ConfigurationError:
            continue
        raise AssertionError(f"'{source}' was accepted")
    expr = parse_expression("c * x", {"x", "c"})
    try:
        expr(x=1.0)
    except ConfigurationError:
        print("✅ Disallowed constructs and missing values rejected")
        return
    raise AssertionError("missing parameter value was accepted")


def main():
    """Run configuration tests"""
    print("🚀 Configuration Tests")
    print("=" * 40)
    tests = [test_defaults_are_valid, test_quasi_needs_periods, test_quasi_with_periods,
             test_unknown_setting_rejected, test_bad_scheme_reported, test_simulate_needs_example,
             test_json_syntax_error_has_line, test_file_then_overrides, test_output_dir_from_environment,
             test_error_hierarchy, test_expression_evaluation, test_expression_whitelist]
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
    print("🎉 All configuration tests passed!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
