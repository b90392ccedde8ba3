"""
Structured text reports and CSV artifacts.

A report has five sections: inputs, defaults, constants, assertions and
artifacts. Every assertion records the measured value, the expected value,
the tolerance and the provenance of the expectation (PAPER, DERIVED or
TRIVIAL). Floats are written with repr so replays are bit-identical.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError
from .simulator import Ensemble, Trajectory

logger = logging.getLogger(__name__)

PROVENANCE = ("PAPER", "DERIVED", "TRIVIAL")


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True, default=str)
    return str(value)


@dataclass
class Assertion:
    """One checked claim with its tolerance and provenance"""
    name: str
    value: Any
    expected: Any
    tolerance: Optional[float]
    provenance: str
    passed: bool

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tol = "-" if self.tolerance is None else _format(self.tolerance)
        return (f"{status} {self.name}: value={_format(self.value)} expected={_format(self.expected)} "
                f"tolerance={tol} provenance={self.provenance}")


@dataclass
class ExperimentReport:
    """Inputs, defaults, derived constants, assertions and artifacts of one run"""
    title: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    defaults: Dict[str, Any] = field(default_factory=dict)
    constants: Dict[str, Any] = field(default_factory=dict)
    assertions: List[Assertion] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    def constant(self, name: str, value: Any):
        self.constants[name] = value

    def check(self, name: str, value: Any, expected: Any, passed: bool, provenance: str,
              tolerance: Optional[float] = None) -> bool:
        """Record an assertion and return whether it passed."""
        if provenance not in PROVENANCE:
            raise ArgumentError(f"unknown provenance tag '{provenance}'")
        self.assertions.append(Assertion(name, value, expected, tolerance, provenance, bool(passed)))
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, f"{'PASS' if passed else 'FAIL'} {name}: {_format(value)} vs {_format(expected)}")
        return bool(passed)

    def artifact(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.artifacts.append(str(path))
        return path

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def failures(self) -> List[str]:
        return [a.name for a in self.assertions if not a.passed]

    def render(self) -> str:
        lines = [f"# {self.title}"]
        for section, items in (("inputs", self.inputs), ("defaults", self.defaults), ("constants", self.constants)):
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_format(value)}" for key, value in items.items())
        lines.append("[assertions]")
        lines.extend(a.render() for a in self.assertions)
        lines.append("[artifacts]")
        lines.extend(self.artifacts)
        lines.append(f"result = {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path


# -------------------------------
# CSV writers
# -------------------------------

def write_rows(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    return path


def read_rows(path: Union[str, Path]) -> Tuple[List[str], List[List[str]]]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ArgumentError(f"{path} is empty")
    return rows[0], rows[1:]


def write_curve_csv(points: Sequence[Tuple[float, float]], path: Union[str, Path]) -> Path:
    """(t − s, ρ_β) pairs."""
    return write_rows(path, ["gap", "rho_beta"], points)


def write_trajectory_csv(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    d = trajectory.states.shape[1]
    rows = ([t] + list(x) for t, x in zip(trajectory.times, trajectory.states))
    return write_rows(path, ["t"] + [f"x{i + 1}" for i in range(d)], rows)


def write_ensemble_csv(ensemble: Ensemble, path: Union[str, Path]) -> Path:
    d = ensemble.samples.shape[1]
    return write_rows(path, [f"x{i + 1}" for i in range(d)], (list(x) for x in ensemble.samples))


def write_mapping_csv(mapping: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Key-value CSV, used for certificates and fitted constants."""
    return write_rows(path, ["key", "value"], sorted(mapping.items()))
