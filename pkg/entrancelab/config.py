"""
Configuration module for lab experiments.

An experiment is described by a JSON key-value tree (command, example or
inline coefficients, numeric parameters and settings blocks). The only
environment variable is the output directory override.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .errors import ConfigurationError
from .measures import LyapunovSpec
from .simulator import Scheme, SimConfig

COMMANDS = ("simulate", "entrance", "contract", "density", "quasi", "examples")
OUTPUT_DIR_VARIABLE = "ENTRANCE_LAB_OUTPUT_DIR"


@dataclass
class SimulationSettings:
    """Euler-Maruyama and ensemble settings"""
    step: float = 1e-3
    scheme: str = "truncated"
    radius: Optional[float] = None
    seed: int = 0
    paths: int = 20000
    block_size: int = 5000
    max_workers: int = 1

    def validate(self) -> List[str]:
        errors = []
        if self.scheme not in [s.value for s in Scheme]:
            errors.append(f"simulation.scheme: must be one of {[s.value for s in Scheme]}, got '{self.scheme}'")
        if not isinstance(self.seed, int) or self.seed < 0:
            errors.append(f"simulation.seed: must be a nonnegative integer, got {self.seed!r}")
        if not errors:
            errors.extend(f"simulation.{e}" for e in self.to_sim_config().validate())
        return errors

    def to_sim_config(self) -> SimConfig:
        return SimConfig(step=self.step, scheme=Scheme(self.scheme), radius=self.radius, seed=self.seed,
                         paths=self.paths, block_size=self.block_size, max_workers=self.max_workers)


@dataclass
class MeasureSettings:
    """Histogram box, Lyapunov weight and Cauchy tolerance"""
    lower: float = -4.0
    upper: float = 4.0
    resolution: int = 16
    beta: float = 0.1
    tolerance: float = 0.05

    def validate(self) -> List[str]:
        errors = []
        if not self.upper > self.lower:
            errors.append(f"measure.upper: must exceed lower ({self.lower}), got {self.upper}")
        if self.resolution < 1:
            errors.append(f"measure.resolution: must be positive, got {self.resolution}")
        if self.beta <= 0:
            errors.append(f"measure.beta: must be positive, got {self.beta}")
        if self.tolerance <= 0:
            errors.append(f"measure.tolerance: must be positive, got {self.tolerance}")
        return errors

    def lyapunov(self) -> LyapunovSpec:
        return LyapunovSpec(beta=self.beta)


@dataclass
class FPSettings:
    """Fokker-Planck grid spacing, time step, boundary and box margin"""
    spacing: float = 0.01
    dt: float = 1e-3
    boundary: str = "reflecting"
    margin: float = 6.0

    def validate(self) -> List[str]:
        errors = []
        if self.spacing <= 0:
            errors.append(f"fp.spacing: must be positive, got {self.spacing}")
        if self.dt <= 0:
            errors.append(f"fp.dt: must be positive, got {self.dt}")
        if self.boundary not in ("reflecting", "absorbing"):
            errors.append(f"fp.boundary: must be reflecting or absorbing, got '{self.boundary}'")
        if self.margin <= 0:
            errors.append(f"fp.margin: must be positive, got {self.margin}")
        return errors


SECTIONS = {"simulation": SimulationSettings, "measure": MeasureSettings, "fp": FPSettings}


@dataclass
class ExperimentConfig:
    """A single lab experiment"""
    command: str = "examples"
    example: Optional[str] = None
    coefficients: Optional[Dict[str, Any]] = None
    parameters: Dict[str, Any] = field(default_factory=dict)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    measure: MeasureSettings = field(default_factory=MeasureSettings)
    fp: FPSettings = field(default_factory=FPSettings)
    output_dir: str = "lab_output"

    @classmethod
    def from_environment(cls) -> 'ExperimentConfig':
        """
        Load the environment part of the configuration.

        Returns:
            ExperimentConfig with the output directory from
            ENTRANCE_LAB_OUTPUT_DIR (default ``lab_output``)
        """
        return cls(output_dir=os.getenv(OUTPUT_DIR_VARIABLE, "lab_output"))

    def update(self, tree: Dict[str, Any]) -> 'ExperimentConfig':
        """Merge a key-value tree into this configuration (in place)."""
        for key, value in tree.items():
            if key in SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigurationError(f"{key}: expected an object", field=key)
                section = getattr(self, key)
                known = {f.name for f in fields(section)}
                for name, item in value.items():
                    if name not in known:
                        raise ConfigurationError(f"{key}.{name}: unknown setting", field=f"{key}.{name}")
                    setattr(section, name, item)
            elif key == "parameters":
                if not isinstance(value, dict):
                    raise ConfigurationError("parameters: expected an object", field="parameters")
                self.parameters.update(value)
            elif key in ("command", "example", "coefficients", "output_dir"):
                setattr(self, key, value)
            else:
                raise ConfigurationError(f"{key}: unknown field", field=key)
        return self

    def validate(self) -> List[str]:
        """
        Validate configuration values.

        Returns:
            List of ``field: message`` diagnostics, empty if valid
        """
        errors = []
        if self.command not in COMMANDS:
            errors.append(f"command: must be one of {list(COMMANDS)}, got '{self.command}'")
        if self.command in ("simulate", "entrance", "density") and not (self.example or self.coefficients):
            errors.append(f"example: the {self.command} command needs an example name or inline coefficients")
        if self.command == "quasi":
            periods = self.parameters.get("periods")
            if periods is None:
                errors.append("parameters.periods: required for the quasi command")
            elif (not isinstance(periods, (list, tuple)) or len(periods) != 2
                  or not all(isinstance(p, (int, float)) and p > 0 for p in periods)):
                errors.append(f"parameters.periods: expected two positive numbers, got {periods!r}")
        if not self.output_dir:
            errors.append("output_dir: cannot be empty")
        errors.extend(self.simulation.validate())
        errors.extend(self.measure.validate())
        errors.extend(self.fp.validate())
        return errors

    def defaults(self) -> Dict[str, Any]:
        """Every numeric setting, for echoing into reports."""
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    @property
    def seed(self) -> int:
        return self.simulation.seed


def read_config_tree(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Parse a JSON configuration file.

    Raises:
        ConfigurationError: with line and column of a syntax error
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"cannot read configuration {path}: {e}", field="config")
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: {e.msg} at line {e.lineno}, column {e.colno}",
                                 field="config", line=e.lineno)
    if not isinstance(tree, dict):
        raise ConfigurationError(f"{path}: top level must be an object", field="config", line=1)
    return tree


def load_experiment_config(path: Optional[Union[str, Path]] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment configuration.

    The environment supplies the output directory, then the file at ``path``
    and finally ``overrides`` (command-line flags) are merged in.

    Returns:
        ExperimentConfig instance

    Raises:
        ConfigurationError: If configuration is invalid
    """
    config = ExperimentConfig.from_environment()
    if path is not None:
        config.update(read_config_tree(path))
    if overrides:
        config.update(overrides)

    errors = config.validate()
    if errors:
        first = errors[0].split(":", 1)[0]
        raise ConfigurationError(f"Invalid experiment configuration: {', '.join(errors)}", field=first)

    return config
