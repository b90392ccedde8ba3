"""
Arithmetic expressions for inline coefficient specifications.

Expressions are parsed with Python's own ``ast`` module and then checked
against a small whitelist: numbers, the variables ``t``, ``x`` (or ``x1``,
``x2`` in two dimensions) plus user parameters, the operators + - * / ^ and
the functions sin, cos, sqrt, abs, pos (positive part) and exp. The
compiled expression evaluates element-wise on numpy arrays.
"""

import ast
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Set

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pos": lambda v: np.maximum(v, 0.0),
    "exp": np.exp,
}

BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

CONSTANTS = {"pi": np.pi, "e": np.e}


@dataclass(frozen=True)
class Expression:
    """A validated expression with the variable names it reads"""
    source: str
    tree: ast.Expression
    variables: frozenset

    def __call__(self, **values) -> np.ndarray:
        missing = self.variables - set(values)
        if missing:
            raise ConfigurationError(f"expression '{self.source}' needs values for {sorted(missing)}")
        with np.errstate(invalid="ignore", divide="ignore"):
            return _evaluate(self.tree.body, values)


def parse_expression(source: str, allowed: Optional[Set[str]] = None,
                     field: Optional[str] = None) -> Expression:
    """
    Parse and validate an expression string.

    Args:
        source: expression text, ``^`` is accepted for powers
        allowed: names the expression may reference (constants always allowed)
        field: config field name used in diagnostics

    Returns:
        Expression ready for element-wise evaluation

    Raises:
        ConfigurationError: on syntax errors or disallowed constructs
    """
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as e:
        raise ConfigurationError(f"cannot parse expression '{source}': {e.msg}", field=field)

    variables: Set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)):
            continue
        if isinstance(node, ast.BinOp):
            if type(node.op) not in BINARY:
                raise ConfigurationError(f"operator {type(node.op).__name__} not allowed in '{source}'", field=field)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigurationError(f"unary operator not allowed in '{source}'", field=field)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or len(node.args) != 1 or node.keywords:
                raise ConfigurationError(f"only one-argument calls to {sorted(FUNCTIONS)} allowed in '{source}'", field=field)
        elif isinstance(node, ast.Name):
            if node.id in FUNCTIONS or node.id in CONSTANTS:
                continue
            if allowed is not None and node.id not in allowed:
                raise ConfigurationError(f"unknown name '{node.id}' in '{source}'", field=field)
            variables.add(node.id)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigurationError(f"non-numeric literal in '{source}'", field=field)
        elif isinstance(node, (ast.operator, ast.unaryop)):
            continue
        else:
            raise ConfigurationError(f"construct {type(node).__name__} not allowed in '{source}'", field=field)

    return Expression(source=source, tree=tree, variables=frozenset(variables))


def _evaluate(node: ast.AST, values: Dict[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, ast.Constant):
        return np.float64(node.value)
    if isinstance(node, ast.Name):
        if node.id in values:
            return np.asarray(values[node.id], dtype=float)
        return np.float64(CONSTANTS[node.id])
    if isinstance(node, ast.UnaryOp):
        operand = _evaluate(node.operand, values)
        return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.BinOp):
        return BINARY[type(node.op)](_evaluate(node.left, values), _evaluate(node.right, values))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_evaluate(node.args[0], values))
    raise ConfigurationError(f"unexpected node {type(node).__name__}")


def compile_many(sources: List[str], allowed: Set[str], field: str) -> List[Expression]:
    """Parse a list of expressions (one per drift or diffusion component)."""
    return [parse_expression(s, allowed, f"{field}[{i}]") for i, s in enumerate(sources)]
