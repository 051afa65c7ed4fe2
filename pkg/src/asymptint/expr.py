"""Restricted arithmetic expressions evaluated over numpy arrays.

Expressions use Python syntax (``^`` is accepted as a synonym of ``**``) and
may reference only whitelisted variables, the constants ``pi`` and ``e`` and
the functions listed in :data:`FUNCTIONS`.  Parsing goes through :mod:`ast`;
any node outside the whitelist is rejected before anything is evaluated.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExpressionError


def spow(x, lam):
    """Signed power ``|x|**(lam - 1) * x``."""
    x = np.asarray(x, dtype=float)
    if lam == 1:
        return x
    return np.abs(x) ** (lam - 1) * x


FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "spow": spow,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


class Expression:
    """A compiled expression in a fixed set of variables.

    >>> Expression("0.5 * t^-4")(t=2.0)
    0.03125
    """

    def __init__(self, source: str, variables=("t",)):
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError("expression must be a non-empty string")
        self.source = source
        self.variables = tuple(variables)
        try:
            tree = ast.parse(source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._validate(tree)
        self._code = compile(tree, "<expression>", "eval")

    def _validate(self, tree):
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ExpressionError(
                    f"forbidden construct {type(node).__name__} in {self.source!r}"
                )
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ExpressionError(f"non-numeric literal in {self.source!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                    raise ExpressionError(f"unknown function in {self.source!r}")
                if node.keywords:
                    raise ExpressionError("keyword arguments are not allowed")
            if isinstance(node, ast.Name):
                known = node.id in FUNCTIONS or node.id in CONSTANTS or node.id in self.variables
                if not known:
                    raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")

    def __call__(self, **values):
        missing = set(self.variables) - set(values)
        if missing:
            raise ExpressionError(f"missing variables {sorted(missing)}")
        namespace = dict(FUNCTIONS)
        namespace.update(CONSTANTS)
        namespace.update({k: np.asarray(v, dtype=float) for k, v in values.items()})
        with np.errstate(all="ignore"):
            out = eval(self._code, {"__builtins__": {}}, namespace)  # noqa: S307 - whitelisted AST
        out = np.asarray(out, dtype=float)
        shape = np.broadcast_shapes(*(np.shape(v) for v in values.values()))
        out = np.broadcast_to(out, shape).copy() if out.shape != shape else out
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Expression)
            and other.source == self.source
            and other.variables == self.variables
        )

    def __hash__(self):
        return hash((self.source, self.variables))
