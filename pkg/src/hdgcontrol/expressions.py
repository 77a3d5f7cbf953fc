"""Closed-form scalar fields from short arithmetic strings.

Only numbers, the coordinates ``x, y, z``, ``+ - * / **``, ``^`` (same as
``**``) and the functions below are accepted; anything else in the parse tree
is rejected before evaluation.
"""
import ast
import operator

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
             "pow": np.power, "log": np.log, "abs": np.abs}
CONSTANTS = {"pi": np.pi, "e": np.e}
COORDS = ("x", "y", "z")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: np.power}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


class ExpressionError(ValueError):
    pass


def _check(node, names):
    if isinstance(node, ast.Expression):
        return _check(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNOPS:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("only calls to " + ", ".join(sorted(FUNCTIONS)) + " are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        want = 2 if node.func.id == "pow" else 1
        if len(node.args) != want:
            raise ExpressionError(f"{node.func.id} takes {want} argument(s)")
        for a in node.args:
            _check(a, names)
    else:
        raise ExpressionError(f"unsupported syntax {type(node).__name__}")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    return FUNCTIONS[node.func.id](*[_eval(a, env) for a in node.args])


class Expression:
    """Compiled expression, callable on points of shape (..., d).

    >>> Expression("(x^2 + y^2)^0.5")(np.array([[3.0, 4.0]]))
    array([5.])
    """

    def __init__(self, text, dim=3):
        self.text = str(text).strip()
        if not self.text:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        self.dim = dim
        _check(tree, set(COORDS[:dim]) | set(CONSTANTS))
        self._tree = tree

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        env = dict(CONSTANTS)
        for i, name in enumerate(COORDS[:pts.shape[-1]]):
            env[name] = pts[..., i]
        for name in COORDS[pts.shape[-1]:self.dim]:
            env[name] = np.zeros(pts.shape[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            val = _eval(self._tree, env)
        return np.broadcast_to(np.asarray(val, dtype=float), pts.shape[:-1]).copy()

    @property
    def is_zero(self):
        try:
            return float(self.text) == 0.0
        except ValueError:
            return False

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text, dim=3):
    return Expression(text, dim)
