"""Infix expressions for user-defined Lagrangians and Hamiltonians.

Grammar: ``+ - * /`` with the usual precedence and left association, unary
minus, parentheses, real literals, the functions ``sin cos exp pow`` (plus
``log`` and ``sqrt``), named parameters, and the coordinate variables

* Lagrangian: ``t, q1..qn, v1..vn`` (``v`` is the velocity)
* Hamiltonian: ``t, q1..qn, p1..pn``

Parsing goes through :mod:`ast`; only the node types listed here are
accepted. Evaluation walks the tree in source order, so results are
reproducible bit for bit.
"""
from __future__ import annotations

import ast
import operator
from typing import Callable, Mapping, Sequence

from . import derivatives as dv
from .derivatives import ScalarField

FUNCTIONS: dict[str, Callable] = {
    "sin": dv.sin,
    "cos": dv.cos,
    "exp": dv.exp,
    "pow": dv.pow,
    "log": dv.log,
    "sqrt": dv.sqrt,
}
_ARITY = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "pow": 2}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


class ExpressionError(ValueError):
    pass


def variable_names(n: int, kind: str) -> list[str]:
    if kind == "lagrangian":
        mom = "v"
    elif kind == "hamiltonian":
        mom = "p"
    else:
        raise ValueError(f"unknown expression kind {kind!r}")
    return ["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"{mom}{i}" for i in range(1, n + 1)]


def _compile(node: ast.AST, slots: Mapping[str, int], params: Mapping[str, float]):
    """Turn an AST node into a closure ``coords -> number``."""
    if isinstance(node, ast.Expression):
        return _compile(node.body, slots, params)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        c = float(node.value)
        return lambda x: c
    if isinstance(node, ast.Name):
        if node.id in slots:
            k = slots[node.id]
            return lambda x: x[k]
        if node.id in params:
            c = float(params[node.id])
            return lambda x: c
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp):
        inner = _compile(node.operand, slots, params)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ExpressionError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            raise ExpressionError("use pow(a, b) for powers")
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        left = _compile(node.left, slots, params)
        right = _compile(node.right, slots, params)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("unknown function")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        name = node.func.id
        if len(node.args) != _ARITY[name]:
            raise ExpressionError(f"{name} takes {_ARITY[name]} argument(s)")
        fn = FUNCTIONS[name]
        args = [_compile(a, slots, params) for a in node.args]
        if len(args) == 1:
            a0 = args[0]
            return lambda x: fn(a0(x))
        a0, a1 = args
        return lambda x: fn(a0(x), a1(x))
    raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def parse(source: str, n: int, kind: str, params: Mapping[str, float] | None = None) -> ScalarField:
    """Compile ``source`` to a :class:`ScalarField` of arity ``1 + 2n``."""
    names = variable_names(n, kind)
    params = dict(params or {})
    clash = set(params) & (set(names) | set(FUNCTIONS))
    if clash:
        raise ExpressionError(f"parameter names shadow variables/functions: {sorted(clash)}")
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
    body = _compile(tree, {v: i for i, v in enumerate(names)}, params)

    def fn(x: Sequence):
        return body(x)

    return ScalarField(fn, len(names), name=source.strip())
