"""Tiny arithmetic-expression compiler for custom birth functions.

Accepted syntax: numbers, the variable ``s``, named parameters supplied by
the caller, ``+ - * / ^`` (``**`` also works), unary minus, parentheses and
the functions ``exp`` and ``log``.  Anything else is rejected before
evaluation, so expressions from config files never reach ``eval``.
"""

from __future__ import annotations

import ast
import operator

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": np.exp, "log": np.log}


class ExpressionError(ValueError):
    pass


def compile_expression(text: str, params: dict | None = None):
    """Return a vectorised callable ``f(s)`` for ``text``."""
    params = dict(params or {})
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check(tree.body, params, text)

    def f(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = _eval(tree.body, s, params)
        return np.broadcast_to(out, s.shape).astype(float) if np.ndim(out) < s.ndim else out

    f.expression = text
    return f


def _check(node, params, text):
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, params, text)
        _check(node.right, params, text)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        _check(node.operand, params, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError(f"only exp/log calls allowed in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"exp/log take exactly one argument in {text!r}")
        _check(node.args[0], params, text)
    elif isinstance(node, ast.Name):
        if node.id != "s" and node.id not in params:
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        pass
    else:
        raise ExpressionError(f"unsupported syntax in {text!r}")


def _eval(node, s, params):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, s, params), _eval(node.right, s, params))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, s, params))
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval(node.args[0], s, params))
    if isinstance(node, ast.Name):
        return s if node.id == "s" else float(params[node.id])
    return float(node.value)
