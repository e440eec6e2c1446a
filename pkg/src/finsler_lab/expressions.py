"""Minimal arithmetic expressions for configuration files.

Grammar: numbers, variable names, ``+ - * / ^`` (``**`` also accepted),
unary minus, parentheses and the functions ``sin cos exp sqrt``.  Parsing
goes through :mod:`ast` with a node whitelist; evaluation dispatches to
:mod:`finsler_lab.jets`, so compiled expressions accept jets as well as
floats or arrays.
"""
from __future__ import annotations

import ast
import operator

from . import jets

FUNCTIONS = {"sin": jets.sin, "cos": jets.cos, "exp": jets.exp, "sqrt": jets.sqrt}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class ExpressionError(ValueError):
    pass


class Expression:
    """A compiled expression in a fixed set of variables."""

    def __init__(self, source: str, variables: tuple[str, ...]):
        self.source = str(source)
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"unsupported literal in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables:
                raise ExpressionError(f"unknown variable {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take one argument: {self.source!r}")
            self._check(node.args[0])
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.BinOp):
            left, right = self._eval(node.left, env), self._eval(node.right, env)
            return _BINOPS[type(node.op)](left, right)
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, *args):
        if len(args) != len(self.variables):
            raise TypeError(f"{self.source!r} expects {len(self.variables)} arguments")
        return self._eval(self._tree, dict(zip(self.variables, args)))

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and (self.source, self.variables) == (
            other.source, other.variables)

    def __hash__(self):
        return hash((self.source, self.variables))
