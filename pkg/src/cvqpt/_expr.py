"""Tiny safe arithmetic language for user-supplied process kernels.

Grammar (precedence low to high)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

NAME is one of the variables ``x y w z`` or the constants ``pi`` and ``i``;
FUNC is one of ``exp sin cos``.  ``**`` is accepted as a synonym of ``^``.
Unicode minus (U+2212) is read as ``-``.

The source is handed to :mod:`ast` after the ``^`` rewrite and the resulting
tree is checked against a whitelist before being compiled into nested numpy
closures, so nothing is ever passed to ``eval``.
"""

import ast
import math

import numpy as np

from .exceptions import ExpressionError

VARIABLES = ("x", "y", "w", "z")
CONSTANTS = {"pi": math.pi, "i": 1j}
FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def compile_expression(text):
    """Compile ``text`` into a vectorized callable ``f(x, y, w, z)``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty kernel expression", 0)
    src = text.replace("−", "-")
    # '^' -> '**' shifts later columns by one; keep a map back to the original
    offsets = []
    pieces = []
    for col, ch in enumerate(src):
        if ch == "^":
            pieces.append("**")
            offsets.extend([col, col])
        else:
            pieces.append(ch)
            offsets.append(col)
    rewritten = "".join(pieces)
    offsets.append(len(src))
    # eval-mode parsing rejects leading whitespace
    lead = len(rewritten) - len(rewritten.lstrip())
    offsets = offsets[lead:]
    rewritten = rewritten[lead:]

    def orig(col):
        if col is None:
            return None
        return offsets[min(col, len(offsets) - 1)]

    try:
        tree = ast.parse(rewritten, mode="eval")
    except SyntaxError as exc:
        col = (exc.offset or 1) - 1
        raise ExpressionError(f"syntax error: {exc.msg}", orig(col)) from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(
                node.value, (int, float, complex)
            ):
                raise ExpressionError("only numeric literals are allowed", orig(node.col_offset))
            # ints become floats so that 2^-1 does not hit numpy's integer power rule
            value = node.value if isinstance(node.value, complex) else float(node.value)
            return lambda env: value
        if isinstance(node, ast.Name):
            if node.id in VARIABLES:
                key = node.id
                return lambda env: env[key]
            if node.id in CONSTANTS:
                value = CONSTANTS[node.id]
                return lambda env: value
            raise ExpressionError(f"unknown identifier {node.id!r}", orig(node.col_offset))
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ExpressionError("unsupported operator", orig(node.col_offset))
            left, right = build(node.left), build(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.UnaryOp):
            operand = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: np.negative(operand(env))
            if isinstance(node.op, ast.UAdd):
                return operand
            raise ExpressionError("unsupported unary operator", orig(node.col_offset))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name):
                raise ExpressionError("unsupported call", orig(node.col_offset))
            fn = FUNCTIONS.get(node.func.id)
            if fn is None:
                raise ExpressionError(
                    f"unknown function {node.func.id!r}", orig(node.func.col_offset)
                )
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(
                    f"{node.func.id}() takes exactly one argument", orig(node.col_offset)
                )
            arg = build(node.args[0])
            return lambda env: fn(arg(env))
        raise ExpressionError(
            f"unsupported syntax: {type(node).__name__}", orig(getattr(node, "col_offset", None))
        )

    body = build(tree)

    def evaluate(x, y, w, z):
        env = {"x": x, "y": y, "w": w, "z": z}
        with np.errstate(all="ignore"):
            out = body(env)
        shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(w), np.asarray(z)).shape
        return np.broadcast_to(np.asarray(out, dtype=complex), shape)

    return evaluate
