import math

import numpy as np
import pytest

from cvqpt._expr import compile_expression
from cvqpt.exceptions import ExpressionError


def test_fourier_formula_matches_direct_evaluation():
    f = compile_expression("1/(2*pi)*exp(i*(x*y - w*z))")
    x, y, w, z = 0.3, -1.2, 2.0, 0.7
    assert f(x, y, w, z) == pytest.approx(np.exp(1j * (x * y - w * z)) / (2 * math.pi), abs=1e-15)


def test_caret_is_power_and_unary_minus():
    f = compile_expression("-x^2 + y**3")
    assert f(2.0, 3.0, 0.0, 0.0) == pytest.approx(23.0)


def test_broadcasts_constant_to_input_shape():
    f = compile_expression("0.5")
    out = f(np.zeros((3, 1)), np.zeros((1, 4)), 0.0, 0.0)
    assert out.shape == (3, 4)
    assert out.dtype == complex


def test_integer_division_is_true_division():
    assert compile_expression("1/2")(0, 0, 0, 0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "text, position",
    [
        ("x + foo", 4),
        ("x +* y", 3),
        ("sqrt(x)", 0),
        ("x.real", 0),
    ],
)
def test_errors_carry_position(text, position):
    with pytest.raises(ExpressionError) as info:
        compile_expression(text)
    assert info.value.position == position


@pytest.mark.parametrize("text", ["", "__import__('os')", "lambda: 1", "[x]", "x if y else z", "exp(x, y)"])
def test_rejects_non_arithmetic(text):
    with pytest.raises(ExpressionError):
        compile_expression(text)
