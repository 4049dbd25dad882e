import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvqpt.exceptions import IntegrandError, ValidationError
from cvqpt.quadrature import Box, choose_order, gauss_nodes, integrate_box


@pytest.mark.parametrize("n", [1, 2, 5, 12, 64, 128, 256])
def test_nodes_match_numpy(n):
    x, w = gauss_nodes(n)
    xr, wr = np.polynomial.legendre.leggauss(n)
    np.testing.assert_allclose(x, xr, atol=1e-14)
    np.testing.assert_allclose(w, wr, atol=1e-14)


def test_nodes_cached_and_read_only():
    a = gauss_nodes(17)
    assert gauss_nodes(17) is a
    with pytest.raises(ValueError):
        a[0][0] = 0.0


def test_nodes_thread_safe():
    with ThreadPoolExecutor(8) as pool:
        out = list(pool.map(gauss_nodes, [97] * 32))
    assert all(o is out[0] for o in out)


@pytest.mark.parametrize("n", [0, 257, -3])
def test_order_range(n):
    with pytest.raises(ValidationError):
        gauss_nodes(n)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.data())
def test_polynomial_exactness(n, data):
    deg = data.draw(st.integers(0, 2 * n - 1))
    coef = data.draw(st.lists(st.floats(-1, 1), min_size=deg + 1, max_size=deg + 1))
    p = np.polynomial.Polynomial(coef)
    exact = p.integ()(1.0) - p.integ()(-1.0)
    res = integrate_box(lambda x: p(x), Box((-1.0,), (1.0,)), n, escalate=False)
    assert res.value == pytest.approx(exact, abs=1e-12)


def test_3d_gaussian_product():
    f = lambda x, y, z: np.exp(-(x * x + 2 * y * y + 3 * z * z))
    res = integrate_box(f, Box((-1, -1, -1), (1, 1, 1)), 24)
    exact = math.prod(math.sqrt(math.pi / a) * math.erf(math.sqrt(a)) for a in (1, 2, 3))
    assert res.value == pytest.approx(exact, rel=1e-13)
    assert res.err_estimate < 1e-12
    assert res.nodes_used == 24 ** 3 + 36 ** 3


def test_oscillatory_with_batch_axes():
    k = np.array([1.0, 5.0, 20.0])[:, None, None]
    f = lambda x, y: np.exp(1j * k * (x + y))
    res = integrate_box(f, Box((0, 0), (1, 1)), [64, 64])
    exact = ((np.exp(1j * k.ravel()) - 1) / (1j * k.ravel())) ** 2
    np.testing.assert_allclose(res.value, exact, rtol=1e-12)
    assert res.value.shape == (3,)


def test_error_estimate_flags_underresolution():
    f = lambda x: np.cos(60 * x)
    res = integrate_box(f, Box((0,), (1,)), 8)
    assert res.err_estimate > 1e-3


def test_integrand_error_reports_point():
    f = lambda x, y: 1.0 / (x - 0.5 + 0 * y) * np.where(x > 0.4, np.inf, 1.0)
    with pytest.raises(IntegrandError) as info:
        integrate_box(f, Box((0, 0), (1, 1)), 4)
    assert info.value.point[0] > 0.4


@pytest.mark.parametrize("lo, hi", [((0,), (0,)), ((1, 0), (0, 1)), ((0, 0, 0, 0), (1, 1, 1, 1)), ((0,), (1, 1))])
def test_box_validation(lo, hi):
    with pytest.raises(ValidationError):
        Box(lo, hi)


def test_choose_order():
    assert choose_order(0.0, 1.0) == 12
    assert choose_order(10.0, 1.0) == 40
    assert choose_order(1e6, 1.0) == 128
    assert choose_order(1.0, 1.0, minimum=32) == 32
