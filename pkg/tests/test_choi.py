import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cvqpt import (
    ElementEstimate,
    PointFailure,
    Region4,
    build_choi_grid,
    choi_element,
    compare_reconstruction,
    constant_kernel,
    fidelity_lower_bound,
    fourier_kernel,
    trace_distance,
)
from cvqpt.choi import ChoiGrid, MeshInterpolant, surrogate_kernel, trace_norm
from cvqpt.exceptions import CoverageError, GridMismatchError, ValidationError
from cvqpt.probe import mehler_f


def cquad(f, lo=-12, hi=12):
    re, _ = quad(lambda t: f(t).real, lo, hi, limit=400, epsabs=1e-14)
    im, _ = quad(lambda t: f(t).imag, lo, hi, limit=400, epsabs=1e-14)
    return complex(re, im)


def fourier_choi_oracle(lam, a, b, c, d):
    # the Fourier kernel factorizes, so the double integral is a product of two 1-D ones
    fy = cquad(lambda y: np.exp(1j * a * y) * mehler_f(lam, y, b))
    fw = cquad(lambda w: np.exp(-1j * w * d) * mehler_f(lam, w, c))
    return (1 - lam * lam) * fy * fw / (2 * math.pi)


@pytest.mark.parametrize("abcd", [(0, 0, 0, 0), (1.0, -0.5, 2.0, 0.3), (-3.0, 2.5, -1.0, 3.5)])
def test_choi_element_matches_quad(abcd):
    # the element integral drops 1e-8 of each Mehler factor's mass by design
    ref = fourier_choi_oracle(0.8, *abcd)
    assert choi_element(fourier_kernel(), 0.8, *abcd) == pytest.approx(ref, rel=2e-7)


def test_grid_matches_elementwise():
    lam, n = 0.8, 6
    g = build_choi_grid(fourier_kernel(), lam, 2.0, n)
    x = g.grid_points
    rng = np.random.default_rng(0)
    for ia, ib, ic, id_ in rng.integers(0, n, size=(10, 4)):
        ref = choi_element(fourier_kernel(), lam, x[ia], x[ib], x[ic], x[id_]) * g.cell ** 2
        assert g.matrix[ia * n + ib, id_ * n + ic] == pytest.approx(ref, rel=2e-7)


def test_fourier_grid_trace_and_hermiticity():
    g = build_choi_grid(fourier_kernel(), 0.8, 4.0, 24)
    assert g.defect < 1e-10
    np.testing.assert_allclose(g.matrix, g.matrix.conj().T)
    # diagonal by direct element quadrature
    x = g.grid_points
    diag = sum(choi_element(fourier_kernel(), 0.8, a, b, b, a) for a in x for b in x).real * g.cell ** 2
    assert g.trace == pytest.approx(diag, abs=1e-8)
    assert abs(g.trace - 1) < 0.05


def test_constant_kernel_grid_closed_form():
    lam, k = 0.5, 0.7
    g = build_choi_grid(constant_kernel(k), lam, 3.0, 8)
    x = g.grid_points
    m = np.array([quad(lambda y: mehler_f(lam, y, b), -15, 15)[0] for b in x])
    # entries depend only on (b, c): rows (a, b), columns (d, c)
    expected = (1 - lam * lam) * k * g.cell ** 2 * np.kron(np.ones((8, 8)), np.outer(m, m))
    np.testing.assert_allclose(g.matrix, expected, atol=1e-12)


@pytest.mark.parametrize("lam", [1.0, -1.0, 2.0])
def test_lambda_domain(lam):
    with pytest.raises(ValidationError):
        build_choi_grid(fourier_kernel(), lam, 4.0, 4)


def _grid(matrix, lam=0.8):
    n = int(math.isqrt(matrix.shape[0]))
    return ChoiGrid(lam, np.linspace(-1, 1, n), 2 / (n - 1), matrix)


def test_trace_distance_orthogonal_pure_states():
    e0, e1 = np.zeros(4), np.zeros(4)
    e0[0], e1[3] = 1, 1
    T = trace_distance(_grid(np.outer(e0, e0).astype(complex)), _grid(np.outer(e1, e1).astype(complex)))
    assert T == pytest.approx(1.0)
    assert fidelity_lower_bound(T) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-6, 0.5))
def test_trace_distance_scales_with_perturbation(seed, eps):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    h = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    h = h + h.conj().T
    h /= trace_norm(h)
    assert trace_distance(_grid(rho), _grid(rho + eps * h)) == pytest.approx(eps / 2, rel=1e-9)


def test_trace_distance_grid_mismatch():
    with pytest.raises(GridMismatchError):
        trace_distance(_grid(np.eye(4, dtype=complex)), _grid(np.eye(9, dtype=complex)))
    with pytest.raises(GridMismatchError):
        trace_distance(_grid(np.eye(4, dtype=complex)), _grid(np.eye(4, dtype=complex), lam=0.5))


def test_fidelity_bound():
    assert fidelity_lower_bound(0.0) == 1.0
    assert fidelity_lower_bound(0.01) == pytest.approx(0.9801)
    assert fidelity_lower_bound(1.5) == 0.0
    with pytest.raises(ValidationError):
        fidelity_lower_bound(-0.1)


def _mesh(f, xs, ys):
    pts = [(x, y, 0.0, 0.0) for x in xs for y in ys]
    return pts, np.array([f(*p) for p in pts])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0, 3), st.floats(0, 3))
def test_interpolant_exact_on_bilinear(coef, x, y):
    f = lambda x, y, w, z: coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * y
    pts, vals = _mesh(f, np.linspace(0, 3, 4), np.linspace(0, 3, 5))
    interp = MeshInterpolant(pts, vals)
    assert interp(x, y, 7.0, -2.0) == pytest.approx(f(x, y, 0, 0), abs=1e-12)


def test_interpolant_clamps_and_broadcasts():
    pts, vals = _mesh(lambda x, y, w, z: x + 10 * y, [0.0, 1.0], [0.0, 1.0])
    interp = MeshInterpolant(pts, vals)
    out = interp(np.array([-5.0, 0.5, 5.0])[:, None], np.array([0.0, 1.0])[None, :], 0.0, 0.0)
    assert out.shape == (3, 2)
    np.testing.assert_allclose(out, [[0, 10], [0.5, 10.5], [1, 11]])


def test_interpolant_requires_full_grid():
    pts, vals = _mesh(lambda *p: 1.0, [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(CoverageError):
        MeshInterpolant(pts[:3], vals[:3])


def _exact_estimates(k, xs, ys):
    return [ElementEstimate(complex(k.eval(x, y, 0, 0)), Region4((x, y, 0, 0), (0.01,) * 4), 0, 0.0)
            for x in xs for y in ys]


def test_self_comparison_is_perfect():
    k = fourier_kernel()
    est = _exact_estimates(k, np.linspace(0, 3, 4), np.linspace(0, 3, 4))
    rep = compare_reconstruction(k, est, 0.8, 4.0, 12)
    assert rep.trace_distance < 1e-12
    assert rep.fidelity_lower_bound >= 0.99
    assert 0 < rep.truncation_mass < 0.2
    assert rep.mesh_max_relative_error == 0.0


def test_relative_surrogate_applies_mesh_error():
    k = fourier_kernel()
    est = _exact_estimates(k, [0.0, 3.0], [0.0, 3.0])
    est = [ElementEstimate(e.value * 1.01, e.region, 0, 0.0) for e in est]
    s = surrogate_kernel(k, est)
    assert s.eval(1.0, 2.0, 0.5, -0.5) == pytest.approx(1.01 * k.eval(1.0, 2.0, 0.5, -0.5))


def test_failed_points_are_coverage_errors():
    k = fourier_kernel()
    est = _exact_estimates(k, [0.0, 1.0], [0.0, 1.0])
    est[2] = PointFailure(2, (1.0, 0.0, 0.0, 0.0), "nonconvergence", "x")
    with pytest.raises(CoverageError):
        compare_reconstruction(k, est, 0.8, 4.0, 8)
    with pytest.raises(ValidationError):
        surrogate_kernel(k, _exact_estimates(k, [0.0], [0.0]), mode="spline")


def _random_state(rng, n=9):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return _grid(rho / np.trace(rho).real)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_trace_distance_metric_properties(seed):
    rng = np.random.default_rng(seed)
    g1, g2, g3 = (_random_state(rng) for _ in range(3))
    assert trace_distance(g1, g2) == trace_distance(g2, g1)
    assert trace_distance(g1, g3) <= trace_distance(g1, g2) + trace_distance(g2, g3) + 1e-9
    assert trace_distance(g1, g1) == pytest.approx(0.0, abs=1e-14)


def test_fidelity_bound_monotone():
    T = np.linspace(0, 2, 201)
    F = [fidelity_lower_bound(t) for t in T]
    assert all(b <= a for a, b in zip(F, F[1:]))


def test_choi_element_against_mehler_series():
    # f_lam replaced by its 80-term Hermite series inside the same quadrature
    from cvqpt.probe import hermite_psi_all

    lam = 0.8
    rng = np.random.default_rng(11)
    x, w = np.polynomial.legendre.leggauss(160)
    for a, b, c, d in rng.uniform(-2, 2, size=(10, 4)):
        nodes = 9.0 * x
        def series(t, s):
            return np.sum(lam ** np.arange(80)[:, None] * hermite_psi_all(79, t) * hermite_psi_all(79, np.full_like(t, s)), axis=0)
        fy = np.sum(9.0 * w * np.exp(1j * a * nodes) * series(nodes, b))
        fw = np.sum(9.0 * w * np.exp(-1j * nodes * d) * series(nodes, c))
        ref = (1 - lam * lam) * fy * fw / (2 * math.pi)
        assert abs(choi_element(fourier_kernel(), lam, a, b, c, d) - ref) < 1e-6


def test_zero_kernel_grid_and_zero_reconstruction():
    assert not np.any(build_choi_grid(constant_kernel(0.0), 0.8, 2.0, 5).matrix)
    k = fourier_kernel()
    zeros = [ElementEstimate(0j, e.region, 0, 0.0) for e in _exact_estimates(k, [0.0, 3.0], [0.0, 3.0])]
    rep = compare_reconstruction(k, zeros, 0.8, 4.0, 12)
    g = build_choi_grid(k, 0.8, 4.0, 12)
    mag = np.abs(g.matrix)
    kept = np.where(mag > 1e-3 * mag.max(), g.matrix, 0)
    assert rep.trace_distance == pytest.approx(0.5 * trace_norm(kept), rel=1e-12)
    assert rep.fidelity_lower_bound == pytest.approx((1 - rep.trace_distance) ** 2)
