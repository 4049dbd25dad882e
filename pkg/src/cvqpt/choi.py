"""Discretized Choi states of process kernels and trace-distance fidelity bounds.

The Choi state uses the two-mode squeezed vacuum with weight ``lam`` as the
purification.  Its position matrix elements are

    <a|<b| rho |d>|c> = (1 - lam^2) ∫∫ E(a, y, w, d) f_lam(y, b) f_lam(w, c) dy dw

with ``f_lam`` the Mehler kernel.  On a uniform grid of step ``h`` the matrix
indexed by ``(a, b) x (d, c)`` is scaled by ``h^2`` so that matrix traces and
trace norms approximate their continuum values.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh
from scipy.special import erfcinv

from .exceptions import CoverageError, GridMismatchError, NumericalError, ValidationError
from .kernels import ProcessKernel
from .probe import mehler_f, mehler_gaussian
from .quadrature import Box, choose_order, gauss_nodes, integrate_box
from .tomography import ElementEstimate, PointFailure

# half-width, in standard deviations, keeping all but 1e-8 of a Gaussian's mass
SUPPORT_Z = float(math.sqrt(2.0) * erfcinv(1e-8))
DEFECT_TOL = 1e-6


def _check_lambda(lam):
    lam = float(lam)
    if not -1.0 < lam < 1.0:
        raise ValidationError(f"choi.lambda must satisfy |lambda| < 1, got {lam!r}")
    return lam


@dataclass(frozen=True)
class ChoiGrid:
    lam: float
    grid_points: np.ndarray = field(repr=False)
    cell: float
    matrix: np.ndarray = field(repr=False)
    defect: float = 0.0

    @property
    def n_points(self):
        return len(self.grid_points)

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))


@dataclass(frozen=True)
class ChannelDistanceReport:
    trace_distance: float
    fidelity_lower_bound: float
    truncation_mass: float
    n_kept: int = 0
    threshold: float = 0.0
    mesh_max_relative_error: Optional[float] = None

    def to_dict(self):
        return {
            "trace_distance": self.trace_distance,
            "fidelity_lower_bound": self.fidelity_lower_bound,
            "truncation_mass": self.truncation_mass,
            "n_kept": self.n_kept,
            "threshold": self.threshold,
            "mesh_max_relative_error": self.mesh_max_relative_error,
        }


def choi_element(kernel, lam, a, b, c, d, order=None):
    """Single Choi matrix element ``<a|<b| rho |d>|c>`` (unscaled, continuum density)."""
    lam = _check_lambda(lam)
    (mu_b, mu_c), sigma = mehler_gaussian(lam, [b, c])
    half = SUPPORT_Z * sigma
    box = Box((mu_b - half, mu_c - half), (mu_b + half, mu_c + half))
    if order is None:
        lo = np.array([a, box.lo[0], box.lo[1], d])
        hi = np.array([a, box.hi[0], box.hi[1], d])
        order = choose_order(kernel.frequency(lo, hi), 2.0 * half, minimum=32, cap=128)

    def integrand(y, w):
        return kernel(a, y, w, d) * mehler_f(lam, y, b) * mehler_f(lam, w, c)

    res = integrate_box(integrand, box, order)
    return (1.0 - lam * lam) * res.value


def _composite_rule(lo, hi, panel_width, order=12):
    n_panels = max(1, int(math.ceil((hi - lo) / panel_width)))
    edges = np.linspace(lo, hi, n_panels + 1)
    x, w = gauss_nodes(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def build_choi_grid(kernel, lam=0.8, extent=4.0, n_points=24, strict=False):
    """Choi matrix of ``kernel`` on the uniform grid ``linspace(-extent, extent, n_points)``.

    The inner ``(y, w)`` integrals share one composite Gauss-Legendre rule
    covering every Mehler factor's effective support, which turns the whole
    assembly into two matrix products per grid value of ``a``.
    """
    lam = _check_lambda(lam)
    if n_points < 2:
        raise ValidationError("choi.n_points must be >= 2")
    if not extent > 0:
        raise ValidationError("choi.extent must be positive")
    grid = np.linspace(-extent, extent, n_points)
    h = float(grid[1] - grid[0])
    mu, sigma = mehler_gaussian(lam, grid)
    lo = float(mu.min() - SUPPORT_Z * sigma)
    hi = float(mu.max() + SUPPORT_Z * sigma)
    freq = kernel.frequency(np.array([-extent, lo, lo, -extent]), np.array([extent, hi, hi, extent]))
    panel = 2.0 * sigma
    if freq > 0:
        panel = min(panel, 2.0 * math.pi / freq)
    nodes, weights = _composite_rule(lo, hi, panel)
    # F[i, b] = weight_i * f_lam(node_i, grid_b)
    F = weights[:, None] * mehler_f(lam, nodes[:, None], grid[None, :])
    n = n_points
    M = np.empty((n * n, n * n), dtype=complex)
    Y = nodes[None, :, None]
    W = nodes[None, None, :]
    D = grid[:, None, None]
    for ia, a in enumerate(grid):
        E = np.asarray(kernel(a, Y, W, D), dtype=complex)
        E = np.broadcast_to(E, (n, len(nodes), len(nodes)))
        if not np.all(np.isfinite(E)):
            raise NumericalError(f"kernel not finite on Choi quadrature nodes at a={a}")
        block = F.T @ E @ F  # (d, b, c)
        M[ia * n:(ia + 1) * n, :] = block.transpose(1, 0, 2).reshape(n, n * n)
    M *= (1.0 - lam * lam) * h * h
    defect = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if defect > DEFECT_TOL:
        msg = f"Choi matrix Hermiticity defect {defect:.3g} exceeds {DEFECT_TOL:g}"
        if strict:
            raise NumericalError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    M = 0.5 * (M + M.conj().T)
    return ChoiGrid(lam, grid, h, M, defect)


def trace_norm(matrix):
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    # exactly rounded sum, so the result does not depend on eigenvalue order
    return math.fsum(np.abs(eigvalsh(matrix)))


def _check_compatible(g1, g2):
    if g1.lam != g2.lam or g1.matrix.shape != g2.matrix.shape or not np.array_equal(
        g1.grid_points, g2.grid_points
    ):
        raise GridMismatchError("Choi grids differ in positions, size or lambda")


def trace_distance(g1, g2):
    """``T = ||rho_1 - rho_2||_1 / 2`` via a dense Hermitian eigensolve."""
    _check_compatible(g1, g2)
    return 0.5 * trace_norm(g1.matrix - g2.matrix)


def fidelity_lower_bound(T):
    """Lower bound ``F >= (1 - T)^2`` from ``1 - sqrt(F) <= T``."""
    if T < 0:
        raise ValidationError(f"trace distance must be nonnegative, got {T!r}")
    return max(0.0, 1.0 - T) ** 2


class MeshInterpolant:
    """Multilinear interpolation of values on a rectilinear 4-D mesh.

    Axes carrying a single mesh value are treated as constant.  Coordinates
    outside the mesh hull are clamped to it.  Calls accept broadcastable
    arrays and interpolate each axis separately, so broadcasting is kept.
    """

    def __init__(self, points, values):
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=complex)
        if points.ndim != 2 or points.shape[1] != 4 or len(points) == 0:
            raise CoverageError("mesh must be a nonempty list of 4-D points")
        self.axes = [np.unique(points[:, k]) for k in range(4)]
        shape = tuple(len(ax) for ax in self.axes)
        if int(np.prod(shape)) != len(points):
            raise CoverageError(
                f"mesh with {len(points)} points is not a full rectilinear grid (axis sizes {shape})"
            )
        idx = tuple(np.searchsorted(self.axes[k], points[:, k]) for k in range(4))
        table = np.full(shape, np.nan + 0j)
        table[idx] = values
        if np.any(np.isnan(table)):
            raise CoverageError("mesh has duplicate points and missing grid nodes")
        self.active = [k for k in range(4) if shape[k] > 1]
        self.table = table.reshape(tuple(shape[k] for k in self.active))

    def _axis(self, k, coord):
        ax = self.axes[k]
        c = np.clip(np.asarray(coord, dtype=float), ax[0], ax[-1])
        i = np.clip(np.searchsorted(ax, c, side="right") - 1, 0, len(ax) - 2)
        t = (c - ax[i]) / (ax[i + 1] - ax[i])
        return i, t

    def __call__(self, x, y, w, z):
        coords = (x, y, w, z)
        if not self.active:
            shape = np.broadcast(*[np.asarray(v) for v in coords]).shape
            return np.full(shape, self.table.item())
        parts = [self._axis(k, coords[k]) for k in self.active]
        out = 0.0
        for corner in np.ndindex(*(2,) * len(parts)):
            weight = 1.0
            index = []
            for (i, t), bit in zip(parts, corner):
                weight = weight * (t if bit else 1.0 - t)
                index.append(i + bit)
            out = out + weight * self.table[tuple(index)]
        return out


def surrogate_kernel(k_true, estimates, mode="relative"):
    """Kernel rebuilt from mesh estimates.

    ``mode="direct"`` multilinearly interpolates the estimates themselves.
    ``mode="relative"`` interpolates the relative estimation error
    ``(est - true)/true`` and applies it to the exact kernel, which keeps the
    reconstruction error separate from interpolation error of an oscillating
    kernel and extends the mesh's error field over the whole Choi support.
    """
    failures = [e for e in estimates if isinstance(e, PointFailure)]
    if failures:
        raise CoverageError(f"{len(failures)} mesh points have no estimate (first: {failures[0].point})")
    if not estimates:
        raise CoverageError("no mesh estimates supplied")
    points = np.array([e.region.center for e in estimates])
    est = np.array([e.value for e in estimates], dtype=complex)
    if mode == "direct":
        interp = MeshInterpolant(points, est)
        return ProcessKernel(lambda x, y, w, z: interp(x, y, w, z), f"surrogate({k_true.name})",
                             oscillation_hint=k_true.oscillation_hint)
    if mode != "relative":
        raise ValidationError(f"choi.surrogate must be 'relative' or 'direct', got {mode!r}")
    true = k_true(points[:, 0], points[:, 1], points[:, 2], points[:, 3])
    nz = np.abs(true) > 0
    rel = np.zeros_like(est)
    rel[nz] = (est[nz] - true[nz]) / true[nz]
    rel[~nz & (est == 0)] = -1.0
    interp = MeshInterpolant(points, rel)

    def fn(x, y, w, z):
        return k_true(x, y, w, z) * (1.0 + interp(x, y, w, z))

    return ProcessKernel(fn, f"surrogate({k_true.name})", oscillation_hint=k_true.oscillation_hint)


def compare_reconstruction(k_true, estimates, lam=0.8, extent=4.0, n_points=24,
                           threshold=1e-3, surrogate="relative", strict=False):
    """Trace distance and fidelity bound between the exact Choi state and the
    one rebuilt from mesh estimates.

    Only entries whose exact magnitude exceeds ``threshold * max|entry|`` are
    compared; ``truncation_mass`` is ``1 - Tr`` of the kept exact matrix, i.e.
    the weight lost to the finite grid and the masking.
    """
    k_est = surrogate_kernel(k_true, estimates, surrogate)
    g_true = build_choi_grid(k_true, lam, extent, n_points, strict=strict)
    g_est = build_choi_grid(k_est, lam, extent, n_points, strict=strict)
    mag = np.abs(g_true.matrix)
    keep = mag > threshold * mag.max() if mag.max() > 0 else np.zeros_like(mag, dtype=bool)
    diff = np.where(keep, g_true.matrix - g_est.matrix, 0.0)
    T = 0.5 * trace_norm(diff)
    kept_trace = float(np.real(np.trace(np.where(keep, g_true.matrix, 0.0))))
    points = np.array([e.region.center for e in estimates])
    true_vals = k_true(points[:, 0], points[:, 1], points[:, 2], points[:, 3])
    est_vals = np.array([e.value for e in estimates])
    nz = np.abs(true_vals) > 0
    e_max = float(np.max(np.abs(est_vals[nz] - true_vals[nz]) / np.abs(true_vals[nz]))) if nz.any() else None
    return ChannelDistanceReport(
        trace_distance=T,
        fidelity_lower_bound=fidelity_lower_bound(T),
        truncation_mass=1.0 - kept_trace,
        n_kept=int(keep.sum()),
        threshold=threshold,
        mesh_max_relative_error=e_max,
    )
