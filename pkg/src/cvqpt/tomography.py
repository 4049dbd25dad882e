"""Selective process tomography: gate/region algebra, measurement expectations,
the element estimator, trisection refinement and shot simulation.

The circuit is never simulated on a discretized Hilbert space.  Each
measured quantity is a closed-form three dimensional integral over the
detector window ``xi`` and the two probe coordinates ``alpha, beta``:

    I = ∫ dxi ∫∫ psi(alpha) psi(beta)
          E(s_a xi + a, s_b alpha + b, s_c beta + c, s_d xi + d) dalpha dbeta

with ``s_k = exp(-r_k)``.  ``<Pi_delta ⊗ sigma_x> = e^{-R/2} Re I`` and
``<Pi_delta ⊗ sigma_y> = e^{-R/2} Im I``.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import erf

from .exceptions import (
    CVQPTError,
    NonConvergenceError,
    UnphysicalKernelError,
    ValidationError,
)
from .probe import ProbeState
from .quadrature import Box, choose_order, gauss_nodes, integrate_box

LN3 = math.log(3.0)
CENTRAL = 40  # index of the (0, 0, 0, 0) offset in the 3^4 trisection


@dataclass(frozen=True)
class DetectorModel:
    """Finite-precision position projector of width ``delta`` around the origin."""

    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValidationError(f"detector.delta must be positive, got {self.delta!r}")


@dataclass(frozen=True)
class GateConfig:
    a: float
    b: float
    c: float
    d: float
    r_a: float = 0.0
    r_b: float = 0.0
    r_c: float = 0.0
    r_d: float = 0.0

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d, self.r_a, self.r_b, self.r_c, self.r_d)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"gate parameters must be finite, got {vals}")

    @property
    def R(self):
        return self.r_a + self.r_b + self.r_c + self.r_d

    @property
    def translations(self):
        return (self.a, self.b, self.c, self.d)

    @property
    def squeezings(self):
        return (self.r_a, self.r_b, self.r_c, self.r_d)


@dataclass(frozen=True)
class Region4:
    """Axis-aligned box in R^4 given by its center and full widths."""

    center: tuple
    widths: tuple

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        widths = tuple(float(v) for v in self.widths)
        if len(center) != 4 or len(widths) != 4:
            raise ValidationError("region needs four center coordinates and four widths")
        if not all(w > 0 and math.isfinite(w) for w in widths):
            raise ValidationError(f"region widths must be positive, got {widths}")
        if not all(math.isfinite(v) for v in center):
            raise ValidationError(f"region center must be finite, got {center}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "widths", widths)

    @property
    def volume(self):
        return float(np.prod(self.widths))

    @property
    def lo(self):
        return tuple(c - 0.5 * w for c, w in zip(self.center, self.widths))

    @property
    def hi(self):
        return tuple(c + 0.5 * w for c, w in zip(self.center, self.widths))


@dataclass(frozen=True)
class ShotStats:
    channel: str
    m_runs: int
    counts_plus: int
    counts_minus: int
    counts_null: int
    rng_seed: int

    @property
    def mean(self):
        return (self.counts_plus - self.counts_minus) / self.m_runs


@dataclass(frozen=True)
class ElementEstimate:
    value: complex
    region: Region4
    depth: int = 0
    quad_err: float = 0.0
    shots: Optional[tuple] = None
    spread: Optional[float] = None


@dataclass(frozen=True)
class RefinementOptions:
    max_depth: int = 12
    subset_size: Optional[int] = None
    abs_floor: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValidationError("refinement.max_depth must be >= 0")
        if self.subset_size is not None and not 1 <= self.subset_size <= 81:
            raise ValidationError("refinement.subset_size must be in [1, 81]")
        if self.abs_floor is not None and not self.abs_floor > 0:
            raise ValidationError("refinement.abs_floor must be positive")


@dataclass(frozen=True)
class ShotConfig:
    """Either an explicit ``m_runs`` or a Chernoff target ``(epsilon_est, p_fail)``."""

    m_runs: Optional[int] = None
    epsilon_est: float = 0.1
    p_fail: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.m_runs is not None and self.m_runs < 1:
            raise ValidationError("shots.m_runs must be >= 1")
        if not self.epsilon_est > 0:
            raise ValidationError("shots.epsilon must be positive")
        if not 0 < self.p_fail < 1:
            raise ValidationError("shots.p must be in (0, 1)")


@dataclass(frozen=True)
class PointFailure:
    """A mesh point whose pipeline raised; kept in place in scan results."""

    index: int
    point: tuple
    kind: str
    message: str
    last_estimate: Optional[ElementEstimate] = None


def _reference_widths(det, probe):
    return np.array([det.delta, probe.delta_support, probe.delta_support, det.delta])


def gates_from_region(region, det, probe):
    ref = _reference_widths(det, probe)
    r = np.log(ref / np.asarray(region.widths))
    return GateConfig(*region.center, *(float(v) for v in r))


def region_from_gates(g, det, probe):
    ref = _reference_widths(det, probe)
    widths = ref * np.exp(-np.asarray(g.squeezings))
    return Region4(g.translations, tuple(float(v) for v in widths))


def initial_region(point, det, probe):
    return Region4(tuple(point), tuple(_reference_widths(det, probe)))


@lru_cache(maxsize=64)
def _probe_order(C, half):
    """Smallest Gauss order integrating the truncated Gaussian to ~1e-15 relative."""
    exact = math.sqrt(math.pi / C) * erf(math.sqrt(C) * half)
    for n in range(8, 129, 2):
        x, w = gauss_nodes(n)
        approx = half * float(np.sum(w * np.exp(-C * (half * x) ** 2)))
        if abs(approx - exact) <= 4e-15 * exact:
            return n
    return 128


# Coordinate maps for the three integrals the circuit produces.  Each entry
# gives, per kernel argument, (which gate index supplies the translation and
# scale, which integration variable) with variables 0 = xi, 1 = alpha, 2 = beta.
_MAPS = {
    "cross": ((0, 0), (1, 1), (2, 2), (3, 0)),
    "branch0": ((0, 0), (1, 1), (1, 2), (0, 0)),
    "branch1": ((3, 0), (2, 1), (2, 2), (3, 0)),
}


def _mapped_integrals(kernel, centers, scales, det, probe, which="cross", escalate=True):
    """Batched ``I`` for arrays of gate translations/scales, shape (n, 4) each.

    Returns complex values and error estimates of shape (n,).
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    scales = np.atleast_2d(np.asarray(scales, dtype=float))
    mapping = _MAPS[which]
    half_xi = 0.5 * det.delta
    half_p = probe.half_support
    box = Box((-half_xi, -half_p, -half_p), (half_xi, half_p, half_p))

    # kernel-coordinate extent of every argument, for order selection
    var_half = (half_xi, half_p, half_p)
    arg_half = np.stack([scales[:, g] * var_half[v] for g, v in mapping], axis=1)
    arg_mid = np.stack([centers[:, g] for g, _ in mapping], axis=1)
    freq = kernel.frequency(arg_mid - arg_half, arg_mid + arg_half)
    orders = []
    for v in range(3):
        # a variable feeding several kernel arguments sees their phase slopes add up
        span = sum(2.0 * arg_half[:, k] for k, (_, vv) in enumerate(mapping) if vv == v)
        orders.append(choose_order(freq, float(np.max(span))))
    p_min = _probe_order(probe.C, half_p)
    orders[1] = max(orders[1], p_min)
    orders[2] = max(orders[2], p_min)

    t = centers[:, :, None, None, None]
    s = scales[:, :, None, None, None]

    def integrand(xi, alpha, beta):
        var = (xi, alpha, beta)
        args = [s[:, g] * var[v] + t[:, g] for g, v in mapping]
        return kernel(*args) * (probe(alpha) * probe(beta))

    res = integrate_box(integrand, box, orders, escalate=escalate)
    return np.asarray(res.value), np.asarray(res.err_estimate)


def _gate_arrays(gates):
    centers = np.array([g.translations for g in gates], dtype=float)
    scales = np.exp(-np.array([g.squeezings for g in gates], dtype=float))
    return centers, scales


def _region_arrays(centers, widths, det, probe):
    ref = _reference_widths(det, probe)
    return np.asarray(centers, dtype=float), np.asarray(widths, dtype=float) / ref


def normalization(det, probe):
    """Estimator constant ``A = delta * (∫_{-Δ/2}^{Δ/2} psi)^2``."""
    return float(det.delta * probe.l1_truncated ** 2)


def _cross(kernel, g, det, probe):
    c, s = _gate_arrays([g])
    val, err = _mapped_integrals(kernel, c, s, det, probe, "cross")
    return complex(val[0]), float(err[0])


def expectation_sigma_x(kernel, g, det, probe):
    """``<Pi_delta ⊗ sigma_x>`` and its quadrature error."""
    val, err = _cross(kernel, g, det, probe)
    pref = math.exp(-0.5 * g.R)
    return pref * val.real, pref * err


def expectation_sigma_y(kernel, g, det, probe):
    """``<Pi_delta ⊗ sigma_y>`` and its quadrature error."""
    val, err = _cross(kernel, g, det, probe)
    pref = math.exp(-0.5 * g.R)
    return pref * val.imag, pref * err


def click_probability(kernel, g, det, probe):
    """Probability that the position detector clicks, traced over the qubit.

    ``P = (e^{-(r_a+r_b)} I_00 + e^{-(r_c+r_d)} I_11) / 2`` where ``I_00`` and
    ``I_11`` are the diagonal-branch integrals of the final circuit state.
    """
    c, s = _gate_arrays([g])
    i0, e0 = _mapped_integrals(kernel, c, s, det, probe, "branch0")
    i1, e1 = _mapped_integrals(kernel, c, s, det, probe, "branch1")
    w0 = math.exp(-(g.r_a + g.r_b))
    w1 = math.exp(-(g.r_c + g.r_d))
    p = 0.5 * (w0 * complex(i0[0]) + w1 * complex(i1[0]))
    err = 0.5 * (w0 * float(e0[0]) + w1 * float(e1[0]))
    tol = err + 1e-14
    if abs(p.imag) > tol:
        raise UnphysicalKernelError(
            f"click probability has imaginary part {p.imag:.3g} (kernel does not preserve Hermiticity)"
        )
    if p.real < -tol or p.real > 1.0 + tol:
        raise UnphysicalKernelError(f"click probability {p.real:.6g} outside [0, 1]")
    return min(1.0, max(0.0, p.real)), err


def estimate_element(kernel, region, det, probe):
    """Noiseless estimate of ``E`` at the region center (depth 0)."""
    c, s = _region_arrays([region.center], [region.widths], det, probe)
    val, err = _mapped_integrals(kernel, c, s, det, probe, "cross")
    A = normalization(det, probe)
    return ElementEstimate(complex(val[0]) / A, region, 0, float(err[0]) / A)


def estimate_many(kernel, centers, widths, det, probe, escalate=False):
    """Vectorized noiseless estimates for arrays of regions (n, 4)."""
    c, s = _region_arrays(centers, widths, det, probe)
    val, err = _mapped_integrals(kernel, c, s, det, probe, "cross", escalate=escalate)
    A = normalization(det, probe)
    return val / A, err / A


_OFFSETS = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=4)))


def trisect(region):
    """Centers (81, 4) and common widths (4,) of the 3^4 subregions."""
    w = np.asarray(region.widths) / 3.0
    centers = np.asarray(region.center) + _OFFSETS * w
    return centers, w


def refine_region(kernel, point, det, probe, epsilon, opts=None):
    """Shrink the region around ``point`` by trisection until its subregion
    estimates agree with the central one within ``epsilon`` (relative).

    Returns the central-subregion estimate; ``depth`` counts the failed
    tests, so the returned region has widths ``(δ, Δ, Δ, δ) / 3^(depth+1)``.
    """
    opts = opts or RefinementOptions()
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon!r}")
    region = initial_region(point, det, probe)
    rng = np.random.default_rng(opts.seed)
    worst = None
    last = None
    for depth in range(opts.max_depth + 1):
        centers, w = trisect(region)
        if opts.subset_size is not None and opts.subset_size < 81:
            others = np.delete(np.arange(81), CENTRAL)
            pick = rng.choice(others, size=opts.subset_size - 1, replace=False)
            idx = np.concatenate(([CENTRAL], np.sort(pick)))
        else:
            idx = np.arange(81)
        widths = np.broadcast_to(w, (len(idx), 4))
        vals, _ = estimate_many(kernel, centers[idx], widths, det, probe)
        central_pos = int(np.flatnonzero(idx == CENTRAL)[0])
        ec = vals[central_pos]
        diffs = np.abs(vals - ec)
        floor = opts.abs_floor if opts.abs_floor is not None else 1e-6 * float(np.max(np.abs(vals)))
        if abs(ec) < floor or abs(ec) == 0.0:
            worst = float(np.max(diffs) / floor) if floor > 0 else 0.0
        else:
            worst = float(np.max(diffs) / abs(ec))
        central = Region4(tuple(centers[CENTRAL]), tuple(w))
        last = estimate_element(kernel, central, det, probe)
        last = replace(last, depth=depth, spread=worst)
        if worst <= epsilon:
            return last
        region = central
    raise NonConvergenceError(
        f"refinement at {tuple(point)} did not reach epsilon={epsilon} within "
        f"max_depth={opts.max_depth} (worst ratio {worst:.3g})",
        last_estimate=last,
        worst_ratio=worst,
    )


def chernoff_shots(epsilon_est, p_fail, A, R):
    """Runs needed so the estimate errs by >= epsilon_est with probability <= p_fail."""
    if not epsilon_est > 0:
        raise ValidationError("epsilon_est must be positive")
    if not 0 < p_fail < 1:
        raise ValidationError("p_fail must be in (0, 1)")
    if not A > 0:
        raise ValidationError("A must be positive")
    bound = 2.0 * math.log(2.0 / p_fail) / (epsilon_est ** 2 * A ** 2 * math.exp(-R))
    return int(math.ceil(bound))


def outcome_probabilities(p_click, expectation, tol=0.0):
    """``(p_plus, p_minus, p_null)`` for one Pauli channel.

    Negatives within ``tol`` are clipped and the triple renormalized.
    """
    p = np.array([0.5 * (p_click + expectation), 0.5 * (p_click - expectation), 1.0 - p_click])
    if np.any(p < -tol):
        raise UnphysicalKernelError(
            f"negative outcome probability {float(p.min()):.3g} (P_click={p_click:.6g}, "
            f"expectation={expectation:.6g})"
        )
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def simulate_shots(kernel, region, det, probe, M, seed, depth=0):
    """Sample ``M`` runs per Pauli channel and return the shot-based estimate."""
    M = int(M)
    if M < 1:
        raise ValidationError("number of runs M must be >= 1")
    g = gates_from_region(region, det, probe)
    I, ierr = _cross(kernel, g, det, probe)
    pref = math.exp(-0.5 * g.R)
    x, y = pref * I.real, pref * I.imag
    p_click, perr = click_probability(kernel, g, det, probe)
    tol = 0.5 * (perr + pref * ierr) + 1e-15
    rng = np.random.default_rng(seed)
    stats = []
    means = []
    for channel, expect in (("x", x), ("y", y)):
        probs = outcome_probabilities(p_click, expect, tol)
        n_plus, n_minus, n_null = (int(v) for v in rng.multinomial(M, probs))
        st = ShotStats(channel, M, n_plus, n_minus, n_null, int(seed))
        stats.append(st)
        means.append(st.mean)
    A = normalization(det, probe)
    value = complex(means[0], means[1]) / (pref * A)
    return ElementEstimate(value, region, depth, ierr / A, shots=tuple(stats))


def point_seed(seed, index):
    """Independent per-point stream so scans agree regardless of scheduling."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _scan_one(args):
    kernel, index, point, det, probe, epsilon, opts, shot_cfg = args
    try:
        est = refine_region(kernel, point, det, probe, epsilon, opts)
        if shot_cfg is not None:
            A = normalization(det, probe)
            R = gates_from_region(est.region, det, probe).R
            M = shot_cfg.m_runs or chernoff_shots(shot_cfg.epsilon_est, shot_cfg.p_fail, A, R)
            shot = simulate_shots(
                kernel, est.region, det, probe, M, point_seed(shot_cfg.seed, index), depth=est.depth
            )
            est = replace(shot, spread=est.spread)
        return est
    except NonConvergenceError as exc:
        return PointFailure(index, tuple(point), "nonconvergence", str(exc), exc.last_estimate)
    except CVQPTError as exc:
        return PointFailure(index, tuple(point), "numerical", str(exc))


def scan_mesh(kernel, mesh, det, probe, epsilon, opts=None, shot_cfg=None, threads=1):
    """Refine every mesh point; failures come back as :class:`PointFailure` in place."""
    mesh = [tuple(float(v) for v in p) for p in mesh]
    if not mesh:
        raise ValidationError("mesh must contain at least one point")
    opts = opts or RefinementOptions()
    jobs = [(kernel, i, p, det, probe, epsilon, opts, shot_cfg) for i, p in enumerate(mesh)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_scan_one, jobs))
    return [_scan_one(j) for j in jobs]
