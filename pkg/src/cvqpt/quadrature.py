"""Tensor-product Gauss-Legendre quadrature over small boxes.

The integrators here are deliberately non-adaptive: callers pick the order
(see :func:`choose_order`) and the error is estimated by re-integrating at
1.5x the order.  Integrands may return extra leading batch axes, which lets
one call integrate the same box for many parameter sets at once.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np

from .exceptions import IntegrandError, ValidationError

MAX_ORDER = 256

_cache = {}
_cache_lock = threading.Lock()


def gauss_nodes(order):
    """Gauss-Legendre nodes and weights on [-1, 1], ascending, cached per order."""
    order = int(order)
    if order < 1 or order > MAX_ORDER:
        raise ValidationError(f"quadrature order must be in [1, {MAX_ORDER}], got {order}")
    hit = _cache.get(order)
    if hit is not None:
        return hit
    with _cache_lock:
        hit = _cache.get(order)
        if hit is None:
            hit = _compute_nodes(order)
            _cache[order] = hit
    return hit


def _compute_nodes(n):
    if n == 1:
        x, w = np.array([0.0]), np.array([2.0])
    else:
        k = np.arange(1, n + 1)
        x = np.cos(math.pi * (k - 0.25) / (n + 0.5))
        for _ in range(100):
            p_prev, p = _legendre_pair(n, x)
            dp = n * (x * p - p_prev) / (x * x - 1.0)
            dx = p / dp
            x = x - dx
            if np.max(np.abs(dx)) < 1e-15:
                break
        p_prev, p = _legendre_pair(n, x)
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
        order = np.argsort(x)
        x, w = x[order], w[order]
        # symmetrize away the last ulp of Newton noise
        x = 0.5 * (x - x[::-1])
        w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _legendre_pair(n, x):
    """Return ``(P_{n-1}(x), P_n(x))`` by the Bonnet recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(2, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    return p_prev, p


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lo))
        hi = tuple(float(v) for v in np.ravel(self.hi))
        if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
            raise ValidationError(f"box bounds must have matching length 1..3, got {len(lo)} and {len(hi)}")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValidationError(f"box needs lo < hi on every axis, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def widths(self):
        return tuple(b - a for a, b in zip(self.lo, self.hi))


@dataclass(frozen=True)
class QuadResult:
    value: complex
    err_estimate: float
    nodes_used: int


def choose_order(frequency, width, minimum=12, cap=128):
    """Per-axis order ``max(minimum, ceil(4 * frequency * width))`` capped at ``cap``."""
    return int(min(cap, max(minimum, math.ceil(4.0 * frequency * width))))


def _axes(box, orders):
    grids = []
    for i, (a, b, n) in enumerate(zip(box.lo, box.hi, orders)):
        x, w = gauss_nodes(n)
        half = 0.5 * (b - a)
        shape = [1] * box.dim
        shape[i] = n
        grids.append(((0.5 * (a + b) + half * x).reshape(shape), half * w))
    return grids


def _tensor_rule(f, box, orders):
    grids = _axes(box, orders)
    vals = np.asarray(f(*[g for g, _ in grids]), dtype=complex)
    full = np.broadcast_shapes(vals.shape, tuple(orders))
    vals = np.broadcast_to(vals, full)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        node_idx = bad[-box.dim:]
        point = [float(np.ravel(g)[j]) for (g, _), j in zip(grids, node_idx)]
        raise IntegrandError(point, complex(vals[tuple(bad)]))
    out = vals
    for _, w in reversed(grids):
        out = out @ w
    return out, int(np.prod(orders))


def integrate_box(f, box, base_order, escalate=True):
    """Integrate ``f`` over ``box`` with a tensor Gauss-Legendre rule.

    ``f`` receives one broadcastable coordinate array per axis (axis ``i``
    has shape ``n_i`` along dimension ``i`` and 1 elsewhere) and may return
    extra leading batch axes; the result then carries the batch shape.
    ``base_order`` is an int or a per-axis sequence.

    The error estimate is ``|Q_n - Q_m|`` with ``m = ceil(1.5 n)`` per axis.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    orders = np.broadcast_to(np.asarray(base_order, dtype=int), (box.dim,))
    if np.any(orders < 1):
        raise ValidationError(f"base_order must be >= 1, got {base_order!r}")
    orders = tuple(int(o) for o in orders)
    value, used = _tensor_rule(f, box, orders)
    err = np.zeros(np.shape(value))
    if escalate:
        high = tuple(min(MAX_ORDER, math.ceil(1.5 * o)) for o in orders)
        v2, used2 = _tensor_rule(f, box, high)
        err = np.abs(v2 - value)
        used += used2
    if np.ndim(value) == 0:
        return QuadResult(complex(value), float(err), used)
    return QuadResult(value, err, used)
