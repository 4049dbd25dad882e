"""Process kernels E(x, y; w, z) in the position representation.

A channel acts as ``E(rho) = ∫ E(x,y,w,z) |x><y| rho |w><z| dx dy dw dz``.
Kernels here are closed-form, vectorized callables: every evaluator in the
package passes broadcastable numpy arrays for the four coordinates.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._expr import compile_expression
from .exceptions import ExpressionError, NumericalError, ValidationError


@dataclass(frozen=True)
class ProcessKernel:
    """Complex kernel of a quantum process plus the metadata the integrators need.

    Parameters
    ----------
    fn : callable
        ``fn(x, y, w, z) -> complex array`` with numpy broadcasting semantics.
    name : str
        Human readable label.
    oscillation_hint : float
        Phase frequency per unit coordinate magnitude. The local angular
        frequency over a box is taken as ``oscillation_hint * max(1, max|coord|)``
        and used only to size quadrature orders.
    hermitian : bool
        Whether ``E(x,y,w,z) = conj(E(z,w,y,x))`` is known to hold.
    """

    fn: Callable = field(repr=False)
    name: str
    oscillation_hint: float = 0.0
    hermitian: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x, y, w, z):
        return np.asarray(self.fn(x, y, w, z), dtype=complex)

    def eval(self, x, y, w, z):
        """Scalar convenience wrapper around ``__call__``."""
        return complex(self(float(x), float(y), float(w), float(z)))

    def frequency(self, lo, hi):
        """Characteristic angular frequency over the box ``[lo, hi]`` in R^4."""
        if self.oscillation_hint == 0.0:
            return 0.0
        scale = max(1.0, float(np.max(np.abs(np.concatenate([np.ravel(lo), np.ravel(hi)])))))
        return self.oscillation_hint * scale


def _shape(*args):
    return np.broadcast(*[np.asarray(a) for a in args]).shape


def fourier_kernel():
    """The continuous-variable Fourier transform, ``E = exp(i(xy - wz)) / 2pi``."""
    norm = 1.0 / (2.0 * math.pi)

    def fn(x, y, w, z):
        return norm * np.exp(1j * (np.multiply(x, y) - np.multiply(w, z)))

    return ProcessKernel(fn, "fourier", oscillation_hint=1.0, hermitian=True)


def constant_kernel(k):
    """Kernel identically equal to ``k`` (not a physical channel; a test fixture)."""
    k = complex(k)
    if not (math.isfinite(k.real) and math.isfinite(k.imag)):
        raise ValidationError(f"constant kernel value must be finite, got {k!r}")

    def fn(x, y, w, z):
        return np.full(_shape(x, y, w, z), k, dtype=complex)

    return ProcessKernel(
        fn, f"constant({k.real:g}{k.imag:+g}i)", oscillation_hint=0.0,
        hermitian=k.imag == 0.0, params={"value": k},
    )


def fractional_fourier_kernel(theta):
    """Kernel of the fractional Fourier propagator ``U_theta``.

    ``E(x,y,w,z) = U(x,y) * conj(U(z,w))`` with
    ``U(x,y) = sqrt(1/(2 pi i sin t)) exp(i[(x^2+y^2) cos t - 2xy] / (2 sin t))``.

    Note the sign convention: ``theta = -pi/2`` reproduces :func:`fourier_kernel`
    up to a global phase, ``theta = +pi/2`` its complex conjugate.
    """
    theta = float(theta)
    s = math.sin(theta)
    if abs(s) < 1e-6:
        raise ValidationError(
            f"fractional Fourier propagator is degenerate at theta={theta!r} (|sin theta| < 1e-6)"
        )
    c = math.cos(theta)
    pref = np.sqrt(1.0 / (2j * math.pi * s))
    mod2 = abs(pref) ** 2

    def phase(u, v):
        return ((np.multiply(u, u) + np.multiply(v, v)) * c - 2.0 * np.multiply(u, v)) / (2.0 * s)

    def fn(x, y, w, z):
        # |pref|^2 because U(x,y) conj(U(z,w)) carries pref * conj(pref)
        return mod2 * np.exp(1j * (phase(x, y) - phase(z, w)))

    hint = (1.0 + abs(c)) / abs(s)
    return ProcessKernel(
        fn, f"fractional_fourier({theta:g})", oscillation_hint=hint,
        hermitian=True, params={"theta": theta},
    )


def user_kernel_from_expression(expr, oscillation_hint=1.0, name=None):
    """Compile a textual kernel such as ``"1/(2*pi)*exp(i*(x*y-w*z))"``.

    Raises :class:`~cvqpt.exceptions.ExpressionError` on bad syntax or unknown
    identifiers and :class:`~cvqpt.exceptions.NumericalError` if the kernel is
    not finite at the origin.
    """
    fn = compile_expression(expr)
    probe = complex(fn(0.0, 0.0, 0.0, 0.0))
    if not (math.isfinite(probe.real) and math.isfinite(probe.imag)):
        raise NumericalError(f"kernel expression {expr!r} is not finite at (0, 0, 0, 0)")
    return ProcessKernel(
        fn, name or f"expr({expr})", oscillation_hint=float(oscillation_hint),
        params={"expression": expr},
    )


BUILTINS = {
    "fourier": ("Fourier transform, exp(i(xy - wz))/(2 pi)", fourier_kernel),
    "constant": ("constant kernel, parameter: value", constant_kernel),
    "fractional_fourier": ("fractional Fourier propagator, parameter: theta", fractional_fourier_kernel),
}


def kernel_from_spec(spec):
    """Build a kernel from a mapping like ``{"name": "constant", "value": 0.5}``
    or ``{"expression": "..."}``."""
    if isinstance(spec, ProcessKernel):
        return spec
    if isinstance(spec, str):
        if spec in BUILTINS:
            return kernel_from_spec({"name": spec})
        return user_kernel_from_expression(spec)
    if not isinstance(spec, dict):
        raise ValidationError("kernel: expected a mapping")
    if "expression" in spec:
        return user_kernel_from_expression(
            spec["expression"], oscillation_hint=spec.get("oscillation_hint", 1.0)
        )
    name = spec.get("name")
    if name == "fourier":
        return fourier_kernel()
    if name == "constant":
        if "value" not in spec:
            raise ValidationError("kernel.value: required for the constant kernel")
        value = spec["value"]
        if isinstance(value, str):
            try:
                value = complex(value.replace(" ", "").replace("i", "j"))
            except ValueError:
                raise ValidationError(f"kernel.value: cannot parse {value!r} as complex") from None
        return constant_kernel(value)
    if name == "fractional_fourier":
        if "theta" not in spec:
            raise ValidationError("kernel.theta: required for the fractional Fourier kernel")
        return fractional_fourier_kernel(spec["theta"])
    if name in ("identity", "id"):
        raise ValidationError("kernel.name: distributional kernels such as the identity are not supported")
    raise ValidationError(f"kernel.name: unknown kernel {name!r}")


__all__ = [
    "ProcessKernel",
    "fourier_kernel",
    "constant_kernel",
    "fractional_fourier_kernel",
    "user_kernel_from_expression",
    "kernel_from_spec",
    "BUILTINS",
    "ExpressionError",
]
