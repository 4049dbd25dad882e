"""Gaussian probe wave function, normalized Hermite functions and the Mehler kernel."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf, erfc

from .exceptions import ValidationError

HERMITE_MAX_ORDER = 500


@dataclass(frozen=True)
class ProbeState:
    """Centered real Gaussian ``psi(x) = norm_const * exp(-C x^2)``.

    ``delta_support`` is the effective support width: ``psi(x) < threshold``
    for ``|x| > delta_support / 2``.
    """

    C: float
    delta_support: float
    norm_const: float
    l1_integral: float
    threshold: float = 0.05

    @property
    def half_support(self):
        return 0.5 * self.delta_support

    @property
    def l1_truncated(self):
        """``∫ psi`` over ``[-Δ/2, Δ/2]``; the estimator normalization uses this."""
        return self.l1_integral * erf(math.sqrt(self.C) * self.half_support)

    @property
    def tail_mass(self):
        """Probability ``∫_{|x|>Δ/2} |psi|^2`` discarded by support truncation."""
        return float(erfc(math.sqrt(2.0 * self.C) * self.half_support))

    def __call__(self, x):
        return self.norm_const * np.exp(-self.C * np.square(x))


def make_probe(delta_support, threshold=0.05):
    """Normalized Gaussian whose amplitude equals ``threshold`` at ``|x| = Δ/2``.

    Of the two widths satisfying the boundary condition the narrow one is
    returned, i.e. the root with ``C > 1/Δ^2`` where the boundary amplitude
    decreases monotonically in ``C``.
    """
    delta_support = float(delta_support)
    threshold = float(threshold)
    if not delta_support > 0 or not math.isfinite(delta_support):
        raise ValidationError(f"probe support must be positive, got {delta_support!r}")
    if not threshold > 0:
        raise ValidationError(f"probe threshold must be positive, got {threshold!r}")
    h = 0.5 * delta_support

    def log_edge(C):
        return 0.25 * math.log(2.0 * C / math.pi) - C * h * h

    # edge amplitude (2C/pi)^(1/4) e^{-C h^2} peaks at C = 1/(4h^2)
    c_star = 1.0 / (4.0 * h * h)
    target = math.log(threshold)
    if log_edge(c_star) <= target:
        raise ValidationError(
            f"no Gaussian probe reaches threshold {threshold} at |x| = {h}; "
            f"largest attainable edge amplitude is {math.exp(log_edge(c_star)):.4g}"
        )
    hi = 2.0 * c_star
    while log_edge(hi) > target:
        hi *= 2.0
    C = brentq(lambda c: log_edge(c) - target, c_star, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    norm = (2.0 * C / math.pi) ** 0.25
    return ProbeState(
        C=C, delta_support=delta_support, norm_const=norm,
        l1_integral=math.sqrt(math.pi / C) * norm, threshold=threshold,
    )


def probe_amplitude(p, x):
    return p(x)


def hermite_psi(n, x):
    """Normalized Hermite function ``psi_n(x) = H_n(x) e^{-x^2/2} / (pi^{1/4} sqrt(2^n n!))``.

    Uses the three-term recurrence on the normalized functions directly.
    Accepts scalar or array ``x``; ``n`` up to 500.
    """
    n = int(n)
    if n < 0 or n > HERMITE_MAX_ORDER:
        raise ValidationError(f"hermite order must be in [0, {HERMITE_MAX_ORDER}], got {n}")
    return hermite_psi_all(n, x)[n]


def hermite_psi_all(nmax, x):
    """Stack ``[psi_0(x), ..., psi_nmax(x)]`` along a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def mehler_f(lam, x, y):
    """Closed form of ``sum_n lam^n psi_n(x) psi_n(y)`` for ``|lam| < 1``."""
    lam = float(lam)
    if not -1.0 < lam < 1.0:
        raise ValidationError(f"Mehler kernel requires |lambda| < 1, got {lam!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = x + y
    d = x - y
    expo = -(1.0 - lam) * s * s / (4.0 * (1.0 + lam)) - (1.0 + lam) * d * d / (4.0 * (1.0 - lam))
    return np.exp(expo) / math.sqrt(math.pi * (1.0 - lam * lam))


def mehler_gaussian(lam, y):
    """Center and standard deviation of ``f_lam(., y)`` viewed as a Gaussian.

    ``f_lam(t, y) ∝ exp(-(t - mu)^2 / (2 sigma^2))`` with
    ``mu = 2 lam y / (1 + lam^2)`` and ``sigma^2 = (1 - lam^2)/(1 + lam^2)``.
    """
    mu = 2.0 * lam * np.asarray(y, dtype=float) / (1.0 + lam * lam)
    sigma = math.sqrt((1.0 - lam * lam) / (1.0 + lam * lam))
    return mu, sigma
