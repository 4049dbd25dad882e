"""Estimator-style front end for selective process tomography.

``fit`` binds the process under test and calibrates the probe; ``predict``
returns element estimates at query points ``(a, b, c, d)``::

    est = SelectiveProcessTomography(epsilon=0.05).fit(fourier_kernel())
    values = est.predict([[0.5, 1.0, 0.0, 0.0]])
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_points, check_positive
from .exceptions import ValidationError
from .kernels import ProcessKernel, kernel_from_spec
from .probe import make_probe
from .tomography import (
    DetectorModel,
    ElementEstimate,
    RefinementOptions,
    ShotConfig,
    normalization,
    scan_mesh,
)


class SelectiveProcessTomography(BaseEstimator):
    """Adaptive element-wise estimator of a continuous-variable process kernel.

    Parameters
    ----------
    delta : float
        Detector window width.
    support : float
        Probe effective support width.
    threshold : float
        Probe amplitude at ``|x| = support / 2``.
    epsilon : float
        Flatness tolerance of the trisection refinement.
    max_depth, subset_size, abs_floor, random_state :
        Refinement options; ``random_state`` seeds the subregion subset.
    shots : int, "chernoff" or None
        ``None`` gives noiseless estimates.  An int fixes the number of runs
        per Pauli channel; ``"chernoff"`` sizes it from ``shot_epsilon`` and
        ``shot_p``.
    shot_seed : int
        Base seed for the per-point shot streams.
    n_jobs : int
        Threads used to scan points.
    """

    def __init__(self, delta=0.1, support=0.1, threshold=0.05, epsilon=0.05,
                 max_depth=12, subset_size=None, abs_floor=None, random_state=0,
                 shots=None, shot_epsilon=0.1, shot_p=0.05, shot_seed=0, n_jobs=1):
        self.delta = delta
        self.support = support
        self.threshold = threshold
        self.epsilon = epsilon
        self.max_depth = max_depth
        self.subset_size = subset_size
        self.abs_floor = abs_floor
        self.random_state = random_state
        self.shots = shots
        self.shot_epsilon = shot_epsilon
        self.shot_p = shot_p
        self.shot_seed = shot_seed
        self.n_jobs = n_jobs

    def _options(self):
        return RefinementOptions(
            max_depth=check_int(self.max_depth, "max_depth"),
            subset_size=check_int(self.subset_size, "subset_size", 1, allow_none=True),
            abs_floor=check_positive(self.abs_floor, "abs_floor", allow_none=True),
            seed=check_int(self.random_state, "random_state"),
        )

    def _shot_config(self):
        if self.shots is None:
            return None
        if self.shots == "chernoff":
            m = None
        else:
            m = check_int(self.shots, "shots", 1)
        return ShotConfig(m, check_positive(self.shot_epsilon, "shot_epsilon"),
                          float(self.shot_p), check_int(self.shot_seed, "shot_seed"))

    def fit(self, X, y=None):
        """Bind the process ``X`` (a :class:`ProcessKernel`, spec mapping or expression)."""
        self.kernel_ = X if isinstance(X, ProcessKernel) else kernel_from_spec(X)
        self.detector_ = DetectorModel(check_positive(self.delta, "delta"))
        self.probe_ = make_probe(check_positive(self.support, "support"),
                                 check_positive(self.threshold, "threshold"))
        check_positive(self.epsilon, "epsilon")
        self.options_ = self._options()
        self.shot_config_ = self._shot_config()
        self.A_ = normalization(self.detector_, self.probe_)
        return self

    def refine(self, X):
        """Full per-point results: :class:`ElementEstimate` or :class:`PointFailure`."""
        check_is_fitted(self, "kernel_")
        X = check_points(X)
        return scan_mesh(
            self.kernel_, X, self.detector_, self.probe_, float(self.epsilon),
            self.options_, self.shot_config_, threads=check_int(self.n_jobs, "n_jobs", 1),
        )

    def predict(self, X):
        """Complex estimates at each row of ``X``; NaN where refinement failed."""
        out = self.refine(X)
        return np.array(
            [r.value if isinstance(r, ElementEstimate) else complex(np.nan, np.nan) for r in out]
        )

    def score(self, X, y=None):
        """Negative maximum relative error against ``y`` (exact values, default: the kernel)."""
        X = check_points(X)
        pred = self.predict(X)
        if y is None:
            y = self.kernel_(X[:, 0], X[:, 1], X[:, 2], X[:, 3])
        y = np.asarray(y, dtype=complex)
        if y.shape != pred.shape:
            raise ValidationError("y must have one value per point")
        return -float(np.max(np.abs(pred - y) / np.abs(y)))
