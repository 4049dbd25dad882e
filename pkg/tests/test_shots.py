import numpy as np
import pytest

from cvqpt import (
    RefinementOptions,
    ShotConfig,
    constant_kernel,
    fourier_kernel,
    scan_mesh,
    simulate_shots,
)
from cvqpt.exceptions import UnphysicalKernelError, ValidationError
from cvqpt.tomography import initial_region, outcome_probabilities, point_seed


def test_counts_add_up(det, probe):
    region = initial_region((0, 0, 0, 0), det, probe)
    est = simulate_shots(fourier_kernel(), region, det, probe, 5000, seed=1)
    for s in est.shots:
        assert s.counts_plus + s.counts_minus + s.counts_null == 5000
        assert s.m_runs == 5000
    assert [s.channel for s in est.shots] == ["x", "y"]


def test_same_seed_same_counts(det, probe):
    region = initial_region((0.5, 1.0, 0, 0), det, probe)
    a = simulate_shots(fourier_kernel(), region, det, probe, 10_000, seed=42)
    b = simulate_shots(fourier_kernel(), region, det, probe, 10_000, seed=42)
    c = simulate_shots(fourier_kernel(), region, det, probe, 10_000, seed=43)
    assert a == b
    assert a.shots != c.shots


def test_shot_mean_unbiased(det, probe):
    # average of many independent runs converges on the noiseless value
    region = initial_region((0, 0, 0, 0), det, probe)
    vals = [simulate_shots(constant_kernel(0.5), region, det, probe, 200_000, seed=s).value for s in range(200)]
    assert abs(np.mean(vals) - 0.5) < 4 * np.std(vals) / np.sqrt(len(vals))


@pytest.mark.parametrize("M", [0, -5])
def test_rejects_nonpositive_runs(det, probe, M):
    with pytest.raises(ValidationError):
        simulate_shots(fourier_kernel(), initial_region((0, 0, 0, 0), det, probe), det, probe, M, seed=0)


def test_outcome_probabilities_clip():
    p = outcome_probabilities(0.1, 0.1 + 1e-17, tol=1e-15)
    assert p[1] == 0.0
    assert p.sum() == pytest.approx(1.0)
    with pytest.raises(UnphysicalKernelError):
        outcome_probabilities(0.1, 0.2, tol=1e-15)


def test_point_seed_independent_of_order():
    assert point_seed(0, 5) == point_seed(0, 5)
    assert len({point_seed(0, i) for i in range(100)}) == 100
    assert point_seed(0, 1) != point_seed(1, 0)


def test_scan_with_shots_reproducible(det, probe):
    mesh = [(0.0, 0.0, 0.0, 0.0), (1.0, 0.5, 0.0, 0.0)]
    cfg = ShotConfig(m_runs=None, epsilon_est=0.1, p_fail=0.05, seed=9)
    one = scan_mesh(fourier_kernel(), mesh, det, probe, 0.05, RefinementOptions(), cfg, threads=1)
    two = scan_mesh(fourier_kernel(), mesh, det, probe, 0.05, RefinementOptions(), cfg, threads=2)
    assert one == two
    assert one[0].shots[0].rng_seed == point_seed(9, 0)
    assert all(abs(e.value - fourier_kernel().eval(*p)) < 0.1 for e, p in zip(one, mesh))


def test_doubling_runs_shrinks_spread_by_root_two(det, probe):
    region = initial_region((0, 0, 0, 0), det, probe)
    k = constant_kernel(1.0)
    low = [simulate_shots(k, region, det, probe, 100_000, s).value.real for s in range(400)]
    high = [simulate_shots(k, region, det, probe, 200_000, 5000 + s).value.real for s in range(400)]
    ratio = np.std(low, ddof=1) / np.std(high, ddof=1)
    assert abs(ratio / np.sqrt(2) - 1) <= 0.15


def test_zero_kernel_never_clicks(det, probe):
    est = simulate_shots(constant_kernel(0.0), initial_region((0, 0, 0, 0), det, probe), det, probe, 1_000_000, seed=3)
    assert est.value == 0
    assert all(s.counts_null == 1_000_000 for s in est.shots)
