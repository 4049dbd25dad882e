"""Simulation of selective continuous-variable quantum process tomography."""

from .choi import (
    ChannelDistanceReport,
    ChoiGrid,
    build_choi_grid,
    choi_element,
    compare_reconstruction,
    fidelity_lower_bound,
    trace_distance,
)
from .estimator import SelectiveProcessTomography
from .kernels import (
    ProcessKernel,
    constant_kernel,
    fourier_kernel,
    fractional_fourier_kernel,
    kernel_from_spec,
    user_kernel_from_expression,
)
from .probe import ProbeState, hermite_psi, make_probe, mehler_f, probe_amplitude
from .tomography import (
    DetectorModel,
    ElementEstimate,
    GateConfig,
    PointFailure,
    RefinementOptions,
    Region4,
    ShotConfig,
    ShotStats,
    chernoff_shots,
    click_probability,
    estimate_element,
    expectation_sigma_x,
    expectation_sigma_y,
    gates_from_region,
    refine_region,
    region_from_gates,
    scan_mesh,
    simulate_shots,
)

__version__ = "0.1.0"
