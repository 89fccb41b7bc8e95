"""Numerical laboratory for the lp Gaussian quadratic-form maximization
problem: finite-n solvers and certificates on the lp sphere, the aligned
near-optimizer family for 1 <= p < 2, and the limiting variational formula
(backward PDE plus outer optimization) for p > 2, with stochastic
cross-checks tying the two sides together.
"""

from .core import (
    LpVector,
    MatrixSample,
    QuadratureGrid,
    gauss_hermite_grid,
    gaussian_abs_moment,
    gaussian_moment_norm,
    holder_conjugate,
    lp_norm,
    rng_stream,
    sample_matrix,
)
from .boundary import (
    BoundaryParams,
    boundary_argmax,
    boundary_derivative,
    boundary_tables,
    boundary_value,
    growth_envelope,
    slope_envelope,
)
from .pde import (
    AtomicMeasure,
    PdeError,
    PdeGrid,
    PdeSolution,
    atomic_measure,
    default_probes,
    measure_moment,
    parisi_functional,
    pde_residual,
    solve_parisi_pde,
)
from .variational import (
    HorizonResult,
    ParisiPoint,
    VariationalResult,
    fixed_horizon_value,
    grothendieck_limit,
    minimize_parisi,
    scaling_check,
    variational_value,
)
from .solvers import (
    NearOptimizerSet,
    SolveResult,
    hamiltonian,
    near_optimizers,
    potential,
    solve_lp,
    solve_p1,
    solve_p2,
    solve_restricted,
    sphere_ascent,
)
from .analysis import (
    ChevetBracket,
    Decomposition,
    chevet_bracket,
    decompose,
    deficient_l2_check,
    DelocalizationFit,
    delocalization_fit,
    dist_to_family,
    euclidean_radius,
    gaussian_width,
    holder_aligned,
    holder_stability_check,
    opnorm_estimate,
    stability_event,
    sup_norm_slope,
)
from .sde import (
    GapScan,
    SdeConfig,
    SdeEstimate,
    control_gap_scan,
    simulate_optimal_control,
)

__version__ = "0.1.0"
