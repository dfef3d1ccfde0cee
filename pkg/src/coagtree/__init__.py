"""Coagulation with merger histories: simulation, mean-field solving, and the
limit historical measure."""

from .kernels import Kernel, builtin, check_assumptions, gelation_time
from .limit import (
    LimitFunctionalResult,
    density,
    density_product,
    density_recursive,
    finite_n_jump_density,
    functional,
    pushforward_check,
)
from .lln import (
    ConvergenceReport,
    ExperimentPlan,
    construction_agreement_test,
    jump_density_test,
    run_lln,
    survival_test,
    tightness_diagnostic,
)
from .simulate import (
    EmpiricalHistoricalMeasure,
    EventLog,
    MassCutoff,
    ShapeIndicator,
    ShapeTimeBoxIndicator,
    SimConfig,
    empirical_measure,
    evaluate_functional,
    rng_for,
    simulate,
    simulate_coupled,
    simulate_direct,
)
from .smoluchowski import MassSpectrum, SolutionPath, solve
from .trees import (
    LEAF,
    HistoricalTree,
    TreeShape,
    count_leaves,
    edge_intervals,
    epsilon,
    forget_labels,
    forget_times,
    hist_leaf,
    hist_node,
    internal_interaction_rate,
    kernel_product,
    mass,
    parse,
    serialize,
    shape_node,
    shape_of,
    shapes_up_to,
    symmetry_exponent,
)

__version__ = "0.1.0"
