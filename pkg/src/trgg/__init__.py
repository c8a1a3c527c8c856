"""Typed random geometric graphs: samplers, empirical measures, coupling
simulation and large-deviation rate functions."""

__version__ = "0.1.0"

from .measures import (  # noqa: E402
    DegreeDistribution,
    LocalityMeasure,
    PairMeasure,
    TypeAlphabet,
    TypeMeasure,
    check_consistency,
    degree_distribution,
    empirical_locality_measure,
    empirical_pair_measure,
    empirical_type_measure,
    locality_marginals,
    tv_distance,
)
from .models import (  # noqa: E402
    InfeasibleError,
    ModelParams,
    TypedGraph,
    neighbor_pairs,
    sample_conditional_trgg,
    sample_gnm_geometric,
    sample_positions,
    sample_trgg,
)
from .allocation import (  # noqa: E402
    AllocationOutcome,
    CollisionSchedule,
    bennett_h,
    bennett_tail_bound,
    collision_schedule,
    run_allocation_coupling,
)
from .rates import (  # noqa: E402
    RateEvaluation,
    build_q_poi,
    poisson_pmf,
    rate_J,
    rate_eta,
    rate_xi,
    relative_entropy,
    solve_alpha,
    unit_ball_volume,
    xi_numerical_oracle,
)
