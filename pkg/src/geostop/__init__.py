"""Regret bounds, strategies and verification for geometrically stopped
prediction with expert advice.

The game: a player spreads weight over n experts each round, an adversary
picks a loss vector in [-1, 1]^n, and play stops with probability delta
before every round.  This package evaluates the potential functions that
certify upper and lower bounds on the expected final regret, the players
and adversaries they induce, Monte Carlo simulation of matchups, an exact
lattice value-iteration oracle, and numerical verification of the
differential conditions behind each bound.
"""

from .game import (
    AdversaryDistribution,
    as_loss_outcome,
    as_regret_vector,
    check_balanced,
    check_symmetric,
    clip_simplex,
    final_regret,
    instant_regret,
)
from .specfun import (
    QuadratureSettings,
    gaussian_absmax_expectation,
    gaussian_max_expectation,
    laplace_inv1_bound,
    laplace_inv32_integral,
    laplace_sqrt_integral,
)
from .potentials import (
    PotentialHandle,
    RankedDecomposition,
    default_eta,
    directional_derivatives,
    exp_gradient,
    exp_handle,
    exp_potential_geometric,
    heat_gradient_fixed,
    heat_gradient_geometric,
    heat_lower_handle,
    heat_potential_fixed,
    heat_potential_geometric,
    heat_upper_handle,
    kappa_m,
    kappa_s,
    max_gradient_fixed,
    max_gradient_geometric,
    max_lower_handle,
    max_potential_fixed,
    max_potential_geometric,
    max_upper_handle,
    ranked_decomposition,
)
from .strategies import (
    AdversaryStrategy,
    PlayerStrategy,
    exp_weights_player,
    heat_adversary_support,
    make_adversary,
    make_player,
    max_adversary,
)
from .bounds import (
    BoundReport,
    DiffusionConstants,
    ErrorConstants,
    all_bounds,
    comparison_curves,
    estimate_error_constants,
    exp_weights_bound,
    heat_bounds,
    max_bounds,
    ratio_to_sqrt_2logN,
)
from .simulate import (
    SimulationConfig,
    SimulationResult,
    play_episode,
    run,
    sample_horizon,
)
from .oracle import (
    LatticeValueFunction,
    SandwichReport,
    adversary_sandwich,
    ordering_check,
    player_sandwich,
    potential_upper_source,
    tail_bound,
    value_iteration_adversary,
    value_iteration_player,
)
from .verify import CheckReport, run_suite, sample_states

__version__ = "0.1.0"
