"""Inferential attacks on non-Bayesian social learning.

Simulate agents that pool beliefs over a network while some of them update
with distorted likelihoods, synthesize those distortions, and predict the
asymptotic outcome from network centrality and model divergences.
"""

__version__ = "0.1.0"

from .attacks import (
    AttackSpec,
    Distortion,
    asud_attack,
    echo_attack,
    known_divergence_attack,
    materialize_attack,
    misleads_both_states,
    mixed_confidence_attack,
    pure_confidence_attack,
    random_attack,
    select_signal_pair,
)
from .engine import (
    Outcome,
    Scenario,
    Trajectory,
    adapt_step,
    average_belief,
    classify_limit,
    combine_step,
    detect_outcome,
    run_monte_carlo,
    run_trial,
    sample_observation,
)
from .models import (
    AgentModel,
    confidence_partition,
    is_informative,
    kl_divergence,
    make_bsc,
    network_divergence,
    relative_confidence,
)
from .topology import (
    Network,
    build_uniform_weights,
    is_strongly_connected,
    perron_eigenvector,
    random_topology,
    regular_topology,
    star_topology,
)
