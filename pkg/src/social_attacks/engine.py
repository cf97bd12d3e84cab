"""Social-learning dynamics, Monte Carlo trials and the limit classifier.

Beliefs are stored as log-probabilities over the two hypotheses and
renormalized with log-sum-exp after every step; linear-domain beliefs
underflow within a few hundred rounds under a strong drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .attacks import AttackSpec, materialize_attack
from .errors import ContractError, DegenerateUpdateError
from .models import THETA1, THETA2, AgentModel, network_divergence
from .topology import Network, perron_eigenvector

WEIGHT_SUM_TOL = 1e-12
DEFAULT_THRESHOLD = 1e-4
DEFAULT_WINDOW = 50
DEFAULT_ITERATIONS = 2000
INDETERMINATE_TOL = 1e-9


class Outcome(str, enum.Enum):
    WRONG = "wrong"
    TRUE = "true"
    INDETERMINATE = "indeterminate"
    UNDECIDED = "undecided"


def normalize_log(log_b: np.ndarray) -> np.ndarray:
    """Shift log-beliefs (last axis = hypotheses) so their exponentials sum to 1."""
    return log_b - np.logaddexp(log_b[..., 0], log_b[..., 1])[..., np.newaxis]


def log_belief(belief) -> np.ndarray:
    b = np.asarray(belief, dtype=float)
    if b.shape[-1] != 2 or np.any(b <= 0):
        raise ContractError(f"beliefs must be strictly positive pairs, got {belief}")
    return normalize_log(np.log(b))


def adapt_step(log_b, likelihood_at_obs) -> np.ndarray:
    """Local Bayes update with the likelihoods of the observed symbol."""
    lik = np.asarray(likelihood_at_obs, dtype=float)
    if np.any(lik <= 0):
        raise DegenerateUpdateError(f"zero likelihood at the observed symbol: {lik}")
    return normalize_log(np.asarray(log_b, dtype=float) + np.log(lik))


def combine_step(neighbor_intermediates: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Weighted geometric pooling of the neighbors' intermediate beliefs (log domain)."""
    weights = np.array([w for _, w in neighbor_intermediates], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ContractError(f"pooling weights must be positive and sum to 1, got {weights}")
    psis = np.array([np.asarray(p, dtype=float) for p, _ in neighbor_intermediates])
    return normalize_log(weights @ psis)


def sample_observation(m: AgentModel, true_state: int, rng: np.random.Generator) -> int:
    cdf = np.cumsum(m.likelihood(true_state))
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), m.alphabet_size - 1))


@dataclass(eq=False)
class Trajectory:
    """Per-round log-beliefs, shape ``(iterations + 1, n_agents, 2)``; row 0 is the prior."""

    log_beliefs: np.ndarray
    roles: tuple[str, ...]
    true_state: int
    seed: int
    network_id: str = ""
    attack: str = ""

    @property
    def beliefs(self) -> np.ndarray:
        return np.exp(self.log_beliefs)

    @property
    def iterations(self) -> int:
        return self.log_beliefs.shape[0] - 1


def _observation_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    obs, attack = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(obs), np.random.default_rng(attack)


def run_trial(
    net: Network,
    models: Sequence[AgentModel],
    attack: AttackSpec,
    true_state: int,
    iterations: int,
    seed: int,
    initial_beliefs=None,
) -> Trajectory:
    """Simulate synchronous rounds: every agent adapts, then every agent pools.

    All agents sample from their true model under ``true_state``; malicious
    agents update with the distorted likelihoods in ``attack``.
    """
    n = net.n_agents
    if len(models) != n:
        raise ContractError(f"need one model per agent ({n}), got {len(models)}")
    if iterations < 0:
        raise ContractError("iterations must be >= 0")
    if true_state not in (THETA1, THETA2):
        raise ContractError(f"true_state must be 0 or 1, got {true_state}")
    missing = [k for k in net.malicious if k not in attack.distortions]
    if missing:
        raise ContractError(f"attack has no distortion for malicious agents {missing}")

    rng, _ = _observation_streams(seed)
    uniforms = rng.random((iterations, n))
    # per-round additive log-likelihood terms, shape (iterations, n, 2)
    increments = np.empty((iterations, n, 2))
    for k, m in enumerate(models):
        cdf = np.cumsum(m.likelihood(true_state))
        obs = np.minimum(np.searchsorted(cdf, uniforms[:, k], side="right"), m.alphabet_size - 1)
        dist = attack.distortions.get(k) if net.roles[k] == "malicious" else None
        L1, L2 = (dist.L1, dist.L2) if dist is not None else (m.L1, m.L2)
        table = np.stack([L1, L2], axis=1)
        if np.any(table[obs] <= 0):
            raise DegenerateUpdateError(f"agent {k} observed a symbol with zero update likelihood")
        with np.errstate(divide="ignore"):
            increments[:, k, :] = np.log(table)[obs]

    if initial_beliefs is None:
        log_b = np.full((n, 2), np.log(0.5))
    else:
        log_b = log_belief(np.broadcast_to(np.asarray(initial_beliefs, dtype=float), (n, 2)))
    out = np.empty((iterations + 1, n, 2))
    out[0] = log_b
    AT = np.ascontiguousarray(net.combination_matrix.T)
    for i in range(iterations):
        psi = normalize_log(log_b + increments[i])
        log_b = normalize_log(AT @ psi)
        out[i + 1] = log_b
    return Trajectory(out, net.roles, true_state, seed, net.name, attack.describe())


def average_belief(traj: Trajectory, state: int) -> np.ndarray:
    """Mean belief on ``state`` over all agents, normal and malicious, per round."""
    return traj.beliefs[:, :, state].mean(axis=1)


def detect_outcome(traj: Trajectory, threshold: float = DEFAULT_THRESHOLD, window: int = DEFAULT_WINDOW) -> Outcome:
    """Empirical verdict from the last ``window`` rounds of the average belief on the true state.

    A trajectory shorter than ``window`` rounds is reported as undecided.
    """
    if not 0 < threshold < 0.5:
        raise ContractError(f"threshold must lie in (0, 0.5), got {threshold}")
    if window < 1:
        raise ContractError("window must be >= 1")
    if traj.iterations < window:
        return Outcome.UNDECIDED
    tail = average_belief(traj, traj.true_state)[-window:]
    if np.all(tail < threshold):
        return Outcome.WRONG
    if np.all(tail > 1.0 - threshold):
        return Outcome.TRUE
    return Outcome.UNDECIDED


@dataclass(frozen=True)
class OutcomePrediction:
    """Asymptotic verdict per candidate true state (index 0 -> theta_1)."""

    outcomes: tuple[Outcome, Outcome]
    margins: tuple[float, float]
    normal_side: tuple[float, float]
    malicious_side: tuple[float, float]
    contributions: dict[int, tuple[float, float]] = field(default_factory=dict)

    def for_state(self, state: int) -> Outcome:
        return self.outcomes[state]


def malicious_drift(m: AgentModel, dist, true_state: int) -> float:
    """``E_{L(.|true)}[log L_hat(.|other) / L_hat(.|true)]`` for one adversary."""
    Lt = m.likelihood(true_state)
    live = Lt > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = dist.likelihood(1 - true_state)[live] / dist.likelihood(true_state)[live]
    if np.any(ratio <= 0) or not np.all(np.isfinite(ratio)):
        raise ContractError("distorted likelihood vanishes on the support of the true model")
    return float(np.dot(Lt[live], np.log(ratio)))


def classify_limit(
    net: Network,
    u,
    models: Sequence[AgentModel],
    attack: AttackSpec,
    tol: float = INDETERMINATE_TOL,
) -> OutcomePrediction:
    """Compare the normal agents' divergence against the adversaries' pull.

    ``margin = malicious_side - normal_side``; positive means the network
    is driven to the wrong state, negative means it learns the truth.
    """
    outcomes, margins, lhs, rhs = [], [], [], []
    contributions: dict[int, list[float]] = {k: [] for k in net.malicious}
    for state in (THETA1, THETA2):
        normal_side = network_divergence(net, u, models, state)
        mal = 0.0
        for k in net.malicious:
            c = float(u[k]) * malicious_drift(models[k], attack.distortions[k], state)
            contributions[k].append(c)
            mal += c
        margin = mal - normal_side
        if abs(margin) <= tol:
            outcomes.append(Outcome.INDETERMINATE)
        else:
            outcomes.append(Outcome.WRONG if margin > 0 else Outcome.TRUE)
        margins.append(margin)
        lhs.append(normal_side)
        rhs.append(mal)
    return OutcomePrediction(
        tuple(outcomes), tuple(margins), tuple(lhs), tuple(rhs),
        {k: tuple(v) for k, v in contributions.items()},
    )


@dataclass
class Scenario:
    """Everything needed to run repeated trials of one experiment."""

    network: Network
    models: list[AgentModel]
    attack_family: str = "asud"
    prior: tuple[float, float] = (0.5, 0.5)
    epsilon: float | None = None
    true_state: int = THETA1
    iterations: int = DEFAULT_ITERATIONS
    base_seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    window: int = DEFAULT_WINDOW
    divergences: tuple[float, float] | None = None
    u_override: float | None = None
    centrality: np.ndarray | None = None

    def __post_init__(self):
        if self.centrality is None:
            self.centrality = perron_eigenvector(self.network)

    def attack_for_trial(self, seed: int) -> AttackSpec:
        _, attack_rng = _observation_streams(seed)
        return materialize_attack(
            self.attack_family, self.network, self.models, self.centrality,
            prior=self.prior, epsilon=self.epsilon, rng=attack_rng,
            divergences=self.divergences, u_override=self.u_override,
        )


@dataclass
class MonteCarloSummary:
    seeds: list[int]
    outcomes: list[Outcome]
    predictions: list[OutcomePrediction]
    attacks: list[AttackSpec]
    mean_trajectory: np.ndarray
    agreement_rate: float | None
    true_state: int
    trajectories: list[Trajectory] | None = None

    @property
    def decided(self) -> int:
        return sum(o is not Outcome.UNDECIDED for o in self.outcomes)

    def predicted(self, t: int) -> Outcome:
        return self.predictions[t].for_state(self.true_state)


def run_monte_carlo(scenario: Scenario, trials: int, keep_trajectories: bool = False) -> MonteCarloSummary:
    """Run ``trials`` independent trials with seeds ``base_seed + t``.

    The agreement rate is the fraction of decided trials whose empirical
    outcome matches the asymptotic prediction (``None`` if none decided).
    Attacks that depend on randomness are redrawn per trial from a stream
    derived from that trial's seed.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    seeds, outcomes, predictions, attacks, kept = [], [], [], [], []
    fixed_attack = None if scenario.attack_family == "random" else scenario.attack_for_trial(scenario.base_seed)
    curve_sum = np.zeros(scenario.iterations + 1)
    agree = 0
    for t in range(trials):
        seed = scenario.base_seed + t
        attack = fixed_attack or scenario.attack_for_trial(seed)
        traj = run_trial(scenario.network, scenario.models, attack, scenario.true_state, scenario.iterations, seed)
        pred = classify_limit(scenario.network, scenario.centrality, scenario.models, attack)
        outcome = detect_outcome(traj, scenario.threshold, scenario.window)
        if outcome is not Outcome.UNDECIDED and outcome is pred.for_state(scenario.true_state):
            agree += 1
        curve_sum += average_belief(traj, scenario.true_state)
        seeds.append(seed)
        outcomes.append(outcome)
        predictions.append(pred)
        attacks.append(attack)
        if keep_trajectories:
            kept.append(traj)
    decided = sum(o is not Outcome.UNDECIDED for o in outcomes)
    return MonteCarloSummary(
        seeds=seeds,
        outcomes=outcomes,
        predictions=predictions,
        attacks=attacks,
        mean_trajectory=curve_sum / trials,
        agreement_rate=agree / decided if decided else None,
        true_state=scenario.true_state,
        trajectories=kept if keep_trajectories else None,
    )
