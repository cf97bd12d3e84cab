"""Observation models and the divergence quantities built from them.

Hypotheses are indexed 0 (theta_1) and 1 (theta_2) throughout the Python API.
Divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfiniteDivergenceError, ModelError

PMF_SUM_TOL = 1e-12
THETA1, THETA2 = 0, 1


def as_pmf(masses, name: str = "pmf") -> np.ndarray:
    """Validate and return a read-only copy of a probability mass vector."""
    p = np.array(masses, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ModelError(f"{name}: alphabet must have at least 2 symbols, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ModelError(f"{name}: masses must be finite and nonnegative")
    if abs(p.sum() - 1.0) > PMF_SUM_TOL:
        raise ModelError(f"{name}: masses sum to {p.sum()!r}, not 1")
    p.setflags(write=False)
    return p


@dataclass(frozen=True, eq=False)
class AgentModel:
    """True likelihoods of one agent: ``L1 = L(.|theta_1)``, ``L2 = L(.|theta_2)``."""

    L1: np.ndarray
    L2: np.ndarray

    def __post_init__(self):
        L1 = as_pmf(self.L1, "L1")
        L2 = as_pmf(self.L2, "L2")
        if L1.size != L2.size:
            raise ModelError(f"L1 and L2 must share an alphabet ({L1.size} vs {L2.size} symbols)")
        if not np.array_equal(L1 > 0, L2 > 0):
            raise InfiniteDivergenceError("L1 and L2 must have identical supports")
        object.__setattr__(self, "L1", L1)
        object.__setattr__(self, "L2", L2)

    @property
    def alphabet_size(self) -> int:
        return self.L1.size

    def likelihood(self, state: int) -> np.ndarray:
        return (self.L1, self.L2)[state]

    def __eq__(self, other):
        if not isinstance(other, AgentModel):
            return NotImplemented
        return np.array_equal(self.L1, other.L1) and np.array_equal(self.L2, other.L2)

    __hash__ = None


def make_bsc(p: float) -> AgentModel:
    """Binary symmetric channel: symbol ``k`` is reported correctly under theta_k w.p. ``p``."""
    if not 0 < p < 1:
        raise InfiniteDivergenceError(f"BSC needs 0 < p < 1 for finite divergences, got {p}")
    return AgentModel(np.array([p, 1 - p]), np.array([1 - p, p]))


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ModelError(f"shape mismatch {p.shape} vs {q.shape}")
    live = p > 0
    if np.any(q[live] == 0):
        raise InfiniteDivergenceError("q vanishes where p has mass")
    return max(float(np.sum(p[live] * np.log(p[live] / q[live]))), 0.0)


def is_informative(m: AgentModel, atol: float = 1e-15) -> bool:
    return not np.allclose(m.L1, m.L2, rtol=0.0, atol=atol)


def network_divergence(net, u, models: Sequence[AgentModel], state: int) -> float:
    """Centrality-weighted KL of the normal agents when ``state`` is true."""
    if state not in (THETA1, THETA2):
        raise ValueError(f"state must be 0 or 1, got {state}")
    total = 0.0
    for k in net.normal:
        m = models[k]
        total += float(u[k]) * kl_divergence(m.likelihood(state), m.likelihood(1 - state))
    return total


def relative_confidence(m: AgentModel, prior=(0.5, 0.5)) -> np.ndarray:
    pi1, pi2 = _check_prior(prior)
    return pi1 * m.L1 - pi2 * m.L2


@dataclass(frozen=True)
class ConfidencePartition:
    Z: np.ndarray
    D1: tuple[int, ...]
    D2: tuple[int, ...]


def confidence_partition(Z) -> ConfidencePartition:
    Z = np.asarray(Z, dtype=float)
    D1 = tuple(int(i) for i in np.flatnonzero(Z >= 0))
    D2 = tuple(int(i) for i in np.flatnonzero(Z < 0))
    return ConfidencePartition(Z, D1, D2)


def _check_prior(prior) -> tuple[float, float]:
    pi1, pi2 = (float(x) for x in prior)
    if pi1 < 0 or pi2 < 0 or abs(pi1 + pi2 - 1.0) > PMF_SUM_TOL:
        raise ModelError(f"prior must be a distribution over two states, got {prior}")
    return pi1, pi2
